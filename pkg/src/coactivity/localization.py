"""Activity-conditioned localization over sampled configurations.

For each sampled configuration, the actors of every activity containing the
query actor are jointly re-conditioned on the activity's proximity
constraints; the query actor's marginal becomes one mixture component with
uniform weight over (thinned) samples. Samples inducing the same constraint
set share one conditioned component, so repeated configurations cost nothing
extra. Summary moments come from the law of total variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .gp import GpPosterior, TimeGrid, condition_on_activities
from .model import Configuration


@dataclass(frozen=True)
class LocalizationPosterior:
    """Mixture of conditioned trajectory posteriors for one actor.

    ``components`` holds (weight, posterior marginal) pairs; weights sum to
    one. ``mean``/``std`` are the pointwise mixture moments per coordinate,
    shape (n_points, 2). ``base`` is the unconditioned posterior.
    """

    actor_id: str
    grid: TimeGrid
    components: tuple[tuple[float, GpPosterior], ...]
    mean: np.ndarray
    std: np.ndarray
    base: GpPosterior

    def __post_init__(self) -> None:
        self.mean.setflags(write=False)
        self.std.setflags(write=False)


def localize(chains, posteriors: Mapping[str, GpPosterior], actor_id: str,
             thin: int = 10, mode: str = "static", sigma_aux: float = 5.0) -> LocalizationPosterior:
    """Mixture localization posterior of one actor over chain samples.

    ``chains`` needs a ``samples`` attribute of configuration samples (as
    produced by the sampler). Every instance containing the actor
    contributes constraints; constraints of co-occurring instances are
    stacked into a single joint conditioning per sample.
    """
    if actor_id not in posteriors:
        raise ValueError(f"no posterior for actor {actor_id!r}")
    samples = list(chains.samples)[::max(1, thin)]
    if not samples:
        raise ValueError("chain holds no samples")
    base = posteriors[actor_id]

    groups: dict[tuple, tuple[int, tuple]] = {}
    for s in samples:
        config: Configuration = s.config
        covering = tuple(sorted((i for i in config.instances if actor_id in i.participants),
                                key=lambda i: i.key()))
        key = tuple(i.key() for i in covering)
        count, _ = groups.get(key, (0, covering))
        groups[key] = (count + 1, covering)

    n_total = len(samples)
    components: list[tuple[float, GpPosterior]] = []
    for key in sorted(groups):
        count, covering = groups[key]
        weight = count / n_total
        if not covering:
            components.append((weight, base))
            continue
        joint = condition_on_activities(posteriors, covering, mode, sigma_aux)
        components.append((weight, joint.marginal(actor_id)))

    if all(p is base for _, p in components):
        # never conditioned: reproduce the base posterior bit-exactly
        mean = np.asarray(base.mean).copy()
        std = np.tile(base.marginal_std()[:, None], (1, 2))
    else:
        mean, std = _mixture_moments(components)
    return LocalizationPosterior(actor_id, base.grid, tuple(components), mean, std, base)


def _mixture_moments(components: Sequence[tuple[float, GpPosterior]]) -> tuple[np.ndarray, np.ndarray]:
    weights = np.array([w for w, _ in components])
    means = np.stack([p.mean for _, p in components])            # (k, n, 2)
    var_shared = np.stack([p.marginal_variance() for _, p in components])  # (k, n)
    mean = np.einsum("k,knc->nc", weights, means)
    within = np.einsum("k,kn->n", weights, var_shared)[:, None]
    second = np.einsum("k,knc->nc", weights, means**2)
    var = within + second - mean**2
    return mean, np.sqrt(np.clip(var, 0.0, None))


def uncertainty_report(loc: LocalizationPosterior, window: tuple[float, float],
                       ) -> tuple[tuple[float, float], tuple[float, float]]:
    """Mean pointwise std over a time window, unconditioned vs conditioned.

    Returns ``((before_x, before_y), (after_x, after_y))``.
    """
    t0, t1 = window
    times = loc.grid.times
    idx = np.nonzero((times >= t0) & (times <= t1))[0]
    if idx.size == 0:
        raise ValueError("window contains no grid points")
    base_std = loc.base.marginal_std()[idx]
    before = (float(base_std.mean()), float(base_std.mean()))
    after = (float(loc.std[idx, 0].mean()), float(loc.std[idx, 1].mean()))
    return before, after
