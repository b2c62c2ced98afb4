"""Reversible-jump MCMC over activity configurations.

The chain moves between configurations of varying instance count with ten
move kinds: birth/death, split/merge, and single-field updates of type,
center, radius, span, start time and participants. Every trans-dimensional
parameter is drawn from an explicit density that enters the acceptance
ratio, so no Jacobian terms arise.

Proposal kernels are computed exactly, including the multiplicity of equal
instances inside a configuration (relevant on quantized parameter spaces
where duplicates have positive probability), which keeps detailed balance
exact. A merge whose result could not be reproduced by a split (the pair
does not share center, radius, type and participants, or the spans are not
adjacent) is auto-rejected for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError
from .gp import (GpHyperParams, GpPosterior, TimeGrid, build_gp, condition_on_activities,
                 sample_trajectories)
from .model import (ActivityInstance, ActivityType, Configuration, DiscreteInstanceSpace,
                    FactorEngine, InstanceDomain, ModelData, ModelParams, OverlapMatrix,
                    clamped_count_log_pmf, log_comb, lognormal_logpdf)

_LOG_2PI = math.log(2.0 * math.pi)


class MoveKind(Enum):
    BIRTH = "birth"
    DEATH = "death"
    SPLIT = "split"
    MERGE = "merge"
    TYPE = "type"
    CENTER = "center"
    RADIUS = "radius"
    SPAN = "span"
    START_TIME = "start_time"
    PARTICIPANTS = "participants"


def default_move_weights() -> dict[MoveKind, float]:
    return {kind: 1.0 for kind in MoveKind}


@dataclass(frozen=True)
class Proposal:
    """A proposed configuration plus its log proposal-density ratio
    ``log q(old|new) - log q(new|old)``."""

    config: Configuration
    log_ratio: float
    kind: MoveKind
    touched: tuple[int, ...] = ()
    auto_reject: bool = False


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, ensemble refresh policy and proposal parameters."""

    n_iters: int = 10_000
    burn_in: int = 2_000
    ensemble_refresh: int = 500
    n_grid: int = 500
    n_draws: int = 50
    radius_proposal_median_m: float = 30.0
    radius_proposal_log_std: float = 0.03
    span_proposal_median_s: float = 300.0
    span_proposal_log_std: float = 0.005
    center_step_std_m: float = 20.0
    participants_median: float = 2.0
    participants_log_std: float = 0.5
    aux_conditioning: bool = False
    move_weights: tuple[tuple[MoveKind, float], ...] = tuple(default_move_weights().items())
    discrete: DiscreteInstanceSpace | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.burn_in < self.n_iters):
            raise ConfigurationError("burn_in must satisfy 0 <= burn_in < n_iters")
        for name in ("ensemble_refresh", "n_grid", "n_draws", "radius_proposal_median_m",
                     "radius_proposal_log_std", "span_proposal_median_s",
                     "span_proposal_log_std", "center_step_std_m", "participants_median",
                     "participants_log_std"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        w = self.weights()
        if any(v < 0 for v in w.values()) or sum(w.values()) <= 0:
            raise ConfigurationError("move weights must be non-negative with positive sum")
        if w.get(MoveKind.BIRTH, 0.0) != w.get(MoveKind.DEATH, 0.0):
            raise ConfigurationError("birth and death move weights must be equal")
        if w.get(MoveKind.SPLIT, 0.0) != w.get(MoveKind.MERGE, 0.0):
            raise ConfigurationError("split and merge move weights must be equal")

    def weights(self) -> dict[MoveKind, float]:
        w = {kind: 0.0 for kind in MoveKind}
        w.update(dict(self.move_weights))
        return w


@dataclass
class ProposalContext:
    """Everything a proposal kernel may draw from or evaluate against."""

    actors: tuple[str, ...]
    types: tuple[ActivityType, ...]
    t_support: tuple[float, float]
    sample_bbox: tuple[float, float, float, float]
    grid_times: np.ndarray
    ensembles: Mapping[str, np.ndarray]
    cfg: SamplerConfig


@dataclass(frozen=True)
class ConfigSample:
    config: Configuration
    log_prob: float
    iteration: int


@dataclass(frozen=True)
class ChainSamples:
    """Post-burn-in configuration samples plus run diagnostics."""

    samples: tuple[ConfigSample, ...]
    acceptance: tuple[tuple[MoveKind, int, int], ...]  # kind, proposed, accepted
    seed: int
    burn_in: int
    n_iters: int
    warnings: tuple[str, ...] = ()
    numerical_rejections: int = 0

    def configurations(self, thin: int = 1) -> tuple[Configuration, ...]:
        return tuple(s.config for s in self.samples[::max(1, thin)])

    def best(self) -> ConfigSample:
        """Maximum-score sample; earliest iteration wins ties."""
        if not self.samples:
            raise ValueError("chain holds no samples")
        return max(self.samples, key=lambda s: (s.log_prob, -s.iteration))

    def acceptance_rates(self) -> dict[MoveKind, float]:
        return {k: (a / p if p else 0.0) for k, p, a in self.acceptance}


# ---------------------------------------------------------------------------
# proposal kernels
# ---------------------------------------------------------------------------

def _reject(kind: MoveKind, state: Configuration) -> Proposal:
    return Proposal(state, -math.inf, kind, (), auto_reject=True)


def _lognormal_draw(rng: np.random.Generator, median: float, log_std: float) -> float:
    return float(math.exp(rng.normal(math.log(median), log_std)))


def _draw_instance(ctx: ProposalContext, rng: np.random.Generator) -> tuple[ActivityInstance, float] | None:
    """Draw a fresh instance; returns (instance, log draw density) or None.

    The center is drawn from the same anchor/uniform mixture as the center
    move, anchored at the drawn participants' in-span trajectory samples, so
    births land where the participants actually are.
    """
    cfg = ctx.cfg
    d = cfg.discrete
    ty_idx = int(rng.integers(len(ctx.types)))
    ty = ctx.types[ty_idx]
    log_q = -math.log(len(ctx.types))
    if d is not None:
        center = d.centers[int(rng.integers(len(d.centers)))]
        t_start = d.starts[int(rng.integers(len(d.starts)))]
        span = d.spans[int(rng.integers(len(d.spans)))]
        radius = d.radii[int(rng.integers(len(d.radii)))]
        participants = d.participant_sets[int(rng.integers(len(d.participant_sets)))]
        log_q -= (math.log(len(d.centers)) + math.log(len(d.starts)) + math.log(len(d.spans))
                  + math.log(len(d.radii)) + math.log(len(d.participant_sets)))
        inst = ActivityInstance(ty.type_id, center, radius, t_start, span, participants)
        return inst, log_q
    k = max(int(np.round(_lognormal_draw(rng, cfg.participants_median,
                                         cfg.participants_log_std))), 2)
    if k > len(ctx.actors):
        return None
    log_q += clamped_count_log_pmf(k, cfg.participants_median, cfg.participants_log_std)
    chosen = rng.choice(len(ctx.actors), size=k, replace=False)
    participants = frozenset(ctx.actors[i] for i in chosen)
    log_q -= log_comb(len(ctx.actors), k)
    t0, t1 = ctx.t_support
    t_start = float(rng.uniform(t0, t1))
    log_q -= math.log(t1 - t0)
    span = _lognormal_draw(rng, ty.span_median_s, ty.span_log_std)
    log_q += lognormal_logpdf(span, ty.span_median_s, ty.span_log_std)
    anchors = _span_anchors(participants, t_start, span, ctx)
    sigma = cfg.center_step_std_m
    if anchors.shape[0] and rng.uniform() < _CENTER_ANCHOR_FRACTION:
        pick = anchors[int(rng.integers(anchors.shape[0]))]
        center = (float(pick[0] + sigma * rng.standard_normal()),
                  float(pick[1] + sigma * rng.standard_normal()))
    else:
        x0, x1, y0, y1 = ctx.sample_bbox
        center = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
    log_q += _birth_center_logpdf(np.asarray(center), anchors, sigma, ctx.sample_bbox)
    radius = _lognormal_draw(rng, ty.radius_median_m, ty.radius_log_std)
    log_q += lognormal_logpdf(radius, ty.radius_median_m, ty.radius_log_std)
    inst = ActivityInstance(ty.type_id, center, radius, t_start, span, participants)
    return inst, log_q


def _instance_log_density(inst: ActivityInstance, ctx: ProposalContext) -> float:
    """Log-density with which the birth kernel would draw this instance."""
    cfg = ctx.cfg
    d = cfg.discrete
    type_ids = [t.type_id for t in ctx.types]
    if inst.type_id not in type_ids:
        return -math.inf
    ty = ctx.types[type_ids.index(inst.type_id)]
    log_q = -math.log(len(ctx.types))
    if d is not None:
        if (inst.center not in d.centers or inst.t_start not in d.starts
                or inst.span not in d.spans or inst.radius not in d.radii
                or inst.participants not in d.participant_sets):
            return -math.inf
        return log_q - (math.log(len(d.centers)) + math.log(len(d.starts))
                        + math.log(len(d.spans)) + math.log(len(d.radii))
                        + math.log(len(d.participant_sets)))
    k = len(inst.participants)
    if k > len(ctx.actors):
        return -math.inf
    log_q += clamped_count_log_pmf(k, cfg.participants_median, cfg.participants_log_std)
    log_q -= log_comb(len(ctx.actors), k)
    t0, t1 = ctx.t_support
    if not (t0 <= inst.t_start <= t1):
        return -math.inf
    log_q -= math.log(t1 - t0)
    log_q += lognormal_logpdf(inst.span, ty.span_median_s, ty.span_log_std)
    anchors = _span_anchors(inst.participants, inst.t_start, inst.span, ctx)
    log_q += _birth_center_logpdf(np.asarray(inst.center), anchors,
                                  cfg.center_step_std_m, ctx.sample_bbox)
    log_q += lognormal_logpdf(inst.radius, ty.radius_median_m, ty.radius_log_std)
    return log_q


def _pair_multiplicity(config: Configuration, a: ActivityInstance, b: ActivityInstance) -> int:
    """Number of unordered index pairs of ``config`` equal to {a, b}."""
    ca = config.multiplicity(a)
    if a == b:
        return ca * (ca - 1) // 2
    return ca * config.multiplicity(b)


def _replace_at(config: Configuration, idx: int, inst: ActivityInstance) -> Configuration:
    items = list(config.instances)
    items[idx] = inst
    return Configuration(tuple(items))


def propose(kind: MoveKind, state: Configuration, ctx: ProposalContext,
            rng: np.random.Generator) -> Proposal:
    """One proposal of the given kind; structurally impossible moves return
    an auto-rejecting proposal."""
    n = len(state)
    cfg = ctx.cfg

    if kind is MoveKind.BIRTH:
        if (cfg.discrete is not None and cfg.discrete.max_instances is not None
                and n >= cfg.discrete.max_instances):
            return _reject(kind, state)
        drawn = _draw_instance(ctx, rng)
        if drawn is None:
            return _reject(kind, state)
        inst, log_q_fwd = drawn
        new = Configuration(state.instances + (inst,))
        log_q_rev = math.log(new.multiplicity(inst)) - math.log(n + 1)
        return Proposal(new, log_q_rev - log_q_fwd, kind, (n,))

    if kind is MoveKind.DEATH:
        if n == 0:
            return _reject(kind, state)
        idx = int(rng.integers(n))
        inst = state.instances[idx]
        new = Configuration(state.instances[:idx] + state.instances[idx + 1:])
        log_q_fwd = math.log(state.multiplicity(inst)) - math.log(n)
        log_q_rev = _instance_log_density(inst, ctx)
        if not math.isfinite(log_q_rev):
            # the removed instance could never be re-birthed, so the reverse
            # kernel has zero density and the move must be rejected
            return Proposal(new, -math.inf, kind, (idx,), auto_reject=True)
        return Proposal(new, log_q_rev - log_q_fwd, kind, (idx,))

    if kind is MoveKind.SPLIT:
        if n == 0 or cfg.discrete is not None:
            return _reject(kind, state)
        idx = int(rng.integers(n))
        inst = state.instances[idx]
        u = float(rng.uniform(inst.t_start, inst.t_end))
        if u <= inst.t_start or u >= inst.t_end:
            return _reject(kind, state)
        first = replace(inst, span=u - inst.t_start)
        second = replace(inst, t_start=u, span=inst.t_end - u)
        new = Configuration(state.instances[:idx] + (first,) + state.instances[idx + 1:] + (second,))
        log_q_fwd = (math.log(state.multiplicity(inst)) - math.log(n)
                     - math.log(inst.span))
        pairs = _pair_multiplicity(new, first, second)
        log_q_rev = math.log(pairs) - math.log((n + 1) * n // 2)
        return Proposal(new, log_q_rev - log_q_fwd, kind, (idx, n))

    if kind is MoveKind.MERGE:
        if n < 2 or cfg.discrete is not None:
            return _reject(kind, state)
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        a, b = state.instances[i], state.instances[j]
        early, late = (a, b) if (a.t_start, a.key()) <= (b.t_start, b.key()) else (b, a)
        t_start = early.t_start
        t_end = max(a.t_end, b.t_end)
        merged = replace(early, t_start=t_start, span=t_end - t_start)
        lo, hi = min(i, j), max(i, j)
        items = list(state.instances)
        items[lo] = merged
        del items[hi]
        new = Configuration(tuple(items))
        # Reverse split must reproduce {a, b}: same support and adjacent spans.
        same_support = (early.type_id == late.type_id and early.center == late.center
                        and early.radius == late.radius
                        and early.participants == late.participants)
        if not same_support or late.t_start != early.t_end or late.t_end < early.t_end:
            return Proposal(new, -math.inf, kind, (lo,), auto_reject=True)
        log_q_fwd = (math.log(_pair_multiplicity(state, a, b))
                     - math.log(n * (n - 1) // 2))
        log_q_rev = (math.log(new.multiplicity(merged)) - math.log(n - 1)
                     - math.log(merged.span))
        return Proposal(new, log_q_rev - log_q_fwd, kind, (lo,))

    if n == 0:
        return _reject(kind, state)

    idx = int(rng.integers(n))
    inst = state.instances[idx]
    d = cfg.discrete

    if kind is MoveKind.TYPE:
        ty = ctx.types[int(rng.integers(len(ctx.types)))]
        new_inst = replace(inst, type_id=ty.type_id)
        extra = 0.0
    elif kind is MoveKind.CENTER:
        if d is not None:
            center = d.centers[int(rng.integers(len(d.centers)))]
            new_inst = replace(inst, center=center)
            extra = 0.0
        else:
            anchors = _center_anchors(inst, ctx)
            if anchors.shape[0] == 0:
                return _reject(kind, state)
            sigma = cfg.center_step_std_m
            # 90/10 mixture of the anchor kernel and a broad uniform over the
            # sample bounding box; the pure anchor kernel cannot relocate a
            # badly placed center because the reverse density vanishes
            if rng.uniform() < _CENTER_ANCHOR_FRACTION:
                pick = anchors[int(rng.integers(anchors.shape[0]))]
                center = (float(pick[0] + sigma * rng.standard_normal()),
                          float(pick[1] + sigma * rng.standard_normal()))
            else:
                x0, x1, y0, y1 = ctx.sample_bbox
                center = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
            new_inst = replace(inst, center=center)
            extra = (_center_proposal_logpdf(np.asarray(inst.center), anchors, sigma,
                                             ctx.sample_bbox)
                     - _center_proposal_logpdf(np.asarray(center), anchors, sigma,
                                               ctx.sample_bbox))
    elif kind is MoveKind.RADIUS:
        if d is not None:
            radius = d.radii[int(rng.integers(len(d.radii)))]
            new_inst = replace(inst, radius=radius)
            extra = 0.0
        else:
            radius = _lognormal_draw(rng, cfg.radius_proposal_median_m, cfg.radius_proposal_log_std)
            new_inst = replace(inst, radius=radius)
            extra = (lognormal_logpdf(inst.radius, cfg.radius_proposal_median_m,
                                      cfg.radius_proposal_log_std)
                     - lognormal_logpdf(radius, cfg.radius_proposal_median_m,
                                        cfg.radius_proposal_log_std))
    elif kind is MoveKind.SPAN:
        if d is not None:
            span = d.spans[int(rng.integers(len(d.spans)))]
            new_inst = replace(inst, span=span)
            extra = 0.0
        else:
            span = _lognormal_draw(rng, cfg.span_proposal_median_s, cfg.span_proposal_log_std)
            new_inst = replace(inst, span=span)
            extra = (lognormal_logpdf(inst.span, cfg.span_proposal_median_s,
                                      cfg.span_proposal_log_std)
                     - lognormal_logpdf(span, cfg.span_proposal_median_s,
                                        cfg.span_proposal_log_std))
    elif kind is MoveKind.START_TIME:
        if d is not None:
            t_start = d.starts[int(rng.integers(len(d.starts)))]
        else:
            t_start = float(rng.uniform(*ctx.t_support))
        new_inst = replace(inst, t_start=t_start)
        extra = 0.0
    elif kind is MoveKind.PARTICIPANTS:
        if d is not None:
            participants = d.participant_sets[int(rng.integers(len(d.participant_sets)))]
            new_inst = replace(inst, participants=participants)
            extra = 0.0
        else:
            # 50/50 mixture of a full redraw from the prior and a single-actor
            # add/remove toggle; the redraw alone almost never proposes large
            # sets, which leaves partitioned participant sets unrepairable
            participants = _propose_participant_set(inst.participants, ctx, rng)
            if participants is None:
                return _reject(kind, state)
            new_inst = replace(inst, participants=participants)
            extra = (_participant_set_log_q(participants, inst.participants, ctx)
                     - _participant_set_log_q(inst.participants, participants, ctx))
    else:  # pragma: no cover - exhaustive enum
        raise ConfigurationError(f"unknown move kind {kind}")

    new = _replace_at(state, idx, new_inst)
    log_ratio = extra + math.log(new.multiplicity(new_inst)) - math.log(state.multiplicity(inst))
    return Proposal(new, log_ratio, kind, (idx,))


def _span_anchors(participants, t_start: float, span: float, ctx: ProposalContext) -> np.ndarray:
    """Ensemble sample positions of the participants inside [t_start, t_end]."""
    t = ctx.grid_times
    sel = (t >= t_start) & (t <= t_start + span)
    if not sel.any():
        return np.zeros((0, 2))
    pts = [np.asarray(ctx.ensembles[p])[:, sel, :].reshape(-1, 2)
           for p in sorted(participants)]
    return np.concatenate(pts, axis=0)


def _center_anchors(inst: ActivityInstance, ctx: ProposalContext) -> np.ndarray:
    return _span_anchors(inst.participants, inst.t_start, inst.span, ctx)


def _birth_center_logpdf(point: np.ndarray, anchors: np.ndarray, sigma: float,
                         bbox: tuple[float, float, float, float]) -> float:
    if anchors.shape[0] == 0:
        x0, x1, y0, y1 = bbox
        if x0 <= point[0] <= x1 and y0 <= point[1] <= y1:
            return -math.log((x1 - x0) * (y1 - y0))
        return -math.inf
    return _center_proposal_logpdf(point, anchors, sigma, bbox)


_CENTER_ANCHOR_FRACTION = 0.9
_PARTICIPANT_REDRAW_FRACTION = 0.5


def _toggle_options(current: frozenset, n_actors: int) -> list[str]:
    opts = []
    if len(current) < n_actors:
        opts.append("add")
    if len(current) > 2:
        opts.append("remove")
    return opts


def _propose_participant_set(current: frozenset, ctx: ProposalContext,
                             rng: np.random.Generator) -> frozenset | None:
    cfg = ctx.cfg
    if rng.uniform() < _PARTICIPANT_REDRAW_FRACTION:
        k = max(int(np.round(_lognormal_draw(rng, cfg.participants_median,
                                             cfg.participants_log_std))), 2)
        if k > len(ctx.actors):
            return None
        chosen = rng.choice(len(ctx.actors), size=k, replace=False)
        return frozenset(ctx.actors[i] for i in chosen)
    opts = _toggle_options(current, len(ctx.actors))
    if not opts:
        return None
    op = opts[int(rng.integers(len(opts)))]
    if op == "add":
        outside = sorted(set(ctx.actors) - current)
        return current | {outside[int(rng.integers(len(outside)))]}
    inside = sorted(current)
    return current - {inside[int(rng.integers(len(inside)))]}


def _participant_set_log_q(target: frozenset, source: frozenset,
                           ctx: ProposalContext) -> float:
    """Log density of proposing ``target`` from ``source`` under the
    redraw/toggle mixture."""
    cfg = ctx.cfg
    k = len(target)
    redraw = (clamped_count_log_pmf(k, cfg.participants_median, cfg.participants_log_std)
              - log_comb(len(ctx.actors), k))
    parts = [redraw + math.log(_PARTICIPANT_REDRAW_FRACTION)]
    opts = _toggle_options(source, len(ctx.actors))
    if opts:
        toggle = None
        if len(target) == len(source) + 1 and source < target and "add" in opts:
            toggle = -math.log(len(opts)) - math.log(len(ctx.actors) - len(source))
        elif len(target) == len(source) - 1 and target < source and "remove" in opts:
            toggle = -math.log(len(opts)) - math.log(len(source))
        if toggle is not None:
            parts.append(toggle + math.log(1.0 - _PARTICIPANT_REDRAW_FRACTION))
    if len(parts) == 1:
        return parts[0]
    return float(np.logaddexp(parts[0], parts[1]))


def _center_mixture_logpdf(point: np.ndarray, anchors: np.ndarray, sigma: float) -> float:
    d2 = np.sum((anchors - point) ** 2, axis=1)
    comps = -d2 / (2.0 * sigma**2) - _LOG_2PI - 2.0 * math.log(sigma)
    m = float(np.max(comps))
    return m + math.log(float(np.mean(np.exp(comps - m))))


def _center_proposal_logpdf(point: np.ndarray, anchors: np.ndarray, sigma: float,
                            bbox: tuple[float, float, float, float]) -> float:
    mix = _center_mixture_logpdf(point, anchors, sigma) + math.log(_CENTER_ANCHOR_FRACTION)
    x0, x1, y0, y1 = bbox
    if x0 <= point[0] <= x1 and y0 <= point[1] <= y1:
        flat = math.log(1.0 - _CENTER_ANCHOR_FRACTION) - math.log((x1 - x0) * (y1 - y0))
        return float(np.logaddexp(mix, flat))
    return mix


# ---------------------------------------------------------------------------
# acceptance and the chain driver
# ---------------------------------------------------------------------------

def accept(state: Configuration, proposal: Proposal, engine: FactorEngine,
           rng: np.random.Generator, current_log_prob: float | None = None,
           ) -> tuple[Configuration, bool, float, bool]:
    """Metropolis-Hastings accept/reject.

    Returns ``(config, accepted, log_prob of the returned config, numerical)``
    where ``numerical`` flags a non-finite acceptance exponent that was not a
    plain -inf rejection.
    """
    if current_log_prob is None:
        current_log_prob = engine.log_prob(state)
    if proposal.auto_reject:
        return state, False, current_log_prob, False
    new_lp = engine.log_prob(proposal.config)
    log_alpha = new_lp - current_log_prob + proposal.log_ratio
    if math.isnan(log_alpha):
        return state, False, current_log_prob, True
    if log_alpha >= 0:
        return proposal.config, True, new_lp, False
    if log_alpha == -math.inf:
        return state, False, current_log_prob, False
    if math.log(rng.uniform()) < log_alpha:
        return proposal.config, True, new_lp, False
    return state, False, current_log_prob, False


def _sample_bbox(ensembles: Mapping[str, np.ndarray]) -> tuple[float, float, float, float]:
    xs_min = min(float(arr[..., 0].min()) for arr in ensembles.values())
    xs_max = max(float(arr[..., 0].max()) for arr in ensembles.values())
    ys_min = min(float(arr[..., 1].min()) for arr in ensembles.values())
    ys_max = max(float(arr[..., 1].max()) for arr in ensembles.values())
    if xs_max <= xs_min:
        xs_max = xs_min + 1.0
    if ys_max <= ys_min:
        ys_max = ys_min + 1.0
    return xs_min, xs_max, ys_min, ys_max


def derive_domain(data: ModelData, types: Sequence[ActivityType], params: ModelParams,
                  discrete: DiscreteInstanceSpace | None = None) -> InstanceDomain:
    """Instance placement domain derived from the data extent."""
    t0, t1 = data.time_support()
    if data.observations:
        xs = [o.x for o in data.observations]
        ys = [o.y for o in data.observations]
    else:
        xs, ys = [0.0], [0.0]
    m = params.center_margin_m
    return InstanceDomain(t_min=t0, t_max=t1,
                          x_min=min(xs) - m, x_max=max(xs) + m,
                          y_min=min(ys) - m, y_max=max(ys) + m,
                          n_types=len(tuple(types)), n_actors=len(data.actors),
                          discrete=discrete)


def _draw_ensembles(posteriors: Mapping[str, GpPosterior], config: Configuration,
                    n_draws: int, rng: np.random.Generator, aux: bool,
                    sigma_aux: float) -> dict[str, np.ndarray]:
    """Fresh trajectory draws, optionally re-conditioned on the configuration."""
    actors = sorted(posteriors)
    out: dict[str, np.ndarray] = {}
    conditioned: set[str] = set()
    if aux and len(config) > 0:
        groups = _participant_components(config)
        for group_actors, insts in groups:
            known = [a for a in group_actors if a in posteriors]
            if len(known) < 2:
                continue
            joint = condition_on_activities(posteriors, insts, "static", sigma_aux)
            ens = sample_trajectories(joint, n_draws, int(rng.integers(2**63 - 1)))
            g = joint.grid.n_points
            for i, a in enumerate(joint.actor_ids):
                out[a] = ens.draws[:, i * g:(i + 1) * g, :]
                conditioned.add(a)
    for a in actors:
        if a in conditioned:
            continue
        ens = sample_trajectories(posteriors[a], n_draws, int(rng.integers(2**63 - 1)))
        out[a] = ens.draws
    return out


def _participant_components(config: Configuration) -> list[tuple[set[str], list[ActivityInstance]]]:
    """Connected components of actors linked by shared instances."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for inst in config.instances:
        for p in inst.participants:
            parent.setdefault(p, p)
        ps = sorted(inst.participants)
        for p in ps[1:]:
            parent[find(p)] = find(ps[0])
    groups: dict[str, set[str]] = {}
    for p in parent:
        groups.setdefault(find(p), set()).add(p)
    out = []
    for root, members in sorted(groups.items()):
        insts = [i for i in config.instances if i.participants & members]
        out.append((members, insts))
    return out


def run_chain(data: ModelData, types: Sequence[ActivityType], overlap: OverlapMatrix,
              params: ModelParams, hyper: GpHyperParams, sampler: SamplerConfig,
              seed: int, grid: TimeGrid | None = None,
              posteriors: Mapping[str, GpPosterior] | None = None,
              ensembles: Mapping[str, np.ndarray] | None = None) -> ChainSamples:
    """Run one RJ-MCMC chain and collect post-burn-in samples.

    The chain starts from the empty configuration. Trajectory ensembles are
    redrawn every ``sampler.ensemble_refresh`` iterations (and conditioned on
    the current configuration when ``sampler.aux_conditioning`` is set); the
    current score is recomputed after each refresh since the score depends on
    the draws. Deterministic given ``seed``.

    ``posteriors``/``ensembles`` may be supplied to pin the trajectory belief
    (used by enumeration tests); otherwise they are built from the data.
    """
    types = tuple(types)
    if not types:
        raise ConfigurationError("at least one activity type required")
    obs_by_actor: dict[str, list] = {a: [] for a in data.actors}
    for o in data.observations:
        obs_by_actor[o.actor_id].append(o)
    if posteriors is None and not any(len(v) >= 2 for v in obs_by_actor.values()):
        raise DataError("need at least one actor with 2 or more GPS observations")

    t0, t1 = data.time_support()
    if grid is None:
        grid = TimeGrid(t0, t1, sampler.n_grid)
    rng = np.random.default_rng(seed)

    if posteriors is None:
        posteriors = {a: build_gp(tuple(obs_by_actor[a]), hyper, grid, actor_id=a)
                      for a in data.actors}

    config = Configuration(())
    if ensembles is None:
        ens = _draw_ensembles(posteriors, config, sampler.n_draws, rng,
                              sampler.aux_conditioning, params.sigma_aux_m)
        pinned = False
    else:
        ens = {a: np.asarray(v) for a, v in ensembles.items()}
        pinned = True

    domain = derive_domain(data, types, params, sampler.discrete)
    engine = FactorEngine(data, types, overlap, params, domain, grid.times, ens)
    ctx = ProposalContext(actors=tuple(data.actors), types=types, t_support=(t0, t1),
                          sample_bbox=_sample_bbox(ens), grid_times=grid.times,
                          ensembles=ens, cfg=sampler)

    weights = sampler.weights()
    kinds = tuple(MoveKind)
    probs = np.array([weights[k] for k in kinds], float)
    probs /= probs.sum()

    cur_lp = engine.log_prob(config)
    samples: list[ConfigSample] = []
    proposed = {k: 0 for k in kinds}
    accepted = {k: 0 for k in kinds}
    numerical = 0

    for it in range(1, sampler.n_iters + 1):
        if not pinned and it % sampler.ensemble_refresh == 0:
            ens = _draw_ensembles(posteriors, config, sampler.n_draws, rng,
                                  sampler.aux_conditioning, params.sigma_aux_m)
            engine.refresh_ensembles(ens)
            ctx.ensembles = ens
            ctx.sample_bbox = _sample_bbox(ens)
            cur_lp = engine.log_prob(config)
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
        proposal = propose(kind, config, ctx, rng)
        proposed[kind] += 1
        config, ok, cur_lp, num = accept(config, proposal, engine, rng, cur_lp)
        if ok:
            accepted[kind] += 1
        if num:
            numerical += 1
        if it > sampler.burn_in:
            samples.append(ConfigSample(config, cur_lp, it))

    warnings = []
    for k in kinds:
        if weights[k] > 0 and proposed[k] > 0 and accepted[k] == 0:
            warnings.append(f"move kind {k.value} was never accepted")
    if numerical:
        warnings.append(f"{numerical} proposals rejected due to non-finite acceptance")

    return ChainSamples(
        samples=tuple(samples),
        acceptance=tuple((k, proposed[k], accepted[k]) for k in kinds),
        seed=seed,
        burn_in=sampler.burn_in,
        n_iters=sampler.n_iters,
        warnings=tuple(warnings),
        numerical_rejections=numerical,
    )
