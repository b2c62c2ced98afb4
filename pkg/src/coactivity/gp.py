"""Gaussian-process model of latent 2-D actor trajectories.

Each actor's trajectory is modeled per coordinate as an independent GP on a
shared equidistant time grid, conditioned on noisy GPS fixes by dense exact
regression. Because the observation noise and every proximity constraint used
here are isotropic, the x and y coordinates always share one covariance
matrix; only the means differ. ``GpPosterior`` therefore stores a single
``cov`` that applies to both coordinates.

Proximity constraints ("auxiliary observations") tie participants of an
activity together as linear-Gaussian observations on the stacked per-actor
state, and conditioning on them is again a dense exact update.

All objects in this module are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, NumericalError

_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)

KERNEL_KINDS = ("matern52", "squared_exponential")


@dataclass(frozen=True)
class GpsObservation:
    """One timestamped 2-D position fix with isotropic noise, meters."""

    actor_id: str
    t: float
    x: float
    y: float
    noise_std: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t) and math.isfinite(self.x) and math.isfinite(self.y)):
            raise ConfigurationError("GPS observation fields must be finite")
        if not self.noise_std > 0:
            raise ConfigurationError("GPS noise_std must be positive")

    @property
    def pos(self) -> np.ndarray:
        return np.array((self.x, self.y))


@dataclass(frozen=True)
class GpHyperParams:
    """Kernel family and scales for the trajectory prior.

    ``length_scale_s`` is in seconds, ``signal_std_m`` in meters. ``mean_m``
    is the constant prior mean shared by every grid point. ``jitter`` is the
    relative diagonal loading used as the starting point of the escalation
    performed when a Cholesky factorization fails.
    """

    kernel: str = "matern52"
    length_scale_s: float = 120.0
    signal_std_m: float = 200.0
    mean_m: tuple[float, float] = (0.0, 0.0)
    jitter: float = 1e-9

    def __post_init__(self) -> None:
        if self.kernel not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}, expected one of {KERNEL_KINDS}")
        if not self.length_scale_s > 0:
            raise ConfigurationError("length_scale_s must be positive")
        if not self.signal_std_m > 0:
            raise ConfigurationError("signal_std_m must be positive")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be non-negative")


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant sampling grid for latent trajectories."""

    t_start: float
    t_end: float
    n_points: int = 500

    def __post_init__(self) -> None:
        if not self.t_end > self.t_start:
            raise ConfigurationError("TimeGrid requires t_end > t_start")
        if self.n_points < 2:
            raise ConfigurationError("TimeGrid requires at least 2 points")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)


def kernel_matrix(t_a: np.ndarray, t_b: np.ndarray, hyper: GpHyperParams) -> np.ndarray:
    """Covariance matrix of the trajectory prior between two sets of times."""
    d = np.abs(np.subtract.outer(np.asarray(t_a, float), np.asarray(t_b, float)))
    s2 = hyper.signal_std_m**2
    if hyper.kernel == "squared_exponential":
        return s2 * np.exp(-0.5 * (d / hyper.length_scale_s) ** 2)
    a = _SQRT5 * d / hyper.length_scale_s
    return s2 * (1.0 + a + a * a / 3.0) * np.exp(-a)


def _cholesky_with_escalation(mat: np.ndarray, scale: float, jitter0: float = 1e-9,
                              jitter_cap: float = 1e-3) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal loading on failure.

    Loading starts at ``jitter0 * scale`` and is multiplied by 10 up to
    ``jitter_cap * scale`` before giving up. ``scale`` should be a variance.
    """
    mat = np.asarray(mat, float)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    if scale <= 0:
        scale = max(float(np.max(np.abs(np.diag(mat)))), 1.0)
    eye = np.eye(mat.shape[0])
    jitter = jitter0 if jitter0 > 0 else 1e-9
    while jitter <= jitter_cap:
        try:
            return np.linalg.cholesky(mat + jitter * scale * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("Cholesky factorization failed after jitter escalation")


@dataclass(frozen=True)
class GpPosterior:
    """Gaussian belief over one or several actors' trajectories on a grid.

    ``mean`` has shape ``(k * n_points, 2)`` where ``k = len(actor_ids)``;
    blocks are stacked in ``actor_ids`` order. ``cov`` is the shared
    per-coordinate covariance, ``(k * n_points, k * n_points)``.
    """

    actor_ids: tuple[str, ...]
    grid: TimeGrid
    mean: np.ndarray
    cov: np.ndarray
    source_obs: tuple[GpsObservation, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = self.grid.n_points * len(self.actor_ids)
        if self.mean.shape != (n, 2):
            raise ValueError(f"mean shape {self.mean.shape} does not match {n} stacked grid points")
        if self.cov.shape != (n, n):
            raise ValueError(f"cov shape {self.cov.shape} does not match {n} stacked grid points")
        self.mean.setflags(write=False)
        self.cov.setflags(write=False)

    @property
    def n_stacked(self) -> int:
        return self.mean.shape[0]

    def block(self, actor_id: str) -> slice:
        i = self.actor_ids.index(actor_id)
        g = self.grid.n_points
        return slice(i * g, (i + 1) * g)

    def marginal(self, actor_id: str) -> "GpPosterior":
        """Single-actor marginal of a joint posterior."""
        if self.actor_ids == (actor_id,):
            return self
        b = self.block(actor_id)
        return GpPosterior(
            actor_ids=(actor_id,),
            grid=self.grid,
            mean=self.mean[b].copy(),
            cov=self.cov[b, b].copy(),
            source_obs=tuple(o for o in self.source_obs if o.actor_id == actor_id),
            warnings=self.warnings,
        )

    def marginal_variance(self) -> np.ndarray:
        """Pointwise variance per stacked grid point (shared by x and y)."""
        return np.clip(np.diag(self.cov), 0.0, None)

    def marginal_std(self) -> np.ndarray:
        return np.sqrt(self.marginal_variance())


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Monte-Carlo draws from a trajectory posterior.

    ``draws`` has shape ``(n_draws, n_stacked, 2)``. ``log_densities`` is the
    posterior log-density of each draw; zero for a degenerate (point-mass)
    posterior.
    """

    draws: np.ndarray
    seed: int
    log_densities: np.ndarray

    def __post_init__(self) -> None:
        if self.draws.ndim != 3 or self.draws.shape[2] != 2:
            raise ValueError("draws must have shape (n_draws, n_points, 2)")
        if self.draws.shape[0] < 1:
            raise ValueError("at least one draw required")
        self.draws.setflags(write=False)
        self.log_densities.setflags(write=False)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


@dataclass(frozen=True)
class AuxObservationSet:
    """Linear proximity constraints over a stacked multi-actor state.

    Each row of ``rows`` is a coefficient vector over the stacked
    ``(actor, grid point)`` coordinates with target value zero and noise
    ``sigma_aux``. ``in_span`` holds the grid indices the constraints touch.
    """

    mode: str
    activity_ref: tuple
    sigma_aux: float
    rows: np.ndarray
    in_span: np.ndarray

    def __post_init__(self) -> None:
        if self.mode not in ("static", "dynamic"):
            raise ConfigurationError(f"unknown aux mode {self.mode!r}")
        if not self.sigma_aux > 0:
            raise ConfigurationError("sigma_aux must be positive")
        self.rows.setflags(write=False)
        self.in_span.setflags(write=False)


def build_gp(obs: Sequence[GpsObservation], hyper: GpHyperParams, grid: TimeGrid,
             actor_id: str | None = None) -> GpPosterior:
    """Exact GP regression of one actor's trajectory onto the grid.

    With no observations the prior is returned. Observation times may lie
    anywhere, inside or outside the grid range.
    """
    obs = tuple(obs)
    if actor_id is None:
        actor_id = obs[0].actor_id if obs else "unknown"
    if any(o.actor_id != actor_id for o in obs):
        raise ValueError("build_gp expects observations of a single actor")

    tg = grid.times
    prior_mean = np.tile(np.asarray(hyper.mean_m, float), (grid.n_points, 1))
    k_gg = kernel_matrix(tg, tg, hyper)
    if not obs:
        return GpPosterior((actor_id,), grid, prior_mean, k_gg, ())

    t_o = np.array([o.t for o in obs])
    y = np.array([(o.x, o.y) for o in obs])
    noise_var = np.array([o.noise_std**2 for o in obs])

    k_oo = kernel_matrix(t_o, t_o, hyper) + np.diag(noise_var)
    k_go = kernel_matrix(tg, t_o, hyper)

    chol = _cholesky_with_escalation(k_oo, hyper.signal_std_m**2, hyper.jitter)
    resid = y - np.asarray(hyper.mean_m, float)
    alpha = cho_solve((chol, True), resid)
    mean = prior_mean + k_go @ alpha
    v = cho_solve((chol, True), k_go.T)
    cov = k_gg - k_go @ v
    cov = 0.5 * (cov + cov.T)
    return GpPosterior((actor_id,), grid, mean, cov, obs)


def sample_trajectories(post: GpPosterior, n_draws: int, seed: int) -> TrajectoryEnsemble:
    """I.i.d. posterior draws via Cholesky; deterministic given the seed."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    rng = np.random.default_rng(seed)
    n = post.n_stacked
    if not np.any(post.cov):
        draws = np.broadcast_to(post.mean, (n_draws, n, 2)).copy()
        return TrajectoryEnsemble(draws, seed, np.zeros(n_draws))
    scale = max(float(np.max(np.diag(post.cov))), 1e-300)
    chol = _cholesky_with_escalation(post.cov, scale)
    z = rng.standard_normal((n_draws, n, 2))
    draws = post.mean[None, :, :] + np.einsum("ij,djc->dic", chol, z)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    # z is exactly the whitened residual, so the quadratic form is ||z||^2
    # per coordinate.
    quad = np.sum(z**2, axis=1)  # (n_draws, 2)
    log_dens = -0.5 * (quad.sum(axis=1) + 2.0 * (log_det + n * _LOG_2PI))
    return TrajectoryEnsemble(draws, seed, log_dens)


def log_density(post: GpPosterior, traj: np.ndarray) -> float:
    """Log-density of one stacked trajectory draw under the posterior.

    Both coordinates are evaluated against the shared covariance and summed.
    """
    traj = np.asarray(traj, float)
    n = post.n_stacked
    if traj.shape != (n, 2):
        raise ValueError(f"trajectory shape {traj.shape} does not match posterior ({n}, 2)")
    scale = max(float(np.max(np.diag(post.cov))), 1e-300)
    chol = _cholesky_with_escalation(post.cov, scale)
    resid = traj - post.mean
    w = np.linalg.solve(chol, resid)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return float(-0.5 * (np.sum(w**2) + 2.0 * (log_det + n * _LOG_2PI)))


def stack_posteriors(posteriors: Mapping[str, GpPosterior], actor_ids: Sequence[str]) -> GpPosterior:
    """Independent (block-diagonal) joint over the given actors."""
    actor_ids = tuple(actor_ids)
    if not actor_ids:
        raise ValueError("at least one actor required")
    parts = [posteriors[a] for a in actor_ids]
    grid = parts[0].grid
    for p in parts:
        if p.actor_ids != (p.actor_ids[0],):
            raise ValueError("stack_posteriors expects single-actor posteriors")
        if p.grid != grid:
            raise ValueError("all posteriors must share one grid")
    g = grid.n_points
    n = g * len(parts)
    mean = np.vstack([p.mean for p in parts])
    cov = np.zeros((n, n))
    for i, p in enumerate(parts):
        cov[i * g:(i + 1) * g, i * g:(i + 1) * g] = p.cov
    obs = tuple(o for p in parts for o in p.source_obs)
    return GpPosterior(actor_ids, grid, mean, cov, obs)


def _in_span_indices(grid: TimeGrid, t_start: float, t_end: float) -> np.ndarray:
    t = grid.times
    return np.nonzero((t >= t_start) & (t <= t_end))[0]


def build_aux_constraints(participants: Sequence[str], t_start: float, span: float,
                          grid: TimeGrid, mode: str, sigma_aux: float) -> AuxObservationSet:
    """Constraint rows tying participants together during an activity span.

    Dynamic mode: one row per unordered participant pair per in-span grid
    point, ``x_p(t) - x_q(t) ~ N(0, sigma_aux^2)``.

    Static mode: one row per participant per in-span grid point, tying
    ``x_p(t)`` to the average location of all participants over the span,
    with the time integral discretized as a Riemann sum on the grid.
    """
    participants = tuple(participants)
    n_p = len(participants)
    if n_p < 2:
        raise ValueError("proximity constraints need at least 2 participants")
    idx = _in_span_indices(grid, t_start, t_start + span)
    g = grid.n_points
    dim = n_p * g
    m = idx.size
    if m == 0:
        rows = np.zeros((0, dim))
        return AuxObservationSet(mode, (participants, t_start, span), sigma_aux, rows, idx)

    if mode == "dynamic":
        n_rows = (n_p * (n_p - 1) // 2) * m
        rows = np.zeros((n_rows, dim))
        r = 0
        for i in range(n_p):
            for j in range(i + 1, n_p):
                rows[r:r + m, i * g + idx] = np.eye(m)
                rows[r:r + m, j * g + idx] -= np.eye(m)
                r += m
    elif mode == "static":
        # Average weight 1/(P*m) per (participant, in-span point); the grid
        # spacing cancels between the Riemann sum and the span length.
        avg = np.zeros(dim)
        for i in range(n_p):
            avg[i * g + idx] = 1.0 / (n_p * m)
        rows = np.zeros((n_p * m, dim))
        r = 0
        for i in range(n_p):
            block = np.tile(-avg, (m, 1))
            block[np.arange(m), i * g + idx] += 1.0
            rows[r:r + m] = block
            r += m
    else:
        raise ConfigurationError(f"unknown aux mode {mode!r}")
    return AuxObservationSet(mode, (participants, t_start, span), sigma_aux, rows, idx)


def _condition_on_rows(mean: np.ndarray, cov: np.ndarray, rows: np.ndarray,
                       noise_var: float) -> tuple[np.ndarray, np.ndarray]:
    """Condition N(mean, cov) per coordinate on rows @ state ~ N(0, noise_var)."""
    s = rows @ cov @ rows.T + noise_var * np.eye(rows.shape[0])
    chol = cho_factor(_nearest_factorable(s), lower=True)
    k = cov @ rows.T                      # (n, m)
    gain_t = cho_solve(chol, k.T)         # (m, n) = S^-1 K^T
    new_mean = mean - gain_t.T @ (rows @ mean)
    new_cov = cov - k @ gain_t
    new_cov = 0.5 * (new_cov + new_cov.T)
    return new_mean, new_cov


def _nearest_factorable(s: np.ndarray) -> np.ndarray:
    # cho_factor raises on tiny negative diagonals; nudge deterministically.
    try:
        np.linalg.cholesky(s)
        return s
    except np.linalg.LinAlgError:
        scale = max(float(np.max(np.diag(s))), 1e-300)
        return s + 1e-9 * scale * np.eye(s.shape[0])


def condition_on_activities(posteriors: Mapping[str, GpPosterior], activities: Sequence,
                            mode: str = "static", sigma_aux: float = 5.0) -> GpPosterior:
    """Joint posterior over all participants of the given activities,
    conditioned on every activity's proximity constraints at once.

    ``activities`` may be any objects with ``participants``, ``t_start`` and
    ``span`` attributes. Actors appearing in no activity are not included.
    """
    activities = tuple(activities)
    if not activities:
        raise ValueError("at least one activity required")
    actors = sorted({p for a in activities for p in a.participants})
    joint = stack_posteriors(posteriors, actors)
    grid = joint.grid
    g = grid.n_points

    all_rows = []
    warnings: list[str] = []
    for act in activities:
        parts = sorted(act.participants)
        if len(parts) < 2:
            raise ValueError("activity needs at least 2 participants to condition on")
        aux = build_aux_constraints(parts, act.t_start, act.span, grid, mode, sigma_aux)
        if aux.rows.shape[0] == 0:
            warnings.append("activity span does not intersect the grid; constraints skipped")
            continue
        # Lift rows from the activity's participant layout to the joint layout.
        lifted = np.zeros((aux.rows.shape[0], joint.n_stacked))
        for i, p in enumerate(parts):
            j = actors.index(p)
            lifted[:, j * g:(j + 1) * g] = aux.rows[:, i * g:(i + 1) * g]
        all_rows.append(lifted)

    if not all_rows:
        return GpPosterior(joint.actor_ids, grid, joint.mean.copy(), joint.cov.copy(),
                           joint.source_obs, tuple(warnings) or ("no in-grid constraints",))

    rows = np.vstack(all_rows)
    mean, cov = _condition_on_rows(joint.mean, joint.cov, rows, sigma_aux**2)
    return GpPosterior(joint.actor_ids, grid, mean, cov, joint.source_obs, tuple(warnings))


def condition_on_activity(posteriors: Mapping[str, GpPosterior], activity,
                          mode: str = "static", sigma_aux: float = 5.0) -> GpPosterior:
    """Condition the participants of one activity on proximity constraints."""
    return condition_on_activities(posteriors, (activity,), mode, sigma_aux)
