"""Activity types, instances, configurations, and the factored model score.

The unnormalized log-score of a configuration decomposes into:

  * a coverage term penalizing GPS observations explained by no activity,
  * per instance: a presence term penalizing participant time spent outside
    the activity disc, a log-normal prior on span and radius plus a
    discretized log-normal prior on the participant count, and a domain
    prior (proper uniforms over start time, center region, type and
    participant identities, which keep the trans-dimensional posterior
    normalizable),
  * a scene-feature term scoring frame features under the covering
    activity's feature distribution (background otherwise),
  * a face-count term scoring per-activity face detection counts as Poisson.

Coverage and presence are marginalized over the trajectory ensemble by
log-mean-exp across draws. Trajectory draws enter only through these two
terms; the trajectory posterior density itself is constant in the
configuration for a fixed ensemble and is deliberately left out.

``FactorEngine`` precomputes the data-dependent arrays once and caches
per-instance terms so a sampler can re-score configurations cheaply. The
module-level factor functions are thin wrappers over the same kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError
from .gp import GpsObservation

_LOG_2PI = math.log(2.0 * math.pi)

DISJOINT = "disjoint"
MAY_OVERLAP = "may-overlap"
CONTAINS = "contains"
_RELATIONS = (DISJOINT, MAY_OVERLAP, CONTAINS)

# Spatial gate for frame-to-activity association: a frame can only be claimed
# when the actor's mean position lies within radius + GATE_STD_MULT * (local
# trajectory std) + GATE_SLACK_M of the center. The uncertainty term keeps
# frames claimable through GPS-denial windows where the mean interpolates.
GATE_STD_MULT = 2.0
GATE_SLACK_M = 10.0


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActivityType:
    """Prior bundle parameterizing instances of one kind of activity.

    Log-normal parameters are given as (median in natural units, standard
    deviation of the natural log). Face rates are per minute.
    """

    type_id: str
    label: str = ""
    span_median_s: float = 300.0
    span_log_std: float = 0.01
    radius_median_m: float = 30.0
    radius_log_std: float = 0.05
    participants_median: float = 2.0
    participants_log_std: float = 0.5
    feature_mean: tuple[float, ...] = ()
    feature_var: tuple[float, ...] = ()
    face_rate_participant_per_min: float = 3.0
    face_rate_nonparticipant_per_min: float = 0.2
    excursion_rate_per_s: float = 1.0

    def __post_init__(self) -> None:
        for name in ("span_median_s", "radius_median_m", "participants_median"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("span_log_std", "radius_log_std", "participants_log_std"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not self.face_rate_participant_per_min > self.face_rate_nonparticipant_per_min > 0:
            raise ConfigurationError("face rates must satisfy participant > non-participant > 0")
        if len(self.feature_mean) != len(self.feature_var):
            raise ConfigurationError("feature_mean and feature_var lengths differ")
        if any(v <= 0 for v in self.feature_var):
            raise ConfigurationError("feature variances must be positive")
        if self.excursion_rate_per_s < 0:
            raise ConfigurationError("excursion_rate_per_s must be non-negative")


@dataclass(frozen=True)
class OverlapMatrix:
    """Allowed spatio-temporal relations between ordered type pairs.

    Unlisted pairs default to ``may-overlap``.
    """

    relations: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        seen: dict[tuple[str, str], str] = {}
        for a, b, rel in self.relations:
            if rel not in _RELATIONS:
                raise ConfigurationError(f"unknown overlap relation {rel!r}")
            seen[(a, b)] = rel
        for (a, b), rel in seen.items():
            if rel == CONTAINS and seen.get((b, a)) == DISJOINT:
                raise ConfigurationError(f"contains({a},{b}) conflicts with disjoint({b},{a})")
        object.__setattr__(self, "_table", seen)

    def relation(self, type_a: str, type_b: str) -> str:
        return self._table.get((type_a, type_b), MAY_OVERLAP)


@dataclass(frozen=True)
class ActivityInstance:
    """One hypothesized collaborative event: a spatio-temporal cylinder."""

    type_id: str
    center: tuple[float, float]
    radius: float
    t_start: float
    span: float
    participants: frozenset[str]

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.span > 0:
            raise ValueError("span must be positive")
        if len(self.participants) < 2:
            raise ValueError("an activity needs at least 2 participants")
        if not isinstance(self.participants, frozenset):
            object.__setattr__(self, "participants", frozenset(self.participants))
        if not isinstance(self.center, tuple):
            object.__setattr__(self, "center", tuple(self.center))

    @property
    def t_end(self) -> float:
        return self.t_start + self.span

    def key(self) -> tuple:
        return (self.type_id, self.center, self.radius, self.t_start, self.span,
                tuple(sorted(self.participants)))


@dataclass(frozen=True)
class Configuration:
    """The set of all activity instances jointly explaining the data."""

    instances: tuple[ActivityInstance, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.instances, tuple):
            object.__setattr__(self, "instances", tuple(self.instances))

    def __len__(self) -> int:
        return len(self.instances)

    def key(self) -> tuple:
        return tuple(sorted(i.key() for i in self.instances))

    def multiplicity(self, inst: ActivityInstance) -> int:
        return self.instances.count(inst)


@dataclass(frozen=True)
class FaceDetection:
    """One face recognition event in an observer's video stream.

    ``detected_id`` is None for an unrecognized face. ``scores``, when
    present, holds per-identity classifier log-likelihoods aligned with the
    actor registry order.
    """

    observer: str
    t: float
    detected_id: str | None = None
    scores: tuple[float, ...] | None = None


@dataclass(frozen=True)
class FrameRecord:
    """One video frame: precomputed features plus attached face detections."""

    actor_id: str
    t: float
    features: tuple[float, ...]
    keypoint_count: int = 0
    face_detections: tuple[FaceDetection, ...] = ()

    def __post_init__(self) -> None:
        if self.keypoint_count < 0:
            raise ValueError("keypoint_count must be non-negative")


@dataclass(frozen=True)
class ModelParams:
    """Dataset-level score parameters."""

    coverage_penalty: float = 0.5
    background_mean: tuple[float, ...] = ()
    background_var: tuple[float, ...] = ()
    sigma_aux_m: float = 5.0
    center_margin_m: float = 300.0

    def __post_init__(self) -> None:
        if self.coverage_penalty < 0:
            raise ConfigurationError("coverage_penalty must be non-negative")
        if len(self.background_mean) != len(self.background_var):
            raise ConfigurationError("background mean/var lengths differ")
        if any(v <= 0 for v in self.background_var):
            raise ConfigurationError("background variances must be positive")
        if not self.sigma_aux_m > 0:
            raise ConfigurationError("sigma_aux_m must be positive")


@dataclass(frozen=True)
class DiscreteInstanceSpace:
    """Finite candidate sets quantizing instance parameters.

    Used for enumerable toy problems: both the proposal draws and the
    instance domain prior become uniform over these sets.
    """

    centers: tuple[tuple[float, float], ...]
    starts: tuple[float, ...]
    spans: tuple[float, ...]
    radii: tuple[float, ...]
    participant_sets: tuple[frozenset[str], ...]
    max_instances: int | None = None

    def __post_init__(self) -> None:
        for name in ("centers", "starts", "spans", "radii", "participant_sets"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be non-empty")


@dataclass(frozen=True)
class InstanceDomain:
    """Proper uniform priors over the per-instance placement parameters.

    The start time is uniform over the data time support, the center uniform
    over a padded bounding region of the observations, the type uniform over
    the known types, and the participant set uniform over subsets of its
    size. Without these measures every added instance would multiply the
    posterior mass by the (huge) placement volume and the instance count
    would diverge.
    """

    t_min: float
    t_max: float
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    n_types: int
    n_actors: int
    discrete: DiscreteInstanceSpace | None = None

    def __post_init__(self) -> None:
        if not (self.t_max > self.t_min):
            raise ConfigurationError("time support must be non-empty")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigurationError("center region must have positive area")
        if self.n_types < 1 or self.n_actors < 2:
            raise ConfigurationError("need at least one type and two actors")

    def log_prior(self, inst: ActivityInstance) -> float:
        if self.discrete is not None:
            d = self.discrete
            if (inst.center not in d.centers or inst.t_start not in d.starts
                    or inst.participants not in d.participant_sets):
                return -math.inf
            return -(math.log(len(d.centers)) + math.log(len(d.starts))
                     + math.log(self.n_types) + math.log(len(d.participant_sets)))
        k = len(inst.participants)
        if k > self.n_actors:
            return -math.inf
        if not (self.t_min <= inst.t_start <= self.t_max):
            return -math.inf
        x, y = inst.center
        if not (self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max):
            return -math.inf
        area = (self.x_max - self.x_min) * (self.y_max - self.y_min)
        return -(math.log(self.t_max - self.t_min) + math.log(area)
                 + math.log(self.n_types) + log_comb(self.n_actors, k))


@dataclass(frozen=True)
class ModelData:
    """Evidence streams the score is evaluated against."""

    actors: tuple[str, ...]
    observations: tuple[GpsObservation, ...]
    frames: tuple[FrameRecord, ...] = ()
    faces: tuple[FaceDetection, ...] = ()

    def __post_init__(self) -> None:
        known = set(self.actors)
        for o in self.observations:
            if o.actor_id not in known:
                raise ConfigurationError(f"observation actor {o.actor_id!r} not in registry")
        for f in self.frames:
            if f.actor_id not in known:
                raise ConfigurationError(f"frame actor {f.actor_id!r} not in registry")

    def time_support(self) -> tuple[float, float]:
        ts = [o.t for o in self.observations]
        ts += [f.t for f in self.frames]
        ts += [d.t for d in self.faces]
        if not ts:
            raise ConfigurationError("no timestamped data to derive a time support from")
        return min(ts), max(ts)


# ---------------------------------------------------------------------------
# scalar helpers
# ---------------------------------------------------------------------------

def log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def lognormal_logpdf(value: float, median: float, log_std: float) -> float:
    """Log-density of a log-normal given (median, std of the natural log)."""
    if value <= 0:
        raise ValueError("log-normal support is positive values only")
    z = (math.log(value) - math.log(median)) / log_std
    return -math.log(value * log_std) - 0.5 * (_LOG_2PI + z * z)


def _lognormal_cdf(value: float, median: float, log_std: float) -> float:
    if value <= 0:
        return 0.0
    z = (math.log(value) - math.log(median)) / log_std
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def participant_count_log_pmf(k: int, median: float, log_std: float) -> float:
    """Discretized log-normal pmf over counts >= 2.

    The continuous mass of the rounding interval [k-1/2, k+1/2] is
    renormalized over all counts >= 2 (equivalently by the mass above 1.5).
    """
    if k < 2:
        return -math.inf
    mass = _lognormal_cdf(k + 0.5, median, log_std) - _lognormal_cdf(k - 0.5, median, log_std)
    norm = 1.0 - _lognormal_cdf(1.5, median, log_std)
    if mass <= 0.0 or norm <= 0.0:
        return -math.inf
    return math.log(mass) - math.log(norm)


def clamped_count_log_pmf(k: int, median: float, log_std: float) -> float:
    """Pmf of max(round(X), 2) for log-normal X; the birth-move draw law."""
    if k < 2:
        return -math.inf
    if k == 2:
        mass = _lognormal_cdf(2.5, median, log_std)
    else:
        mass = _lognormal_cdf(k + 0.5, median, log_std) - _lognormal_cdf(k - 0.5, median, log_std)
    return math.log(mass) if mass > 0 else -math.inf


def log_mean_exp(values: np.ndarray) -> float:
    values = np.asarray(values, float)
    m = float(np.max(values))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.mean(np.exp(values - m))))


def span_overlap_weights(grid_times: np.ndarray, dt: float, t_start: float,
                         t_end: float) -> np.ndarray:
    """Integration weight of each grid point over [t_start, t_end].

    Grid point k owns the cell [t_k - dt/2, t_k + dt/2]; its weight is the
    length of the cell's intersection with the span, so the weights of a
    span inside the grid sum exactly to the span length.
    """
    lo = np.maximum(grid_times - 0.5 * dt, t_start)
    hi = np.minimum(grid_times + 0.5 * dt, t_end)
    return np.clip(hi - lo, 0.0, None)


def check_overlap(config: Configuration, overlap: OverlapMatrix) -> bool:
    """True when every instance pair satisfies the allowed relations."""
    inst = config.instances
    for i in range(len(inst)):
        for j in range(i + 1, len(inst)):
            a, b = inst[i], inst[j]
            t_int = min(a.t_end, b.t_end) - max(a.t_start, b.t_start)
            time_overlap = t_int > 0
            rel_ab = overlap.relation(a.type_id, b.type_id)
            rel_ba = overlap.relation(b.type_id, a.type_id)
            if DISJOINT in (rel_ab, rel_ba):
                dx = a.center[0] - b.center[0]
                dy = a.center[1] - b.center[1]
                space_overlap = math.hypot(dx, dy) < a.radius + b.radius
                if time_overlap and space_overlap:
                    return False
            if rel_ab == CONTAINS and time_overlap:
                if not (b.t_start >= a.t_start and b.t_end <= a.t_end):
                    return False
            if rel_ba == CONTAINS and time_overlap:
                if not (a.t_start >= b.t_start and a.t_end <= b.t_end):
                    return False
    return True


# ---------------------------------------------------------------------------
# factor engine
# ---------------------------------------------------------------------------

class FactorEngine:
    """Precomputed-array evaluator of the configuration log-score.

    Construction converts the domain objects into flat numpy arrays and
    per-frame log-densities; ``log_prob`` then costs a few vectorized passes
    per instance. Per-instance terms are cached keyed by instance value;
    ensemble-dependent caches are dropped on ``refresh_ensembles``.

    Evaluation itself is pure: engines can be shared by concurrent readers
    as long as ``refresh_ensembles`` is not called concurrently.
    """

    def __init__(self, data: ModelData, types: Mapping[str, ActivityType] | Sequence[ActivityType],
                 overlap: OverlapMatrix, params: ModelParams, domain: InstanceDomain,
                 grid_times: np.ndarray, ensembles: Mapping[str, np.ndarray],
                 face_stream_present: bool | None = None,
                 spatial_association: bool = True):
        if isinstance(types, Mapping):
            self.types = dict(types)
        else:
            self.types = {t.type_id: t for t in types}
        # With no face stream at all the face modality does not exist and its
        # factor is skipped; an empty-but-present stream still counts zeros.
        self.face_stream_present = bool(data.faces) if face_stream_present is None \
            else face_stream_present
        # Frames covered by several instances go to the one with the nearest
        # center under the ensemble-mean trajectory; without trajectories the
        # deepest temporal embedding wins instead.
        self.spatial_association = spatial_association
        if not self.types:
            raise ConfigurationError("at least one activity type required")
        self.overlap = overlap
        self.params = params
        self.domain = domain
        self.actors = tuple(data.actors)
        self._a_index = {a: i for i, a in enumerate(self.actors)}
        self.grid_times = np.asarray(grid_times, float)
        self.dt = float(self.grid_times[1] - self.grid_times[0]) if self.grid_times.size > 1 else 1.0

        obs = data.observations
        self.n_obs = len(obs)
        self.obs_t = np.array([o.t for o in obs]) if obs else np.zeros(0)
        self.obs_actor = np.array([self._a_index[o.actor_id] for o in obs], dtype=np.intp) \
            if obs else np.zeros(0, dtype=np.intp)

        frames = data.frames
        self.n_frames = len(frames)
        self.frame_t = np.array([f.t for f in frames]) if frames else np.zeros(0)
        self.frame_actor = np.array([self._a_index[f.actor_id] for f in frames], dtype=np.intp) \
            if frames else np.zeros(0, dtype=np.intp)
        self._type_ids = tuple(sorted(self.types))
        self._type_pos = {tid: i for i, tid in enumerate(self._type_ids)}
        self._frame_logpdfs(frames)

        faces = [d for d in data.faces if d.detected_id is not None]
        for d in faces:
            if d.detected_id not in self._a_index:
                raise ConfigurationError(f"face detection names unknown actor {d.detected_id!r}")
            if d.observer not in self._a_index:
                raise ConfigurationError(f"face detection observer {d.observer!r} unknown")
        self.face_t = np.array([d.t for d in faces]) if faces else np.zeros(0)
        self.face_subject = np.array([self._a_index[d.detected_id] for d in faces], dtype=np.intp) \
            if faces else np.zeros(0, dtype=np.intp)
        self.face_observer = np.array([self._a_index[d.observer] for d in faces], dtype=np.intp) \
            if faces else np.zeros(0, dtype=np.intp)

        self._static_cache: dict[ActivityInstance, tuple[float, np.ndarray, np.ndarray, float]] = {}
        self.refresh_ensembles(ensembles)

    # -- construction helpers ------------------------------------------------

    def _frame_logpdfs(self, frames: Sequence[FrameRecord]) -> None:
        if not frames:
            self.features = np.zeros((0, 0))
            self.bg_lp = np.zeros(0)
            self.type_lp = np.zeros((len(self._type_ids), 0))
            self.bg_total = 0.0
            return
        dims = {len(f.features) for f in frames}
        if len(dims) != 1:
            raise ValueError("feature dimension must be constant across frames")
        d = dims.pop()
        feats = np.array([f.features for f in frames])
        self.features = feats
        bg_mean = np.asarray(self.params.background_mean, float)
        bg_var = np.asarray(self.params.background_var, float)
        if bg_mean.size != d:
            raise ValueError(f"background prior dimension {bg_mean.size} != feature dimension {d}")
        self.bg_lp = _normal_logpdf_rows(feats, bg_mean, bg_var)
        lp = np.zeros((len(self._type_ids), len(frames)))
        for i, tid in enumerate(self._type_ids):
            ty = self.types[tid]
            mean = np.asarray(ty.feature_mean, float)
            var = np.asarray(ty.feature_var, float)
            if mean.size != d:
                raise ValueError(f"type {tid!r} feature dimension {mean.size} != {d}")
            lp[i] = _normal_logpdf_rows(feats, mean, var)
        self.type_lp = lp
        self.bg_total = float(self.bg_lp.sum())

    def refresh_ensembles(self, ensembles: Mapping[str, np.ndarray]) -> None:
        """Install a new set of trajectory draws (one array per actor)."""
        draws = {}
        n_draws = None
        for a in self.actors:
            arr = np.asarray(ensembles[a], float)
            if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[1] != self.grid_times.size:
                raise ValueError("ensemble draws must have shape (n_draws, n_grid, 2)")
            if n_draws is None:
                n_draws = arr.shape[0]
            elif arr.shape[0] != n_draws:
                raise ValueError("all actors must have the same number of draws")
            draws[a] = arr
        assert n_draws is not None
        self.n_draws = n_draws
        self.draws = draws
        if self.n_obs:
            pos = np.empty((n_draws, self.n_obs, 2))
            for a, arr in draws.items():
                idx = np.nonzero(self.obs_actor == self._a_index[a])[0]
                if idx.size == 0:
                    continue
                t = self.obs_t[idx]
                for j in range(n_draws):
                    pos[j, idx, 0] = np.interp(t, self.grid_times, arr[j, :, 0])
                    pos[j, idx, 1] = np.interp(t, self.grid_times, arr[j, :, 1])
            self.pos_at_obs = pos
        else:
            self.pos_at_obs = np.zeros((n_draws, 0, 2))
        if self.n_frames and self.spatial_association:
            fpos = np.empty((self.n_frames, 2))
            fslack = np.empty(self.n_frames)
            for a, arr in draws.items():
                idx = np.nonzero(self.frame_actor == self._a_index[a])[0]
                if idx.size == 0:
                    continue
                mean_path = arr.mean(axis=0)
                fpos[idx, 0] = np.interp(self.frame_t[idx], self.grid_times, mean_path[:, 0])
                fpos[idx, 1] = np.interp(self.frame_t[idx], self.grid_times, mean_path[:, 1])
                var = arr.var(axis=0).mean(axis=1)  # per grid point, coord-avg
                sig = np.sqrt(np.interp(self.frame_t[idx], self.grid_times, var))
                fslack[idx] = GATE_STD_MULT * sig + GATE_SLACK_M
            self.frame_pos = fpos
            self.frame_gate_slack = fslack
        else:
            self.frame_pos = None
            self.frame_gate_slack = None
        self._ens_cache: dict[ActivityInstance, tuple[np.ndarray, float]] = {}

    # -- per-instance pieces --------------------------------------------------

    def _participant_mask(self, inst: ActivityInstance) -> np.ndarray:
        mask = np.zeros(len(self.actors), dtype=bool)
        for p in inst.participants:
            i = self._a_index.get(p)
            if i is None:
                raise ValueError(f"participant {p!r} not in actor registry")
            mask[i] = True
        return mask

    def _ensemble_terms(self, inst: ActivityInstance) -> tuple[np.ndarray, float]:
        """(covered mask over (draw, obs), presence log-factor)."""
        cached = self._ens_cache.get(inst)
        if cached is not None:
            return cached
        pmask = self._participant_mask(inst)
        # coverage mask
        if self.n_obs:
            sel = pmask[self.obs_actor] & (self.obs_t >= inst.t_start) & (self.obs_t <= inst.t_end)
            idx = np.nonzero(sel)[0]
            covered = np.zeros((self.n_draws, self.n_obs), dtype=bool)
            if idx.size:
                delta = self.pos_at_obs[:, idx, :] - np.asarray(inst.center)
                d2 = np.einsum("dij,dij->di", delta, delta)
                covered[:, idx] = d2 <= inst.radius**2
        else:
            covered = np.zeros((self.n_draws, 0), dtype=bool)
        presence = self._presence(inst, pmask)
        if len(self._ens_cache) > 8192:
            self._ens_cache.clear()
        self._ens_cache[inst] = (covered, presence)
        return covered, presence

    def _presence(self, inst: ActivityInstance, pmask: np.ndarray) -> float:
        w = span_overlap_weights(self.grid_times, self.dt, inst.t_start, inst.t_end)
        idx = np.nonzero(w > 0)[0]
        if idx.size == 0:
            raise ValueError("activity span does not intersect the time grid")
        rate = self.types[inst.type_id].excursion_rate_per_s
        weights = w[idx]
        center = np.asarray(inst.center)
        out_time = np.zeros(self.n_draws)
        for p in sorted(inst.participants):
            arr = self.draws[p][:, idx, :]
            delta = arr - center
            d2 = np.einsum("dij,dij->di", delta, delta)
            out_time += (d2 > inst.radius**2) @ weights
        return log_mean_exp(-rate * out_time)

    def _static_terms(self, inst: ActivityInstance) -> tuple[float, np.ndarray, np.ndarray, float]:
        """(prior, frame cover mask, frame depth, face log-factor)."""
        cached = self._static_cache.get(inst)
        if cached is not None:
            return cached
        ty = self.types.get(inst.type_id)
        if ty is None:
            raise ConfigurationError(f"unknown activity type {inst.type_id!r}")
        prior = (lognormal_logpdf(inst.span, ty.span_median_s, ty.span_log_std)
                 + lognormal_logpdf(inst.radius, ty.radius_median_m, ty.radius_log_std)
                 + participant_count_log_pmf(len(inst.participants), ty.participants_median,
                                             ty.participants_log_std)
                 + self.domain.log_prior(inst))
        pmask = self._participant_mask(inst)
        if self.n_frames:
            cover = pmask[self.frame_actor] & (self.frame_t >= inst.t_start) & (self.frame_t <= inst.t_end)
            depth = np.minimum(self.frame_t - inst.t_start, inst.t_end - self.frame_t)
        else:
            cover = np.zeros(0, dtype=bool)
            depth = np.zeros(0)
        face = self._face_term(inst, ty, pmask)
        if len(self._static_cache) > 8192:
            self._static_cache.clear()
        self._static_cache[inst] = (prior, cover, depth, face)
        return prior, cover, depth, face

    def _face_term(self, inst: ActivityInstance, ty: ActivityType, pmask: np.ndarray) -> float:
        if not self.face_stream_present:
            return 0.0
        minutes = inst.span / 60.0
        lam = np.where(pmask, ty.face_rate_participant_per_min,
                       ty.face_rate_nonparticipant_per_min) * minutes
        if self.face_t.size:
            sel = (pmask[self.face_observer] & (self.face_t >= inst.t_start)
                   & (self.face_t <= inst.t_end))
            counts = np.bincount(self.face_subject[sel], minlength=len(self.actors)).astype(float)
        else:
            counts = np.zeros(len(self.actors))
        return float(np.sum(counts * np.log(lam) - lam - gammaln(counts + 1.0)))

    # -- factors ---------------------------------------------------------------

    def coverage(self, config: Configuration) -> float:
        if self.n_obs == 0:
            return 0.0
        covered = np.zeros((self.n_draws, self.n_obs), dtype=bool)
        for inst in config.instances:
            covered |= self._ensemble_terms(inst)[0]
        uncovered = self.n_obs - covered.sum(axis=1)
        return log_mean_exp(-self.params.coverage_penalty * uncovered)

    def presence(self, inst: ActivityInstance) -> float:
        return self._ensemble_terms(inst)[1]

    def span_radius_prior(self, inst: ActivityInstance) -> float:
        ty = self.types.get(inst.type_id)
        if ty is None:
            raise ConfigurationError(f"unknown activity type {inst.type_id!r}")
        return (lognormal_logpdf(inst.span, ty.span_median_s, ty.span_log_std)
                + lognormal_logpdf(inst.radius, ty.radius_median_m, ty.radius_log_std)
                + participant_count_log_pmf(len(inst.participants), ty.participants_median,
                                            ty.participants_log_std))

    def scene(self, config: Configuration) -> float:
        if self.n_frames == 0:
            return 0.0
        # a frame is claimable when its actor participates, the time is in
        # span, and (when positions are known) the actor plausibly sits inside
        # the disc; among claimants the nearest center wins, falling back to
        # the deepest temporal embedding when no positions are available
        best_pref = np.full(self.n_frames, -np.inf)
        best_start = np.full(self.n_frames, np.inf)
        best_type = np.full(self.n_frames, -1, dtype=np.intp)
        for inst in config.instances:
            _, cover, depth, _ = self._static_terms(inst)
            if not cover.any():
                continue
            if self.frame_pos is not None:
                delta = self.frame_pos - np.asarray(inst.center)
                d2 = np.einsum("ij,ij->i", delta, delta)
                gate = inst.radius + self.frame_gate_slack
                cover = cover & (d2 <= gate * gate)
                pref = -d2
            else:
                pref = depth
            better = cover & ((pref > best_pref)
                              | ((pref == best_pref) & (inst.t_start < best_start)))
            if better.any():
                best_pref = np.where(better, pref, best_pref)
                best_start = np.where(better, inst.t_start, best_start)
                best_type[better] = self._type_pos[inst.type_id]
        total = self.bg_total
        covered = best_type >= 0
        if covered.any():
            idx = np.nonzero(covered)[0]
            total += float((self.type_lp[best_type[idx], idx] - self.bg_lp[idx]).sum())
        return total

    def faces(self, config: Configuration) -> float:
        return sum(self._static_terms(inst)[3] for inst in config.instances)

    def domain_prior(self, inst: ActivityInstance) -> float:
        return self.domain.log_prior(inst)

    def log_prob(self, config: Configuration) -> float:
        """Full configuration log-score; -inf on an overlap violation or an
        instance outside the prior domain."""
        if not check_overlap(config, self.overlap):
            return -math.inf
        total = 0.0
        # priors first: a zero-prior instance (e.g. a split child pushed past
        # the time support) must short-circuit before ensemble terms
        static = []
        for inst in config.instances:
            prior, _, _, face = self._static_terms(inst)
            if not math.isfinite(prior):
                return -math.inf
            static.append(prior + face)
        total += self.coverage(config)
        for inst, s in zip(config.instances, static):
            total += s + self._ensemble_terms(inst)[1]
        total += self.scene(config)
        return float(total)


def _normal_logpdf_rows(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    z = (x - mean) ** 2 / var
    const = -0.5 * (np.log(2.0 * np.pi * var)).sum()
    return const - 0.5 * z.sum(axis=1)


# ---------------------------------------------------------------------------
# module-level factor operations
# ---------------------------------------------------------------------------

def coverage_log_factor(config: Configuration, observations: Sequence[GpsObservation],
                        paths: Mapping[str, np.ndarray], grid_times: np.ndarray,
                        penalty: float) -> float:
    """Coverage penalty for one trajectory draw per actor.

    An observation (p, t) is covered when some instance includes p, spans t,
    and the draw's grid-interpolated position at t lies within the instance
    radius of its center. Returns ``-penalty * (# uncovered observations)``.
    """
    grid_times = np.asarray(grid_times, float)
    uncovered = 0
    for o in observations:
        path = paths[o.actor_id]
        x = np.interp(o.t, grid_times, path[:, 0])
        y = np.interp(o.t, grid_times, path[:, 1])
        hit = False
        for inst in config.instances:
            if o.actor_id not in inst.participants:
                continue
            if not (inst.t_start <= o.t <= inst.t_end):
                continue
            if (x - inst.center[0]) ** 2 + (y - inst.center[1]) ** 2 <= inst.radius**2:
                hit = True
                break
        if not hit:
            uncovered += 1
    return -penalty * uncovered


def presence_log_factor(inst: ActivityInstance, excursion_rate: float,
                        ensembles: Mapping[str, np.ndarray], grid_times: np.ndarray) -> float:
    """Excursion penalty, log-mean-exp averaged across ensemble draws.

    Each draw pays ``rate * time outside the disc`` summed over participants;
    the time integral is a Riemann sum over grid cells clipped to the span.
    """
    grid_times = np.asarray(grid_times, float)
    dt = float(grid_times[1] - grid_times[0]) if grid_times.size > 1 else 1.0
    w = span_overlap_weights(grid_times, dt, inst.t_start, inst.t_end)
    idx = np.nonzero(w > 0)[0]
    if idx.size == 0:
        raise ValueError("activity span does not intersect the time grid")
    weights = w[idx]
    center = np.asarray(inst.center)
    n_draws = None
    out_time = None
    for p in sorted(inst.participants):
        arr = np.asarray(ensembles[p], float)
        if n_draws is None:
            n_draws = arr.shape[0]
            out_time = np.zeros(n_draws)
        delta = arr[:, idx, :] - center
        d2 = np.einsum("dij,dij->di", delta, delta)
        out_time += (d2 > inst.radius**2) @ weights
    return log_mean_exp(-excursion_rate * out_time)


def span_radius_log_prior(inst: ActivityInstance, ty: ActivityType) -> float:
    """Log-normal span and radius priors plus the participant-count pmf."""
    return (lognormal_logpdf(inst.span, ty.span_median_s, ty.span_log_std)
            + lognormal_logpdf(inst.radius, ty.radius_median_m, ty.radius_log_std)
            + participant_count_log_pmf(len(inst.participants), ty.participants_median,
                                        ty.participants_log_std))


def instance_domain_log_prior(inst: ActivityInstance, domain: InstanceDomain) -> float:
    """Proper uniform placement prior (start, center, type, identities)."""
    return domain.log_prior(inst)


def scene_log_factor(frames: Sequence[FrameRecord], config: Configuration,
                     types: Mapping[str, ActivityType] | Sequence[ActivityType],
                     params: ModelParams,
                     ensembles: Mapping[str, np.ndarray] | None = None,
                     grid_times: np.ndarray | None = None) -> float:
    """Per-frame feature log-likelihood under the covering type or background.

    A frame is covered when its actor participates in an instance whose span
    contains the frame time; with ``ensembles`` (per-actor trajectory draws
    on ``grid_times``) the actor's mean position must additionally lie within
    the instance radius plus an uncertainty slack. A multiply-covered frame
    is scored under the covering instance with the nearest center (without
    trajectories: the deepest temporal embedding). Ties break to the
    earliest start.
    """
    ids = {f.actor_id for f in frames} | {p for i in config.instances for p in i.participants}
    engine = _mini_engine(frames=tuple(frames), types=types, params=params,
                          actors=tuple(sorted(ids)), ensembles=ensembles,
                          grid_times=grid_times)
    return engine.scene(config)


def face_count_log_factor(detections: Sequence[FaceDetection], config: Configuration,
                          types: Mapping[str, ActivityType] | Sequence[ActivityType],
                          actors: Sequence[str]) -> float:
    """Poisson log-likelihood of per-activity face-detection counts.

    For each instance and each registry actor, detections of that actor made
    by participants' streams inside the span are counted; the rate is the
    participant rate for participants and the non-participant rate otherwise,
    scaled by the span in minutes.
    """
    ids = set(actors) | {p for i in config.instances for p in i.participants}
    engine = _mini_engine(faces=tuple(detections), types=types, actors=tuple(actors))
    if not ids <= set(engine.actors):
        raise ValueError("instance participants must belong to the actor registry")
    return engine.faces(config)


def config_log_prob(config: Configuration, data: ModelData,
                    ensembles: Mapping[str, np.ndarray], grid_times: np.ndarray,
                    types: Mapping[str, ActivityType] | Sequence[ActivityType],
                    overlap: OverlapMatrix, params: ModelParams,
                    domain: InstanceDomain) -> float:
    """Unnormalized configuration log-score.

    Sum of the ensemble-averaged coverage factor, the per-instance presence,
    span/radius and domain priors, the scene factor and the face factor;
    -inf when the overlap matrix is violated. The trajectory density term is
    constant in the configuration for fixed ensembles and is omitted. The
    face factor applies only when the dataset carries a face stream.
    """
    engine = FactorEngine(data, types, overlap, params, domain, grid_times, ensembles)
    return engine.log_prob(config)


def _mini_engine(frames: tuple[FrameRecord, ...] = (), faces: tuple[FaceDetection, ...] = (),
                 types=None, params: ModelParams | None = None,
                 actors: tuple[str, ...] = (),
                 ensembles: Mapping[str, np.ndarray] | None = None,
                 grid_times: np.ndarray | None = None) -> FactorEngine:
    """Engine over a reduced dataset, for the standalone factor wrappers.

    The domain prior is never evaluated through this path, so a wide dummy
    domain is used. ``ensembles`` enables the spatial frame-association rule.
    """
    if len(actors) < 2:
        actors = tuple(actors) + ("_pad_a", "_pad_b")[:2 - len(actors)]
    if params is None:
        d = len(frames[0].features) if frames else 0
        params = ModelParams(background_mean=(0.0,) * d, background_var=(1.0,) * d)
    data = ModelData(actors=actors, observations=(), frames=frames, faces=faces)
    domain = InstanceDomain(t_min=-1e12, t_max=1e12, x_min=-1e9, x_max=1e9,
                            y_min=-1e9, y_max=1e9, n_types=1, n_actors=len(actors))
    if ensembles is not None:
        if grid_times is None:
            raise ValueError("grid_times required when ensembles are given")
        grid = np.asarray(grid_times, float)
        n_draws = next(iter(ensembles.values())).shape[0] if ensembles else 1
        ens = {a: np.asarray(ensembles[a]) if a in ensembles
               else np.zeros((n_draws, grid.size, 2)) for a in actors}
        spatial = True
    else:
        grid = np.array([0.0, 1.0])
        ens = {a: np.zeros((1, 2, 2)) for a in actors}
        spatial = False
    return FactorEngine(data, types, OverlapMatrix(), params, domain, grid, ens,
                        face_stream_present=True, spatial_association=spatial)


def face_identity_posterior(det: FaceDetection, samples: Sequence[Configuration],
                            actors: Sequence[str], epsilon: float | None = None) -> np.ndarray:
    """Activity-aware posterior over the identity of one face detection.

    Per configuration sample, the identity prior is the product over
    instances covering (observer, t) of a distribution that is uniform over
    that instance's participants and ``epsilon`` for everyone else; with no
    covering instance the prior is flat. The prior multiplies the
    classifier's likelihoods (``det.scores``), is normalized, and the
    resulting posteriors are averaged over samples.
    """
    if det.scores is None:
        raise ValueError("face detection carries no classifier score vector")
    actors = tuple(actors)
    if len(det.scores) != len(actors):
        raise ValueError("score vector length does not match actor registry")
    if epsilon is None:
        epsilon = 0.01 / len(actors)
    scores = np.asarray(det.scores, float)
    lik = np.exp(scores - scores.max())
    total = np.zeros(len(actors))
    for config in samples:
        prior = np.ones(len(actors))
        for inst in config.instances:
            if det.observer in inst.participants and inst.t_start <= det.t <= inst.t_end:
                member = np.array([a in inst.participants for a in actors])
                prior *= np.where(member, 1.0 / len(inst.participants), epsilon)
        post = prior * lik
        s = post.sum()
        if s <= 0:
            post = np.full(len(actors), 1.0 / len(actors))
        else:
            post = post / s
        total += post
    if not samples:
        raise ValueError("at least one configuration sample required")
    return total / len(samples)
