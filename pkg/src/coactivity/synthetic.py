"""Synthetic multi-actor scenarios with ground truth, and the evaluation
harness over sampled configurations.

Per turn each actor either visits one of a few meeting places or wanders to
its own uniform location; two or more attendees at one place in one turn
constitute a ground-truth activity. Motion is constant-velocity transit at
the start of each turn followed by a dwell at the waypoint, so ground-truth
participants are exactly inside the activity disc for its whole span.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .gp import GpHyperParams, GpsObservation
from .model import (ActivityInstance, ActivityType, Configuration, FaceDetection, FrameRecord,
                    ModelData, ModelParams, OverlapMatrix)
from .sampler import ChainSamples, SamplerConfig, run_chain

MEETING_TYPE_ID = "meeting"


def thread_budget() -> int:
    """Worker cap for parallel sections; COACTIVITY_THREADS overrides."""
    env = os.environ.get("COACTIVITY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"COACTIVITY_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator parameters for the synthetic multi-actor world."""

    n_actors: int = 8
    n_turns: int = 6
    turn_duration_s: float = 150.0
    n_meeting_places: int = 3
    place_location_std_m: float = 700.0
    p_meet: float = 0.5
    gps_noise_std_m: float = 30.0
    gps_rate_hz: float = 0.2
    area_extent_m: float = 2000.0
    radius_median_m: float = 30.0
    radius_log_std: float = 0.1
    span_median_s: float = 60.0
    span_log_std: float = 0.05
    transit_fraction: float = 0.3
    frame_rate_hz: float = 0.1
    feature_dim: int = 4
    feature_separation: float = 1.5
    face_rate_participant_per_min: float = 3.0
    face_rate_nonparticipant_per_min: float = 0.2
    classifier_margin: float = 2.5
    excursion_rate_per_s: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_meet <= 1.0:
            raise ConfigurationError("p_meet must lie in [0, 1]")
        for name in ("n_actors", "n_turns", "turn_duration_s", "n_meeting_places",
                     "place_location_std_m", "gps_rate_hz", "area_extent_m",
                     "radius_median_m", "radius_log_std", "span_median_s", "span_log_std",
                     "frame_rate_hz", "feature_dim"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.gps_noise_std_m < 0:
            raise ConfigurationError("gps_noise_std_m must be non-negative")
        if not 0.0 < self.transit_fraction < 1.0:
            raise ConfigurationError("transit_fraction must lie in (0, 1)")
        if self.n_actors < 2:
            raise ConfigurationError("need at least 2 actors")

    @property
    def total_duration_s(self) -> float:
        return self.n_turns * self.turn_duration_s

    def actor_ids(self) -> tuple[str, ...]:
        width = len(str(self.n_actors - 1))
        return tuple(f"a{str(i).zfill(width)}" for i in range(self.n_actors))

    def activity_type(self) -> ActivityType:
        d = self.feature_dim
        return ActivityType(
            type_id=MEETING_TYPE_ID,
            label="synthetic meeting",
            span_median_s=self.span_median_s,
            span_log_std=self.span_log_std,
            radius_median_m=self.radius_median_m,
            radius_log_std=max(self.radius_log_std, 0.05) * 2.0,
            participants_median=2.0,
            participants_log_std=0.5,
            feature_mean=(self.feature_separation,) * d,
            feature_var=(1.0,) * d,
            face_rate_participant_per_min=self.face_rate_participant_per_min,
            face_rate_nonparticipant_per_min=self.face_rate_nonparticipant_per_min,
            excursion_rate_per_s=self.excursion_rate_per_s,
        )

    def model_params(self) -> ModelParams:
        d = self.feature_dim
        return ModelParams(coverage_penalty=1.0,
                           background_mean=(0.0,) * d,
                           background_var=(1.0,) * d)


@dataclass(frozen=True)
class SyntheticDataset:
    """Generated streams plus the ground truth that produced them."""

    config: ScenarioConfig
    actors: tuple[str, ...]
    waypoint_times: np.ndarray               # (n_knots,)
    waypoints: Mapping[str, np.ndarray]      # actor -> (n_knots, 2)
    observations: tuple[GpsObservation, ...]
    frames: tuple[FrameRecord, ...]
    faces: tuple[FaceDetection, ...]
    truth: tuple[ActivityInstance, ...]

    def true_position(self, actor_id: str, t) -> np.ndarray:
        """Ground-truth position(s) by piecewise-linear interpolation."""
        t = np.atleast_1d(np.asarray(t, float))
        w = self.waypoints[actor_id]
        x = np.interp(t, self.waypoint_times, w[:, 0])
        y = np.interp(t, self.waypoint_times, w[:, 1])
        return np.stack([x, y], axis=-1)

    def model_data(self) -> ModelData:
        return ModelData(actors=self.actors, observations=self.observations,
                         frames=self.frames, faces=self.faces)


def generate(cfg: ScenarioConfig) -> SyntheticDataset:
    """Generate one synthetic dataset; deterministic given ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    actors = cfg.actor_ids()
    n_turns = cfg.n_turns
    turn = cfg.turn_duration_s
    transit = cfg.transit_fraction * turn

    places = rng.normal(0.0, cfg.place_location_std_m, size=(cfg.n_meeting_places, 2))

    # Per turn: -1 for own location, else place index.
    attendance = np.full((len(actors), n_turns), -1, dtype=int)
    dwell_pos = np.zeros((len(actors), n_turns, 2))
    half = cfg.area_extent_m / 2.0
    offset_radius = min(8.0, 0.25 * cfg.radius_median_m)
    for ai in range(len(actors)):
        for k in range(n_turns):
            if rng.uniform() < cfg.p_meet:
                p = int(rng.integers(cfg.n_meeting_places))
                attendance[ai, k] = p
                ang = rng.uniform(0.0, 2.0 * math.pi)
                rad = offset_radius * math.sqrt(rng.uniform())
                dwell_pos[ai, k] = places[p] + rad * np.array([math.cos(ang), math.sin(ang)])
            else:
                dwell_pos[ai, k] = rng.uniform(-half, half, size=2)

    # Waypoint knots: arrive by kT + transit, dwell until (k+1)T.
    knot_times = [0.0]
    for k in range(n_turns):
        if k > 0:
            knot_times.append(k * turn + transit)
        knot_times.append((k + 1) * turn)
    waypoint_times = np.array(knot_times)
    waypoints = {}
    for ai, a in enumerate(actors):
        pts = [dwell_pos[ai, 0]]
        for k in range(n_turns):
            if k > 0:
                pts.append(dwell_pos[ai, k])
            pts.append(dwell_pos[ai, k])
        waypoints[a] = np.array(pts)

    truth: list[ActivityInstance] = []
    ty = cfg.activity_type()
    for k in range(n_turns):
        dwell_start = k * turn + (transit if k > 0 else 0.0)
        dwell_end = (k + 1) * turn
        for p in range(cfg.n_meeting_places):
            members = [actors[ai] for ai in range(len(actors)) if attendance[ai, k] == p]
            if len(members) < 2:
                continue
            span = float(math.exp(rng.normal(math.log(cfg.span_median_s), cfg.span_log_std)))
            span = min(span, 0.95 * (dwell_end - dwell_start))
            t_start = float(rng.uniform(dwell_start, dwell_end - span))
            radius = float(math.exp(rng.normal(math.log(cfg.radius_median_m), cfg.radius_log_std)))
            radius = max(radius, offset_radius + 2.0)
            truth.append(ActivityInstance(
                type_id=ty.type_id,
                center=(float(places[p, 0]), float(places[p, 1])),
                radius=radius,
                t_start=t_start,
                span=span,
                participants=frozenset(members),
            ))
    truth.sort(key=lambda i: (i.t_start, i.key()))

    dataset = _emit_streams(cfg, rng, actors, waypoint_times, waypoints, tuple(truth))
    return dataset


def _emit_streams(cfg: ScenarioConfig, rng: np.random.Generator, actors: tuple[str, ...],
                  waypoint_times: np.ndarray, waypoints: Mapping[str, np.ndarray],
                  truth: tuple[ActivityInstance, ...]) -> SyntheticDataset:
    total = cfg.total_duration_s

    def true_pos(a: str, t: np.ndarray) -> np.ndarray:
        w = waypoints[a]
        return np.stack([np.interp(t, waypoint_times, w[:, 0]),
                         np.interp(t, waypoint_times, w[:, 1])], axis=-1)

    obs: list[GpsObservation] = []
    gps_t = np.arange(0.0, total, 1.0 / cfg.gps_rate_hz)
    noise_floor = max(cfg.gps_noise_std_m, 1e-6)
    for a in actors:
        pos = true_pos(a, gps_t)
        noisy = pos + rng.normal(0.0, cfg.gps_noise_std_m, size=pos.shape)
        for t, (x, y) in zip(gps_t, noisy):
            obs.append(GpsObservation(a, float(t), float(x), float(y), noise_floor))

    ty = cfg.activity_type()
    type_mean = np.asarray(ty.feature_mean)
    bg = cfg.model_params()
    bg_mean = np.asarray(bg.background_mean)
    frames: list[FrameRecord] = []
    frame_t = np.arange(0.0, total, 1.0 / cfg.frame_rate_hz)
    for a in actors:
        for t in frame_t:
            covered = any(a in i.participants and i.t_start <= t <= i.t_end for i in truth)
            mean = type_mean if covered else bg_mean
            feats = mean + rng.standard_normal(cfg.feature_dim)
            frames.append(FrameRecord(a, float(t), tuple(float(v) for v in feats),
                                      keypoint_count=int(rng.poisson(150))))

    faces: list[FaceDetection] = []
    margin = cfg.classifier_margin
    actor_index = {a: i for i, a in enumerate(actors)}
    for inst in truth:
        minutes = inst.span / 60.0
        participants = sorted(inst.participants)
        for subject in actors:
            rate = (cfg.face_rate_participant_per_min if subject in inst.participants
                    else cfg.face_rate_nonparticipant_per_min)
            count = int(rng.poisson(rate * minutes))
            observers = [p for p in participants if p != subject] or participants
            for _ in range(count):
                observer = observers[int(rng.integers(len(observers)))]
                t = float(rng.uniform(inst.t_start, inst.t_end))
                scores = np.zeros(len(actors))
                scores[actor_index[subject]] = margin
                faces.append(FaceDetection(observer, t, subject, tuple(scores)))
    faces.sort(key=lambda d: (d.t, d.observer))

    return SyntheticDataset(config=cfg, actors=actors, waypoint_times=waypoint_times,
                            waypoints=dict(waypoints), observations=tuple(obs),
                            frames=tuple(frames), faces=tuple(faces), truth=truth)


def inject_denial(ds: SyntheticDataset, windows: Sequence[tuple[str, float, float]],
                  ) -> SyntheticDataset:
    """Remove GPS observations inside the given (actor, t0, t1) windows."""
    def denied(o: GpsObservation) -> bool:
        return any(o.actor_id == a and t0 <= o.t <= t1 for a, t0, t1 in windows)

    kept = tuple(o for o in ds.observations if not denied(o))
    return replace(ds, observations=kept)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    """Detection quality of sampled configurations against ground truth."""

    n_true: int
    count_error_mean: float
    count_error_std: float
    precision: float
    recall: float
    f1: float
    iou_threshold: float
    absolute_counts: bool = False          # set when n_true == 0
    per_sample_counts: tuple[int, ...] = ()
    per_sample_errors: tuple[float, ...] = ()


def _disc_overlap_area(c1, r1, c2, r2) -> float:
    d = math.hypot(c1[0] - c2[0], c1[1] - c2[1])
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        r = min(r1, r2)
        return math.pi * r * r
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    a3 = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - a3


def cylinder_iou(a: ActivityInstance, b: ActivityInstance) -> float:
    """Product of temporal IoU and spatial disc IoU of two instances."""
    t_int = max(0.0, min(a.t_end, b.t_end) - max(a.t_start, b.t_start))
    t_uni = max(a.t_end, b.t_end) - min(a.t_start, b.t_start)
    t_iou = t_int / t_uni if t_uni > 0 else 0.0
    inter = _disc_overlap_area(a.center, a.radius, b.center, b.radius)
    union = math.pi * (a.radius**2 + b.radius**2) - inter
    s_iou = inter / union if union > 0 else 0.0
    return t_iou * s_iou


def greedy_match(detected: Sequence[ActivityInstance], truth: Sequence[ActivityInstance],
                 iou_threshold: float) -> list[tuple[int, int, float]]:
    """Greedy max-IoU matching; returns (detected idx, truth idx, iou)."""
    pairs = []
    for i, d in enumerate(detected):
        for j, t in enumerate(truth):
            iou = cylinder_iou(d, t)
            if iou >= iou_threshold:
                pairs.append((iou, i, j))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used_d: set[int] = set()
    used_t: set[int] = set()
    matches = []
    for iou, i, j in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        matches.append((i, j, iou))
    return matches


def evaluate(chains: ChainSamples, truth: Sequence[ActivityInstance],
             iou_threshold: float = 0.3) -> EvalReport:
    """Per-sample relative count error and greedy matching quality,
    averaged over post-burn-in samples.

    With an empty ground truth the count error is reported as the absolute
    detected count and flagged via ``absolute_counts``.
    """
    if not chains.samples:
        raise ValueError("chain holds no samples")
    truth = list(truth)
    n_true = len(truth)

    grouped: dict[tuple, tuple[int, Configuration]] = {}
    for s in chains.samples:
        key = s.config.key()
        count, _ = grouped.get(key, (0, s.config))
        grouped[key] = (count + 1, s.config)

    n_samples = len(chains.samples)
    counts = []
    errors = []
    prec = rec = f1 = 0.0
    for key in sorted(grouped):
        weight, config = grouped[key]
        w = weight / n_samples
        n_det = len(config)
        if n_true > 0:
            err = abs(n_det - n_true) / n_true
        else:
            err = float(n_det)
        counts.extend([n_det] * weight)
        errors.extend([err] * weight)
        matches = greedy_match(config.instances, truth, iou_threshold)
        p = len(matches) / n_det if n_det else (1.0 if n_true == 0 else 0.0)
        r = len(matches) / n_true if n_true else (1.0 if n_det == 0 else 0.0)
        f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        prec += w * p
        rec += w * r
        f1 += w * f

    errors_arr = np.array(errors)
    return EvalReport(
        n_true=n_true,
        count_error_mean=float(errors_arr.mean()),
        count_error_std=float(errors_arr.std()),
        precision=prec,
        recall=rec,
        f1=f1,
        iou_threshold=iou_threshold,
        absolute_counts=(n_true == 0),
        per_sample_counts=tuple(counts),
        per_sample_errors=tuple(float(e) for e in errors),
    )


# ---------------------------------------------------------------------------
# inference defaults and the location-std sweep
# ---------------------------------------------------------------------------

def inference_setup(cfg: ScenarioConfig) -> tuple[tuple[ActivityType, ...], OverlapMatrix, ModelParams]:
    """Model configuration used when inferring on a generated scenario."""
    return (cfg.activity_type(),), OverlapMatrix(), cfg.model_params()


def detection_benchmark(seed: int = 2026) -> ScenarioConfig:
    """Scenario for the detection-error-vs-place-spread experiment.

    Short turns keep the birth move's start-time draws productive; three
    meeting places with high attendance make the small-spread regime
    genuinely confusable while leaving well-separated places easy.
    """
    return ScenarioConfig(n_turns=4, turn_duration_s=120.0, n_meeting_places=3,
                          p_meet=0.8, gps_rate_hz=0.25, seed=seed)


def detection_hyper() -> GpHyperParams:
    """Trajectory prior for the detection benchmark.

    The short length scale keeps the posterior mean from ringing after the
    kilometer-scale jumps between turns; with the default 120 s scale the
    overshoot parks phantom activities on the transients.
    """
    return GpHyperParams(length_scale_s=60.0, signal_std_m=400.0)


def default_sweep_sampler(cfg: ScenarioConfig, n_iters: int = 10_000) -> SamplerConfig:
    """Sampler settings sized for the synthetic sweep on a small machine.

    Birth/death carry most of the weight: discovery happens through births
    at roughly correct participant/window combinations (centers are drawn
    near the participants' trajectories), then center/span/participant moves
    refine. The long burn-in absorbs the discovery phase.
    """
    from .sampler import MoveKind

    weights = ((MoveKind.BIRTH, 0.28), (MoveKind.DEATH, 0.28),
               (MoveKind.SPLIT, 0.005), (MoveKind.MERGE, 0.005),
               (MoveKind.TYPE, 0.01), (MoveKind.CENTER, 0.14),
               (MoveKind.RADIUS, 0.06), (MoveKind.SPAN, 0.08),
               (MoveKind.START_TIME, 0.06), (MoveKind.PARTICIPANTS, 0.16))
    return SamplerConfig(
        n_iters=n_iters,
        burn_in=min(4000, n_iters // 2),
        ensemble_refresh=500,
        n_grid=240,
        n_draws=12,
        radius_proposal_median_m=cfg.radius_median_m,
        radius_proposal_log_std=0.1,
        span_proposal_median_s=cfg.span_median_s,
        span_proposal_log_std=0.05,
        center_step_std_m=20.0,
        move_weights=weights,
    )


def two_actor_denial_scenario(seed: int = 0, meeting_start: float = 300.0,
                              meeting_end: float = 1000.0,
                              total_s: float = 1400.0,
                              gps_rate_hz: float = 0.5,
                              gps_noise_std_m: float = 30.0,
                              feature_dim: int = 4,
                              ) -> tuple[ModelData, ActivityInstance, ActivityType, ModelParams]:
    """Two actors share a long meeting; both lose GPS for the denial window.

    The localization benchmark: the meeting must be inferable from frame and
    face evidence alone, after which proximity conditioning should shrink the
    in-window positional uncertainty.
    """
    rng = np.random.default_rng(seed)
    cafe = np.array([50.0, -30.0])
    span = meeting_end - meeting_start
    knots_t = np.array([0.0, meeting_start - 60.0, meeting_start, meeting_end,
                        meeting_end + 60.0, total_s])
    paths = {
        "a": np.array([[-400.0, 250.0], [-380.0, 230.0], cafe + (3.0, 2.0),
                       cafe + (3.0, 2.0), [300.0, -400.0], [350.0, -420.0]]),
        "b": np.array([[500.0, 300.0], [470.0, 280.0], cafe - (4.0, 1.0),
                       cafe - (4.0, 1.0), [-250.0, -500.0], [-300.0, -520.0]]),
    }

    def pos(a, t):
        return np.stack([np.interp(t, knots_t, paths[a][:, 0]),
                         np.interp(t, knots_t, paths[a][:, 1])], axis=-1)

    denial = (meeting_start + 20.0, meeting_end - 80.0)
    obs = []
    gps_t = np.arange(0.0, total_s, 1.0 / gps_rate_hz)
    for a in ("a", "b"):
        p = pos(a, gps_t)
        noisy = p + rng.normal(0.0, gps_noise_std_m, size=p.shape)
        for t, (x, y) in zip(gps_t, noisy):
            if denial[0] <= t <= denial[1]:
                continue
            obs.append(GpsObservation(a, float(t), float(x), float(y), gps_noise_std_m))

    ty = ActivityType(type_id=MEETING_TYPE_ID, span_median_s=span, span_log_std=0.1,
                      radius_median_m=30.0, radius_log_std=0.2,
                      feature_mean=(1.5,) * feature_dim, feature_var=(1.0,) * feature_dim,
                      face_rate_participant_per_min=6.0,
                      face_rate_nonparticipant_per_min=0.2,
                      excursion_rate_per_s=0.02)
    params = ModelParams(coverage_penalty=1.0, background_mean=(0.0,) * feature_dim,
                         background_var=(1.0,) * feature_dim)
    inst = ActivityInstance(ty.type_id, (float(cafe[0]), float(cafe[1])), 30.0,
                            meeting_start, span, frozenset(("a", "b")))

    frames = []
    for a in ("a", "b"):
        for t in np.arange(0.0, total_s, 10.0):
            covered = meeting_start <= t <= meeting_end
            mean = np.asarray(ty.feature_mean) if covered else np.zeros(feature_dim)
            feats = mean + rng.standard_normal(feature_dim)
            frames.append(FrameRecord(a, float(t), tuple(float(v) for v in feats),
                                      keypoint_count=int(rng.poisson(150))))
    faces = []
    minutes = span / 60.0
    for subject, observer in (("a", "b"), ("b", "a")):
        for _ in range(int(rng.poisson(ty.face_rate_participant_per_min * minutes))):
            t = float(rng.uniform(meeting_start, meeting_end))
            scores = np.zeros(2)
            scores[("a", "b").index(subject)] = 2.5
            faces.append(FaceDetection(observer, t, subject, tuple(scores)))
    faces.sort(key=lambda d: (d.t, d.observer))

    data = ModelData(actors=("a", "b"), observations=tuple(obs), frames=tuple(frames),
                     faces=tuple(faces))
    return data, inst, ty, params


def corrupt_face_labels(ds: SyntheticDataset, fraction: float, seed: int,
                        margin: float | None = None, residual: float = 0.5,
                        ) -> tuple[SyntheticDataset, tuple[str, ...]]:
    """Flip a fraction of face labels to a wrong identity.

    A corrupted detection scores the wrong identity at the full classifier
    margin and keeps ``residual * margin`` on the true identity (occlusion
    degrades the true signal rather than erasing it). The observer can never
    be the wrong identity, faces in one's own egocentric stream belong to
    someone else. Returns the corrupted dataset and the true identity per
    detection, aligned with the corrupted stream order.
    """
    rng = np.random.default_rng(seed)
    margin = ds.config.classifier_margin if margin is None else margin
    actor_index = {a: i for i, a in enumerate(ds.actors)}
    corrupted = []
    true_ids = []
    for det in ds.faces:
        true_ids.append(det.detected_id)
        if rng.uniform() < fraction:
            others = [a for a in ds.actors if a != det.detected_id and a != det.observer]
            wrong = others[int(rng.integers(len(others)))]
            scores = np.zeros(len(ds.actors))
            scores[actor_index[wrong]] = margin
            scores[actor_index[det.detected_id]] = residual * margin
            corrupted.append(FaceDetection(det.observer, det.t, wrong,
                                           tuple(float(v) for v in scores)))
        else:
            corrupted.append(det)
    return replace(ds, faces=tuple(corrupted)), tuple(true_ids)


@dataclass(frozen=True)
class SweepCell:
    location_std_m: float
    trial: int
    seed: int
    n_true: int
    count_error_mean: float
    precision: float
    recall: float
    f1: float
    error: str | None = None


@dataclass(frozen=True)
class SweepCurve:
    cells: tuple[SweepCell, ...]

    def aggregate(self) -> list[tuple[float, float, float, int]]:
        """Per location std: (std_m, mean error, std of error, n trials)."""
        by_std: dict[float, list[float]] = {}
        for c in self.cells:
            if c.error is None and c.n_true > 0:
                by_std.setdefault(c.location_std_m, []).append(c.count_error_mean)
        out = []
        for std in sorted(by_std, reverse=True):
            vals = np.array(by_std[std])
            out.append((std, float(vals.mean()), float(vals.std()), len(vals)))
        return out


def _cell_seed(base_seed: int, std_index: int, trial: int) -> int:
    return (base_seed * 1_000_003 + std_index * 10_007 + trial * 101 + 17) % (2**31 - 1)


def run_sweep_cell(cfg: ScenarioConfig, hyper: GpHyperParams, sampler: SamplerConfig,
                   iou_threshold: float = 0.3) -> SweepCell:
    """Generate, infer and evaluate one sweep cell."""
    try:
        ds = generate(cfg)
        types, overlap, params = inference_setup(cfg)
        chains = run_chain(ds.model_data(), types, overlap, params, hyper, sampler,
                           seed=cfg.seed)
        report = evaluate(chains, ds.truth, iou_threshold)
        return SweepCell(cfg.place_location_std_m, cfg.seed, cfg.seed, report.n_true,
                         report.count_error_mean, report.precision, report.recall, report.f1)
    except Exception as exc:  # cell failures must not abort the sweep
        return SweepCell(cfg.place_location_std_m, cfg.seed, cfg.seed, -1,
                         math.nan, math.nan, math.nan, math.nan, error=str(exc))


def sweep_location_std(base: ScenarioConfig, stds: Sequence[float], n_trials: int,
                       hyper: GpHyperParams | None = None,
                       sampler: SamplerConfig | None = None,
                       iou_threshold: float = 0.3,
                       max_workers: int | None = None) -> SweepCurve:
    """Mean relative count error as a function of meeting-place spread.

    Runs the full generate/infer/evaluate pipeline per (std, trial) cell;
    cells are independent, deterministic and run in parallel up to the
    thread budget. Per-cell failures are recorded, not raised.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    hyper = hyper or detection_hyper()
    cfgs = []
    for si, std in enumerate(stds):
        for trial in range(n_trials):
            seed = _cell_seed(base.seed, si, trial)
            cfgs.append((replace(base, place_location_std_m=float(std), seed=seed), trial))
    sampler_by_cfg = [(cfg, sampler or default_sweep_sampler(cfg)) for cfg, _ in cfgs]

    workers = max_workers if max_workers is not None else thread_budget()
    cells: list[SweepCell]
    if workers > 1 and len(sampler_by_cfg) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_sweep_worker,
                                  [(cfg, hyper, smp, iou_threshold) for cfg, smp in sampler_by_cfg]))
    else:
        cells = [run_sweep_cell(cfg, hyper, smp, iou_threshold) for cfg, smp in sampler_by_cfg]
    fixed = [replace(cell, trial=trial) for cell, (_, trial) in zip(cells, cfgs)]
    return SweepCurve(tuple(fixed))


def _sweep_worker(args) -> SweepCell:
    cfg, hyper, smp, iou = args
    return run_sweep_cell(cfg, hyper, smp, iou)
