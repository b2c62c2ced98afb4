"""Activity-aware summarization over frames and sampled configurations.

Keyframe selection counts, for every frame, the (sample, instance) pairs
covering it; low-vote frames are dropped and the rest are picked by
farthest-point sampling under a pseudometric that mixes activity
disagreement, feature distance, time distance and actor identity. Map
summaries place each activity's keyframes inside its disc, again by FPS over
a candidate lattice. Video summaries walk a trellis of per-actor frame
blocks ("super nodes") choosing a minimum-cost path under hard constraints
on time window, location, temporal jumps and per-actor run lengths.

Everything here is deterministic: ties break by earliest time, then actor
id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .gp import GpPosterior
from .model import ActivityInstance, Configuration, FrameRecord

__all__ = [
    "FrameDistanceWeights", "TrellisWeights", "SummaryFrame", "MapPlacement", "Summary",
    "TrellisContext", "activity_votes", "frame_distance", "frame_distance_matrix",
    "select_keyframes", "map_summary", "node_cost", "edge_cost", "build_trellis_context",
    "summarize_video",
]


@dataclass(frozen=True)
class FrameDistanceWeights:
    """Weights of the keyframe pseudometric; scales normalize the feature
    and time components to comparable magnitudes."""

    w_activity: float = 1.0
    w_feature: float = 1.0
    w_time: float = 1.0
    w_identity: float = 1.0
    feature_scale: float = 1.0
    time_scale_s: float = 60.0

    def __post_init__(self) -> None:
        ws = (self.w_activity, self.w_feature, self.w_time, self.w_identity)
        if any(w < 0 for w in ws):
            raise ConfigurationError("distance weights must be non-negative")
        if not any(w > 0 for w in ws):
            raise ConfigurationError("at least one distance weight must be positive")
        if not (self.feature_scale > 0 and self.time_scale_s > 0):
            raise ConfigurationError("normalization scales must be positive")


@dataclass(frozen=True)
class TrellisWeights:
    """Node/edge cost weights and hard constraints of the video summary.

    Node cost: ((1 - kp/kp_max) * w_quality + (1 - has_face) * w_face
    + (1 - in_activity) * w_activity) * actor weight. Identified faces and
    in-activity frames are discounts, so good frames cost less.

    Edge cost: ((1 - matches/match_max) * w_matches
    + (1 - same face) * w_same_face + (1 - same activity) * w_same_activity
    + spatial_gap_m * w_spatial + time_gap_s * w_temporal), multiplied by
    ``w_new_activity`` when the target frame opens an activity not yet shown.

    Constraints: c1 output window [t_begin, t_end]; c2 permitted/prohibited
    location discs; c3 max temporal jump between successive output frames;
    c4 min/max consecutive output frames per actor.
    """

    w_quality: float = 1.0
    w_face: float = 1.0
    w_activity: float = 1.0
    actor_weights: tuple[tuple[str, float], ...] = ()
    w_matches: float = 1.0
    w_same_face: float = 1.0
    w_same_activity: float = 1.0
    w_spatial: float = 0.01
    w_temporal: float = 0.01
    w_new_activity: float = 0.5
    supernode_size: int = 3
    t_begin: float = -math.inf
    t_end: float = math.inf
    permitted_zones: tuple[tuple[float, float, float], ...] = ()
    prohibited_zones: tuple[tuple[float, float, float], ...] = ()
    max_jump_s: float = math.inf
    min_run: int = 1
    max_run: int = 10**9

    def __post_init__(self) -> None:
        if self.supernode_size < 1:
            raise ConfigurationError("supernode_size must be at least 1")
        if not (1 <= self.min_run <= self.max_run):
            raise ConfigurationError("run bounds must satisfy 1 <= min_run <= max_run")
        if self.max_jump_s <= 0:
            raise ConfigurationError("max_jump_s must be positive")

    def actor_weight(self, actor_id: str) -> float:
        return dict(self.actor_weights).get(actor_id, 1.0)


@dataclass(frozen=True)
class SummaryFrame:
    actor_id: str
    t: float
    votes: int
    source_index: int


@dataclass(frozen=True)
class MapPlacement:
    instance_index: int
    center: tuple[float, float]
    radius: float
    actor_id: str
    t: float
    x: float
    y: float


@dataclass(frozen=True)
class Summary:
    frames: tuple[SummaryFrame, ...]
    placements: tuple[MapPlacement, ...] = ()
    flags: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# votes and the frame pseudometric
# ---------------------------------------------------------------------------

def _dedup_configs(samples: Sequence[Configuration]) -> list[tuple[int, Configuration]]:
    grouped: dict[tuple, tuple[int, Configuration]] = {}
    for c in samples:
        key = c.key()
        count, _ = grouped.get(key, (0, c))
        grouped[key] = (count + 1, c)
    return [grouped[k] for k in sorted(grouped)]


def _covers(inst: ActivityInstance, frame: FrameRecord) -> bool:
    return frame.actor_id in inst.participants and inst.t_start <= frame.t <= inst.t_end


def activity_votes(samples: Sequence[Configuration], frames: Sequence[FrameRecord]) -> np.ndarray:
    """Votes per frame: covering (sample, instance) pairs, counted over all
    configuration samples."""
    votes = np.zeros(len(frames), dtype=int)
    if not frames:
        return votes
    f_actor = np.array([f.actor_id for f in frames])
    f_t = np.array([f.t for f in frames])
    for weight, config in _dedup_configs(samples):
        for inst in config.instances:
            member = np.isin(f_actor, sorted(inst.participants))
            votes += weight * (member & (f_t >= inst.t_start) & (f_t <= inst.t_end))
    return votes


def _coverage_rows(samples: Sequence[Configuration], frames: Sequence[FrameRecord],
                   ) -> tuple[np.ndarray, np.ndarray]:
    """(weights (K,), coverage (K, F)) over weighted (sample, instance) rows."""
    rows = []
    weights = []
    f_actor = np.array([f.actor_id for f in frames]) if frames else np.zeros(0, dtype=object)
    f_t = np.array([f.t for f in frames]) if frames else np.zeros(0)
    for weight, config in _dedup_configs(samples):
        for inst in config.instances:
            member = np.isin(f_actor, sorted(inst.participants))
            rows.append(member & (f_t >= inst.t_start) & (f_t <= inst.t_end))
            weights.append(weight)
    if not rows:
        return np.zeros(0), np.zeros((0, len(frames)), dtype=bool)
    return np.array(weights, float), np.array(rows)


def frame_distance(f_a: FrameRecord, f_b: FrameRecord, samples: Sequence[Configuration],
                   weights: FrameDistanceWeights) -> float:
    """Pseudometric between two frames.

    The activity term is the fraction of (sample, instance) pairs covering
    exactly one of the two frames; the remaining terms are scaled L2 feature
    distance, scaled absolute time difference and an actor-identity
    indicator.
    """
    disagree = 0.0
    total = 0.0
    for weight, config in _dedup_configs(samples):
        for inst in config.instances:
            total += weight
            if _covers(inst, f_a) != _covers(inst, f_b):
                disagree += weight
    d_ac = disagree / total if total > 0 else 0.0
    feat = math.dist(f_a.features, f_b.features) / weights.feature_scale
    dt = abs(f_a.t - f_b.t) / weights.time_scale_s
    ident = 1.0 if f_a.actor_id != f_b.actor_id else 0.0
    return (weights.w_activity * d_ac + weights.w_feature * feat
            + weights.w_time * dt + weights.w_identity * ident)


def frame_distance_matrix(frames: Sequence[FrameRecord], samples: Sequence[Configuration],
                          weights: FrameDistanceWeights) -> np.ndarray:
    """Pairwise pseudometric matrix over frames."""
    n = len(frames)
    w, rows = _coverage_rows(samples, frames)
    total = float(w.sum())
    if total > 0:
        rw = rows * w[:, None]
        co = rw.T.astype(float) @ rows.astype(float)      # weighted co-coverage
        counts = rw.sum(axis=0)
        xor = counts[:, None] + counts[None, :] - 2.0 * co
        d_ac = xor / total
    else:
        d_ac = np.zeros((n, n))
    feats = np.array([f.features for f in frames], float)
    diff = feats[:, None, :] - feats[None, :, :]
    feat = np.sqrt((diff**2).sum(axis=2)) / weights.feature_scale
    ts = np.array([f.t for f in frames])
    dt = np.abs(ts[:, None] - ts[None, :]) / weights.time_scale_s
    actors = np.array([f.actor_id for f in frames])
    ident = (actors[:, None] != actors[None, :]).astype(float)
    d = (weights.w_activity * d_ac + weights.w_feature * feat
         + weights.w_time * dt + weights.w_identity * ident)
    np.fill_diagonal(d, 0.0)
    return d


# ---------------------------------------------------------------------------
# keyframe selection (farthest-point sampling)
# ---------------------------------------------------------------------------

def select_keyframes(frames: Sequence[FrameRecord], k: int, samples: Sequence[Configuration],
                     weights: FrameDistanceWeights, vote_floor: float = 0.1) -> Summary:
    """FPS keyframe selection over vote-surviving frames.

    Frames with fewer than ``vote_floor * max votes`` are dropped first. The
    seed frame has maximal votes (tie: earliest time, then actor id); each
    further pick maximizes the minimum distance to the already-selected set.
    The output is reordered by time.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to select from")
    votes = activity_votes(samples, frames)
    flags: list[str] = []
    max_votes = int(votes.max()) if len(votes) else 0
    surviving = [i for i in range(len(frames)) if votes[i] >= vote_floor * max_votes]
    if not surviving:
        surviving = list(range(len(frames)))
        flags.append("vote floor removed every frame; falling back to all frames")
    if k > len(surviving):
        flags.append(f"requested {k} keyframes but only {len(surviving)} frames survive")
        k = len(surviving)

    sub = [frames[i] for i in surviving]
    dist = frame_distance_matrix(sub, samples, weights)

    order = sorted(range(len(sub)), key=lambda i: (-votes[surviving[i]], sub[i].t, sub[i].actor_id))
    selected = [order[0]]
    min_dist = dist[order[0]].copy()
    while len(selected) < k:
        best = None
        best_key = None
        for i in range(len(sub)):
            if i in selected:
                continue
            key = (-min_dist[i], sub[i].t, sub[i].actor_id)
            if best_key is None or key < best_key:
                best, best_key = i, key
        assert best is not None
        selected.append(best)
        min_dist = np.minimum(min_dist, dist[best])

    chosen = sorted(selected, key=lambda i: (sub[i].t, sub[i].actor_id))
    out = tuple(SummaryFrame(sub[i].actor_id, sub[i].t, int(votes[surviving[i]]), surviving[i])
                for i in chosen)
    return Summary(frames=out, flags=tuple(flags))


def _disc_lattice(radius: float, steps: int = 8) -> np.ndarray:
    """Candidate placement offsets covering the disc, center included."""
    axis = np.linspace(-radius, radius, 2 * steps + 1)
    xx, yy = np.meshgrid(axis, axis)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    keep = np.einsum("ij,ij->i", pts, pts) <= radius**2 + 1e-9
    return pts[keep]


def _lattice_fps(radius: float, count: int) -> np.ndarray:
    """FPS positions inside a disc, seeded at the exact center."""
    pts = _disc_lattice(radius)
    order_keys = [(float(x), float(y)) for x, y in pts]
    center_idx = int(np.argmin(np.einsum("ij,ij->i", pts, pts)))
    selected = [center_idx]
    min_dist = np.linalg.norm(pts - pts[center_idx], axis=1)
    while len(selected) < count:
        best = None
        best_key = None
        for i in range(len(pts)):
            if i in selected:
                continue
            key = (-float(min_dist[i]), order_keys[i])
            if best_key is None or key < best_key:
                best, best_key = i, key
        assert best is not None
        selected.append(best)
        min_dist = np.minimum(min_dist, np.linalg.norm(pts - pts[best], axis=1))
    return pts[selected]


def _assign_to_instance(frame: SummaryFrame, config: Configuration) -> int | None:
    """Index of the covering instance, deepest embedding first."""
    best = None
    best_key = None
    for idx, inst in enumerate(config.instances):
        if frame.actor_id not in inst.participants:
            continue
        if not (inst.t_start <= frame.t <= inst.t_end):
            continue
        depth = min(frame.t - inst.t_start, inst.t_end - frame.t)
        key = (-depth, inst.t_start, idx)
        if best_key is None or key < best_key:
            best, best_key = idx, key
    return best


def map_summary(summary: Summary, chains) -> tuple[MapPlacement, ...]:
    """Place keyframes inside their activity discs on the map.

    Uses the maximum-score sampled configuration; each keyframe goes to its
    covering instance (deepest embedding, ties to the earliest start) and
    positions inside each disc are spread by FPS over a uniform lattice,
    seeded at the disc center.
    """
    best = chains.best()
    config: Configuration = best.config
    if len(config) == 0:
        raise ValueError("maximum-score configuration holds no instances")
    by_instance: dict[int, list[SummaryFrame]] = {}
    for f in summary.frames:
        idx = _assign_to_instance(f, config)
        if idx is not None:
            by_instance.setdefault(idx, []).append(f)
    placements: list[MapPlacement] = []
    for idx in sorted(by_instance):
        inst = config.instances[idx]
        members = sorted(by_instance[idx], key=lambda f: (f.t, f.actor_id))
        n_slots = min(len(members), len(_disc_lattice(inst.radius)))
        offsets = _lattice_fps(inst.radius, n_slots)
        for i, f in enumerate(members):
            off = offsets[i % len(offsets)]
            placements.append(MapPlacement(idx, inst.center, inst.radius, f.actor_id, f.t,
                                           inst.center[0] + float(off[0]),
                                           inst.center[1] + float(off[1])))
    return tuple(placements)


# ---------------------------------------------------------------------------
# trellis video summarization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrellisContext:
    """Dataset statistics and references the trellis costs read.

    ``kp_max`` and ``match_max`` are the quality normalizers; a zero value
    disables the corresponding term (flagged). ``mean_paths`` holds each
    actor's posterior-mean trajectory on ``grid_times`` for spatial gaps and
    location constraints.
    """

    config: Configuration
    kp_max: float
    match_max: float
    grid_times: np.ndarray
    mean_paths: Mapping[str, np.ndarray]
    matches: Mapping[tuple[str, float, str, float], float]
    flags: tuple[str, ...] = ()

    def position(self, actor_id: str, t: float) -> tuple[float, float]:
        path = self.mean_paths[actor_id]
        x = float(np.interp(t, self.grid_times, path[:, 0]))
        y = float(np.interp(t, self.grid_times, path[:, 1]))
        return x, y

    def match_count(self, f_a: FrameRecord, f_b: FrameRecord) -> float:
        key = (f_a.actor_id, f_a.t, f_b.actor_id, f_b.t)
        rkey = (f_b.actor_id, f_b.t, f_a.actor_id, f_a.t)
        return float(self.matches.get(key, self.matches.get(rkey, 0.0)))


def build_trellis_context(frames: Sequence[FrameRecord], chains,
                          posteriors: Mapping[str, GpPosterior],
                          matches: Mapping[tuple[str, float, str, float], float] | None = None,
                          ) -> TrellisContext:
    """Normalizers, reference configuration and mean paths for trellis costs."""
    config = chains.best().config
    kp_max = float(max((f.keypoint_count for f in frames), default=0))
    matches = dict(matches or {})
    match_max = float(max(matches.values(), default=0.0))
    flags = []
    if kp_max == 0:
        flags.append("keypoint normalizer is zero; quality term disabled")
    if match_max == 0:
        flags.append("match normalizer is zero; match term disabled")
    grid_times = None
    mean_paths = {}
    for a, post in posteriors.items():
        if grid_times is None:
            grid_times = post.grid.times
        mean_paths[a] = np.asarray(post.mean)
    if grid_times is None:
        raise ValueError("at least one actor posterior required")
    return TrellisContext(config=config, kp_max=kp_max, match_max=match_max,
                          grid_times=grid_times, mean_paths=mean_paths,
                          matches=matches, flags=tuple(flags))


def _identified_ids(frame: FrameRecord) -> frozenset[str]:
    return frozenset(d.detected_id for d in frame.face_detections if d.detected_id)


def _frame_instance(frame: FrameRecord, config: Configuration) -> int | None:
    best = None
    best_key = None
    for idx, inst in enumerate(config.instances):
        if _covers(inst, frame):
            depth = min(frame.t - inst.t_start, inst.t_end - frame.t)
            key = (-depth, inst.t_start, idx)
            if best_key is None or key < best_key:
                best, best_key = idx, key
    return best


def node_cost(frame: FrameRecord, ctx: TrellisContext, weights: TrellisWeights) -> float:
    """Per-frame cost; zero for a top-quality, identified, in-activity frame."""
    quality = (1.0 - frame.keypoint_count / ctx.kp_max) if ctx.kp_max > 0 else 0.0
    has_face = 1.0 if _identified_ids(frame) else 0.0
    in_activity = 1.0 if _frame_instance(frame, ctx.config) is not None else 0.0
    cost = (quality * weights.w_quality
            + (1.0 - has_face) * weights.w_face
            + (1.0 - in_activity) * weights.w_activity)
    return cost * weights.actor_weight(frame.actor_id)


def edge_cost(f_a: FrameRecord, f_b: FrameRecord, ctx: TrellisContext,
              weights: TrellisWeights, shown_activities: frozenset[int] = frozenset()) -> float:
    """Transition cost between two output frames.

    ``shown_activities`` holds instance indices already represented in the
    selected prefix; a target frame opening a new activity multiplies the
    cost by ``w_new_activity``.
    """
    if ctx.match_max > 0:
        match_term = (1.0 - ctx.match_count(f_a, f_b) / ctx.match_max) * weights.w_matches
    else:
        match_term = 0.0
    same_face = 1.0 if (_identified_ids(f_a) & _identified_ids(f_b)) else 0.0
    ia = _frame_instance(f_a, ctx.config)
    ib = _frame_instance(f_b, ctx.config)
    same_activity = 1.0 if (ia is not None and ia == ib) else 0.0
    pa = ctx.position(f_a.actor_id, f_a.t)
    pb = ctx.position(f_b.actor_id, f_b.t)
    spatial = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
    temporal = abs(f_a.t - f_b.t)
    cost = (match_term
            + (1.0 - same_face) * weights.w_same_face
            + (1.0 - same_activity) * weights.w_same_activity
            + spatial * weights.w_spatial
            + temporal * weights.w_temporal)
    new_activity = ib is not None and ib not in shown_activities
    return cost * (weights.w_new_activity if new_activity else 1.0)


def _location_ok(frame: FrameRecord, ctx: TrellisContext, weights: TrellisWeights) -> bool:
    x, y = ctx.position(frame.actor_id, frame.t)
    for cx, cy, r in weights.prohibited_zones:
        if math.hypot(x - cx, y - cy) <= r:
            return False
    if weights.permitted_zones:
        return any(math.hypot(x - cx, y - cy) <= r for cx, cy, r in weights.permitted_zones)
    return True


def _best_node_path(node: Sequence[FrameRecord], prev: FrameRecord | None,
                    ctx: TrellisContext, weights: TrellisWeights,
                    shown: frozenset[int], min_len: int, max_len: int,
                    ) -> tuple[float, tuple[int, ...]] | None:
    """Minimum-cost forward path through one super node.

    States are partial index tuples; costs include the entering edge from
    ``prev`` (when present), node costs and internal edges. Among equal-cost
    paths the lexicographically smallest index tuple wins. Exact for the
    small supernode sizes used here.
    """
    q = len(node)
    max_len = min(max_len, q)
    if max_len < 1:
        return None
    best: tuple[float, tuple[int, ...]] | None = None
    # frontier: partial paths ending at index i with length L
    frontier: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {}
    for i in range(q):
        if prev is not None and abs(node[i].t - prev.t) > weights.max_jump_s:
            continue
        cost = node_cost(node[i], ctx, weights)
        if prev is not None:
            cost += edge_cost(prev, node[i], ctx, weights, shown)
        _update(frontier, (i, 1), cost, (i,))
    for length in range(1, max_len):
        items = sorted((k, v) for k, v in frontier.items() if k[1] == length)
        for (i, _), (cost, path) in items:
            for j in range(i + 1, q):
                if node[j].t < node[i].t:
                    continue
                if abs(node[j].t - node[i].t) > weights.max_jump_s:
                    continue
                step = node_cost(node[j], ctx, weights) + edge_cost(node[i], node[j], ctx,
                                                                    weights, shown)
                _update(frontier, (j, length + 1), cost + step, path + (j,))
    for (i, length), (cost, path) in sorted(frontier.items()):
        if length < min(min_len, max_len):
            continue
        if best is None or (cost, path) < best:
            best = (cost, path)
    return best


def _update(frontier: dict, key: tuple[int, int], cost: float, path: tuple[int, ...]) -> None:
    cur = frontier.get(key)
    if cur is None or (cost, path) < cur:
        frontier[key] = (cost, path)


def summarize_video(frames: Sequence[FrameRecord], chains, weights: TrellisWeights,
                    t_out: int, posteriors: Mapping[str, GpPosterior],
                    matches: Mapping[tuple[str, float, str, float], float] | None = None,
                    ) -> Summary:
    """Select an ordered cross-actor frame sequence of at most ``t_out``
    frames satisfying all trellis constraints.

    At each step one super node (up to ``supernode_size`` eligible frames
    per actor at or after the current time) is evaluated per actor; the one
    whose internal minimum-cost path is cheapest is appended. Runs of
    consecutive same-actor output frames are kept within
    [``min_run``, ``max_run``]; a run left shorter than ``min_run`` because
    candidates ran out is truncated from the output.
    """
    if t_out < 1:
        raise ValueError("t_out must be at least 1")
    ctx = build_trellis_context(frames, chains, posteriors, matches)
    flags = list(ctx.flags)

    by_actor: dict[str, list[FrameRecord]] = {}
    for f in sorted(frames, key=lambda f: (f.t, f.actor_id)):
        if not (weights.t_begin <= f.t <= weights.t_end):
            continue
        if not _location_ok(f, ctx, weights):
            continue
        by_actor.setdefault(f.actor_id, []).append(f)
    if not by_actor:
        return Summary(frames=(), flags=tuple(flags + ["no frames satisfy the constraints"]))

    actors = sorted(by_actor)
    all_votes = activity_votes([s.config for s in chains.samples], frames)
    votes_lookup = {(f.actor_id, f.t): int(v) for f, v in zip(frames, all_votes)}
    out: list[FrameRecord] = []
    shown: frozenset[int] = frozenset()
    cur_time = -math.inf
    last_actor: str | None = None
    run_len = 0

    while len(out) < t_out:
        remaining = t_out - len(out)
        obligated = last_actor is not None and 0 < run_len < weights.min_run
        if not obligated and remaining < weights.min_run:
            break
        best_choice = None  # (cost, first_t, actor, path frames)
        for a in actors:
            if obligated and a != last_actor:
                continue
            if a == last_actor and run_len >= weights.max_run:
                continue
            eligible = [f for f in by_actor[a]
                        if f.t > cur_time or (not out and f.t >= cur_time)]
            if out and math.isfinite(weights.max_jump_s):
                eligible = [f for f in eligible if f.t - out[-1].t <= weights.max_jump_s]
            node = eligible[:weights.supernode_size]
            if not node:
                continue
            if a == last_actor:
                need = max(weights.min_run - run_len, 1)
                cap = min(weights.max_run - run_len, weights.supernode_size, remaining)
            else:
                need = weights.min_run
                cap = min(weights.max_run, weights.supernode_size, remaining)
            if cap < 1:
                continue
            found = _best_node_path(node, out[-1] if out else None, ctx, weights, shown,
                                    min_len=need, max_len=cap)
            if found is None:
                continue
            cost, path = found
            key = (cost, node[path[0]].t, a)
            if best_choice is None or key < best_choice[0]:
                best_choice = (key, a, [node[i] for i in path])
        if best_choice is None:
            break
        _, actor, path_frames = best_choice
        for f in path_frames:
            out.append(f)
            idx = _frame_instance(f, ctx.config)
            if idx is not None:
                shown = shown | {idx}
        run_len = run_len + len(path_frames) if actor == last_actor else len(path_frames)
        last_actor = actor
        cur_time = out[-1].t

    # c4: a trailing run cut short by exhaustion is dropped entirely.
    if out and weights.min_run > 1:
        tail = 1
        while tail < len(out) and out[-tail - 1].actor_id == out[-1].actor_id:
            tail += 1
        if tail < weights.min_run:
            flags.append("trailing run below min_run truncated")
            out = out[:-tail]

    frame_index = {(f.actor_id, f.t): i for i, f in enumerate(frames)}
    sel = tuple(SummaryFrame(f.actor_id, f.t, votes_lookup.get((f.actor_id, f.t), 0),
                             frame_index.get((f.actor_id, f.t), -1))
                for f in out)
    return Summary(frames=sel, flags=tuple(flags))
