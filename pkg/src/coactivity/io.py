"""Stream loading, run configuration, and artifact persistence.

File formats (all versioned by a leading ``#`` comment for CSV and a
``version`` field for JSON):

  * GPS CSV: ``actor,t,x,y,noise_std`` in seconds/meters, or
    ``actor,t,lat,lon,noise_std`` with ``coordinate_frame: "wgs84"`` in the
    run config (converted once to a local planar frame).
  * Frame CSV: ``actor,t,kp_count,f0..f{d-1}``.
  * Face CSV: ``observer,t,detected_id,score_0..score_{n-1}``; an empty
    ``detected_id`` means unrecognized; score columns are optional and are
    aligned with the actor registry order.
  * Match CSV: ``actor_i,t_i,actor_j,t_j,matches``.
  * Chains: one JSON object per line, first line a header record; a sidecar
    manifest carries seed, config hash and acceptance statistics.

All writes are atomic (temp file + rename). Floats are serialized with
``repr``, which round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__ as _pkg_version
from .errors import ConfigurationError, DataError
from .gp import GpHyperParams, GpsObservation
from .model import (ActivityInstance, ActivityType, Configuration, FaceDetection,
                    FrameRecord, ModelData, ModelParams, OverlapMatrix)
from .sampler import ChainSamples, ConfigSample, MoveKind, SamplerConfig
from .synthetic import ScenarioConfig, SyntheticDataset

EARTH_RADIUS_M = 6_371_000.0
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------

def atomic_write_text(path: str | Path, text: str) -> None:
    """Write-then-rename so partial outputs are never observed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    return repr(float(value))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: "RunConfig") -> str:
    return hashlib.sha256(canonical_json(config.to_dict()).encode()).hexdigest()


def latlon_to_local(lat: float, lon: float, origin: tuple[float, float]) -> tuple[float, float]:
    """Equirectangular projection about the origin, in meters."""
    lat0, lon0 = origin
    x = math.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = math.radians(lat - lat0) * EARTH_RADIUS_M
    return x, y


def _read_csv(path: str | Path, expected_header: Sequence[str], min_cols: int | None = None,
              ) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    rows: list[tuple[int, list[str]]] = []
    header: list[str] | None = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw or (raw[0].startswith("#")):
                continue
            if header is None:
                header = [c.strip() for c in raw]
                need = list(expected_header[:min_cols] if min_cols else expected_header)
                if header[:len(need)] != need:
                    raise DataError(f"{path}:{lineno}: expected header starting with "
                                    f"{','.join(need)}, got {','.join(header)}")
                continue
            rows.append((lineno, raw))
    if header is None:
        raise DataError(f"{path}: missing header row")
    return header, rows


def _csv_text(comment: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = _io.StringIO()
    buf.write(f"# {comment} version={FORMAT_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# stream readers/writers
# ---------------------------------------------------------------------------

def save_gps_csv(path: str | Path, observations: Sequence[GpsObservation]) -> None:
    rows = ((o.actor_id, _fmt(o.t), _fmt(o.x), _fmt(o.y), _fmt(o.noise_std))
            for o in sorted(observations, key=lambda o: (o.t, o.actor_id)))
    atomic_write_text(path, _csv_text("coactivity gps", ("actor", "t", "x", "y", "noise_std"), rows))


def load_gps_csv(path: str | Path, wgs84: bool = False,
                 origin: tuple[float, float] | None = None,
                 ) -> tuple[tuple[GpsObservation, ...], tuple[float, float] | None]:
    """GPS stream; with ``wgs84`` the lat/lon columns are projected to a
    local planar frame about ``origin`` (default: stream centroid)."""
    header = ("actor", "t", "lat", "lon", "noise_std") if wgs84 else ("actor", "t", "x", "y", "noise_std")
    _, rows = _read_csv(path, ("actor", "t"), min_cols=2)
    parsed = []
    for lineno, raw in rows:
        if len(raw) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(raw)}")
        try:
            parsed.append((raw[0], float(raw[1]), float(raw[2]), float(raw[3]), float(raw[4]), lineno))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if wgs84:
        if origin is None:
            lats = [p[2] for p in parsed]
            lons = [p[3] for p in parsed]
            origin = (sum(lats) / len(lats), sum(lons) / len(lons)) if parsed else (0.0, 0.0)
        obs = []
        for actor, t, lat, lon, noise, lineno in parsed:
            x, y = latlon_to_local(lat, lon, origin)
            obs.append(_make_obs(actor, t, x, y, noise, path, lineno))
        return tuple(sorted(obs, key=lambda o: (o.t, o.actor_id))), origin
    obs = [_make_obs(a, t, x, y, n, path, lineno) for a, t, x, y, n, lineno in parsed]
    return tuple(sorted(obs, key=lambda o: (o.t, o.actor_id))), None


def _make_obs(actor, t, x, y, noise, path, lineno) -> GpsObservation:
    try:
        return GpsObservation(actor, t, x, y, noise)
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: {exc}") from exc


def save_frames_csv(path: str | Path, frames: Sequence[FrameRecord]) -> None:
    d = len(frames[0].features) if frames else 0
    header = ("actor", "t", "kp_count") + tuple(f"f{i}" for i in range(d))
    rows = ((f.actor_id, _fmt(f.t), str(f.keypoint_count)) + tuple(_fmt(v) for v in f.features)
            for f in sorted(frames, key=lambda f: (f.t, f.actor_id)))
    atomic_write_text(path, _csv_text("coactivity frames", header, rows))


def load_frames_csv(path: str | Path) -> tuple[FrameRecord, ...]:
    _, rows = _read_csv(path, ("actor", "t", "kp_count"), min_cols=3)
    frames = []
    dim = None
    for lineno, raw in rows:
        if len(raw) < 3:
            raise DataError(f"{path}:{lineno}: expected at least 3 columns")
        try:
            feats = tuple(float(v) for v in raw[3:])
            frames.append(FrameRecord(raw[0], float(raw[1]), feats, int(raw[2])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if dim is None:
            dim = len(feats)
        elif len(feats) != dim:
            raise DataError(f"{path}:{lineno}: feature dimension {len(feats)} != {dim}")
    return tuple(sorted(frames, key=lambda f: (f.t, f.actor_id)))


def save_faces_csv(path: str | Path, faces: Sequence[FaceDetection]) -> None:
    n_scores = max((len(f.scores) for f in faces if f.scores is not None), default=0)
    header = ("observer", "t", "detected_id") + tuple(f"score_{i}" for i in range(n_scores))
    rows = []
    for f in sorted(faces, key=lambda f: (f.t, f.observer)):
        scores = tuple(_fmt(v) for v in (f.scores or ())) + ("",) * (n_scores - len(f.scores or ()))
        rows.append((f.observer, _fmt(f.t), f.detected_id or "") + scores)
    atomic_write_text(path, _csv_text("coactivity faces", header, rows))


def load_faces_csv(path: str | Path) -> tuple[FaceDetection, ...]:
    _, rows = _read_csv(path, ("observer", "t", "detected_id"), min_cols=3)
    faces = []
    for lineno, raw in rows:
        if len(raw) < 3:
            raise DataError(f"{path}:{lineno}: expected at least 3 columns")
        try:
            score_cells = [c for c in raw[3:]]
            scores = tuple(float(c) for c in score_cells if c != "") if any(c != "" for c in score_cells) else None
            faces.append(FaceDetection(raw[0], float(raw[1]), raw[2] or None, scores))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return tuple(sorted(faces, key=lambda f: (f.t, f.observer)))


def save_matches_csv(path: str | Path, matches: Mapping[tuple[str, float, str, float], float]) -> None:
    rows = ((a, _fmt(ta), b, _fmt(tb), _fmt(m)) for (a, ta, b, tb), m in sorted(matches.items()))
    atomic_write_text(path, _csv_text("coactivity matches",
                                      ("actor_i", "t_i", "actor_j", "t_j", "matches"), rows))


def load_matches_csv(path: str | Path) -> dict[tuple[str, float, str, float], float]:
    _, rows = _read_csv(path, ("actor_i", "t_i", "actor_j", "t_j", "matches"))
    out = {}
    for lineno, raw in rows:
        if len(raw) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 columns")
        try:
            out[(raw[0], float(raw[1]), raw[2], float(raw[3]))] = float(raw[4])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# instances / truth / chains
# ---------------------------------------------------------------------------

def instance_to_dict(inst: ActivityInstance) -> dict:
    return {
        "type_id": inst.type_id,
        "center": [inst.center[0], inst.center[1]],
        "radius": inst.radius,
        "t_start": inst.t_start,
        "span": inst.span,
        "participants": sorted(inst.participants),
    }


def instance_from_dict(d: Mapping) -> ActivityInstance:
    return ActivityInstance(
        type_id=d["type_id"],
        center=(float(d["center"][0]), float(d["center"][1])),
        radius=float(d["radius"]),
        t_start=float(d["t_start"]),
        span=float(d["span"]),
        participants=frozenset(d["participants"]),
    )


def save_truth(path: str | Path, truth: Sequence[ActivityInstance]) -> None:
    doc = {"version": FORMAT_VERSION, "instances": [instance_to_dict(i) for i in truth]}
    atomic_write_text(path, canonical_json(doc) + "\n")


def load_truth(path: str | Path) -> tuple[ActivityInstance, ...]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return tuple(instance_from_dict(d) for d in doc["instances"])


def save_chains(path: str | Path, chains: ChainSamples) -> None:
    lines = [canonical_json({
        "format": "coactivity-chains", "version": FORMAT_VERSION,
        "seed": chains.seed, "burn_in": chains.burn_in, "n_iters": chains.n_iters,
        "numerical_rejections": chains.numerical_rejections,
        "warnings": list(chains.warnings),
        "acceptance": [[k.value, p, a] for k, p, a in chains.acceptance],
    })]
    for s in chains.samples:
        lines.append(canonical_json({
            "iteration": s.iteration,
            "log_prob": s.log_prob,
            "instances": [instance_to_dict(i) for i in s.config.instances],
        }))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_chains(path: str | Path) -> ChainSamples:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty chains file")
    try:
        head = json.loads(lines[0])
        if head.get("format") != "coactivity-chains":
            raise DataError(f"{path}: not a chains file")
        samples = []
        for ln in lines[1:]:
            d = json.loads(ln)
            config = Configuration(tuple(instance_from_dict(i) for i in d["instances"]))
            samples.append(ConfigSample(config, float(d["log_prob"]), int(d["iteration"])))
        acceptance = tuple((MoveKind(k), int(p), int(a)) for k, p, a in head.get("acceptance", []))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    return ChainSamples(samples=tuple(samples), acceptance=acceptance,
                        seed=int(head["seed"]), burn_in=int(head["burn_in"]),
                        n_iters=int(head["n_iters"]),
                        warnings=tuple(head.get("warnings", ())),
                        numerical_rejections=int(head.get("numerical_rejections", 0)))


def write_manifest(path: str | Path, config: "RunConfig", seed: int,
                   extra: Mapping | None = None) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "seed": seed,
        "config_sha256": config_hash(config),
        "versions": {"coactivity": _pkg_version, "numpy": np.__version__},
    }
    if extra:
        doc.update(extra)
    atomic_write_text(path, canonical_json(doc) + "\n")


# ---------------------------------------------------------------------------
# data bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataBundle:
    """Validated evidence streams plus the actor registry."""

    actors: tuple[str, ...]
    observations: tuple[GpsObservation, ...]
    frames: tuple[FrameRecord, ...] = ()
    faces: tuple[FaceDetection, ...] = ()
    origin: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        known = set(self.actors)
        for o in self.observations:
            if o.actor_id not in known:
                raise DataError(f"GPS stream names unknown actor {o.actor_id!r}")
        for f in self.frames:
            if f.actor_id not in known:
                raise DataError(f"frame stream names unknown actor {f.actor_id!r}")
        for d in self.faces:
            if d.observer not in known:
                raise DataError(f"face stream names unknown observer {d.observer!r}")
            if d.detected_id is not None and d.detected_id not in known:
                raise DataError(f"face stream names unknown actor {d.detected_id!r}")
        times = ([o.t for o in self.observations] + [f.t for f in self.frames]
                 + [d.t for d in self.faces])
        if not times:
            raise DataError("bundle holds no timestamped data")
        dims = {len(f.features) for f in self.frames}
        if len(dims) > 1:
            raise DataError("frame feature dimension is not uniform")

    @property
    def t_min(self) -> float:
        return min([o.t for o in self.observations] + [f.t for f in self.frames]
                   + [d.t for d in self.faces])

    @property
    def t_max(self) -> float:
        return max([o.t for o in self.observations] + [f.t for f in self.frames]
                   + [d.t for d in self.faces])

    def model_data(self) -> ModelData:
        return ModelData(actors=self.actors, observations=self.observations,
                         frames=self._frames_with_faces(), faces=self.faces)

    def _frames_with_faces(self) -> tuple[FrameRecord, ...]:
        """Frames with face detections attached to the observer's nearest
        frame (within half the median frame spacing)."""
        if not self.frames or not self.faces:
            return self.frames
        by_actor: dict[str, list[int]] = {}
        for i, f in enumerate(self.frames):
            by_actor.setdefault(f.actor_id, []).append(i)
        attach: dict[int, list[FaceDetection]] = {}
        for a, idxs in by_actor.items():
            ts = np.array([self.frames[i].t for i in idxs])
            order = np.argsort(ts)
            ts_sorted = ts[order]
            spacing = float(np.median(np.diff(ts_sorted))) if len(ts_sorted) > 1 else math.inf
            tol = spacing / 2.0
            for det in self.faces:
                if det.observer != a:
                    continue
                j = int(np.clip(np.searchsorted(ts_sorted, det.t), 0, len(ts_sorted) - 1))
                best = min((j, max(j - 1, 0)), key=lambda i: abs(ts_sorted[i] - det.t))
                if abs(ts_sorted[best] - det.t) <= tol:
                    attach.setdefault(idxs[int(order[best])], []).append(det)
        out = []
        for i, f in enumerate(self.frames):
            if i in attach:
                out.append(replace(f, face_detections=tuple(attach[i])))
            else:
                out.append(f)
        return tuple(out)


def load_bundle(data_dir: str | Path, config: "RunConfig") -> DataBundle:
    """Load gps.csv (+ frames.csv, faces.csv when present) from a directory."""
    data_dir = Path(data_dir)
    wgs84 = config.coordinate_frame == "wgs84"
    observations, origin = load_gps_csv(data_dir / "gps.csv", wgs84=wgs84)
    frames_path = data_dir / "frames.csv"
    faces_path = data_dir / "faces.csv"
    frames = load_frames_csv(frames_path) if frames_path.exists() else ()
    faces = load_faces_csv(faces_path) if faces_path.exists() else ()
    actors = config.actors
    if actors is None:
        ids = {o.actor_id for o in observations} | {f.actor_id for f in frames}
        ids |= {d.observer for d in faces} | {d.detected_id for d in faces if d.detected_id}
        actors = tuple(sorted(ids))
    return DataBundle(actors=tuple(actors), observations=observations, frames=frames,
                      faces=faces, origin=origin)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

_OVERLAP_SEP = "|"


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs beyond the data files.

    All sections are optional in the JSON document; omitted ones take the
    defaults below. When a scenario section is present and no activity types
    are given, the inference types are derived from the scenario parameters.
    """

    actors: tuple[str, ...] | None = None
    coordinate_frame: str = "local"
    hyper: GpHyperParams = GpHyperParams()
    types: tuple[ActivityType, ...] = ()
    overlap: OverlapMatrix = OverlapMatrix()
    params: ModelParams | None = None
    sampler: SamplerConfig = SamplerConfig()
    scenario: ScenarioConfig | None = None
    seed: int = 0

    def resolved_types(self) -> tuple[ActivityType, ...]:
        if self.types:
            return self.types
        if self.scenario is not None:
            return (self.scenario.activity_type(),)
        return (ActivityType(type_id="meeting"),)

    def resolved_params(self, frames: Sequence[FrameRecord] = ()) -> ModelParams:
        if self.params is not None:
            return self.params
        if self.scenario is not None:
            return self.scenario.model_params()
        if frames:
            feats = np.array([f.features for f in frames], float)
            return ModelParams(background_mean=tuple(float(v) for v in feats.mean(axis=0)),
                               background_var=tuple(float(max(v, 1e-6)) for v in feats.var(axis=0)))
        return ModelParams()

    def to_dict(self) -> dict:
        doc: dict = {"version": FORMAT_VERSION, "seed": self.seed,
                     "coordinate_frame": self.coordinate_frame}
        if self.actors is not None:
            doc["actors"] = list(self.actors)
        doc["gp"] = {
            "kernel": self.hyper.kernel,
            "length_scale_s": self.hyper.length_scale_s,
            "signal_std_m": self.hyper.signal_std_m,
            "mean_m": list(self.hyper.mean_m),
            "jitter": self.hyper.jitter,
        }
        doc["activity_types"] = [_type_to_dict(t) for t in self.types]
        doc["overlap"] = {f"{a}{_OVERLAP_SEP}{b}": rel for a, b, rel in self.overlap.relations}
        if self.params is not None:
            doc["model"] = {
                "coverage_penalty": self.params.coverage_penalty,
                "background_feature_mean": list(self.params.background_mean),
                "background_feature_var": list(self.params.background_var),
                "aux_noise_m": self.params.sigma_aux_m,
                "center_margin_m": self.params.center_margin_m,
            }
        doc["sampler"] = _sampler_to_dict(self.sampler)
        if self.scenario is not None:
            doc["scenario"] = asdict(self.scenario)
        return doc

    @staticmethod
    def from_dict(doc: Mapping) -> "RunConfig":
        try:
            return RunConfig._from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid run config: {exc}") from exc

    @staticmethod
    def _from_dict(doc: Mapping) -> "RunConfig":
        version = doc.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ConfigurationError(f"unsupported config version {version}")
        gp = doc.get("gp", {})
        hyper = GpHyperParams(
            kernel=gp.get("kernel", "matern52"),
            length_scale_s=float(gp.get("length_scale_s", 120.0)),
            signal_std_m=float(gp.get("signal_std_m", 200.0)),
            mean_m=tuple(gp.get("mean_m", (0.0, 0.0))),
            jitter=float(gp.get("jitter", 1e-9)),
        )
        types = tuple(_type_from_dict(t) for t in doc.get("activity_types", ()))
        overlap_doc = doc.get("overlap", {})
        relations = []
        for key, rel in sorted(overlap_doc.items()):
            if _OVERLAP_SEP not in key:
                raise ConfigurationError(f"overlap key {key!r} must be 'typeA{_OVERLAP_SEP}typeB'")
            a, b = key.split(_OVERLAP_SEP, 1)
            relations.append((a, b, rel))
        overlap = OverlapMatrix(tuple(relations))
        params = None
        if "model" in doc:
            m = doc["model"]
            params = ModelParams(
                coverage_penalty=float(m.get("coverage_penalty", 0.5)),
                background_mean=tuple(float(v) for v in m.get("background_feature_mean", ())),
                background_var=tuple(float(v) for v in m.get("background_feature_var", ())),
                sigma_aux_m=float(m.get("aux_noise_m", 5.0)),
                center_margin_m=float(m.get("center_margin_m", 300.0)),
            )
        sampler = _sampler_from_dict(doc.get("sampler", {}))
        scenario = None
        if "scenario" in doc:
            scenario = ScenarioConfig(**doc["scenario"])
        actors = tuple(doc["actors"]) if "actors" in doc else None
        return RunConfig(actors=actors,
                         coordinate_frame=doc.get("coordinate_frame", "local"),
                         hyper=hyper, types=types, overlap=overlap, params=params,
                         sampler=sampler, scenario=scenario, seed=int(doc.get("seed", 0)))


def _type_to_dict(t: ActivityType) -> dict:
    return {
        "type_id": t.type_id,
        "label": t.label,
        "span_median_s": t.span_median_s,
        "span_log_std": t.span_log_std,
        "radius_median_m": t.radius_median_m,
        "radius_log_std": t.radius_log_std,
        "participants_median": t.participants_median,
        "participants_log_std": t.participants_log_std,
        "feature_mean": list(t.feature_mean),
        "feature_var": list(t.feature_var),
        "face_rate_participant_per_min": t.face_rate_participant_per_min,
        "face_rate_nonparticipant_per_min": t.face_rate_nonparticipant_per_min,
        "excursion_rate_per_s": t.excursion_rate_per_s,
    }


def _type_from_dict(d: Mapping) -> ActivityType:
    return ActivityType(
        type_id=d["type_id"],
        label=d.get("label", ""),
        span_median_s=float(d.get("span_median_s", 300.0)),
        span_log_std=float(d.get("span_log_std", 0.01)),
        radius_median_m=float(d.get("radius_median_m", 30.0)),
        radius_log_std=float(d.get("radius_log_std", 0.05)),
        participants_median=float(d.get("participants_median", 2.0)),
        participants_log_std=float(d.get("participants_log_std", 0.5)),
        feature_mean=tuple(float(v) for v in d.get("feature_mean", ())),
        feature_var=tuple(float(v) for v in d.get("feature_var", ())),
        face_rate_participant_per_min=float(d.get("face_rate_participant_per_min", 3.0)),
        face_rate_nonparticipant_per_min=float(d.get("face_rate_nonparticipant_per_min", 0.2)),
        excursion_rate_per_s=float(d.get("excursion_rate_per_s", 1.0)),
    )


def _sampler_to_dict(s: SamplerConfig) -> dict:
    return {
        "n_iters": s.n_iters,
        "burn_in": s.burn_in,
        "ensemble_refresh": s.ensemble_refresh,
        "n_grid": s.n_grid,
        "n_draws": s.n_draws,
        "radius_proposal_median_m": s.radius_proposal_median_m,
        "radius_proposal_log_std": s.radius_proposal_log_std,
        "span_proposal_median_s": s.span_proposal_median_s,
        "span_proposal_log_std": s.span_proposal_log_std,
        "center_step_std_m": s.center_step_std_m,
        "participants_median": s.participants_median,
        "participants_log_std": s.participants_log_std,
        "aux_conditioning": s.aux_conditioning,
        "move_weights": {k.value: w for k, w in s.move_weights},
    }


def _sampler_from_dict(d: Mapping) -> SamplerConfig:
    kwargs = dict(
        n_iters=int(d.get("n_iters", 10_000)),
        burn_in=int(d.get("burn_in", 2_000)),
        ensemble_refresh=int(d.get("ensemble_refresh", 500)),
        n_grid=int(d.get("n_grid", 500)),
        n_draws=int(d.get("n_draws", 50)),
        radius_proposal_median_m=float(d.get("radius_proposal_median_m", 30.0)),
        radius_proposal_log_std=float(d.get("radius_proposal_log_std", 0.03)),
        span_proposal_median_s=float(d.get("span_proposal_median_s", 300.0)),
        span_proposal_log_std=float(d.get("span_proposal_log_std", 0.005)),
        center_step_std_m=float(d.get("center_step_std_m", 20.0)),
        participants_median=float(d.get("participants_median", 2.0)),
        participants_log_std=float(d.get("participants_log_std", 0.5)),
        aux_conditioning=bool(d.get("aux_conditioning", False)),
    )
    if "move_weights" in d:
        kwargs["move_weights"] = tuple((MoveKind(k), float(w)) for k, w in d["move_weights"].items())
    return SamplerConfig(**kwargs)


def load_run_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)


def save_run_config(path: str | Path, config: RunConfig) -> None:
    atomic_write_text(path, json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")


def save_dataset(out_dir: str | Path, ds: SyntheticDataset) -> None:
    out_dir = Path(out_dir)
    save_gps_csv(out_dir / "gps.csv", ds.observations)
    save_frames_csv(out_dir / "frames.csv", ds.frames)
    save_faces_csv(out_dir / "faces.csv", ds.faces)
    save_truth(out_dir / "truth.json", ds.truth)
