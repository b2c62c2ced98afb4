"""Command-line surface tying the pipeline together.

Exit statuses: 0 success, 1 usage error, 2 data error, 3 numerical error.
Every run writes a manifest (seed, config hash, versions) next to its
outputs so artifacts can be reproduced bit-exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, DataError, NumericalError
from .gp import TimeGrid, build_gp
from .io import (DataBundle, RunConfig, atomic_write_text, load_bundle, load_chains,
                 load_matches_csv, load_run_config, load_truth, save_chains, save_dataset,
                 save_run_config, write_manifest, _fmt, _csv_text)
from .localization import localize
from .model import face_identity_posterior
from .sampler import run_chain
from .summarize import (FrameDistanceWeights, TrellisWeights, map_summary, select_keyframes,
                        summarize_video)
from .synthetic import ScenarioConfig, evaluate, generate, sweep_location_std


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coactivity",
                     description="Collaborative activity inference, localization and summarization.")
    parser.add_argument("--version", action="version", version=f"coactivity {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", required=out_required, help="output file or directory")

    p = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    common(p)

    p = sub.add_parser("infer", help="run the RJ-MCMC chain and persist samples")
    common(p)
    p.add_argument("--data", required=True, help="directory holding gps.csv (+frames/faces)")

    p = sub.add_parser("eval", help="score chains against ground truth")
    common(p)
    p.add_argument("--chains", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--iou", type=float, default=0.3)

    p = sub.add_parser("localize", help="activity-conditioned localization export")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--chains", required=True)
    p.add_argument("--actor", required=True)
    p.add_argument("--thin", type=int, default=10)

    p = sub.add_parser("faces", help="activity-aware face identity posteriors")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--chains", required=True)
    p.add_argument("--thin", type=int, default=10)

    p = sub.add_parser("summarize", help="keyframe, map or video summaries")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--chains", required=True)
    p.add_argument("--mode", choices=("keyframes", "map", "video"), default="keyframes")
    p.add_argument("--k", type=int, default=8, help="keyframe count")
    p.add_argument("--t-out", type=int, default=12, help="video summary frame count")
    p.add_argument("--matches", help="optional keypoint match CSV")

    p = sub.add_parser("sweep", help="meeting-place spread sweep (detection error curve)")
    common(p)
    p.add_argument("--stds", default="50,150,300,700", help="comma-separated location stds")
    p.add_argument("--trials", type=int, default=20)

    return parser


def _load_config(args) -> RunConfig:
    config = load_run_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _posteriors(bundle: DataBundle, config: RunConfig):
    grid = TimeGrid(bundle.t_min, bundle.t_max, config.sampler.n_grid)
    by_actor = {a: [] for a in bundle.actors}
    for o in bundle.observations:
        by_actor[o.actor_id].append(o)
    return {a: build_gp(tuple(by_actor[a]), config.hyper, grid, actor_id=a)
            for a in bundle.actors}


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    scenario = config.scenario or ScenarioConfig()
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    ds = generate(scenario)
    out = Path(args.out)
    save_dataset(out, ds)
    save_run_config(out / "run_config.json", config)
    write_manifest(out / "manifest.json", config, scenario.seed,
                   {"command": "simulate", "n_truth": len(ds.truth)})
    print(f"simulate: wrote {len(ds.observations)} gps rows, {len(ds.frames)} frames, "
          f"{len(ds.faces)} faces, {len(ds.truth)} ground-truth activities to {out}")
    return 0


def _cmd_infer(args) -> int:
    config = _load_config(args)
    bundle = load_bundle(args.data, config)
    types = config.resolved_types()
    params = config.resolved_params(bundle.frames)
    chains = run_chain(bundle.model_data(), types, config.overlap, params, config.hyper,
                       config.sampler, seed=config.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_chains(out / "chains.jsonl", chains)
    write_manifest(out / "manifest.json", config, config.seed, {
        "command": "infer",
        "acceptance": [[k.value, p, a] for k, p, a in chains.acceptance],
        "warnings": list(chains.warnings),
    })
    rates = ", ".join(f"{k.value}={a}/{p}" for k, p, a in chains.acceptance if p)
    print(f"infer: {len(chains.samples)} samples saved to {out / 'chains.jsonl'} ({rates})")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config(args)
    chains = load_chains(args.chains)
    truth = load_truth(args.truth)
    report = evaluate(chains, truth, args.iou)
    doc = {
        "n_true": report.n_true,
        "count_error_mean": report.count_error_mean,
        "count_error_std": report.count_error_std,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "iou_threshold": report.iou_threshold,
        "absolute_counts": report.absolute_counts,
    }
    atomic_write_text(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(f"eval: n_true={report.n_true} count_error={report.count_error_mean:.3f} "
          f"precision={report.precision:.3f} recall={report.recall:.3f} f1={report.f1:.3f}")
    return 0


def _cmd_localize(args) -> int:
    config = _load_config(args)
    bundle = load_bundle(args.data, config)
    chains = load_chains(args.chains)
    if args.actor not in bundle.actors:
        raise DataError(f"actor {args.actor!r} not in the registry")
    posteriors = _posteriors(bundle, config)
    params = config.resolved_params(bundle.frames)
    loc = localize(chains, posteriors, args.actor, thin=args.thin,
                   sigma_aux=params.sigma_aux_m)
    times = loc.grid.times
    base_std = loc.base.marginal_std()
    rows = []
    for i, t in enumerate(times):
        rows.append((args.actor, _fmt(t), _fmt(loc.base.mean[i, 0]), _fmt(loc.base.mean[i, 1]),
                     _fmt(base_std[i]), _fmt(base_std[i]), "0"))
    for i, t in enumerate(times):
        rows.append((args.actor, _fmt(t), _fmt(loc.mean[i, 0]), _fmt(loc.mean[i, 1]),
                     _fmt(loc.std[i, 0]), _fmt(loc.std[i, 1]), "1"))
    atomic_write_text(args.out, _csv_text(
        "coactivity localization",
        ("actor", "t", "mean_x", "mean_y", "std_x", "std_y", "conditioned"), rows))
    print(f"localize: wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_faces(args) -> int:
    config = _load_config(args)
    bundle = load_bundle(args.data, config)
    chains = load_chains(args.chains)
    samples = chains.configurations(thin=args.thin)
    rows = []
    n_corrected = 0
    for det in bundle.faces:
        if det.scores is None:
            continue
        post = face_identity_posterior(det, samples, bundle.actors)
        top = bundle.actors[int(np.argmax(post))]
        classifier = bundle.actors[int(np.argmax(det.scores))]
        if top != classifier:
            n_corrected += 1
        rows.append((det.observer, _fmt(det.t), det.detected_id or "", classifier, top)
                    + tuple(_fmt(p) for p in post))
    header = ("observer", "t", "detected_id", "classifier_id", "posterior_id") \
        + tuple(f"p_{a}" for a in bundle.actors)
    atomic_write_text(args.out, _csv_text("coactivity face posterior", header, rows))
    print(f"faces: wrote {len(rows)} posteriors ({n_corrected} corrected) to {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    config = _load_config(args)
    bundle = load_bundle(args.data, config)
    chains = load_chains(args.chains)
    frames = bundle.model_data().frames
    if args.mode == "keyframes":
        summary = select_keyframes(frames, args.k, chains.configurations(),
                                   FrameDistanceWeights())
        rows = [(str(r), f.actor_id, _fmt(f.t), str(f.votes))
                for r, f in enumerate(summary.frames)]
        atomic_write_text(args.out, _csv_text("coactivity keyframes",
                                              ("rank", "actor", "t", "votes"), rows))
    elif args.mode == "map":
        summary = select_keyframes(frames, args.k, chains.configurations(),
                                   FrameDistanceWeights())
        if len(chains.best().config) == 0:
            print("summarize[map]: maximum-score configuration is empty; no placements",
                  file=sys.stderr)
            placements = ()
        else:
            placements = map_summary(summary, chains)
        rows = [(str(p.instance_index), _fmt(p.center[0]), _fmt(p.center[1]), _fmt(p.radius),
                 p.actor_id, _fmt(p.t), _fmt(p.x), _fmt(p.y)) for p in placements]
        atomic_write_text(args.out, _csv_text(
            "coactivity map summary",
            ("instance_id", "cx", "cy", "r", "actor", "t", "px", "py"), rows))
    else:
        matches = load_matches_csv(args.matches) if args.matches else None
        posteriors = _posteriors(bundle, config)
        summary = summarize_video(frames, chains, TrellisWeights(), args.t_out, posteriors,
                                  matches)
        rows = [(str(r), f.actor_id, _fmt(f.t), str(f.votes))
                for r, f in enumerate(summary.frames)]
        atomic_write_text(args.out, _csv_text("coactivity video summary",
                                              ("rank", "actor", "t", "votes"), rows))
    print(f"summarize[{args.mode}]: wrote {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    scenario = config.scenario or ScenarioConfig()
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    stds = [float(s) for s in args.stds.split(",") if s]
    if not stds:
        raise _UsageError("--stds must name at least one value")
    curve = sweep_location_std(scenario, stds, args.trials, hyper=config.hyper)
    out = Path(args.out)
    cell_rows = [(_fmt(c.location_std_m), str(c.trial), str(c.seed), str(c.n_true),
                  _fmt(c.count_error_mean), _fmt(c.precision), _fmt(c.recall), _fmt(c.f1),
                  c.error or "") for c in curve.cells]
    atomic_write_text(out.with_suffix(out.suffix + ".cells"), _csv_text(
        "coactivity sweep cells",
        ("std_m", "trial", "seed", "n_true", "rel_error", "precision", "recall", "f1", "error"),
        cell_rows))
    agg_rows = [(_fmt(std), _fmt(mean), _fmt(sd), str(n))
                for std, mean, sd, n in curve.aggregate()]
    atomic_write_text(out, _csv_text("coactivity sweep curve",
                                     ("std_m", "mean_rel_error", "std_rel_error", "n_trials"),
                                     agg_rows))
    for std, mean, sd, n in curve.aggregate():
        print(f"sweep: std={std:.0f}m mean_rel_error={mean:.3f} (+/- {sd:.3f}, {n} trials)")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "localize": _cmd_localize,
    "faces": _cmd_faces,
    "summarize": _cmd_summarize,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ConfigurationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
