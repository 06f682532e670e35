"""Command-line entry point: ``eincm {synth,edges,estimate,evaluate}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 solver
failure in at least one sample.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, metrics
from .config import PRESETS, RunConfig, get_preset
from .edges import extract_edges
from .errors import FormatError, InvalidInputError
from .events import FlowField, SensorGeometry
from .pipeline import estimate_sequence, infer_geometry, load_frames, split_samples
from .synth import SceneSpec, generate_scene

log = logging.getLogger("eincm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load_config(args) -> RunConfig:
    try:
        cfg = get_preset(args.preset) if args.preset else RunConfig()
        if args.config:
            cfg = RunConfig.load(args.config, cfg)
        overrides = {}
        if getattr(args, "n_events", None):
            overrides["n_events"] = args.n_events
        if getattr(args, "events_only", False):
            overrides["events_only"] = True
        if overrides:
            cfg = RunConfig.from_dict(overrides, cfg)
    except (InvalidInputError, OSError) as exc:
        raise CliError(f"config error: {exc}", EXIT_USAGE) from None
    return cfg


def cmd_synth(args) -> int:
    try:
        spec = SceneSpec(pattern=args.pattern, velocity=(args.vx, args.vy), duration=args.duration,
                         contrast_threshold=args.threshold, width=args.width, height=args.height,
                         seed=args.seed, n_shapes=args.n_shapes, noise_rate=args.noise_rate)
        sample = generate_scene(spec, edge_cfg=None)
    except InvalidInputError as exc:
        raise CliError(f"invalid scene: {exc}", EXIT_USAGE) from None
    out = Path(args.out)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    data.write_events_text(out / "events.txt", sample.events)
    for i, f in enumerate(sample.frames):
        data.write_pgm(frames_dir / f"frame_{i:03d}.pgm", f.pixels)
    (frames_dir / "timestamps.txt").write_text("".join(f"{f.t!r}\n" for f in sample.frames))
    gt = sample.gt_flow.copy()
    gt[~sample.gt_mask] = data.UNKNOWN_FLOW
    data.write_flow(out / "gt.flo", gt)
    (out / "scene.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(sample.events)} events, {len(sample.frames)} frames to {out}")
    return EXIT_OK


def cmd_edges(args) -> int:
    cfg = _load_config(args)
    src = Path(args.input)
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in (".pgm", ".png")) \
        if src.is_dir() else [src]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for p in files:
        try:
            img = data.read_gray(p)
        except (FormatError, OSError) as exc:
            log.error("skipping %s: %s", p, exc)
            failures += 1
            continue
        data.write_edge_pgm(out / (p.stem + ".pgm"), extract_edges(img, cfg.edges))
    if failures == len(files):
        return EXIT_DATA
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    input_dir = Path(args.input) if args.input else None
    events_path = Path(args.events) if args.events else (input_dir / "events.txt" if input_dir else None)
    if events_path is None:
        raise CliError("no events given (use INPUT_DIR or --events)", EXIT_USAGE)
    if not events_path.exists():
        raise CliError(f"events file not found: {events_path}", EXIT_DATA)
    frames_dir = Path(args.frames) if args.frames else (input_dir / "frames" if input_dir else None)
    try:
        events = data.load_events_text(events_path)
        frames = []
        if frames_dir is not None and frames_dir.is_dir() and not cfg.events_only:
            frames = load_frames(frames_dir)
        geometry = infer_geometry(input_dir, frames, events)
        events.check_geometry(geometry)
        samples = split_samples(events, frames, geometry, cfg.n_events)
    except (InvalidInputError, FormatError, OSError) as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml())
    failed = 0
    with open(out / "diagnostics.jsonl", "w") as diag, open(out / "samples.csv", "w", newline="") as sc:
        writer = csv.writer(sc)
        writer.writerow(["sample_id", "t_start", "t_end", "n_events", "failed"])
        for est in estimate_sequence(samples, cfg):
            for d in est.result.levels:
                rec = json.loads(d.to_json())
                rec["sample_id"] = est.sample_id
                diag.write(json.dumps(rec, sort_keys=True) + "\n")
            disp = est.displacement
            data.write_flow(out / f"{est.sample_id}.flo", disp)
            if args.viz:
                peak = float(np.max(np.hypot(disp[..., 0], disp[..., 1]))) or 1.0
                data.write_png(out / f"{est.sample_id}.png", data.flow_to_color(disp, peak))
            writer.writerow([est.sample_id, repr(est.sample.t_start), repr(est.sample.t_end),
                             len(est.sample.events), int(est.result.failed)])
            if est.result.failed:
                failed += 1
                log.error("%s: solver failure, best-so-far flow written", est.sample_id)
            else:
                log.info("%s: done", est.sample_id)
    print(f"estimated {len(samples)} sample(s) into {out}")
    return EXIT_SOLVER if failed else EXIT_OK


def _flow_files(d: Path) -> dict[str, Path]:
    files = {p.stem: p for p in sorted(d.glob("*.flo"))}
    # a synthetic scene directory holds a single window's truth as gt.flo
    if "gt" in files and "sample_00000" not in files:
        files["sample_00000"] = files.pop("gt")
    return files


def cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = _flow_files(pred_dir)
    gts = _flow_files(gt_dir)
    common = sorted(set(preds) & set(gts))
    if not common:
        raise CliError(f"no matching sample ids (pred: {sorted(preds)}, gt: {sorted(gts)})", EXIT_DATA)
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        raise CliError(f"unmatched sample ids: {unmatched}", EXIT_DATA)

    windows = {}
    events = None
    if args.events and (pred_dir / "samples.csv").exists():
        events = data.load_events_text(args.events)
        with open(pred_dir / "samples.csv") as fh:
            for row in csv.DictReader(fh):
                windows[row["sample_id"]] = (float(row["t_start"]), float(row["t_end"]))

    rows = []
    errs, n_tot, n_out = 0.0, 0, 0
    for sid in common:
        try:
            pred = data.read_flow(preds[sid]).astype(np.float64)
            gt = data.read_flow(gts[sid]).astype(np.float64)
            mask = data.flow_valid_mask(gt)
            ev = metrics.evaluate(pred, gt, mask, args.threshold)
        except (FormatError, InvalidInputError) as exc:
            raise CliError(f"{sid}: {exc}", EXIT_DATA) from None
        fwl = None
        if events is not None and sid in windows:
            a, b = windows[sid]
            sel = (events.t >= a) & (events.t <= b)
            idx = np.nonzero(sel)[0]
            if idx.size and b > a:
                win = events.slice(int(idx[0]), int(idx[-1]) + 1)
                h, w = pred.shape[:2]
                vel = FlowField(pred[..., 0] / (b - a), pred[..., 1] / (b - a))
                fwl = metrics.fwl(win, vel, SensorGeometry(w, h), t_ref=win.t0)
        rows.append((sid, ev.aee, ev.outlier_pct, fwl, ev.n_valid))
        errs += ev.aee * ev.n_valid
        n_out += ev.outlier_pct * ev.n_valid / 100.0
        n_tot += ev.n_valid
    rows.append(("ALL", errs / n_tot, 100.0 * n_out / n_tot, None, n_tot))
    report = Path(args.out) if args.out else pred_dir / "report.csv"
    metrics.write_report(report, rows)
    print(report.read_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eincm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named hyperparameter preset")

    p = sub.add_parser("synth", help="generate a synthetic translating scene")
    p.add_argument("--out", required=True)
    p.add_argument("--pattern", default="texture", choices=["bar", "checkerboard", "texture"])
    p.add_argument("--vx", type=float, default=30.0, help="px/s")
    p.add_argument("--vy", type=float, default=-20.0, help="px/s")
    p.add_argument("--duration", type=float, default=0.1, help="s")
    p.add_argument("--threshold", type=float, default=0.05, help="log-intensity contrast threshold")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-shapes", type=int, default=40)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("edges", help="extract edge images from grayscale frames")
    p.add_argument("input", help="image file or directory")
    p.add_argument("--out", required=True)
    config_flags(p)
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("estimate", help="estimate flow for an event stream")
    p.add_argument("input", nargs="?", help="directory with events.txt and frames/")
    p.add_argument("--events", help="event text file (overrides INPUT/events.txt)")
    p.add_argument("--frames", help="frame directory with timestamps.txt")
    p.add_argument("--out", required=True)
    p.add_argument("--events-only", action="store_true", help="ignore frames (beta = 0)")
    p.add_argument("--n-events", type=int, help="events per sample")
    p.add_argument("--viz", action="store_true", help="write flow color PNGs")
    config_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="compare predicted and ground-truth flows")
    p.add_argument("pred", help="directory of predicted .flo files")
    p.add_argument("gt", help="directory of ground-truth .flo files")
    p.add_argument("--events", help="event file, enables the FWL column")
    p.add_argument("--threshold", type=float, default=3.0, help="outlier threshold (px)")
    p.add_argument("--out", help="report path (default PRED/report.csv)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"eincm: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
