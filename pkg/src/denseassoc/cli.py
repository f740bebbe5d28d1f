"""Command-line entry point wiring the whole pipeline.

Subcommands: ``synth``, ``track``, ``eval``, ``ablate``, ``render``.
Exit codes: 0 success, 1 usage/config error, 2 data/validation error,
3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys

from . import associate, iomodel, metrics, synth
from .appearrep import NumericError
from .iomodel import (
    ConfigError,
    FormatError,
    PipelineConfig,
    ValidationError,
)

JOBS_ENV = "DENSEASSOC_JOBS"

LAMBDA_GRID = [round(0.1 * i, 1) for i in range(11)]
SWEEP_LAMBDA_MODES = ("motion-only", "appearance-only", "fused-greedy",
                      "fused-hungarian")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 1 for usage
        raise UsageError(f"{self.prog}: {message}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = PipelineConfig()
    p.add_argument("--lambda", dest="lambda_", type=float, default=d.lambda_,
                   help=f"fusion weight in [0, 1] (default {d.lambda_})")
    p.add_argument("--retrieval-backend", "--retrieval", dest="retrieval_backend",
                   default=d.retrieval_backend, choices=PipelineConfig.BACKENDS,
                   help=f"appearance similarity backend (default {d.retrieval_backend})")
    p.add_argument("--gate-score", type=float, default=d.gate_score,
                   help=f"minimum fused score to accept a match (default {d.gate_score})")
    p.add_argument("--peak-window", type=int, default=d.peak_window,
                   help=f"odd local-maximum window in pixels (default {d.peak_window})")
    p.add_argument("--peak-rel-threshold", type=float, default=d.peak_rel_threshold,
                   help=f"peak threshold relative to the global max (default {d.peak_rel_threshold})")
    p.add_argument("--peak-abs-threshold", type=float, default=d.peak_abs_threshold,
                   help=f"absolute peak threshold (default {d.peak_abs_threshold})")
    p.add_argument("--patch-size", type=int, default=d.patch_size,
                   help=f"appearance crop side in pixels (default {d.patch_size})")
    p.add_argument("--alpha", type=float, default=d.alpha,
                   help=f"diffusion damping factor (default {d.alpha})")
    p.add_argument("--knn-k", type=int, default=d.knn_k,
                   help=f"diffusion graph neighbors (default {d.knn_k})")
    p.add_argument("--gamma", type=float, default=d.gamma,
                   help=f"diffusion affinity exponent (default {d.gamma})")
    p.add_argument("--matcher", default=d.matcher, choices=PipelineConfig.MATCHERS,
                   help=f"assignment matcher (default {d.matcher})")
    p.add_argument("--seed", type=int, default=d.seed,
                   help=f"rng seed (default {d.seed})")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig(
        lambda_=args.lambda_,
        retrieval_backend=args.retrieval_backend,
        gate_score=args.gate_score,
        peak_window=args.peak_window,
        peak_rel_threshold=args.peak_rel_threshold,
        peak_abs_threshold=args.peak_abs_threshold,
        patch_size=args.patch_size,
        alpha=args.alpha,
        knn_k=args.knn_k,
        gamma=args.gamma,
        matcher=args.matcher,
        seed=args.seed,
    )
    cfg.validate()
    return cfg


def _echo_config(cfg: PipelineConfig) -> None:
    for key, val in cfg.as_dict().items():
        print(f"{key}={val}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="denseassoc",
                     description="density-map crowd tracking pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic scene")
    s = synth.ScenarioConfig()
    p.add_argument("--agents", type=int, default=s.n_agents)
    p.add_argument("--frames", type=int, default=s.n_frames)
    p.add_argument("--width", type=int, default=s.width)
    p.add_argument("--height", type=int, default=s.height)
    p.add_argument("--speed-mean", type=float, default=s.speed_mean)
    p.add_argument("--speed-jitter", type=float, default=s.speed_jitter)
    p.add_argument("--blob-sigma", type=float, default=s.blob_sigma)
    p.add_argument("--min-spacing", type=float, default=s.min_spacing)
    p.add_argument("--feature-dim", type=int, default=s.feature_dim)
    p.add_argument("--feature-noise", type=float, default=s.feature_noise)
    p.add_argument("--distractor-correlation", type=float,
                   default=s.distractor_correlation)
    p.add_argument("--seed", type=int, default=s.seed)
    p.add_argument("--out", required=True, help="output bundle directory")

    p = sub.add_parser("track", help="run the tracker on a bundle")
    p.add_argument("bundle", help="bundle directory")
    _add_config_flags(p)
    p.add_argument("--out", default=None,
                   help="tracks CSV path (default <bundle>/tracks.csv)")

    p = sub.add_parser("eval", help="score tracks against ground truth")
    p.add_argument("tracks", help="predicted tracks CSV")
    p.add_argument("gt", help="ground-truth tracks CSV")
    p.add_argument("--bundle", default=None,
                   help="bundle directory (fixes the frame range)")
    p.add_argument("--out", default=None, help="write the report as key=value text")
    p.add_argument("--csv", default=None, help="append the report as a CSV row")

    p = sub.add_parser("ablate", help="sweep configurations and tabulate metrics")
    p.add_argument("bundle", help="bundle directory containing gt_tracks.csv")
    _add_config_flags(p)
    p.add_argument("--sweep", action="append", required=True,
                   choices=("lambda", "backend", "mode"),
                   help="sweep key; repeatable")
    p.add_argument("--out", default=None,
                   help="output CSV (default <bundle>/ablation.csv)")
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get(JOBS_ENV, "1")),
                   help=f"concurrent arms (default ${JOBS_ENV} or 1)")

    p = sub.add_parser("render", help="write overlay rasters for a frame range")
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--tracks", default=None,
                   help="tracks CSV (default: ground truth if present)")
    p.add_argument("--frames", default="0..1",
                   help="half-open frame range a..b (default 0..1)")
    p.add_argument("--out", required=True, help="output directory")
    return parser


# ------------------------------------------------------------- subcommands


def _cmd_synth(args) -> int:
    if args.agents < 0:
        raise UsageError("synth: --agents must be >= 0")
    if args.frames < 0:
        raise UsageError("synth: --frames must be >= 0")
    cfg = synth.ScenarioConfig(
        n_agents=args.agents,
        n_frames=args.frames,
        width=args.width,
        height=args.height,
        speed_mean=args.speed_mean,
        speed_jitter=args.speed_jitter,
        blob_sigma=args.blob_sigma,
        min_spacing=args.min_spacing,
        feature_dim=args.feature_dim,
        feature_noise=args.feature_noise,
        distractor_correlation=args.distractor_correlation,
        seed=args.seed,
    )
    try:
        cfg.validate()
        bundle, gt = synth.generate_scenario(cfg)
    except ValueError as exc:
        raise UsageError(f"synth: {exc}") from exc
    iomodel.write_bundle(bundle, args.out)
    iomodel.write_tracks_csv(gt, os.path.join(args.out, "gt_tracks.csv"))
    n_files = len(os.listdir(args.out))
    print(f"agents={cfg.n_agents}")
    print(f"frames={cfg.n_frames}")
    print(f"files={n_files}")
    print(f"out={args.out}")
    return 0


def _cmd_track(args) -> int:
    cfg = _config_from_args(args)
    bundle = iomodel.read_bundle(args.bundle)
    _echo_config(cfg)
    tracks = associate.track_sequence(bundle, cfg)
    out = args.out or os.path.join(args.bundle, "tracks.csv")
    iomodel.write_tracks_csv(tracks, out)
    print(f"tracks={len(tracks)}")
    print(f"out={out}")
    return 0


def _load_eval_inputs(args):
    for path in (args.tracks, args.gt):
        if not os.path.isfile(path):
            raise FormatError(f"{path}: file not found")
    pred = iomodel.read_tracks_csv(args.tracks)
    gt = iomodel.read_tracks_csv(args.gt)
    frame_count = None
    if args.bundle is not None:
        frame_count = iomodel._read_manifest(args.bundle)["frame_count"]
    return pred, gt, frame_count


def _cmd_eval(args) -> int:
    pred, gt, frame_count = _load_eval_inputs(args)
    report = metrics.evaluate(pred, gt, frame_count)
    text = report.to_text()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.csv:
        new = not os.path.isfile(args.csv)
        with open(args.csv, "a", encoding="utf-8", newline="\n") as fh:
            if new:
                fh.write(metrics.MetricReport.csv_header() + "\n")
            fh.write(report.csv_row() + "\n")
    return 0


def _ablation_arms(base: PipelineConfig, sweeps: list) -> list:
    """One (label, config) per arm, in deterministic emission order."""
    arms = []
    for key in sweeps:
        if key == "lambda":
            for lam in LAMBDA_GRID:
                cfg = PipelineConfig(**{**_cfg_kwargs(base), "lambda_": lam})
                arms.append((f"lambda={lam}", cfg))
        elif key == "backend":
            for backend in PipelineConfig.BACKENDS:
                cfg = PipelineConfig(
                    **{**_cfg_kwargs(base), "retrieval_backend": backend}
                )
                arms.append((f"backend={backend}", cfg))
        elif key == "mode":
            overrides = {
                "motion-only": {"lambda_": 1.0, "matcher": "hungarian"},
                "appearance-only": {"lambda_": 0.0, "matcher": "hungarian"},
                "fused-greedy": {"matcher": "greedy"},
                "fused-hungarian": {"matcher": "hungarian"},
            }
            for mode in SWEEP_LAMBDA_MODES:
                cfg = PipelineConfig(**{**_cfg_kwargs(base), **overrides[mode]})
                arms.append((f"mode={mode}", cfg))
    return arms


def _cfg_kwargs(cfg: PipelineConfig) -> dict:
    return {
        "lambda_": cfg.lambda_,
        "retrieval_backend": cfg.retrieval_backend,
        "gate_score": cfg.gate_score,
        "peak_window": cfg.peak_window,
        "peak_rel_threshold": cfg.peak_rel_threshold,
        "peak_abs_threshold": cfg.peak_abs_threshold,
        "patch_size": cfg.patch_size,
        "alpha": cfg.alpha,
        "knn_k": cfg.knn_k,
        "gamma": cfg.gamma,
        "matcher": cfg.matcher,
        "seed": cfg.seed,
    }


def _run_arm(bundle, gt, frame_count, cfg: PipelineConfig):
    tracks = associate.track_sequence(bundle, cfg)
    return metrics.evaluate(tracks, gt, frame_count)


def _cmd_ablate(args) -> int:
    base = _config_from_args(args)
    bundle = iomodel.read_bundle(args.bundle)
    gt_path = os.path.join(args.bundle, "gt_tracks.csv")
    if not os.path.isfile(gt_path):
        raise FormatError(f"{gt_path}: file not found")
    gt = iomodel.read_tracks_csv(gt_path)
    arms = _ablation_arms(base, args.sweep)
    jobs = max(1, args.jobs)

    if jobs == 1:
        reports = [_run_arm(bundle, gt, bundle.frame_count, cfg) for _, cfg in arms]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_arm, bundle, gt, bundle.frame_count, cfg)
                for _, cfg in arms
            ]
            reports = [f.result() for f in futures]

    out = args.out or os.path.join(args.bundle, "ablation.csv")
    lines = [
        "arm,lambda,retrieval_backend,matcher," + metrics.MetricReport.csv_header()
    ]
    for (label, cfg), report in zip(arms, reports):
        lines.append(
            f"{label},{cfg.lambda_!r},{cfg.retrieval_backend},{cfg.matcher},"
            + report.csv_row()
        )
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


def _parse_range(spec: str) -> range:
    if ".." not in spec:
        raise UsageError(f"render: bad frame range {spec!r}, expected a..b")
    a, b = spec.split("..", 1)
    try:
        start, stop = int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"render: bad frame range {spec!r}") from exc
    return range(start, stop)


def _cmd_render(args) -> int:
    frames = _parse_range(args.frames)
    bundle = iomodel.read_bundle(args.bundle)
    if args.tracks is not None:
        tracks = iomodel.read_tracks_csv(args.tracks)
    else:
        gt_path = os.path.join(args.bundle, "gt_tracks.csv")
        tracks = iomodel.read_tracks_csv(gt_path) if os.path.isfile(gt_path) else []
    for f in frames:
        if not 0 <= f < bundle.frame_count:
            raise ValidationError(
                f"frame {f} out of range 0..{bundle.frame_count - 1}"
            )
    os.makedirs(args.out, exist_ok=True)
    for f in frames:
        img = synth.render_overlay(bundle, tracks, f)
        iomodel.write_ppm(os.path.join(args.out, f"overlay_{f:06d}.ppm"), img)
    print(f"rendered={len(frames)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "synth": _cmd_synth,
            "track": _cmd_track,
            "eval": _cmd_eval,
            "ablate": _cmd_ablate,
            "render": _cmd_render,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ValidationError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
