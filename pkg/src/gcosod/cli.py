"""Command-line entry point: ``gcosod <subcommand> ...``.

Every subcommand writes into ``<--out>/<subcommand>-<hash>/`` where the hash
covers the resolved configuration (all flags except ``--out`` and
``--workers``), echoes that configuration as ``config.json`` and prints the
run directory on stdout.  Re-running with the same flags overwrites the same
directory with identical bytes.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .baseline import predict_dataset
from .builder import (
    DEFAULT_RANGES,
    CommonBuildConfig,
    ZeroBuildConfig,
    build_common,
    build_zero,
    parse_ranges,
    primary_ratio_histogram,
)
from .calibration import calibrate_dataset, render_reliability
from .core import ConfigError, DataError, GCoSODError, load_manifest, relocate, save_manifest
from .metrics import MetricConfig, evaluate_dataset
from .sampler import RATIO_MODES, SamplerConfig, dumps_stream, sample_epoch
from .synth import SynthConfig, generate_synthetic_dataset
from .uncertainty import UncertaintyConfig, uncertainty_report

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_RANGES_TEXT = ";".join(str(r) for r in DEFAULT_RANGES)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def run_dir(args, name: str) -> tuple[Path, dict]:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "workers", "func")}
    path = Path(args.out) / f"{name}-{config_hash(config)}"
    path.mkdir(parents=True, exist_ok=True)
    echo = {"command": name, "tool_version": __version__, "config": config}
    (path / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    return path, config


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    out, _ = run_dir(args, "synth")
    lo, hi = (int(x) for x in args.distractors.split(","))
    config = SynthConfig(
        num_categories=args.categories,
        groups_per_category=args.groups_per_category,
        group_size=args.group_size,
        image_size=args.image_size,
        distractor_count_range=(lo, hi),
        seed=args.seed,
    )
    generate_synthetic_dataset(config, out, workers=args.workers)
    print(out / "manifest.json")
    return EXIT_OK


def cmd_build(args) -> int:
    source = load_manifest(args.manifest)
    out, _ = run_dir(args, f"build-{args.mode}")
    exclusions = frozenset(args.exclude or ())
    if args.mode == "common":
        ranges = parse_ranges(args.ratio_ranges)
        config = CommonBuildConfig(ranges, len(ranges), args.seed, exclusions)
        manifest, stats = build_common(source, config)
        hist = primary_ratio_histogram(manifest, ranges)
        lines = ["group_id,n_primary,size,ratio"] + [f"{g},{p},{n},{r!r}" for g, p, n, r in hist.rows]
        lines += [f"# {r},{c}" for r, c in zip(hist.ranges, hist.counts)]
        (out / "ratio_histogram.csv").write_text("\n".join(lines) + "\n")
    else:
        config = ZeroBuildConfig(args.num_groups, args.min_size, args.max_size, args.seed, exclusions)
        manifest, stats = build_zero(source, config)
    save_manifest(relocate(manifest, out), out / "manifest.json")
    (out / "build_stats.json").write_text(stats.to_json())
    print(out / "manifest.json")
    return EXIT_OK


def cmd_sample(args) -> int:
    manifest = load_manifest(args.manifest)
    out, _ = run_dir(args, "sample")
    for epoch in range(args.epochs):
        config = SamplerConfig(args.seed, args.ratio_mode, epoch)
        stream = sample_epoch(manifest, config, workers=args.workers)
        (out / f"epoch-{epoch:03d}.jsonl").write_text(dumps_stream(stream))
    print(out)
    return EXIT_OK


def cmd_predict(args) -> int:
    manifest = load_manifest(args.manifest)
    out, _ = run_dir(args, f"predict-{args.method}")
    predict_dataset(manifest, out / "predictions", args.method, args.affinity_threshold, args.workers)
    print(out / "predictions")
    return EXIT_OK


def _metric_config(args) -> MetricConfig:
    return MetricConfig(
        binarize_threshold=args.threshold,
        beta_squared=args.beta_squared,
        s_alpha=args.s_alpha,
        thresholds=args.sweep,
        s_mode=args.s_mode,
        e_mode=args.e_mode,
    )


def _manifest_tag(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:8]


def _evaluate(args, manifest, predictions, out: Path, prefix: str = "") -> "tuple":
    report = evaluate_dataset(manifest, predictions, _metric_config(args), workers=args.workers)
    (out / f"{prefix}report.json").write_text(report.to_json())
    (out / f"{prefix}per_image.csv").write_text(report.to_csv())
    diagram = None
    if report.per_image:
        diagram = calibrate_dataset(manifest, predictions, args.bins, args.stride, args.workers)
        tag = f"{_manifest_tag(args.manifest)}-{config_hash({'bins': args.bins, 'stride': args.stride})}"
        render_reliability(diagram, out / f"{prefix}reliability-{tag}")
    return report, diagram


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    out, _ = run_dir(args, "eval")
    report, diagram = _evaluate(args, manifest, args.predictions, out)
    summary = {"complete": report.complete, "dataset": report.dataset,
               "ece": diagram.ece if diagram else None, "errors": report.errors}
    _write_json(out / "summary.json", summary)
    print(out)
    if not report.complete:
        for e in report.errors:
            print(f"error: {e['group_id']}/{e['image_id']}: {e['error']}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_uncertainty(args) -> int:
    manifest = load_manifest(args.manifest)
    out, _ = run_dir(args, "uncertainty")
    config = UncertaintyConfig(args.eps, not args.no_clamp, args.full_binary_entropy)
    uncertainty_report(manifest, args.predictions, config, out)
    before, d_before = _evaluate(args, manifest, args.predictions, out, "before_")
    after, d_after = _evaluate(args, manifest, out / "revised", out, "after_")
    _write_json(out / "comparison.json", {
        "before": before.dataset | {"ece": d_before.ece if d_before else None},
        "after": after.dataset | {"ece": d_after.ece if d_after else None},
    })
    print(out)
    return EXIT_OK


def _add_common(p, manifest=True, seed=True):
    p.add_argument("--out", required=True, help="parent directory for the run directory")
    if manifest:
        p.add_argument("--manifest", required=True, help="input manifest file")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="worker threads; never changes outputs (default: %(default)s)")


def _add_metric_flags(p):
    p.add_argument("--predictions", required=True, help="directory laid out as <group>/<image_id>.png")
    p.add_argument("--threshold", type=float, default=0.5, help="binarization threshold for IoU (default: %(default)s)")
    p.add_argument("--beta-squared", type=float, default=0.3, help="F-measure beta^2 (default: %(default)s)")
    p.add_argument("--s-alpha", type=float, default=0.5, help="S-measure object/region weight (default: %(default)s)")
    p.add_argument("--sweep", type=int, default=256, help="thresholds in max-sweeps (default: %(default)s)")
    p.add_argument("--s-mode", choices=("strict", "reference"), default="strict", help="S-measure empty-gt rule (default: %(default)s)")
    p.add_argument("--e-mode", choices=("xi-mean", "enhanced"), default="enhanced", help="headline E-measure (default: %(default)s)")
    p.add_argument("--bins", type=int, default=10, help="ECE bins K (default: %(default)s)")
    p.add_argument("--stride", type=int, default=1, help="pixel subsampling stride for ECE (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcosod", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p, manifest=False)
    p.add_argument("--categories", type=int, default=12, help="number of (shape, color) categories (default: %(default)s)")
    p.add_argument("--groups-per-category", type=int, default=1, help="groups per category (default: %(default)s)")
    p.add_argument("--group-size", type=int, default=10, help="images per group (default: %(default)s)")
    p.add_argument("--image-size", type=int, default=64, help="square image side in pixels (default: %(default)s)")
    p.add_argument("--distractors", default="0,1", help="min,max distractors per image (default: %(default)s)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="re-arrange a manifest into common/zero groups")
    _add_common(p)
    p.add_argument("--mode", choices=("common", "zero"), required=True, help="output group style (required)")
    p.add_argument("--ratio-ranges", default=DEFAULT_RANGES_TEXT, help="';'-separated ranges (default: %(default)s)")
    p.add_argument("--exclude", action="append", metavar="CATEGORY", help="tolerated category (repeatable; default: none)")
    p.add_argument("--num-groups", type=int, default=55, help="zero mode: output groups (default: %(default)s)")
    p.add_argument("--min-size", type=int, default=4, help="zero mode: min group size (default: %(default)s)")
    p.add_argument("--max-size", type=int, default=8, help="zero mode: max group size (default: %(default)s)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("sample", help="emit noisy-group training streams")
    _add_common(p)
    p.add_argument("--epochs", type=int, default=1, help="number of epochs to emit (default: %(default)s)")
    p.add_argument("--ratio-mode", choices=RATIO_MODES, default=RATIO_MODES[0], help="replacement count rule (default: %(default)s)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("predict", help="run the training-free baseline")
    _add_common(p, seed=False)
    p.add_argument("--method", choices=("co", "single"), default="co", help="group-aware or per-image maps (default: %(default)s)")
    p.add_argument("--affinity-threshold", type=float, default=0.25, help="abstention threshold (default: %(default)s)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="metrics and calibration of predictions")
    _add_common(p, seed=False)
    _add_metric_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("uncertainty", help="entropy maps, revision and re-evaluation")
    _add_common(p, seed=False)
    _add_metric_flags(p)
    p.add_argument("--eps", type=float, default=1e-6, help="log offset epsilon (default: %(default)s)")
    p.add_argument("--no-clamp", action="store_true", help="keep negative raw entropy values (default: clamp)")
    p.add_argument("--full-binary-entropy", action="store_true", help="add the (1-p) term (default: off)")
    p.set_defaults(func=cmd_uncertainty)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GCoSODError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
