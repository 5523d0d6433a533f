"""Command-line entry point: ``aeroground <command> [options]``.

Commands: register, synth, eval, simulate, bench.  Rasters are 8-bit binary
PGM files; reports are ``key=value`` text.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from aeroground.evaluation import EvalSummary, evaluate, generate_synthetic
from aeroground.io import kvfile, pgm
from aeroground.io.manifest import PairManifest
from aeroground.pipeline import PipelineConfig, register
from aeroground.sim.episode import ScenarioSpec
from aeroground.sim.scenes import synthetic_scene
from aeroground.spatial import Raster, Sim2, warp

def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    return lo, hi


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="key=value pipeline settings file")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--size", type=int, help="working size in pixels (power of two)")
    p.add_argument("--temperature", type=float, help="soft-argmax temperature (fraction of surface range)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--report", type=Path, help="write a key=value report here")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aeroground", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("register", parents=[common], help="register two PGM images")
    p.add_argument("template", type=Path)
    p.add_argument("source", type=Path)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic pair set")
    p.add_argument("--image", type=Path, help="template PGM (default: procedural scene)")
    p.add_argument("-n", "--count", type=int, default=100)
    p.add_argument("--theta-range", type=_pair, default=(10.0, 60.0), help="degrees, 'lo,hi'")
    p.add_argument("--scale-range", type=_pair, default=(0.8, 1.3))
    p.add_argument("--trans-range", type=float, default=20.0, help="pixels, per component")
    p.add_argument("--noise", type=float, default=0.05)

    p = sub.add_parser("eval", parents=[common], help="evaluate a pair manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common], help="run collaboration episodes from a scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("--episodes", type=int, help="override the scenario episode count")

    p = sub.add_parser("bench", parents=[common], help="time repeated registrations")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--warmup", type=int, default=2)
    return parser


def pipeline_config(args, **defaults) -> PipelineConfig:
    values = {k: str(v) for k, v in defaults.items()}
    if args.config is not None:
        values.update(kvfile.load(args.config))
    if args.size is not None:
        values["working_size"] = str(args.size)
    cfg = PipelineConfig.from_mapping(values)
    if args.temperature is not None:
        cfg = replace(cfg, temperature=args.temperature)
    return cfg


def _write_report(path: Path | None, values: dict) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    kvfile.save(path, values)
    print(f"report: {path}")


def _fixed(value: float, digits: int) -> str:
    # round first so tiny negatives do not print as -0.000
    return f"{round(value, digits) + 0.0:.{digits}f}"


def cmd_register(args) -> int:
    cfg = pipeline_config(args)
    template = pgm.read(args.template)
    source = pgm.read(args.source)
    est = register(template, source, cfg)
    S = est.transform
    print(f"s={_fixed(S.s, 6)} theta_deg={_fixed(S.theta_deg, 4)} tx={_fixed(S.tx, 3)} ty={_fixed(S.ty, 3)}")
    print(
        f"rot_confidence={est.rot_confidence:.2f} trans_confidence={est.trans_confidence:.2f} "
        f"flipped={est.ambiguity_resolved_by_flip} elapsed_ms={est.elapsed:.1f}"
    )
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    aligned = np.asarray(warp(source, S, template.width, template.height))
    overlay = 0.5 * np.asarray(template) + 0.5 * aligned
    pgm.write(out / "overlay.pgm", Raster.clipped(overlay))
    print(f"overlay: {out / 'overlay.pgm'}")
    _write_report(
        args.report,
        {
            "s": S.s,
            "theta_deg": S.theta_deg,
            "tx": S.tx,
            "ty": S.ty,
            "rot_confidence": est.rot_confidence,
            "trans_confidence": est.trans_confidence,
            "flipped": est.ambiguity_resolved_by_flip,
            "elapsed_ms": est.elapsed,
        },
    )
    return 0


def cmd_synth(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.image is not None:
        image = pgm.read(args.image)
    else:
        image = Raster(synthetic_scene(args.size or 256, seed=seed)[0])
    out = args.out or Path("synth")
    manifest = generate_synthetic(
        image,
        args.count,
        out,
        theta_range=args.theta_range,
        scale_range=args.scale_range,
        trans_range=args.trans_range,
        noise_sigma=args.noise,
        seed=seed,
    )
    print(f"wrote {len(manifest)} pairs: {out / 'manifest.csv'}")
    return 0


def cmd_eval(args) -> int:
    cfg = pipeline_config(args)
    manifest = PairManifest.load(args.manifest)
    summary, _ = evaluate(manifest, cfg, workers=args.workers)
    print(summary.to_report(), end="")
    report = args.report or (args.out or args.manifest.parent) / "eval_report.txt"
    report.parent.mkdir(parents=True, exist_ok=True)
    report.write_text(summary.to_report())
    print(f"report: {report}")
    return 0


def cmd_simulate(args) -> int:
    cfg = pipeline_config(args, feature_mode="gradient-magnitude")
    spec = ScenarioSpec.load(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.episodes is not None:
        overrides["episodes"] = str(args.episodes)
    if overrides:
        spec = ScenarioSpec.from_settings({**spec.settings, **overrides}, base_dir=args.scenario.parent)
    reports = spec.run(cfg)
    values: dict = {}
    for i, rep in enumerate(reports):
        if rep.ok:
            print(
                f"episode {i}: initial={rep.initial_rot_error:.2f}deg refined={rep.refined_rot_error:.2f}deg "
                f"improvement={100 * rep.improvement:.2f}% fell_back={rep.fell_back}"
            )
        else:
            print(f"episode {i}: aborted: {rep.error}")
        for key, value in rep.summary().items():
            values[f"episode_{i}.{key}"] = value
        for key, value in rep.latencies.items():
            values[f"episode_{i}.latency_{key}_ms"] = value
        if args.out is not None and rep.feasible_region is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            pgm.write(args.out / f"feasible_{i:04d}.pgm", rep.feasible_region)
    ok = [r for r in reports if r.ok]
    agg = {"episodes": len(reports), "aborted": len(reports) - len(ok)}
    if ok:
        agg.update(
            median_initial_rot_error_deg=float(np.median([r.initial_rot_error for r in ok])),
            median_refined_rot_error_deg=float(np.median([r.refined_rot_error for r in ok])),
            median_improvement=float(np.median([r.improvement for r in ok])),
            refined_below_initial=sum(r.refined_rot_error < r.initial_rot_error for r in ok) / len(ok),
            fallbacks=sum(r.fell_back for r in ok),
        )
    for key, value in agg.items():
        print(f"{key}={value}")
    _write_report(args.report, {**agg, **values})
    return 0 if len(ok) == len(reports) else 1


def percentile(samples, q: float) -> float:
    return float(np.percentile(np.asarray(samples, dtype=np.float64), q))


def cmd_bench(args) -> int:
    size = args.size or 256
    cfg = pipeline_config(args)
    seed = 0 if args.seed is None else args.seed
    template = Raster(synthetic_scene(size, seed=seed)[0])
    rng = np.random.default_rng(seed)
    gt = Sim2(rng.uniform(0.8, 1.3), np.radians(rng.uniform(10, 60)), *rng.uniform(-20, 20, size=2))
    source = Raster.clipped(np.asarray(warp(template, gt.inverse())) + rng.normal(0, 0.05, (size, size)))
    for _ in range(max(0, args.warmup)):
        register(template, source, cfg)
    times = []
    for _ in range(max(1, args.repeats)):
        start = time.perf_counter()
        register(template, source, cfg)
        times.append((time.perf_counter() - start) * 1000.0)
    stats = {
        "size": size,
        "repeats": len(times),
        "mean_ms": statistics.fmean(times),
        "min_ms": min(times),
        "p50_ms": percentile(times, 50),
        "p90_ms": percentile(times, 90),
        "p99_ms": percentile(times, 99),
        "max_ms": max(times),
    }
    for key, value in stats.items():
        print(f"{key}={value:.3f}" if isinstance(value, float) else f"{key}={value}")
    _write_report(args.report, stats)
    return 0


COMMANDS = {
    "register": cmd_register,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"aeroground {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
