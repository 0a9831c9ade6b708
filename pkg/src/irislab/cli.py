"""Command-line entry point: run figure presets or custom experiment configs."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import harness


def _preset_names():
    root = resources.files("irislab").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _load(target: str) -> harness.ExperimentSpec:
    path = Path(target)
    if path.exists():
        return harness.load_spec(path)
    root = resources.files("irislab").joinpath("presets")
    candidate = root.joinpath(f"{target}.json")
    if candidate.is_file():
        return harness.spec_from_dict(json.loads(candidate.read_text(encoding="utf-8")))
    raise FileNotFoundError(
        f"no config file or preset named {target!r}; presets: {', '.join(_preset_names())}"
    )


def _smoke(spec: harness.ExperimentSpec) -> harness.ExperimentSpec:
    """Reduced preset: 1000 trials, at most 3 points per axis."""
    sweep = []
    for name, values in spec.sweep:
        vals = list(values)
        if len(vals) > 3:
            vals = [vals[0], vals[len(vals) // 2], vals[-1]]
        sweep.append((name, vals))
    spec.sweep = sweep
    spec.plan = replace(spec.plan, trials=min(spec.plan.trials, 1000))
    return spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irislab",
                                     description="IRS-assisted MIMO downlink experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON experiment config")
    run.add_argument("target", help="preset name or path to a config file")
    run.add_argument("--trials", type=int, default=None, help="override trial count")
    run.add_argument("--seed", type=int, default=None, help="override master seed")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--series", default=None, help="comma-separated series subset")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--smoke", action="store_true",
                     help="reduced run: 1000 trials, 3 sweep points per axis")

    sub.add_parser("presets", help="list bundled presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in _preset_names():
                print(name)
            return 0
        spec = _load(args.target)
        if args.trials is not None:
            spec.plan = replace(spec.plan, trials=args.trials)
        if args.seed is not None:
            spec.plan = replace(spec.plan, master_seed=args.seed)
        if args.series:
            spec.outputs = [s.strip() for s in args.series.split(",") if s.strip()]
        if args.smoke:
            spec = _smoke(spec)
        result = harness.run_experiment(spec, n_workers=args.workers)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / f"{spec.experiment}.{args.format}"
        if args.format == "csv":
            harness.emit_csv(result, out_path)
        else:
            harness.emit_json(result, out_path)
        print(f"wrote {out_path} ({len(result.rows)} rows, "
              f"{result.metadata['wall_time_s']} s)")
        for axes, series, msg in result.failures:
            print(f"note: {series} failed at {axes}: {msg}")
        return 0
    except Exception as exc:                        # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
