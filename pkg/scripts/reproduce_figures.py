#!/usr/bin/env python3
"""Run every bundled figure preset and drop the CSVs under results/.

Full-scale runs use the presets' own trial counts (1e6 for the Monte Carlo
families); pass --smoke for a fast sanity pass.
"""

import argparse
from pathlib import Path

from irislab import cli, harness


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--smoke", action="store_true")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--only", default=None,
                        help="comma-separated subset of preset names")
    args = parser.parse_args()

    names = cli._preset_names()
    if args.only:
        wanted = {s.strip() for s in args.only.split(",")}
        names = [n for n in names if n in wanted]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        spec = cli._load(name)
        if args.smoke:
            spec = cli._smoke(spec)
        result = harness.run_experiment(spec, n_workers=args.workers)
        harness.emit_csv(result, out / f"{name}.csv")
        harness.emit_json(result, out / f"{name}.json")
        print(f"{name}: {len(result.rows)} rows in {result.metadata['wall_time_s']}s, "
              f"{len(result.failures)} per-point failures")


if __name__ == "__main__":
    main()
