"""Run experiments 1 and 2 for every variant on synthetic data and write both reports.

    python scripts/run_experiments.py --seeds 10 --out results/
"""

import argparse
import logging
from pathlib import Path

from clifer.harness import ExperimentConfig, run_experiment1, run_experiment2
from clifer.report import write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at 0")
    ap.add_argument("--subjects", type=int, default=12)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ExperimentConfig.from_dict({"seeds": list(range(args.seeds)), "jobs": args.jobs, "synth": {"subjects": args.subjects}})
    for name, run in (("exp1", run_experiment1), ("exp2", run_experiment2)):
        paths = write_report(run(cfg), args.out / name, cfg.to_dict())
        print(f"{name}: {paths['summary.json']}")


if __name__ == "__main__":
    main()
