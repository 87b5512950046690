"""Regenerate every figure dataset from the shipped presets.

    python3 scripts/reproduce_figures.py --out-dir runs/figures [--only fig4] [--threads 2]
"""
import argparse
import logging
import time
from pathlib import Path

from fockscatter import experiments as E


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default="runs/figures")
    ap.add_argument("--only", default="", help="preset name prefix, e.g. fig3")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out_dir)
    for name in E.preset_names():
        if not name.startswith(args.only):
            continue
        t0 = time.perf_counter()
        data = E.load_preset(name)
        if data.get("kind") == "sweep":
            (out / name).mkdir(parents=True, exist_ok=True)
            E.sweep_max_population(E.sweep_from_dict(data), out / name / "max_population.csv", args.threads)
        else:
            E.run_experiment(E.config_from_dict(data), out / name, threads=args.threads)
        logging.info("%-6s %6.1f s", name, time.perf_counter() - t0)


if __name__ == "__main__":
    main()
