"""Train every compatible (data configuration, model) pair on one dataset and tabulate test metrics.

    python scripts/run_matrix.py --out runs/matrix
    python scripts/run_matrix.py --data upfall.fald --out runs/upfall --skip cat-like
"""
import argparse
import logging
from pathlib import Path

from falldet.experiment import COMPATIBLE, ExperimentConfig, compare, load_data, run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--data", help="FALD1 file; default is synthetic data")
    p.add_argument("--n-per-class", type=int, default=50, help="synthetic samples per class")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="runs/matrix")
    p.add_argument("--skip", nargs="*", default=[], help="model names to leave out")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    data = args.data or {"synth": {"n_per_class": args.n_per_class}}
    samples = load_data(data)
    records = []
    for configuration, models in COMPATIBLE.items():
        for model in models:
            if model in args.skip:
                continue
            out = Path(args.out) / f"{configuration}_{model}".replace("+", "-")
            cfg = ExperimentConfig(data=data, configuration=configuration, model=model, seed=args.seed, out=str(out))
            records.append(run(cfg, samples))
    table = compare(records)
    (Path(args.out) / "comparison.txt").write_text(table + "\n")
    print(table)


if __name__ == "__main__":
    main()
