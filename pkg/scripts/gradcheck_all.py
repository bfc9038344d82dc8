"""Finite-difference gradient check of every architecture at a reduced input size.

    python scripts/gradcheck_all.py --entries 20
"""
import argparse
import time

import numpy as np

from falldet.nnmodels import MODEL_NAMES, Network, build
from falldet.tensorcore import grad_check

# smallest image sizes that keep every conv/pool stage nonempty
SIZES = {"sensor-mlp": None, "cam-cnn": 8, "baseline-cnn": 22, "dual-cam-cnn": 8, "fusion": 8}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--entries", type=int, default=8, help="probed entries per weight tensor")
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    labels = rng.integers(0, 12, args.batch)
    for name in MODEL_NAMES:
        size = SIZES[name]
        net = Network(build(name, **({"size": size} if size else {})), seed=args.seed, dtype=np.float64)
        x = {b.input: rng.standard_normal((args.batch, 28)) if b.input == "sensor" else rng.random((args.batch, size, size))
             for b in net.spec.branches}
        t0 = time.perf_counter()
        res = grad_check(net, x, labels, max_entries=args.entries, seed=args.seed)
        print(f"{name:14s} max rel err {res.max_rel_error:.2e}  checked {res.n_checked:4d}  "
              f"skipped {res.n_skipped:3d}  worst {res.worst}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
