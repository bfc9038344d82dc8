"""Train accuracy of the baseline CNN on synthetic data under its SGD preset at several learning rates.

Shows how far the preset learning rate is from one that fits a dataset of
this size within the preset's five epochs.

    python scripts/baseline_lr_sweep.py --lrs 0.001 0.01 0.1 0.5
"""
import argparse

import numpy as np

from falldet.dataio import apply_standardization, fit_standardization, synth_samples
from falldet.nnmodels import Network, baseline_train_config, build, train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lrs", type=float, nargs="+", default=[0.001, 0.01, 0.1, 0.5])
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--seed", type=int, default=42)
    args = p.parse_args()

    samples = synth_samples(args.n_per_class, 7)
    data = apply_standardization(fit_standardization(samples.sensor, "all"), samples)
    for lr in args.lrs:
        net = Network(build("baseline-cnn"), seed=args.seed)
        _, history = train(net, data, baseline_train_config(lr=lr, max_epochs=args.epochs))
        acc = float(np.mean(net.predict(data)[0] == data.labels))
        print(f"lr {lr:<7g} loss {history[0].loss:.3f} -> {history[-1].loss:.3f}  train acc {acc:.4f}")


if __name__ == "__main__":
    main()
