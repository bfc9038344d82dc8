import numpy as np

from .records import DatasetSplit, SampleSet

MIN_PER_CLASS = 5


def split(samples: SampleSet, seed: int, ratios=(0.6, 0.2, 0.2)) -> DatasetSplit:
    """Stratified, seeded train/val/test split.

    Each class is shuffled independently and cut at ``round(ratio * n)``;
    membership keeps the original sample order within each part.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in np.unique(samples.labels):
        members = np.flatnonzero(samples.labels == cls)
        if len(members) < MIN_PER_CLASS:
            raise ValueError(f"class {cls} has {len(members)} samples; need at least {MIN_PER_CLASS} to stratify")
        members = rng.permutation(members)
        n_train = int(round(ratios[0] * len(members)))
        n_val = int(round(ratios[1] * len(members)))
        parts[0].append(members[:n_train])
        parts[1].append(members[n_train:n_train + n_val])
        parts[2].append(members[n_train + n_val:])
    train, val, test = (np.sort(np.concatenate(p)) if p else np.array([], dtype=np.int64) for p in parts)
    return DatasetSplit(samples.subset(train), samples.subset(val), samples.subset(test), seed, tuple(ratios))
