"""Sensor CSV ingest, cleaning and z-score standardisation."""
from __future__ import annotations

import csv
import logging
import math
from datetime import datetime, timezone

import numpy as np

from .records import ColumnManifest, SampleSet, SensorTable, StandardizationStats

log = logging.getLogger(__name__)

CONSTANT_STD = 1e-12


class MissingColumnError(KeyError):
    def __str__(self):
        return str(self.args[0])


class CSVParseError(ValueError):
    pass


def parse_timestamp(text: str) -> float:
    """Seconds as a float, from either a number or an ISO-8601 datetime."""
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _number(text: str) -> float:
    text = text.strip()
    return math.nan if text == "" or text.lower() in ("nan", "na", "null") else float(text)


def load_consolidated_csv(path, manifest: ColumnManifest | None = None) -> SensorTable:
    """Read the consolidated sensor CSV, keeping the manifest's 28 feature columns.

    Empty cells become NaN (removed later by :func:`clean`). Label values
    outside the manifest's 12 activity ids are rejected.
    """
    manifest = manifest or ColumnManifest.load()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CSVParseError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}
        wanted = [manifest.time_column, *manifest.feature_columns, manifest.label_column]
        for name in wanted:
            if name not in index:
                raise MissingColumnError(f"{path}: missing column {name!r}")
        t_col = index[manifest.time_column]
        f_cols = [index[c] for c in manifest.feature_columns]
        y_col = index[manifest.label_column]

        times, feats, labels = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            try:
                times.append(parse_timestamp(row[t_col]))
                feats.append([_number(row[c]) for c in f_cols])
                labels.append(_number(row[y_col]))
            except ValueError as exc:
                raise CSVParseError(f"{path}:{line_no}: {exc}") from None

    table = SensorTable(np.array(times), np.array(feats).reshape(len(times), len(f_cols)), np.array(labels))
    known = np.isin(table.labels, manifest.label_ids) | np.isnan(table.labels)
    if not known.all():
        bad = table.labels[~known][0]
        line = int(np.flatnonzero(~known)[0]) + 2
        raise ValueError(f"{path}:{line}: unknown activity id {bad:g}")
    log.info("loaded %d sensor rows from %s", len(table), path)
    return table


def clean(table: SensorTable) -> SensorTable:
    """Drop exact-duplicate rows (first kept) and rows with any missing value."""
    rows = table.rows()
    complete = ~np.isnan(rows).any(axis=1)
    keep = np.flatnonzero(complete)
    if keep.size:
        _, first = np.unique(rows[keep], axis=0, return_index=True)
        keep = keep[np.sort(first)]
    n_missing = int((~complete).sum())
    n_dupes = int(complete.sum()) - len(keep)
    log.info("clean: dropped %d duplicate and %d incomplete rows", n_dupes, n_missing)
    out = table[keep]
    out.meta["dropped"] = {"duplicates": n_dupes, "missing": n_missing}
    return out


def fit_standardization(features, fitted_on: str = "train") -> StandardizationStats:
    """Per-feature mean and population standard deviation."""
    if isinstance(features, SampleSet):
        features = features.sensor
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("standardization needs at least 2 samples")
    return StandardizationStats(x.mean(axis=0), x.std(axis=0), fitted_on)


def apply_standardization(stats: StandardizationStats, features):
    """z = (x - mean) / std; features with std < 1e-12 map to 0.

    Accepts a feature matrix or a :class:`SampleSet` (returns the same kind).
    """
    if isinstance(features, SampleSet):
        return features.with_sensor(apply_standardization(stats, features.sensor))
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != len(stats.mean):
        raise ValueError(f"expected {len(stats.mean)} features, got {x.shape[-1]}")
    constant = stats.std < CONSTANT_STD
    safe = np.where(constant, 1.0, stats.std)
    z = (x - stats.mean) / safe
    z[..., constant] = 0.0
    return z
