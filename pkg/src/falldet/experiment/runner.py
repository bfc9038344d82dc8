"""Run experiments: data -> split -> standardize -> train -> reports."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..dataio import (
    DatasetSplit,
    SampleSet,
    StandardizationStats,
    SynthConfig,
    apply_standardization,
    fit_standardization,
    read_aligned,
    split,
    synth_samples,
)
from ..metrics import CONFIGURATIONS, EvalReport, evaluate, render_table
from ..nnmodels import Checkpoint, Network, build, train
from ..nnmodels.checkpoint import FORMAT as NN_FORMAT
from ..treemodels import ForestModel, RandomForest, gbt_fit, knn_predict, rf_fit
from ..treemodels.baselines import RF_FORMAT
from ..treemodels.gbt import FORMAT as GBT_FORMAT
from .config import ExperimentConfig

log = logging.getLogger(__name__)

KNN_FORMAT = "falldet-knn/1"
SPLITS = ("train", "val", "test")


def load_data(data) -> SampleSet:
    """A FALD1 file path or ``{"synth": {...}}`` spec as a SampleSet."""
    if isinstance(data, dict):
        return synth_samples(cfg=SynthConfig(**data["synth"]))
    return read_aligned(data)


def fingerprint(samples: SampleSet) -> str:
    h = hashlib.sha256()
    for arr in (samples.sensor, samples.labels, samples.timestamps):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def standardized_split(samples: SampleSet, seed: int, stats: Optional[StandardizationStats] = None,
                       fit_on_all: bool = False):
    """Seeded split with sensor features standardized by train-split statistics.

    ``fit_on_all`` fits the statistics on every sample instead (leaks test
    moments into training; kept for comparison runs).
    """
    parts = split(samples, seed)
    if stats is None:
        stats = fit_standardization(samples.sensor, "all") if fit_on_all else fit_standardization(parts.train.sensor)
    parts = DatasetSplit(*(apply_standardization(stats, parts.part(p)) for p in SPLITS), parts.seed, parts.ratios)
    return parts, stats


@dataclass
class KnnModel:
    """A KNN 'model' is its training set."""

    X: np.ndarray
    y: np.ndarray
    k: int = 5

    def predict(self, X):
        return knn_predict(self.X, self.y, X, self.k)

    def to_dict(self) -> dict:
        return {"format": KNN_FORMAT, "k": self.k, "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d) -> "KnnModel":
        return cls(np.asarray(d["X"], dtype=np.float64), np.asarray(d["y"], dtype=np.int64), int(d["k"]))


@dataclass
class TrainedModel:
    """Any fitted model plus the standardization and provenance needed to reuse it."""

    name: str
    model: object
    stats: Optional[StandardizationStats]
    meta: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def predict(self, samples: SampleSet) -> np.ndarray:
        if self.stats is not None:
            samples = apply_standardization(self.stats, samples)
        if isinstance(self.model, Network):
            return self.model.predict(samples)[0]
        if isinstance(self.model, KnnModel):
            return self.model.predict(samples.sensor)
        return self.model.predict(samples.sensor)[0]

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(self.model, Network):
            ckpt = Checkpoint.from_network(self.model, self.stats, self.history, self.meta)
            return ckpt.save(path)
        d = self.model.to_dict()
        d.update(model=self.name, stats=self.stats.to_dict() if self.stats else None, meta=self.meta)
        path.write_text(json.dumps(d))
        return path

    @classmethod
    def load(cls, path) -> "TrainedModel":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: cannot read model file ({exc})") from None
        fmt = d.get("format")
        if fmt == NN_FORMAT:
            ckpt = Checkpoint.load(path)
            return cls(ckpt.model_name, ckpt.to_network(), ckpt.stats, ckpt.meta, ckpt.history)
        loaders = {GBT_FORMAT: ForestModel.from_dict, RF_FORMAT: RandomForest.from_dict, KNN_FORMAT: KnnModel.from_dict}
        if fmt not in loaders:
            raise ValueError(f"{path}: unrecognised model format {fmt!r}")
        return cls(d["model"], loaders[fmt](d), StandardizationStats.from_dict(d.get("stats")), d.get("meta", {}))


@dataclass
class RunRecord:
    config: dict
    model_path: str
    reports: dict  # split name -> EvalReport
    timings: dict
    engine_version: str = __version__

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reports"] = {k: r.to_dict() for k, r in self.reports.items()}
        return d

    @classmethod
    def from_dict(cls, d) -> "RunRecord":
        reports = {k: EvalReport.from_dict(r) for k, r in d["reports"].items()}
        return cls(d["config"], d["model_path"], reports, d["timings"], d.get("engine_version", ""))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "RunRecord":
        path = Path(path)
        if path.is_dir():
            path = path / "run.json"
        return cls.from_dict(json.loads(path.read_text()))


def model_filename(cfg: ExperimentConfig) -> str:
    return "checkpoint.json" if cfg.is_neural else "model.json"


def fit(cfg: ExperimentConfig, parts: DatasetSplit, stats, meta) -> TrainedModel:
    settings = cfg.settings()
    if cfg.is_neural:
        net = Network(build(cfg.model, **cfg.model_options()), seed=cfg.seed)
        ckpt, history = train(net, parts, settings, stats=stats, meta=meta)
        return TrainedModel(cfg.model, net, stats, ckpt.meta, ckpt.history)
    X, y = parts.train.sensor, parts.train.labels
    if cfg.model == "knn":
        model = KnnModel(np.asarray(X, dtype=np.float64), y, settings["k"])
    elif cfg.model == "rf":
        model = rf_fit(X, y, cfg=settings)
    else:
        model = gbt_fit(X, y, settings)
    return TrainedModel(cfg.model, model, stats, meta)


def run(cfg: ExperimentConfig, samples: Optional[SampleSet] = None, fit_on_all: bool = False) -> RunRecord:
    """Train and evaluate one configuration; writes its artifacts into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    samples = samples if samples is not None else load_data(cfg.data)
    parts, stats = standardized_split(samples, cfg.seed, fit_on_all=fit_on_all)
    t1 = time.perf_counter()
    meta = {
        "configuration": cfg.configuration,
        "split_seed": cfg.seed,
        "data": cfg.data,
        "data_fingerprint": fingerprint(samples),
        "n_samples": len(samples),
    }
    trained = fit(cfg, parts, stats, meta)
    t2 = time.perf_counter()
    model_path = trained.save(out / model_filename(cfg))

    reports = {}
    for name in SPLITS:
        part = parts.part(name)
        if len(part) == 0:
            continue
        # parts are already standardized; predict without re-applying the stats
        raw = TrainedModel(trained.name, trained.model, None)
        reports[name] = evaluate(part.labels, raw.predict(part), configuration=cfg.configuration)
        (out / f"report_{name}.json").write_text(reports[name].to_json())
    t3 = time.perf_counter()

    if trained.history:
        (out / "history.json").write_text(json.dumps(trained.history, indent=1))
    cfg.save(out / "config.json")
    record = RunRecord(cfg.to_dict(), str(model_path), reports,
                       {"data": t1 - t0, "fit": t2 - t1, "evaluate": t3 - t2, "total": t3 - t0})
    record.save(out / "run.json")
    (out / "report.txt").write_text(render_table(report_rows([record], splits=("val", "test")),
                                                 title=f"{cfg.model} on {cfg.configuration}") + "\n")
    log.info("%s/%s: test accuracy %.4f", cfg.configuration, cfg.model, reports["test"].accuracy)
    return record


HEADLINE = ("accuracy", "precision", "recall", "f1")


def run_repeats(cfg: ExperimentConfig, repeats: int, fit_on_all: bool = False) -> dict:
    """Run with seeds ``seed, seed+1, ...`` and summarise test metrics as mean and std."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    samples = load_data(cfg.data)
    records = []
    for i in range(repeats):
        sub = ExperimentConfig(**{**cfg.to_dict(), "seed": cfg.seed + i, "out": str(Path(cfg.out) / f"repeat_{i}")})
        records.append(run(sub, samples, fit_on_all))
    values = np.array([[r.reports["test"].headline[m] for m in HEADLINE] for r in records])
    summary = {
        "configuration": cfg.configuration,
        "model": cfg.model,
        "seeds": [cfg.seed + i for i in range(repeats)],
        "mean": dict(zip(HEADLINE, values.mean(axis=0).tolist())),
        "std": dict(zip(HEADLINE, values.std(axis=0).tolist())),
        "runs": [str(Path(cfg.out) / f"repeat_{i}" / "run.json") for i in range(repeats)],
    }
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out) / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def evaluate_model(model_path, data=None, split_name: str = "test", seed: Optional[int] = None) -> EvalReport:
    """Re-evaluate a saved model on one split of ``data``.

    The split is reproduced from the seed stored with the model unless
    ``seed`` is given; ``data`` defaults to the source recorded at training.
    """
    if split_name not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    trained = TrainedModel.load(model_path)
    meta = trained.meta
    if data is None:
        if "data" not in meta:
            raise ValueError(f"{model_path}: no data source recorded; pass one explicitly")
        data = meta["data"]
    samples = load_data(data) if not isinstance(data, SampleSet) else data
    if meta.get("data_fingerprint") and meta["data_fingerprint"] != fingerprint(samples):
        log.warning("%s: dataset differs from the one the model was trained on", model_path)
    seed = meta.get("split_seed", 42) if seed is None else seed
    part = split(samples, seed).part(split_name)
    return evaluate(part.labels, trained.predict(part), configuration=meta.get("configuration"))


def _config_order(configuration) -> int:
    return CONFIGURATIONS.index(configuration) if configuration in CONFIGURATIONS else len(CONFIGURATIONS)


def report_rows(records, splits=("test",)):
    """Comparison rows ``(data, model, acc, p, r, f1)`` sorted by configuration then model."""
    rows = []
    for rec in records:
        for s in splits:
            if s not in rec.reports:
                continue
            h = rec.reports[s].headline
            label = rec.config["configuration"] if len(splits) == 1 else f"{rec.config['configuration']} ({s})"
            rows.append((_config_order(rec.config["configuration"]), rec.config["model"],
                         (label, rec.config["model"], *(h[m] for m in HEADLINE))))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def compare(records, title: str = "Test-split comparison") -> str:
    if not records:
        raise ValueError("compare needs at least one run record")
    return render_table(report_rows(records), title)
