"""Command line interface: ``falldet {prepare,synth,train,evaluate,compare}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..dataio import (
    DEFAULT_MAX_GAP,
    ColumnManifest,
    SynthConfig,
    align,
    clean,
    load_consolidated_csv,
    load_frames,
    synth_generate,
    write_aligned,
    write_synth_dir,
)
from ..metrics import render_table
from .config import ExperimentConfig
from .runner import RunRecord, compare, evaluate_model, report_rows, run, run_repeats

log = logging.getLogger("falldet")


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def cmd_prepare(args) -> int:
    manifest = ColumnManifest.load(args.columns)
    table = load_consolidated_csv(args.sensors, manifest)
    n_raw = len(table)
    table = clean(table)
    cam1 = load_frames(args.cam1, 1)
    cam2 = load_frames(args.cam2, 2)
    samples = align(table, cam1, cam2, max_gap=args.max_gap, manifest=manifest)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_aligned(args.out, samples)
    counts = {
        "sensor_rows": n_raw,
        "dropped_duplicates": table.meta["dropped"]["duplicates"],
        "dropped_missing": table.meta["dropped"]["missing"],
        "frames_cam1": len(cam1),
        "frames_cam2": len(cam2),
        "dropped_gap": samples.meta["dropped_gap"],
        "samples": len(samples),
        "out": str(args.out),
    }
    _emit(args, counts, "\n".join(f"{k}: {v}" for k, v in counts.items()))
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_per_class=args.n_per_class, seed=args.seed)
    data = synth_generate(cfg=cfg)
    paths = write_synth_dir(args.out, data)
    payload = {"n_sensor_rows": len(data.sensors), **paths}
    if args.fald:
        samples = align(data.sensors, data.frames_cam1, data.frames_cam2)
        write_aligned(args.fald, samples)
        payload.update(fald=str(args.fald), samples=len(samples))
    _emit(args, payload, "\n".join(f"{k}: {v}" for k, v in payload.items()))
    return 0


def _experiment_config(args) -> ExperimentConfig:
    if args.config:
        d = json.loads(Path(args.config).read_text())
    else:
        d = {}
    for key in ("data", "configuration", "model"):
        value = getattr(args, key)
        if value is not None:
            d[key] = value
    if args.synth:
        d["data"] = {"synth": {}}
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out is not None:
        d["out"] = args.out
    missing = [k for k in ("data", "configuration", "model") if k not in d]
    if missing:
        raise ValueError(f"config is missing {missing}; pass --config or the matching flags")
    return ExperimentConfig.from_dict(d)


def cmd_train(args) -> int:
    cfg = _experiment_config(args)
    if args.repeats > 1:
        summary = run_repeats(cfg, args.repeats, args.fit_on_all)
        text = "\n".join(
            f"{m}: {100 * summary['mean'][m]:.2f} ± {100 * summary['std'][m]:.2f}" for m in summary["mean"]
        )
        _emit(args, summary, f"{cfg.model} on {cfg.configuration}, {args.repeats} seeds\n{text}")
        return 0
    record = run(cfg, fit_on_all=args.fit_on_all)
    text = render_table(report_rows([record], splits=("val", "test")), title=f"{cfg.model} on {cfg.configuration}")
    _emit(args, record.to_dict(), f"{text}\nmodel: {record.model_path}")
    return 0


def cmd_evaluate(args) -> int:
    data = args.data
    if args.synth:
        data = {"synth": {}}
    rep = evaluate_model(args.checkpoint, data, args.split, args.seed)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(rep.to_json())
    h = rep.headline
    rows = [(rep.configuration or "-", Path(args.checkpoint).parent.name or "-", *(h[m] for m in ("accuracy", "precision", "recall", "f1")))]
    cm = "\n".join(" ".join(f"{v:4d}" for v in row) for row in rep.confusion)
    _emit(args, rep.to_dict(), f"{render_table(rows, title=f'{args.split} split')}\nconfusion matrix:\n{cm}")
    return 0


def cmd_compare(args) -> int:
    records = [RunRecord.load(p) for p in args.runs]
    table = compare(records)
    if args.out:
        Path(args.out).write_text(table + "\n")
    payload = {"rows": [dict(zip(("data", "model", "accuracy", "precision", "recall", "f1"), r))
                        for r in report_rows(records)]}
    _emit(args, payload, table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="falldet", description="Multimodal fall-detection experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output on stdout")

    sp = sub.add_parser("prepare", help="clean, align and pack raw recordings into a FALD1 file")
    sp.add_argument("--sensors", required=True, help="consolidated sensor CSV")
    sp.add_argument("--cam1", required=True, help="camera 1 frame directory")
    sp.add_argument("--cam2", required=True, help="camera 2 frame directory")
    sp.add_argument("--out", required=True, help="output FALD1 file")
    sp.add_argument("--max-gap", type=float, default=DEFAULT_MAX_GAP, help="max sensor/frame gap in seconds")
    sp.add_argument("--columns", help="column manifest JSON (default: the bundled one)")
    common(sp)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("synth", help="write a synthetic recording (CSV + frame directories)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--n-per-class", type=int, default=50)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--fald", help="also write the aligned samples to this FALD1 file")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train and evaluate one model")
    sp.add_argument("--config", help="experiment JSON {data, configuration, model, train, seed, out}")
    sp.add_argument("--data", help="FALD1 file (overrides config)")
    sp.add_argument("--synth", action="store_true", help="use default synthetic data")
    sp.add_argument("--configuration", help="S, C1, C2, C1+C2 or S+C1+C2")
    sp.add_argument("--model", help="model name")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="run output directory")
    sp.add_argument("--repeats", type=int, default=1, help="repeat with consecutive seeds; report mean ± std")
    sp.add_argument("--fit-on-all", action="store_true",
                    help="fit sensor standardization on all samples instead of the train split")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate a saved model on one split")
    sp.add_argument("--checkpoint", required=True, help="checkpoint.json or model.json")
    sp.add_argument("--data", help="FALD1 file; defaults to the training data source")
    sp.add_argument("--synth", action="store_true", help="use default synthetic data")
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.add_argument("--seed", type=int, help="split seed; defaults to the one stored with the model")
    sp.add_argument("--out", help="write the report JSON here")
    common(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="tabulate test metrics of several runs")
    sp.add_argument("runs", nargs="+", help="run directories or run.json files")
    sp.add_argument("--out", help="write the text table here")
    common(sp)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"falldet {args.command}: error: {msg}", file=sys.stderr)
        if getattr(args, "json", False):
            print(json.dumps({"error": str(msg), "type": type(exc).__name__}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
