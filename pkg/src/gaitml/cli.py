"""``gaitml`` command line: synth, train, eval, export, stream."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from gaitml.dataset import (
    SynthConfig,
    iter_samples,
    load_manifest,
    split_by_recording,
    synthesize_dataset,
    write_manifest,
    write_recording,
)
from gaitml.deploy.bundle import load_bundle, save_bundle
from gaitml.deploy.header import export_c_header
from gaitml.deploy.quant import quantize
from gaitml.deploy.stream import StreamEngine, format_event
from gaitml.errors import GaitError
from gaitml.model import TrainConfig
from gaitml.pipeline import PipelineConfig, evaluate_bundle, fit_pipeline
from gaitml.windowing import WindowConfig

log = logging.getLogger("gaitml")

DEFAULTS = {
    "seed": 42,
    "window_ms": 2000.0,
    "stride_ms": 80.0,
    "rate_hz": 100.0,
    "epochs": 30,
    "batch_size": 32,
    "lr": 0.001,
    "k_clusters": 8,
    "train_fraction": 0.8,
    "quantize": False,
    "per_class": 10,
    "duration_s": 10.0,
    "axes": 3,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="global RNG seed (default 42)")
    p.add_argument("--config", type=Path, default=None, help="JSON file of flag defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset and manifest")
    _common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--rate-hz", type=float, default=None)
    p.add_argument("--per-class", type=int, default=None)
    p.add_argument("--duration-s", type=float, default=None)
    p.add_argument("--axes", type=int, choices=(3, 6), default=None)

    p = sub.add_parser("train", help="train a bundle from a manifest")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="bundle file to write")
    p.add_argument("--history", type=Path, default=None, help="history CSV (default <out>.history.csv)")
    p.add_argument("--report", type=Path, default=None, help="eval JSON (default <out>.eval.json)")
    p.add_argument("--window-ms", type=float, default=None)
    p.add_argument("--stride-ms", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--k-clusters", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--quantize", action="store_true", default=None, help="store an int8 classifier")

    p = sub.add_parser("eval", help="evaluate a bundle on manifest recordings")
    _common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", choices=("test", "train", "all"), default="test",
                   help="recordings to evaluate; test/train use the ids stored at training time")
    p.add_argument("--out", type=Path, default=None, help="JSON path (default stdout)")

    p = sub.add_parser("export", help="write a C header for a quantized bundle")
    _common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="header path (default stdout)")
    p.add_argument("--quantize", action="store_true", default=None, help="quantize a float bundle first")

    p = sub.add_parser("stream", help="replay a recording CSV (or stdin) through the streaming engine")
    _common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--csv", type=Path, default=None, help="recording CSV (default stdin)")
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """flags > config file > defaults."""
    config = {}
    if args.config is not None:
        config = json.loads(args.config.read_text())
    out = {}
    for key, value in vars(args).items():
        if value is None and key in config:
            value = config[key]
        if value is None:
            value = DEFAULTS.get(key)
        out[key] = value
    return out


def cmd_synth(o: dict) -> int:
    out: Path = o["out"]
    out.mkdir(parents=True, exist_ok=True)
    ds = synthesize_dataset(
        per_class=o["per_class"], duration_s=o["duration_s"], rate_hz=o["rate_hz"],
        seed=o["seed"], config=SynthConfig(axes=o["axes"]),
    )
    files = {}
    for rec in ds:
        name = f"{rec.id}.csv"
        write_recording(rec, out / name)
        files[rec.id] = name
    write_manifest(ds, out / "manifest.json", files)
    log.info("wrote %d recordings to %s", len(ds), out)
    return 0


def cmd_train(o: dict) -> int:
    ds = load_manifest(o["manifest"])
    train_ds, test_ds = split_by_recording(ds, o["train_fraction"], o["seed"])
    cfg = PipelineConfig(
        window=WindowConfig(o["window_ms"], o["stride_ms"]),
        train=TrainConfig(epochs=o["epochs"], batch_size=o["batch_size"], learning_rate=o["lr"]),
        k_clusters=o["k_clusters"],
        train_fraction=o["train_fraction"],
        seed=o["seed"],
        quantize=bool(o["quantize"]),
    )
    result = fit_pipeline(train_ds, test_ds, cfg)
    out: Path = o["out"]
    save_bundle(result.bundle, out)
    history = o["history"] or out.with_name(out.name + ".history.csv")
    report = o["report"] or out.with_name(out.name + ".eval.json")
    result.history.write_csv(history)
    report.write_text(json.dumps(result.report.to_dict(), indent=2) + "\n")
    log.info("train windows %d, test windows %d", result.train_windows, result.test_windows)
    print(result.report.format_text())
    return 0


def cmd_eval(o: dict) -> int:
    bundle = load_bundle(o["bundle"])
    ds = load_manifest(o["manifest"])
    if o["split"] == "all":
        recs = ds
    else:
        key = f"{o['split']}_ids"
        if key not in bundle.meta:
            raise GaitError(f"bundle has no stored {o['split']} split; use --split all")
        recs = ds.subset(bundle.meta[key])
        missing = set(bundle.meta[key]) - set(recs.ids)
        if missing:
            raise GaitError(f"manifest lacks recordings {sorted(missing)}")
    report = evaluate_bundle(bundle, recs)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if o["out"] is None:
        sys.stdout.write(text)
    else:
        o["out"].write_text(text)
    return 0


def cmd_export(o: dict) -> int:
    bundle = load_bundle(o["bundle"])
    if o["quantize"] and not bundle.quantized:
        bundle = bundle.with_classifier(quantize(bundle.classifier))
    text = export_c_header(bundle)
    if o["out"] is None:
        sys.stdout.write(text)
    else:
        o["out"].write_text(text)
    return 0


def cmd_stream(o: dict) -> int:
    engine = StreamEngine(load_bundle(o["bundle"]))
    if o["csv"] is None:
        samples = iter_samples(sys.stdin, "<stdin>")
        _emit(engine, samples)
    else:
        with o["csv"].open(newline="") as fh:
            _emit(engine, iter_samples(fh, str(o["csv"])))
    return 0


def _emit(engine: StreamEngine, samples) -> None:
    for ev in engine.run(samples):
        print(format_event(ev), flush=True)


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "export": cmd_export,
    "stream": cmd_stream,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        opts = _resolve(args)
        return COMMANDS[args.command](opts)
    except BrokenPipeError:
        # downstream reader (e.g. `head`) went away; not an error
        sys.stdout = open(os.devnull, "w")
        return 0
    except (GaitError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"gaitml: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
