"""Command-line pipeline driver.

Stages compose: ``reproduce`` runs simulate, extract, train, and eval through
the same functions the standalone subcommands use, so chaining the four
stages by hand yields byte-identical artifacts. All randomness flows from the
config seed: the simulator consumes it directly (one substream per mote) and
the training stages use sub-seeds derived as sha256("<seed>:init") and
sha256("<seed>:train").
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import MODEL_FORMAT, __version__, cnn, dataset, evaluate, features, logparse, sim
from .errors import FloodwatchError
from .manifest import RunManifest, derive_seed

_FORMATS = ("json", "text")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def cmd_simulate(config_path: str | None, out_dir: str, seed: int | None = None) -> dict:
    config = sim.load_config(config_path) if config_path else sim.SimConfig()
    if seed is not None:
        config = sim.config_from_dict({**sim.dump_config(config), "seed": seed})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events, truth = sim.simulate(config)
    trace_path = out / "trace.log"
    truth_path = out / "ground_truth.csv"
    sim.write_trace(events, trace_path)
    sim.write_ground_truth(truth, truth_path)
    manifest = RunManifest(command="simulate", parameters=sim.dump_config(config), seeds={"base": config.seed})
    if config_path:
        manifest.add_input(config_path)
    manifest.add_output(trace_path)
    manifest.add_output(truth_path)
    manifest.write(out / "simulate.manifest.json")
    print(f"wrote {len(events)} events for {len(truth)} motes to {trace_path}")
    return {"trace": trace_path, "ground_truth": truth_path, "config": config}


def cmd_extract(trace_path: str, truth_path: str, out_csv: str, lenient: bool = False) -> dict:
    records = logparse.read_trace(trace_path, lenient=lenient)
    sends = logparse.filter_send_events(records)
    truth = sim.read_ground_truth(truth_path)
    rows = features.extract_features(sends, truth)
    features.write_features(rows, out_csv)
    manifest = RunManifest(command="extract", parameters={"lenient": lenient})
    manifest.add_input(trace_path)
    manifest.add_input(truth_path)
    manifest.add_output(out_csv)
    manifest.write(_manifest_path(out_csv))
    stats = features.group_averages(rows, truth)
    benign = "n/a" if stats.avg_psi_benign is None else f"{stats.avg_psi_benign:.3f}s"
    malicious = "n/a" if stats.avg_psi_malicious is None else f"{stats.avg_psi_malicious:.3f}s"
    print(f"extracted {len(rows)} feature rows from {len(records)} log lines")
    print(f"mean same-mote send interval: benign {benign}, malicious {malicious}")
    return {"rows": rows, "features": Path(out_csv)}


def _prepare_datasets(rows, window: int, train_frac: float):
    train_rows, test_rows = dataset.sequential_split(rows, train_frac)
    train_ds = dataset.window(train_rows, window)
    test_ds = dataset.window(test_rows, window)
    scaler = dataset.fit_scaler(train_ds)
    return dataset.apply_scaler(train_ds, scaler), dataset.apply_scaler(test_ds, scaler)


def cmd_train(
    features_csv: str,
    model_out: str,
    window: int = dataset.DEFAULT_WINDOW,
    train_frac: float = dataset.DEFAULT_TRAIN_FRAC,
    epochs: int = 10,
    batch_size: int = 32,
    learning_rate: float = 0.001,
    activation: str = "sigmoid",
    seed: int = 0,
) -> dict:
    rows = features.read_features(features_csv)
    train_ds, _ = _prepare_datasets(rows, window, train_frac)
    init_seed = derive_seed(seed, "init")
    train_seed = derive_seed(seed, "train")
    model = cnn.init_model(window, in_features=train_ds.x.shape[2], output_activation=activation, seed=init_seed)
    cfg = cnn.TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=learning_rate, seed=train_seed)
    started = time.perf_counter()
    trained, history = cnn.train(model, train_ds, cfg)
    elapsed = time.perf_counter() - started
    for i, loss in enumerate(history, start=1):
        print(f"epoch {i}/{len(history)}  loss {loss:.6f}")
    print(f"trained on {train_ds.n_samples} windows in {elapsed:.2f}s")
    cnn.save_model(trained, model_out)
    manifest = RunManifest(
        command="train",
        parameters={
            "window": window,
            "train_frac": train_frac,
            "epochs": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "activation": activation,
        },
        seeds={"base": seed, "init": init_seed, "train": train_seed},
        timing_seconds={"train": elapsed},
    )
    manifest.add_input(features_csv)
    manifest.add_output(model_out)
    manifest.write(_manifest_path(model_out))
    return {"model": Path(model_out), "history": history, "training_seconds": elapsed}


def cmd_eval(
    model_path: str,
    features_csv: str,
    report_out: str,
    train_frac: float = dataset.DEFAULT_TRAIN_FRAC,
    fmt: str = "json",
    training_seconds: float | None = None,
) -> dict:
    model = cnn.load_model(model_path)
    rows = features.read_features(features_csv)
    truth = features.labels_from_rows(rows)
    _, test_ds = _prepare_datasets(rows, model.hyper.window, train_frac)
    preds = cnn.predict(model, test_ds.x)
    report = evaluate.build_report(
        preds,
        test_ds.sample_mote,
        truth,
        window_truth=test_ds.y,
        config={
            "window": model.hyper.window,
            "activation": model.hyper.output_activation,
            "filters": model.hyper.filters,
            "kernel": model.hyper.kernel,
            "pool": model.hyper.pool,
            "train_frac": train_frac,
            "threshold": 0.5,
        },
    )
    report.training_seconds = training_seconds
    out = Path(report_out)
    evaluate.emit_report(report, format=fmt, path=out)
    manifest = RunManifest(command="eval", parameters={"train_frac": train_frac, "format": fmt})
    if training_seconds is not None:
        manifest.timing_seconds["train"] = training_seconds
    manifest.add_input(model_path)
    manifest.add_input(features_csv)
    manifest.add_output(out)
    manifest.write(_manifest_path(out))
    print(evaluate.report_to_text(report), end="")
    return {"report": report, "report_path": out}


def cmd_reproduce(
    config_path: str | None,
    out_dir: str,
    window: int = dataset.DEFAULT_WINDOW,
    train_frac: float = dataset.DEFAULT_TRAIN_FRAC,
    epochs: int = 10,
    batch_size: int = 32,
    learning_rate: float = 0.001,
    seed: int | None = None,
    fmt: str = "json",
) -> dict:
    """simulate -> extract -> train -> eval with the sigmoid head."""
    out = Path(out_dir)
    sim_out = cmd_simulate(config_path, out_dir, seed=seed)
    base_seed = sim_out["config"].seed
    extract_out = cmd_extract(sim_out["trace"], sim_out["ground_truth"], out / "features.csv")
    train_out = cmd_train(
        extract_out["features"],
        out / "model.bin",
        window=window,
        train_frac=train_frac,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        activation="sigmoid",
        seed=base_seed,
    )
    eval_out = cmd_eval(
        train_out["model"],
        extract_out["features"],
        out / ("report.json" if fmt == "json" else "report.txt"),
        train_frac=train_frac,
        fmt=fmt,
        training_seconds=train_out["training_seconds"],
    )
    report = eval_out["report"]
    manifest = RunManifest(
        command="reproduce",
        parameters={
            **sim.dump_config(sim_out["config"]),
            "window": window,
            "train_frac": train_frac,
            "epochs": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "format": fmt,
        },
        seeds={"base": base_seed, "init": derive_seed(base_seed, "init"), "train": derive_seed(base_seed, "train")},
        timing_seconds={"train": train_out["training_seconds"]},
    )
    if config_path:
        manifest.add_input(config_path)
    for artifact in (sim_out["trace"], sim_out["ground_truth"], extract_out["features"], train_out["model"], eval_out["report_path"]):
        manifest.add_output(artifact)
    manifest.write(out / "reproduce.manifest.json")
    entry = evaluate.SweepEntry("sigmoid", report.accuracy_percent, report.error_rate_percent)
    print(evaluate.sweep_to_text([entry]), end="")
    return {**sim_out, **extract_out, **train_out, **eval_out}


def cmd_activation_sweep(
    config_path: str | None,
    out_dir: str,
    window: int = dataset.DEFAULT_WINDOW,
    train_frac: float = dataset.DEFAULT_TRAIN_FRAC,
    epochs: int = 10,
    batch_size: int = 32,
    learning_rate: float = 0.001,
    seed: int | None = None,
    fmt: str = "json",
) -> dict:
    out = Path(out_dir)
    sim_out = cmd_simulate(config_path, out_dir, seed=seed)
    base_seed = sim_out["config"].seed
    extract_out = cmd_extract(sim_out["trace"], sim_out["ground_truth"], out / "features.csv")
    rows = extract_out["rows"]
    truth = features.labels_from_rows(rows)
    train_ds, test_ds = _prepare_datasets(rows, window, train_frac)
    cfg = cnn.TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=learning_rate, seed=derive_seed(base_seed, "train"))
    started = time.perf_counter()
    entries = evaluate.activation_sweep(train_ds, test_ds, truth, cfg, init_seed=derive_seed(base_seed, "init"))
    elapsed = time.perf_counter() - started
    if fmt == "json":
        sweep_path = out / "sweep.json"
        sweep_path.write_text(json.dumps(evaluate.sweep_to_dict(entries), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        sweep_path = out / "sweep.txt"
        sweep_path.write_text(evaluate.sweep_to_text(entries), encoding="utf-8")
    manifest = RunManifest(
        command="activation-sweep",
        parameters={
            **sim.dump_config(sim_out["config"]),
            "window": window,
            "train_frac": train_frac,
            "epochs": epochs,
            "batch_size": batch_size,
            "learning_rate": learning_rate,
            "format": fmt,
        },
        seeds={"base": base_seed, "init": derive_seed(base_seed, "init"), "train": derive_seed(base_seed, "train")},
        timing_seconds={"sweep": elapsed},
    )
    if config_path:
        manifest.add_input(config_path)
    for artifact in (sim_out["trace"], sim_out["ground_truth"], extract_out["features"], sweep_path):
        manifest.add_output(artifact)
    manifest.write(out / "sweep.manifest.json")
    print(evaluate.sweep_to_text(entries), end="")
    return {"entries": entries, "sweep_path": sweep_path}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodwatch",
        description="Synthesize WSN traffic with flooding attacks, extract timing features, train and evaluate the CNN detector.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} (model format {MODEL_FORMAT})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a trace and ground-truth labels")
    p.add_argument("--config", help="simulation config JSON; defaults from the built-in scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("extract", help="parse a trace and write the feature CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--lenient-parse", action="store_true", help="skip malformed lines instead of failing")

    p = sub.add_parser("train", help="split, window, normalize, and train a model")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--window", type=int, default=dataset.DEFAULT_WINDOW)
    p.add_argument("--train-frac", type=float, default=dataset.DEFAULT_TRAIN_FRAC)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--activation", choices=cnn.ACTIVATIONS, default="sigmoid")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="evaluate a model on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--train-frac", type=float, default=dataset.DEFAULT_TRAIN_FRAC)
    p.add_argument("--format", choices=_FORMATS, default="json")

    for name, help_text in (
        ("reproduce", "run simulate, extract, train, eval in one go"),
        ("activation-sweep", "compare sigmoid, softmax, relu, and tanh heads on one dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="simulation config JSON; defaults from the built-in scenario")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--window", type=int, default=dataset.DEFAULT_WINDOW)
        p.add_argument("--train-frac", type=float, default=dataset.DEFAULT_TRAIN_FRAC)
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--learning-rate", type=float, default=0.001)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--format", choices=_FORMATS, default="json")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out, seed=args.seed)
        elif args.command == "extract":
            cmd_extract(args.trace, args.ground_truth, args.out, lenient=args.lenient_parse)
        elif args.command == "train":
            cmd_train(
                args.features,
                args.out,
                window=args.window,
                train_frac=args.train_frac,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                activation=args.activation,
                seed=args.seed,
            )
        elif args.command == "eval":
            cmd_eval(args.model, args.features, args.out, train_frac=args.train_frac, fmt=args.format)
        elif args.command == "reproduce":
            cmd_reproduce(
                args.config,
                args.out,
                window=args.window,
                train_frac=args.train_frac,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                seed=args.seed,
                fmt=args.format,
            )
        elif args.command == "activation-sweep":
            cmd_activation_sweep(
                args.config,
                args.out,
                window=args.window,
                train_frac=args.train_frac,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                seed=args.seed,
                fmt=args.format,
            )
    except FloodwatchError as exc:
        print(f"floodwatch: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
