"""Node-level evaluation and reporting.

Window scores become node verdicts by majority vote over each mote's test
windows; an exact tie counts as malicious, the fail-safe direction for a
security detector. Accuracy is the percentage of correctly classified nodes
and the error rate is its complement, so the two always sum to 100.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import cnn
from .dataset import WindowedDataset
from .errors import ArtifactIOError, DataError, EvalError, FloodwatchError
from .features import FeatureRow

DEFAULT_BASELINE_THRESHOLD = 10.0


@dataclass(frozen=True)
class NodeResult:
    mote: int
    true_label: int
    predicted_label: int
    vote_fraction: float  # fraction of windows voting malicious
    n_windows: int


@dataclass
class EvalReport:
    nodes: list[NodeResult]
    accuracy_percent: float
    error_rate_percent: float
    tp: int
    tn: int
    fp: int
    fn: int
    excluded_motes: tuple[int, ...] = ()
    window_accuracy_percent: float | None = None
    precision_percent: float | None = None
    recall_percent: float | None = None
    f1_percent: float | None = None
    config: dict = field(default_factory=dict)
    # wall clock; printed and recorded in manifests but kept out of report
    # files so identical runs serialize identically
    training_seconds: float | None = None


def aggregate_node_predictions(window_preds: Sequence[int], sample_mote: Sequence[int]) -> dict[int, int]:
    """Majority vote per mote; exact 50% ties predict malicious."""
    votes = _vote_fractions(window_preds, sample_mote)
    return {mote: int(frac >= 0.5) for mote, (frac, _) in votes.items()}


def _vote_fractions(window_preds: Sequence[int], sample_mote: Sequence[int]) -> dict[int, tuple[float, int]]:
    preds = np.asarray(window_preds)
    motes = np.asarray(sample_mote)
    if preds.shape != motes.shape:
        raise DataError(f"got {preds.shape[0]} predictions for {motes.shape[0]} sample motes")
    out: dict[int, tuple[float, int]] = {}
    for mote in np.unique(motes):
        mask = motes == mote
        out[int(mote)] = (float(preds[mask].mean()), int(mask.sum()))
    return out


def accuracy(node_preds: Mapping[int, int], truth: Mapping[int, int]) -> float:
    """Percent of nodes classified correctly, over nodes present in both."""
    common = sorted(set(node_preds) & set(truth))
    if not common:
        raise EvalError("no evaluable nodes: predictions and ground truth share no motes")
    correct = sum(node_preds[m] == truth[m] for m in common)
    return 100.0 * correct / len(common)


def error_rate(accuracy_percent: float) -> float:
    return 100.0 - accuracy_percent


def build_report(
    window_preds: Sequence[int],
    sample_mote: Sequence[int],
    truth: Mapping[int, int],
    window_truth: Sequence[int] | None = None,
    config: dict | None = None,
) -> EvalReport:
    """Assemble the node-level report from per-window predictions."""
    votes = _vote_fractions(window_preds, sample_mote)
    node_preds = {mote: int(frac >= 0.5) for mote, (frac, _) in votes.items()}
    acc = accuracy(node_preds, truth)
    common = sorted(set(node_preds) & set(truth))
    nodes = [
        NodeResult(
            mote=m,
            true_label=truth[m],
            predicted_label=node_preds[m],
            vote_fraction=votes[m][0],
            n_windows=votes[m][1],
        )
        for m in common
    ]
    tp = sum(1 for n in nodes if n.true_label == 1 and n.predicted_label == 1)
    tn = sum(1 for n in nodes if n.true_label == 0 and n.predicted_label == 0)
    fp = sum(1 for n in nodes if n.true_label == 0 and n.predicted_label == 1)
    fn = sum(1 for n in nodes if n.true_label == 1 and n.predicted_label == 0)
    window_acc = None
    if window_truth is not None:
        preds = np.asarray(window_preds)
        wt = np.asarray(window_truth)
        if preds.shape != wt.shape:
            raise DataError(f"got {preds.shape[0]} predictions for {wt.shape[0]} window labels")
        window_acc = float(100.0 * np.mean(preds == wt))
    return EvalReport(
        nodes=nodes,
        accuracy_percent=acc,
        error_rate_percent=error_rate(acc),
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        excluded_motes=tuple(sorted(set(truth) - set(node_preds))),
        window_accuracy_percent=window_acc,
        precision_percent=100.0 * tp / (tp + fp) if tp + fp else None,
        recall_percent=100.0 * tp / (tp + fn) if tp + fn else None,
        f1_percent=100.0 * 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None,
        config=dict(config or {}),
    )


def baseline_interval_threshold(
    rows: Sequence[FeatureRow],
    truth: Mapping[int, int],
    threshold_seconds: float = DEFAULT_BASELINE_THRESHOLD,
) -> EvalReport:
    """Label-free sanity oracle: a mote whose mean same-mote send interval
    falls below the threshold is called malicious.

    On separable data this should reach 100% before any learned model is
    trusted.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for row in rows:
        sums[row.mote] = sums.get(row.mote, 0.0) + row.psi
        counts[row.mote] = counts.get(row.mote, 0) + 1
    if not counts:
        raise EvalError("no rows to evaluate")
    preds = [int(sums[m] / counts[m] < threshold_seconds) for m in counts]
    motes = list(counts)
    return build_report(preds, motes, truth, config={"baseline_threshold_seconds": threshold_seconds})


@dataclass(frozen=True)
class SweepEntry:
    activation: str
    accuracy_percent: float
    error_rate_percent: float


def activation_sweep(
    train_ds: WindowedDataset,
    test_ds: WindowedDataset,
    truth: Mapping[int, int],
    train_cfg: cnn.TrainConfig,
    init_seed: int = 0,
) -> list[SweepEntry]:
    """Train one model per output activation on identical data and seeds."""
    window = train_ds.x.shape[1]
    in_features = train_ds.x.shape[2]
    entries = []
    for activation in cnn.ACTIVATIONS:
        try:
            model = cnn.init_model(window, in_features=in_features, output_activation=activation, seed=init_seed)
            trained, _ = cnn.train(model, train_ds, train_cfg)
            preds = cnn.predict(trained, test_ds.x)
        except FloodwatchError as exc:
            raise type(exc)(f"activation {activation}: {exc}") from exc
        acc = accuracy(aggregate_node_predictions(preds, test_ds.sample_mote), truth)
        entries.append(SweepEntry(activation, acc, error_rate(acc)))
    return entries


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready form of a report; schema documented in the README."""
    return {
        "accuracy_percent": report.accuracy_percent,
        "error_rate_percent": report.error_rate_percent,
        "confusion": {"tp": report.tp, "tn": report.tn, "fp": report.fp, "fn": report.fn},
        "precision_percent": report.precision_percent,
        "recall_percent": report.recall_percent,
        "f1_percent": report.f1_percent,
        "window_accuracy_percent": report.window_accuracy_percent,
        "nodes": [
            {
                "mote": n.mote,
                "true_label": n.true_label,
                "predicted_label": n.predicted_label,
                "vote_fraction": n.vote_fraction,
                "n_windows": n.n_windows,
            }
            for n in report.nodes
        ],
        "excluded_motes": list(report.excluded_motes),
        "config": report.config,
    }


def report_to_text(report: EvalReport) -> str:
    lines = [f"{'mote':>6} {'true':>5} {'predicted':>10} {'malicious_vote':>15} {'windows':>8}"]
    for n in report.nodes:
        lines.append(f"{n.mote:>6} {n.true_label:>5} {n.predicted_label:>10} {n.vote_fraction:>15.3f} {n.n_windows:>8}")
    if report.excluded_motes:
        lines.append(f"excluded (no test windows): {', '.join(map(str, report.excluded_motes))}")
    lines.append(f"node accuracy: {report.accuracy_percent:.2f}%   error rate: {report.error_rate_percent:.2f}%")
    if report.window_accuracy_percent is not None:
        lines.append(f"window accuracy: {report.window_accuracy_percent:.2f}%")
    lines.append(
        f"confusion (nodes): TP={report.tp} TN={report.tn} FP={report.fp} FN={report.fn}"
    )
    return "\n".join(lines) + "\n"


def sweep_to_text(entries: Sequence[SweepEntry]) -> str:
    lines = [f"{'Activation':<12} {'Accuracy (%)':>13} {'Error Rate (%)':>15}"]
    for e in entries:
        lines.append(f"{e.activation:<12} {e.accuracy_percent:>13.2f} {e.error_rate_percent:>15.2f}")
    return "\n".join(lines) + "\n"


def sweep_to_dict(entries: Sequence[SweepEntry]) -> list[dict]:
    return [
        {"activation": e.activation, "accuracy_percent": e.accuracy_percent, "error_rate_percent": e.error_rate_percent}
        for e in entries
    ]


def emit_report(report: EvalReport, format: str = "text", path=None) -> str:
    """Render a report; write it to ``path`` when given. Returns the text."""
    if format == "json":
        rendered = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    elif format == "text":
        rendered = report_to_text(report)
    else:
        raise DataError(f"unknown report format {format!r}; expected text or json")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(rendered)
        except OSError as exc:
            raise ArtifactIOError(f"cannot write report {path}: {exc}") from exc
    return rendered
