"""Per-event timing features for client send events.

For every send event, computed in one causal pass over the time-sorted
stream:

  - mote            : sender id
  - interval        : time since the previous send of ANY mote
  - psi             : previous-send interval, time since the SAME mote's
                      previous send
  - avg_psi         : running mean of the mote's psi values so far
  - previous_sender : id of the mote that sent immediately before this event

First-event convention: interval, psi, and previous_sender are 0 on the
stream's (or mote's) first event, and that leading 0 enters the avg_psi
history. No value ever depends on later events, so features computed on a
prefix never change when more traffic arrives.

Flooding motes show tiny psi/avg_psi next to the benign send cadence, which
is the signal the classifier learns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ArtifactIOError, DataError
from .logparse import LogRecord

# Model input columns, in canonical order.
FEATURE_COLUMNS = ("mote", "interval", "psi", "avg_psi", "previous_sender")

CSV_HEADER = ("event_index", "mote", "time", "interval", "psi", "avg_psi", "previous_sender", "label")

FIRST_EVENT_SENTINEL = 0


@dataclass(frozen=True)
class FeatureRow:
    event_index: int
    mote: int
    time: float
    interval: float
    psi: float
    avg_psi: float
    previous_sender: int
    label: int


@dataclass(frozen=True)
class GroupStats:
    """Event-weighted mean psi per label group; None when a group is empty."""

    avg_psi_benign: float | None
    avg_psi_malicious: float | None
    per_mote: dict[int, float]


def interval(ts: float, previous_send_time: float) -> float:
    """Gap between this send and the previous send of any mote."""
    if ts < previous_send_time:
        raise DataError(f"send stream not time-sorted: {ts} precedes previous send at {previous_send_time}")
    return ts - previous_send_time


def psi_same_node(ts: float, pst_same_node: float) -> float:
    """Gap between this send and the same mote's previous send."""
    if ts < pst_same_node:
        raise DataError(f"send stream not time-sorted: {ts} precedes same-mote send at {pst_same_node}")
    return ts - pst_same_node


def avg_psi_same_node(psi_history: Sequence[float]) -> float:
    """Arithmetic mean of a mote's psi values observed so far."""
    if not psi_history:
        raise DataError("avg_psi undefined for an empty history; apply the first-event convention first")
    return sum(psi_history) / len(psi_history)


def previous_sender(send_events: Sequence[LogRecord], index: int) -> int:
    """Mote id of the send event just before ``index`` (0 for the first)."""
    if not 0 <= index < len(send_events):
        raise DataError(f"event index {index} out of range 0..{len(send_events) - 1}")
    if index == 0:
        return FIRST_EVENT_SENTINEL
    return send_events[index - 1].mote


def extract_features(send_events: Sequence[LogRecord], truth: Mapping[int, int]) -> list[FeatureRow]:
    """One FeatureRow per send event, single causal pass.

    Running per-mote sums use plain left-to-right accumulation so the result
    matches a from-scratch recomputation bitwise.
    """
    rows = []
    prev_time: float | None = None
    prev_mote = FIRST_EVENT_SENTINEL
    last_send: dict[int, float] = {}
    psi_sum: dict[int, float] = {}
    psi_count: dict[int, int] = {}
    for index, event in enumerate(send_events):
        if event.mote not in truth:
            raise DataError(f"mote {event.mote} has no ground-truth label")
        gap = 0.0 if prev_time is None else interval(event.time, prev_time)
        psi = 0.0 if event.mote not in last_send else psi_same_node(event.time, last_send[event.mote])
        psi_sum[event.mote] = psi_sum.get(event.mote, 0.0) + psi
        psi_count[event.mote] = psi_count.get(event.mote, 0) + 1
        rows.append(
            FeatureRow(
                event_index=index,
                mote=event.mote,
                time=event.time,
                interval=gap,
                psi=psi,
                avg_psi=psi_sum[event.mote] / psi_count[event.mote],
                previous_sender=prev_mote,
                label=truth[event.mote],
            )
        )
        prev_time = event.time
        prev_mote = event.mote
        last_send[event.mote] = event.time
    return rows


def group_averages(rows: Iterable[FeatureRow], truth: Mapping[int, int]) -> GroupStats:
    """Diagnostic psi means per mote and per label group.

    Group means are event-weighted (every row counts once). These use labels,
    so they are never fed to the model; they only describe the dataset.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    group_sum = {0: 0.0, 1: 0.0}
    group_count = {0: 0, 1: 0}
    for row in rows:
        sums[row.mote] = sums.get(row.mote, 0.0) + row.psi
        counts[row.mote] = counts.get(row.mote, 0) + 1
        group_sum[row.label] += row.psi
        group_count[row.label] += 1
    per_mote = {mote: sums[mote] / counts[mote] for mote in sorted(sums)}
    return GroupStats(
        avg_psi_benign=group_sum[0] / group_count[0] if group_count[0] else None,
        avg_psi_malicious=group_sum[1] / group_count[1] if group_count[1] else None,
        per_mote=per_mote,
    )


def write_features(rows: Iterable[FeatureRow], path) -> None:
    """CSV dump; floats use repr so the round trip is value-exact."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow(
                    [r.event_index, r.mote, repr(r.time), repr(r.interval), repr(r.psi), repr(r.avg_psi), r.previous_sender, r.label]
                )
    except OSError as exc:
        raise ArtifactIOError(f"cannot write features {path}: {exc}") from exc


def read_features(path) -> list[FeatureRow]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != list(CSV_HEADER):
                raise DataError(f"{path}: expected feature CSV header {','.join(CSV_HEADER)}")
            return [
                FeatureRow(
                    event_index=int(row[0]),
                    mote=int(row[1]),
                    time=float(row[2]),
                    interval=float(row[3]),
                    psi=float(row[4]),
                    avg_psi=float(row[5]),
                    previous_sender=int(row[6]),
                    label=int(row[7]),
                )
                for row in reader
            ]
    except OSError as exc:
        raise ArtifactIOError(f"cannot read features {path}: {exc}") from exc


def labels_from_rows(rows: Iterable[FeatureRow]) -> dict[int, int]:
    """Recover the mote -> label mapping carried in a feature table."""
    truth: dict[int, int] = {}
    for row in rows:
        seen = truth.get(row.mote)
        if seen is not None and seen != row.label:
            raise DataError(f"mote {row.mote} carries conflicting labels {seen} and {row.label}")
        truth[row.mote] = row.label
    return truth
