"""Deterministic traffic generator for a star-topology sensor network.

Client motes send periodic ``temp=…,hum=…`` readings to one server mote.
Benign motes keep a slow cadence (default one reading per minute, plus or
minus a few seconds). Malicious motes behave exactly like benign ones until
``attack_start`` and then switch to a flooding cadence two orders of
magnitude faster, which is the DDoS pattern the detector is trained to
recognize.

Determinism: every mote owns an RNG stream derived from (config seed,
mote id), so the same config always produces the same trace, and adding or
removing a mote leaves the other motes' schedules untouched. Event times are
generated on an integer millisecond grid; the float ``time`` values are
exactly the ones the log parser reconstructs.

Timing model: each client send is mirrored by a server receive after a fixed
2 ms delivery delay; no packet loss, no radio/PHY modeling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ArtifactIOError, ConfigError
from .logparse import format_timestamp, seconds_from_ms

DELIVERY_DELAY_MS = 2

BENIGN = 0
MALICIOUS = 1


@dataclass(frozen=True)
class SensorRanges:
    """Uniform sampling ranges for the synthesized payload readings."""

    temp_min: float = 18.0
    temp_max: float = 28.0
    hum_min: float = 30.0
    hum_max: float = 70.0


@dataclass(frozen=True)
class SimConfig:
    seed: int = 42
    duration: float = 3600.0
    server_id: int = 1
    benign_ids: Sequence[int] = tuple(range(2, 10))
    malicious_ids: Sequence[int] = (10, 11)
    benign_interval_mean: float = 60.0
    benign_interval_jitter: float = 5.0
    attack_interval_mean: float = 0.5
    attack_interval_jitter: float = 0.2
    attack_start: float = 0.0
    sensor_ranges: SensorRanges = field(default_factory=SensorRanges)

    def validate(self) -> None:
        """Raise ConfigError naming the first violated invariant."""
        ids = [self.server_id, *self.benign_ids, *self.malicious_ids]
        if any(i <= 0 for i in ids):
            raise ConfigError("all mote ids must be positive")
        if len(set(ids)) != len(ids):
            raise ConfigError("mote ids must be unique and the server id must appear in neither node list")
        if not self.benign_ids and not self.malicious_ids:
            raise ConfigError("at least one client mote is required")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.benign_interval_mean <= 0 or self.attack_interval_mean <= 0:
            raise ConfigError("interval means must be > 0")
        if not 0 <= self.benign_interval_jitter < self.benign_interval_mean:
            raise ConfigError("benign_interval_jitter must satisfy 0 <= jitter < benign_interval_mean")
        if not 0 <= self.attack_interval_jitter < self.attack_interval_mean:
            raise ConfigError("attack_interval_jitter must satisfy 0 <= jitter < attack_interval_mean")
        if not 0 <= self.attack_start <= self.duration:
            raise ConfigError("attack_start must lie within [0, duration]")
        if self.benign_interval_mean <= self.attack_interval_mean:
            raise ConfigError("benign_interval_mean must exceed attack_interval_mean")


class EventKind(Enum):
    CLIENT_SEND = "send"
    SERVER_RECV = "recv"


@dataclass(frozen=True)
class TraceEvent:
    """One trace event.

    ``sender`` is the client mote that transmitted the payload for both
    kinds; ``server`` is the receiving server id, carried so a trace can be
    rendered to the log grammar (send lines embed the destination, receive
    lines are logged under the server's id).
    """

    time: float
    sender: int
    kind: EventKind
    payload: str
    server: int

    def to_line(self) -> str:
        if self.kind is EventKind.CLIENT_SEND:
            mote, message = self.sender, f"DATA send to {self.server} '{self.payload}'"
        else:
            mote, message = self.server, f"DATA recv from {self.sender} '{self.payload}'"
        return f"{format_timestamp(self.time)}\tID:{mote}\t{message}"


GroundTruth = dict[int, int]  # mote id -> BENIGN / MALICIOUS


def _mote_events(config: SimConfig, mote: int, malicious: bool) -> list[TraceEvent]:
    rng = np.random.default_rng([config.seed, mote])
    duration_ms = round(config.duration * 1000)
    attack_start_ms = round(config.attack_start * 1000)
    ranges = config.sensor_ranges

    def in_attack(t_ms: int) -> bool:
        return malicious and t_ms >= attack_start_ms

    first_mean = config.attack_interval_mean if in_attack(0) else config.benign_interval_mean
    t_ms = round(rng.uniform(0.0, first_mean) * 1000)
    events = []
    while t_ms <= duration_ms:
        temp = rng.uniform(ranges.temp_min, ranges.temp_max)
        hum = rng.uniform(ranges.hum_min, ranges.hum_max)
        payload = f"temp={temp:.1f},hum={hum:.1f}"
        events.append(TraceEvent(seconds_from_ms(t_ms), mote, EventKind.CLIENT_SEND, payload, config.server_id))
        events.append(
            TraceEvent(seconds_from_ms(t_ms + DELIVERY_DELAY_MS), mote, EventKind.SERVER_RECV, payload, config.server_id)
        )
        if in_attack(t_ms):
            mean, jitter = config.attack_interval_mean, config.attack_interval_jitter
        else:
            mean, jitter = config.benign_interval_mean, config.benign_interval_jitter
        # clamp to the millisecond grid so per-mote send times stay strictly increasing
        t_ms += max(1, round(rng.uniform(mean - jitter, mean + jitter) * 1000))
    return events


def simulate(config: SimConfig) -> tuple[list[TraceEvent], GroundTruth]:
    """Generate the time-sorted event trace and per-mote ground truth.

    Ties at equal times order by (sender, send-before-recv) so the output is
    a total order and identical configs produce bitwise-identical traces.
    """
    config.validate()
    events: list[TraceEvent] = []
    truth: GroundTruth = {}
    for mote in sorted(config.benign_ids):
        events.extend(_mote_events(config, mote, malicious=False))
        truth[mote] = BENIGN
    for mote in sorted(config.malicious_ids):
        events.extend(_mote_events(config, mote, malicious=True))
        truth[mote] = MALICIOUS
    events.sort(key=lambda e: (round(e.time * 1000), e.sender, e.kind is not EventKind.CLIENT_SEND))
    return events, truth


def write_trace(events: Sequence[TraceEvent], path) -> None:
    """Write one newline-terminated log line per event."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for event in events:
                fh.write(event.to_line() + "\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write trace {path}: {exc}") from exc


def write_ground_truth(truth: Mapping[int, int], path) -> None:
    """Write the ``mote_id,label`` CSV sorted by mote id."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("mote_id,label\n")
            for mote in sorted(truth):
                fh.write(f"{mote},{truth[mote]}\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write ground truth {path}: {exc}") from exc


def read_ground_truth(path) -> GroundTruth:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read ground truth {path}: {exc}") from exc
    if not lines or lines[0] != "mote_id,label":
        raise ConfigError(f"{path}: expected header 'mote_id,label'")
    truth: GroundTruth = {}
    for line in lines[1:]:
        mote, label = line.split(",")
        truth[int(mote)] = int(label)
    return truth


def load_config(path) -> SimConfig:
    """Read a SimConfig from JSON; keys match the field names exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(raw, source=str(path))


def config_from_dict(raw: dict, source: str = "config") -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: expected a JSON object")
    known = {f for f in SimConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if "sensor_ranges" in kwargs:
        ranges = kwargs["sensor_ranges"]
        extra = set(ranges) - set(SensorRanges.__dataclass_fields__)
        if extra:
            raise ConfigError(f"{source}: unknown sensor_ranges keys {sorted(extra)}")
        kwargs["sensor_ranges"] = SensorRanges(**ranges)
    for key in ("benign_ids", "malicious_ids"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        config = SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    config.validate()
    return config


def dump_config(config: SimConfig) -> dict:
    """Config as a JSON-serializable dict (inverse of config_from_dict)."""
    return {
        "seed": config.seed,
        "duration": config.duration,
        "server_id": config.server_id,
        "benign_ids": list(config.benign_ids),
        "malicious_ids": list(config.malicious_ids),
        "benign_interval_mean": config.benign_interval_mean,
        "benign_interval_jitter": config.benign_interval_jitter,
        "attack_interval_mean": config.attack_interval_mean,
        "attack_interval_jitter": config.attack_interval_jitter,
        "attack_start": config.attack_start,
        "sensor_ranges": {
            "temp_min": config.sensor_ranges.temp_min,
            "temp_max": config.sensor_ranges.temp_max,
            "hum_min": config.sensor_ranges.hum_min,
            "hum_max": config.sensor_ranges.hum_max,
        },
    }
