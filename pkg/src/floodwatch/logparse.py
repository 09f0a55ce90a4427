"""Parse mote/server trace logs.

Line grammar, one event per line:

    MM:SS.mmm<TAB>ID:<mote_id><TAB><message>

The minutes field is unbounded (times past 59:59.999 keep counting minutes,
e.g. ``73:05.120``). Hand-edited files are tolerated: runs of two or more
spaces work as separators in place of tabs. The message is kept verbatim.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable

from .errors import TraceParseError

logger = logging.getLogger(__name__)

# Tab or >=2 spaces; a single space cannot separate fields because messages
# contain single spaces.
_LINE_RE = re.compile(r"^(\d+):(\d{2})\.(\d{3})(?:\t| {2,})+ID:(\d+)(?:\t| {2,})+(.+)$")

SEND_PREFIX = "DATA send"


@dataclass(frozen=True)
class LogRecord:
    """One parsed log line: timestamp, logging mote, message text."""

    time: float  # seconds since trace start, millisecond resolution
    mote: int
    message: str


def seconds_from_ms(ms: int) -> float:
    """Millisecond count to float seconds.

    Split into integer seconds plus a millisecond fraction so writer and
    parser produce bitwise-identical floats for the same instant.
    """
    return ms // 1000 + (ms % 1000) / 1000.0


def format_timestamp(seconds: float) -> str:
    """Render seconds as ``MM:SS.mmm`` with an unbounded minutes field."""
    ms = round(seconds * 1000)
    if ms < 0:
        raise ValueError(f"negative timestamp: {seconds}")
    return f"{ms // 60000:02d}:{ms % 60000 // 1000:02d}.{ms % 1000:03d}"


def parse_line(line: str, lineno: int = 1) -> LogRecord:
    """Parse one trace line into a LogRecord.

    Raises TraceParseError (with line number and offending text) on a
    malformed time field, missing ``ID:`` token, or empty message.
    """
    m = _LINE_RE.match(line.rstrip("\r\n"))
    if m is None:
        raise TraceParseError("not a trace line (MM:SS.mmm, ID:<n>, message)", lineno, line)
    minutes, sec, msec, mote, message = m.groups()
    if not message.strip():
        raise TraceParseError("empty message", lineno, line)
    time = (60 * int(minutes) + int(sec)) + int(msec) / 1000.0
    return LogRecord(time=time, mote=int(mote), message=message)


def parse_trace(lines: Iterable[str], lenient: bool = False) -> list[LogRecord]:
    """Parse a stream of lines in file order.

    Strict mode (default) fails on the first malformed line. Lenient mode
    skips malformed lines and logs how many were dropped; real deployments
    interleave boot banners and debug chatter with traffic lines.
    """
    records = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(parse_line(line, lineno))
        except TraceParseError:
            if not lenient:
                raise
            skipped += 1
    if skipped:
        logger.warning("skipped %d malformed line(s) in lenient mode", skipped)
    return records


def filter_send_events(records: Iterable[LogRecord]) -> list[LogRecord]:
    """Keep only client send events, preserving order."""
    return [r for r in records if r.message.startswith(SEND_PREFIX)]


def read_trace(path, lenient: bool = False) -> list[LogRecord]:
    """Parse a trace file."""
    from .errors import ArtifactIOError

    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_trace(fh, lenient=lenient)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read trace {path}: {exc}") from exc
