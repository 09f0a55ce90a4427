"""Error taxonomy shared by the library and the CLI.

Every category maps to a distinct process exit code so scripted callers can
tell configuration mistakes from bad data, numeric blow-ups, or plain I/O
failures.
"""


class FloodwatchError(Exception):
    """Base class; exit code 1 is the generic failure."""

    exit_code = 1


class ConfigError(FloodwatchError):
    """Invalid configuration; the message names the violated constraint."""

    exit_code = 2


class TraceParseError(FloodwatchError):
    """Malformed trace line; carries the line number and offending text."""

    exit_code = 3

    def __init__(self, message: str, lineno: int, text: str):
        super().__init__(f"line {lineno}: {message}: {text!r}")
        self.lineno = lineno
        self.text = text


class DataError(FloodwatchError):
    """Bad or insufficient data: ordering, labeling, empty datasets."""

    exit_code = 4


class ShapeError(DataError):
    """Array shape does not match the model or layer contract."""


class NumericError(FloodwatchError):
    """Non-finite values or diverged training."""

    exit_code = 5


class EvalError(FloodwatchError):
    """Evaluation impossible, e.g. no nodes with test windows."""

    exit_code = 6


class ArtifactIOError(FloodwatchError):
    """File read/write failure; the message includes the path."""

    exit_code = 7
