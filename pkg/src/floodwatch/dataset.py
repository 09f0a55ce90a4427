"""Sequential split, per-mote windowing, and train-fitted standardization.

The classifier consumes rank-3 tensors shaped (samples, timesteps, features)
in row-major order. Splitting happens at the event level before windowing and
preserves time order, so every training row precedes every test row and no
window ever straddles the boundary or mixes motes.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArtifactIOError, DataError
from .features import FEATURE_COLUMNS, FeatureRow

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 20
DEFAULT_TRAIN_FRAC = 0.7


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization statistics fitted on training data.

    Constant features (flagged in ``constant``) pass through unscaled.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray


@dataclass
class WindowedDataset:
    x: np.ndarray  # (samples, timesteps, features) float64
    y: np.ndarray  # (samples,) {0,1}
    sample_mote: np.ndarray  # (samples,) mote id per sample
    skipped_motes: tuple[int, ...] = ()
    scaler: Scaler | None = None

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]


def sequential_split(rows: Sequence[FeatureRow], train_frac: float = DEFAULT_TRAIN_FRAC):
    """First ``floor(train_frac * n)`` rows train, the rest test.

    Rows must already be time-sorted, so the training side always precedes
    the test side and no future information leaks backwards.
    """
    if not 0 < train_frac < 1:
        raise DataError(f"train_frac must lie in (0, 1), got {train_frac}")
    n = len(rows)
    if n < 2:
        raise DataError(f"need at least 2 rows to split, got {n}")
    # tiny epsilon guards against decimal fractions landing just below an
    # integer (0.29 * 100 == 28.999...)
    cut = math.floor(train_frac * n + 1e-9)
    cut = min(max(cut, 1), n - 1)
    return list(rows[:cut]), list(rows[cut:])


def window(rows: Sequence[FeatureRow], w: int = DEFAULT_WINDOW, stride: int = 1) -> WindowedDataset:
    """Slice each mote's event run into (w, len(FEATURE_COLUMNS)) samples.

    Samples are emitted in canonical order (mote id, then start index) and
    labeled with the mote's ground-truth label. Motes with fewer than ``w``
    events contribute nothing and are reported in ``skipped_motes``.
    """
    if w < 1:
        raise DataError(f"window length must be >= 1, got {w}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    per_mote: dict[int, list[FeatureRow]] = {}
    for row in rows:
        per_mote.setdefault(row.mote, []).append(row)

    samples, labels, motes, skipped = [], [], [], []
    for mote in sorted(per_mote):
        run = per_mote[mote]
        if len(run) < w:
            skipped.append(mote)
            continue
        for start in range(0, len(run) - w + 1, stride):
            chunk = run[start : start + w]
            samples.append([[float(getattr(r, col)) for col in FEATURE_COLUMNS] for r in chunk])
            labels.append(chunk[0].label)
            motes.append(mote)
    if skipped:
        logger.warning("motes with fewer than %d events contribute no windows: %s", w, skipped)
    if not samples:
        raise DataError(f"no mote has at least {w} events; nothing to window")
    return WindowedDataset(
        x=np.asarray(samples, dtype=np.float64),
        y=np.asarray(labels, dtype=np.int64),
        sample_mote=np.asarray(motes, dtype=np.int64),
        skipped_motes=tuple(skipped),
    )


def fit_scaler(train: WindowedDataset) -> Scaler:
    """Per-feature mean/std over every training timestep.

    A feature is constant when its min equals its max exactly; such columns
    keep std 1 so scaling is a no-op for them.
    """
    if train.n_samples == 0:
        raise DataError("cannot fit a scaler on an empty dataset")
    flat = train.x.reshape(-1, train.x.shape[2])
    constant = flat.max(axis=0) == flat.min(axis=0)
    mean = np.where(constant, 0.0, flat.mean(axis=0))
    std = np.where(constant, 1.0, flat.std(axis=0))
    return Scaler(mean=mean, std=std, constant=constant)


def apply_scaler(ds: WindowedDataset, scaler: Scaler) -> WindowedDataset:
    """Standardize with train statistics; constant features pass through."""
    x = (ds.x - scaler.mean) / scaler.std
    return WindowedDataset(
        x=x,
        y=ds.y.copy(),
        sample_mote=ds.sample_mote.copy(),
        skipped_motes=ds.skipped_motes,
        scaler=scaler,
    )


_DUMP_HEADER = struct.Struct("<QQQ")


def save_tensor(x: np.ndarray, path) -> None:
    """Binary dump: three little-endian uint64 dims, then float64 row-major payload."""
    if x.ndim != 3:
        raise DataError(f"tensor dump expects a rank-3 array, got rank {x.ndim}")
    try:
        with open(path, "wb") as fh:
            fh.write(_DUMP_HEADER.pack(*x.shape))
            fh.write(np.ascontiguousarray(x, dtype="<f8").tobytes())
    except OSError as exc:
        raise ArtifactIOError(f"cannot write tensor {path}: {exc}") from exc


def load_tensor(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            dims = _DUMP_HEADER.unpack(fh.read(_DUMP_HEADER.size))
            payload = fh.read()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read tensor {path}: {exc}") from exc
    expected = dims[0] * dims[1] * dims[2] * 8
    if len(payload) != expected:
        raise DataError(f"{path}: payload holds {len(payload)} bytes, dims {dims} need {expected}")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
