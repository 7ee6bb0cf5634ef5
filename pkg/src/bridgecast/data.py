"""Dataset ingestion, chronological splits, z-score normalisation and windowing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, InvalidArgument

log = logging.getLogger(__name__)

DATE_NAMES = {"date", "time", "timestamp", "datetime"}


@dataclass
class Dataset:
    values: np.ndarray  # (N, d)
    channels: list[str]
    timestamps: list[str] | None = None
    offset: int = 0  # first row's index in the source file

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("dataset values must be a 2-D (time, channel) array")
        if len(self.channels) != self.values.shape[1]:
            raise DataError("channel names do not match the value columns")
        bad = np.flatnonzero(~np.all(np.isfinite(self.values), axis=1))
        if bad.size:
            rows = ", ".join(str(int(r) + self.offset) for r in bad[:10])
            raise DataError(f"non-finite values in rows {rows}" + (" ..." if bad.size > 10 else ""))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def slice(self, lo: int, hi: int) -> "Dataset":
        ts = self.timestamps[lo:hi] if self.timestamps is not None else None
        return Dataset(self.values[lo:hi], list(self.channels), ts, self.offset + lo)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path, date_column: str | None = "auto") -> Dataset:
    """Read a headed CSV of numeric channels.

    ``date_column="auto"`` treats the first column as timestamps when its name
    looks like a date or its first value is not numeric. Pass a column name to
    force it, or ``None`` when every column is a channel.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise DataError(f"{path} has a header but no data rows")

    date_idx = None
    if date_column == "auto":
        if header[0].lower() in DATE_NAMES or not _is_number(body[0][0]):
            date_idx = 0
    elif date_column is not None:
        if date_column not in header:
            raise DataError(f"date column {date_column!r} not in header")
        date_idx = header.index(date_column)
    if date_idx is not None and len(header) < 2:
        raise DataError("need at least one value column besides the date column")

    value_cols = [i for i in range(len(header)) if i != date_idx]
    values = np.empty((len(body), len(value_cols)))
    missing = []
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {r + 1}: expected {len(header)} fields, got {len(row)}")
        for j, c in enumerate(value_cols):
            cell = row[c].strip()
            try:
                v = float(cell) if cell else math.nan
            except ValueError:
                raise DataError(f"row {r + 1}, column {c + 1} ({header[c]!r}): cannot parse {cell!r}") from None
            values[r, j] = v
        if not np.all(np.isfinite(values[r])):
            missing.append(r)
    if missing:
        shown = ", ".join(str(r) for r in missing[:10])
        raise DataError(f"missing or non-finite values in data rows {shown}" + (" ..." if len(missing) > 10 else ""))
    stamps = [row[date_idx] for row in body] if date_idx is not None else None
    return Dataset(values, [header[c] for c in value_cols], stamps)


def save_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((["date"] if ds.timestamps is not None else []) + ds.channels)
        for i, row in enumerate(ds.values):
            w.writerow(([ds.timestamps[i]] if ds.timestamps is not None else []) + [repr(float(v)) for v in row])


def split(ds: Dataset, ratios=(0.7, 0.1, 0.2), lookback: int = 336, horizon: int = 96):
    """Chronological train/val/test slices.

    Val and test each reach ``lookback`` rows back into the previous slice so
    their first target has a full history. A slice with ratio 0 comes back empty.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise InvalidArgument(f"split ratios must be (train>0, val>=0, test>=0), got {ratios}")
    if sum(ratios) > 1.0 + 1e-9:
        raise InvalidArgument(f"split ratios sum to {sum(ratios)} > 1")
    n = len(ds)
    sizes = [math.floor(n * r + 1e-9) for r in ratios]
    if abs(sum(ratios) - 1.0) <= 1e-9:
        # rounding leftovers go to the last non-empty slice
        last = max(i for i, r in enumerate(ratios) if r > 0)
        sizes[last] += n - sum(sizes)
    n_train, n_val, n_test = sizes
    need = lookback + horizon
    if n_train < need:
        raise InvalidArgument(f"train split has {n_train} rows, needs at least {need}")
    for name, k in (("val", n_val), ("test", n_test)):
        if 0 < k < horizon:
            raise InvalidArgument(f"{name} split has {lookback + k} rows, needs at least {need}")
    train = ds.slice(0, n_train)
    val = ds.slice(n_train - lookback, n_train + n_val) if n_val else ds.slice(n_train, n_train)
    lo = n_train + n_val
    test = ds.slice(lo - lookback, lo + n_test) if n_test else ds.slice(lo, lo)
    return train, val, test


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(default=None)

    @classmethod
    def fit(cls, train: Dataset) -> "NormStats":
        if len(train) == 0:
            raise DataError("cannot compute normalisation stats on an empty split")
        mean = train.values.mean(axis=0)
        std = train.values.std(axis=0)
        constant = std == 0
        if constant.any():
            names = [train.channels[i] for i in np.flatnonzero(constant)]
            log.warning("constant channels %s: std forced to 1", names)
        std = np.where(constant, 1.0, std)
        return cls(mean, std, constant)

    def _check(self, d: int):
        if self.mean.shape != (d,):
            raise DataError(f"stats cover {self.mean.shape[0]} channels, data has {d}")


def normalize(ds: Dataset, stats: NormStats) -> Dataset:
    stats._check(ds.d)
    return Dataset((ds.values - stats.mean) / stats.std, list(ds.channels), ds.timestamps, ds.offset)


def denormalize(values, stats: NormStats) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    stats._check(values.shape[-1])
    return values * stats.std + stats.mean


@dataclass
class SeriesWindow:
    x: np.ndarray  # (H, d)
    y: np.ndarray  # (L, d)
    y_star: np.ndarray  # (label_len + L, d)


class WindowSet:
    """All sliding windows of one split, materialised lazily in batches."""

    def __init__(self, ds: Dataset, lookback: int, horizon: int, label_len: int = 0, stride: int = 1):
        if lookback < 1 or horizon < 1 or stride < 1:
            raise InvalidArgument("lookback, horizon and stride must be >= 1")
        if not 0 <= label_len < lookback:
            raise InvalidArgument(f"label_len must lie in [0, lookback), got {label_len}")
        if len(ds) < lookback + horizon:
            raise InvalidArgument(f"series of length {len(ds)} is shorter than lookback + horizon = {lookback + horizon}")
        self.ds = ds
        self.lookback, self.horizon, self.label_len, self.stride = lookback, horizon, label_len, stride
        self.starts = np.arange(0, len(ds) - lookback - horizon + 1, stride)
        # (n_windows_unstrided, H+L, d) view, no copy
        self._view = sliding_window_view(ds.values, lookback + horizon, axis=0).transpose(0, 2, 1)

    def __len__(self) -> int:
        return self.starts.size

    @property
    def d(self) -> int:
        return self.ds.d

    @property
    def target_len(self) -> int:
        return self.label_len + self.horizon

    def batch(self, idx=None):
        """Return ``(x, y, y_star)`` arrays for window indices ``idx`` (all by default)."""
        starts = self.starts if idx is None else self.starts[np.asarray(idx)]
        block = self._view[starts]
        H = self.lookback
        x = block[:, :H]
        y = block[:, H:]
        y_star = block[:, H - self.label_len :]
        return x, y, y_star

    def views(self):
        """``(x, y_star)`` for every window as strided views (no copy)."""
        block = self._view[:: self.stride]
        H = self.lookback
        return block[:, :H], block[:, H - self.label_len :]

    def __getitem__(self, i: int) -> SeriesWindow:
        x, y, y_star = self.batch([i])
        return SeriesWindow(x[0], y[0], y_star[0])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def make_windows(ds: Dataset, lookback: int, horizon: int, label_len: int = 0, stride: int = 1) -> WindowSet:
    return WindowSet(ds, lookback, horizon, label_len, stride)


def synthetic_series(n: int = 3000, d: int = 2, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Sinusoid + linear trend + Gaussian noise benchmark series."""
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.float64)
    cols = []
    for k in range(d):
        period = 24.0 * (1 + k % 2)
        phase = 0.7 * k
        season = np.sin(2 * np.pi * t / period + phase) + 0.5 * np.sin(2 * np.pi * t / (7 * 24.0) + 2 * phase)
        trend = (0.4 + 0.2 * k) * t / n
        cols.append(season + trend + noise * rng.standard_normal(n))
    return Dataset(np.stack(cols, axis=1), [f"ch{k}" for k in range(d)], [str(i) for i in range(n)])
