"""Point and probabilistic forecast scores.

Sample ensembles are laid out with the ensemble on axis 0, i.e.
``samples.shape == (n,) + truth.shape``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgument
from .kernels import crps_energy_cells

QUANTILE_LEVELS = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise InvalidArgument(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    return pred, truth


def mse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def crps_empirical(samples, y: float) -> float:
    """``mean|x_i - y| - mean|x_i - x_j| / 2`` for one scalar target."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if samples.size == 0:
        raise InvalidArgument("CRPS needs at least one sample")
    return float(crps_energy_cells(samples[None, :], np.array([y]))[0])


def _ensemble(samples, truth):
    samples = np.asarray(samples, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if samples.ndim < 1 or samples.shape[0] == 0:
        raise InvalidArgument("CRPS needs at least one sample")
    if samples.shape[1:] != truth.shape:
        raise InvalidArgument(f"sample shape {samples.shape[1:]} != truth shape {truth.shape}")
    return samples, truth


def crps_cells(samples, truth) -> np.ndarray:
    samples, truth = _ensemble(samples, truth)
    return crps_energy_cells(np.moveaxis(samples, 0, -1), truth)


def crps(samples, truth) -> float:
    """Energy-form CRPS averaged over every cell of ``truth``."""
    return float(np.mean(crps_cells(samples, truth)))


def crps_sum(samples, truth) -> float:
    """CRPS of the channel sum: last axis is summed before scoring."""
    samples, truth = _ensemble(samples, truth)
    return crps(samples.sum(axis=-1), truth.sum(axis=-1))


def crps_quantile(samples, truth, levels=QUANTILE_LEVELS) -> float:
    """Quantile-grid approximation: mean over levels of twice the pinball loss."""
    samples, truth = _ensemble(samples, truth)
    total = 0.0
    for q in levels:
        pred = np.quantile(samples, q, axis=0)
        diff = truth - pred
        total += 2.0 * float(np.mean(np.maximum(q * diff, (q - 1.0) * diff)))
    return total / len(levels)


@dataclass
class ScoreReport:
    mse: float
    mae: float
    crps: float | None = None
    crps_sum: float | None = None
    n_windows: int = 0
    n_samples: int = 0

    def __post_init__(self):
        for k in ("mse", "mae", "crps", "crps_sum"):
            v = getattr(self, k)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise InvalidArgument(f"score {k}={v!r} must be finite and non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def score(point, truth, samples=None, estimator: str = "energy") -> ScoreReport:
    """Score ``(windows, L, d)`` forecasts; ``samples`` is ``(n, windows, L, d)``."""
    point, truth = _pair(point, truth)
    rep = ScoreReport(mse(point, truth), mae(point, truth), n_windows=truth.shape[0], n_samples=1)
    if samples is not None:
        samples, _ = _ensemble(samples, truth)
        rep.n_samples = samples.shape[0]
        if estimator == "energy":
            rep.crps = crps(samples, truth)
            rep.crps_sum = crps_sum(samples, truth)
        elif estimator == "quantile":
            rep.crps = crps_quantile(samples, truth)
            rep.crps_sum = crps_quantile(samples.sum(axis=-1), truth.sum(axis=-1))
        else:
            raise InvalidArgument(f"unknown CRPS estimator {estimator!r}")
    return rep
