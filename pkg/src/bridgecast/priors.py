"""Linear maps over the time axis: the prior forecaster F and the conditioner E.

Both map a lookback block ``(H, d)`` to a label-extended block ``(R, d)`` with
one weight matrix shared by all channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidArgument

DEFAULT_RIDGE = 1e-3


@dataclass
class LinearMap:
    weight: np.ndarray  # (R, H)
    bias: np.ndarray  # (R,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidArgument("LinearMap needs weight (R, H) and bias (R,)")

    @property
    def in_len(self) -> int:
        return self.weight.shape[1]

    @property
    def out_len(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def zeros(cls, out_len: int, in_len: int) -> "LinearMap":
        return cls(np.zeros((out_len, in_len)), np.zeros(out_len))

    def copy(self) -> "LinearMap":
        return LinearMap(self.weight.copy(), self.bias.copy())

    def apply(self, x) -> np.ndarray:
        """Map ``(..., H, d)`` to ``(..., R, d)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim < 2 or x.shape[-2] != self.in_len:
            raise InvalidArgument(f"expected {self.in_len} lookback rows, got shape {x.shape}")
        return np.matmul(self.weight, x) + self.bias[:, None]

    __call__ = apply

    def backward(self, x, grad_out) -> tuple[np.ndarray, np.ndarray]:
        """Gradients ``(d weight, d bias)`` of ``sum(grad_out * apply(x))``."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.in_len, np.shape(x)[-1])
        g = np.asarray(grad_out, dtype=np.float64).reshape(-1, self.out_len, x.shape[-1])
        return np.einsum("brd,bhd->rh", g, x), g.sum(axis=(0, 2))


def apply(m: LinearMap, x) -> np.ndarray:
    return m.apply(x)


def ridge_objective(m: LinearMap, x, y, ridge: float = DEFAULT_RIDGE) -> float:
    resid = m.apply(x) - y
    return float(np.sum(resid * resid) + ridge * np.sum(m.weight * m.weight))


def fit_prior(x, y, ridge: float = DEFAULT_RIDGE, chunk: int = 1024) -> LinearMap:
    """Ridge least squares with channels pooled as samples; the bias is unpenalised.

    ``x``: (B, H, d) lookbacks, ``y``: (B, R, d) targets. Normal equations are
    accumulated in chunks and solved by Cholesky.
    """
    if ridge <= 0:
        raise InvalidArgument("ridge must be positive")
    if x.ndim != 3 or y.ndim != 3 or x.shape[0] != y.shape[0] or x.shape[2] != y.shape[2]:
        raise InvalidArgument(f"incompatible window arrays {x.shape} and {y.shape}")
    if x.shape[0] == 0:
        raise InvalidArgument("fit_prior needs at least one window")
    H, R = x.shape[1], y.shape[1]
    gram = np.zeros((H + 1, H + 1))
    cross = np.zeros((H + 1, R))
    for lo in range(0, x.shape[0], chunk):
        xs = np.asarray(x[lo : lo + chunk], dtype=np.float64)
        ys = np.asarray(y[lo : lo + chunk], dtype=np.float64)
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidArgument("non-finite values in prior training data")
        a = xs.transpose(0, 2, 1).reshape(-1, H)
        a = np.concatenate([a, np.ones((a.shape[0], 1))], axis=1)
        b = ys.transpose(0, 2, 1).reshape(-1, R)
        gram += a.T @ a
        cross += a.T @ b
    gram[np.arange(H), np.arange(H)] += ridge
    theta = cho_solve(cho_factor(gram), cross)
    return LinearMap(theta[:H].T.copy(), theta[H].copy())


def init_conditioner(prior: LinearMap, mode: str = "prior") -> LinearMap:
    """Starting point for E: a copy of F, or zeros for training from scratch."""
    if mode == "prior":
        return prior.copy()
    if mode == "zeros":
        return LinearMap.zeros(prior.out_len, prior.in_len)
    raise InvalidArgument(f"unknown conditioner init {mode!r}")


def last_value_map(in_len: int, out_len: int, label_len: int = 0) -> LinearMap:
    """Naive baseline: copy the label rows, repeat the final lookback value after them."""
    if not 0 <= label_len <= min(in_len, out_len):
        raise InvalidArgument("label_len out of range")
    w = np.zeros((out_len, in_len))
    for r in range(label_len):
        w[r, in_len - label_len + r] = 1.0
    w[label_len:, -1] = 1.0
    return LinearMap(w, np.zeros(out_len))
