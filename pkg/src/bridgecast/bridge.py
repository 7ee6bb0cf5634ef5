"""Bridge diffusion between the prior forecast ``h`` and the target ``y*``.

Training corrupts ``y*`` towards ``h`` along the bridge and regresses the
clean target; sampling starts at ``y_T = h`` and walks the reverse chain with
the denoiser's data prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import InvalidArgument, NumericError
from .neural import Denoiser
from .priors import LinearMap
from .schedule import (
    POINT,
    BridgeSchedule,
    ReverseCoefficients,
    ReverseTable,
    VariancePolicy,
    make_linear_bridge,
    reverse_table,
)


@dataclass(frozen=True, eq=False)
class BridgeProcess:
    schedule: BridgeSchedule
    policy: VariancePolicy = POINT
    label_len: int = 0
    table: ReverseTable = field(init=False, repr=False)

    def __post_init__(self):
        if self.label_len < 0:
            raise InvalidArgument("label_len must be non-negative")
        object.__setattr__(self, "table", reverse_table(self.schedule, self.policy))

    @classmethod
    def linear(cls, T: int = 50, s: float = 0.0, label_len: int = 0) -> "BridgeProcess":
        return cls(make_linear_bridge(T), VariancePolicy(s), label_len)

    @property
    def T(self) -> int:
        return self.schedule.T


@dataclass
class ForecastResult:
    """Label-extended forecasts; ``samples`` carries the ensemble on axis 0."""

    point: np.ndarray | None = None
    samples: np.ndarray | None = None
    label_len: int = 0

    def __post_init__(self):
        if self.point is None and self.samples is None:
            raise InvalidArgument("a forecast needs a point path or samples")

    @property
    def horizon_slice(self) -> slice:
        return slice(self.label_len, None)

    def horizon_point(self) -> np.ndarray:
        if self.point is not None:
            return self.point[..., self.horizon_slice, :]
        return np.median(self.horizon_samples(), axis=0)

    def horizon_samples(self) -> np.ndarray | None:
        return None if self.samples is None else self.samples[..., self.horizon_slice, :]


def _same_shape(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise InvalidArgument(f"shape mismatch: {shape} vs {np.shape(a)}")


def _step_coeffs(proc: BridgeProcess, t):
    t_arr = np.asarray(t)
    if not np.issubdtype(t_arr.dtype, np.integer) or np.any(t_arr < 0) or np.any(t_arr > proc.T):
        raise InvalidArgument(f"step(s) {t!r} outside [0, {proc.T}]")
    alpha = proc.schedule.alpha_hat[t_arr]
    beta2 = proc.schedule.beta2_hat[t_arr]
    beta = proc.schedule.beta_hat[t_arr]
    if t_arr.ndim:
        # per-series steps broadcast over the trailing (rows, d) axes
        return alpha[..., None, None], beta2[..., None, None], beta[..., None, None]
    return float(alpha), float(beta2), float(beta)


def forward_marginal(y0, h, t, proc: BridgeProcess):
    """Mean and (isotropic) variance of ``y_t`` given ``y0`` and ``h``."""
    _same_shape(y0, h)
    alpha, beta2, _ = _step_coeffs(proc, t)
    mean = alpha * np.asarray(y0, dtype=np.float64) + (1.0 - alpha) * np.asarray(h, dtype=np.float64)
    return mean, beta2


def corrupt(y0, h, t, proc: BridgeProcess, eps) -> np.ndarray:
    """Draw from the forward marginal using the supplied standard-normal ``eps``.

    ``t`` may be a scalar or an integer array over the leading (batch) axes.
    """
    _same_shape(y0, h, eps)
    alpha, _, beta = _step_coeffs(proc, t)
    return alpha * np.asarray(y0, dtype=np.float64) + (1.0 - alpha) * np.asarray(h, dtype=np.float64) + beta * eps


def reverse_step(y_t, y_hat, h, coeffs: ReverseCoefficients, z=None) -> np.ndarray:
    """``kappa*y_t + lam*y_hat + zeta*h + sigma*z``."""
    _same_shape(y_t, y_hat, h)
    if z is None:
        if coeffs.sigma2 > 0:
            raise InvalidArgument("noise draw z is required when sigma2 > 0")
        return kernels.reverse_update(y_t, y_hat, h, coeffs.kappa, coeffs.lam, coeffs.zeta)
    _same_shape(y_t, z)
    return kernels.reverse_update(y_t, y_hat, h, coeffs.kappa, coeffs.lam, coeffs.zeta, coeffs.sigma, z)


def member_rng(seed, member: int) -> np.random.Generator:
    """Independent stream for ensemble member ``member``."""
    key = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return np.random.default_rng(key + [member])


def sample(
    denoiser: Callable, h, c, proc: BridgeProcess, n_samples: int = 1, seed=0
) -> ForecastResult:
    """Run the reverse chain from ``y_T = h``.

    ``denoiser(y_t, h, c, t)`` predicts the clean target. ``h`` and ``c`` may
    carry leading batch axes. With ``s = 0`` the chain is deterministic and
    fills ``point``; otherwise ``n_samples`` chains fill ``samples``.
    """
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    _same_shape(h, c)
    if n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    deterministic = proc.policy.deterministic
    if deterministic and n_samples != 1:
        raise InvalidArgument("the deterministic sampler (s = 0) produces exactly one path")

    if deterministic:
        y, hh, cc = h.copy(), h, c
    else:
        y = np.broadcast_to(h, (n_samples,) + h.shape).copy()
        hh = np.broadcast_to(h, y.shape)
        cc = np.broadcast_to(c, y.shape)
        rngs = [member_rng(seed, m) for m in range(n_samples)]

    for t in range(proc.T, 0, -1):
        y_hat = np.asarray(denoiser(y, hh, cc, t), dtype=np.float64)
        if y_hat.shape != y.shape or not np.all(np.isfinite(y_hat)):
            raise NumericError(f"denoiser returned invalid output at step t={t}")
        coeffs = proc.table.at(t)
        z = None
        if not deterministic and t > 1 and coeffs.sigma2 > 0:
            z = np.stack([rng.standard_normal(h.shape) for rng in rngs])
        if z is None and coeffs.sigma2 > 0:
            # final step: the chain emits its mean
            coeffs = ReverseCoefficients(coeffs.kappa, coeffs.lam, coeffs.zeta, 0.0)
        y = reverse_step(y, y_hat, hh, coeffs, z)

    if deterministic:
        return ForecastResult(point=y, label_len=proc.label_len)
    return ForecastResult(samples=y, label_len=proc.label_len)


@dataclass
class BridgeModel:
    """Prior F (frozen), conditioner E and denoiser, trained jointly except F."""

    prior: LinearMap
    cond: LinearMap
    denoiser: Denoiser
    train_cond: bool = True

    def trainable(self) -> dict:
        out = {f"denoiser.{k}": v for k, v in self.denoiser.params.items()}
        if self.train_cond:
            out["cond_E.weight"] = self.cond.weight
            out["cond_E.bias"] = self.cond.bias
        return out

    def with_params(self, flat: dict) -> "BridgeModel":
        """Copy of the model with trainable arrays taken from ``flat`` (e.g. an EMA shadow)."""
        dparams = {k: flat.get(f"denoiser.{k}", v).copy() for k, v in self.denoiser.params.items()}
        cond = LinearMap(flat.get("cond_E.weight", self.cond.weight).copy(), flat.get("cond_E.bias", self.cond.bias).copy())
        den = Denoiser(dparams, emb_dim=self.denoiser.emb_dim, activation=self.denoiser.activation)
        return BridgeModel(self.prior, cond, den, self.train_cond)

    def condition(self, x):
        return self.prior.apply(x), self.cond.apply(x)


LOSSES = ("mae", "mse")


def prediction_loss(y_hat, target, kind: str):
    """Element-mean loss and its gradient w.r.t. ``y_hat``."""
    diff = y_hat - target
    if kind == "mse":
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    if kind == "mae":
        return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size
    raise InvalidArgument(f"unknown loss {kind!r}; expected one of {LOSSES}")


def training_step(model: BridgeModel, x, y_star, proc: BridgeProcess, rng, loss_kind: str = "mae"):
    """One data-prediction regression step on a batch.

    Draws ``t ~ U{1..T}`` per window, corrupts ``y*`` along the bridge and
    scores the denoiser's reconstruction. ``h`` is held constant. Returns
    ``(loss, grads)`` with ``grads`` keyed like ``model.trainable()``; no
    parameters are modified here.
    """
    x = np.asarray(x, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.float64)
    if x.ndim != 3 or y_star.ndim != 3 or x.shape[0] != y_star.shape[0] or x.shape[0] == 0:
        raise InvalidArgument(f"expected non-empty batches (B, H, d) and (B, R, d), got {x.shape}, {y_star.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y_star))):
        raise NumericError("non-finite values in the training batch; batch rejected")
    B = x.shape[0]
    h, c = model.condition(x)
    t = rng.integers(1, proc.T + 1, size=B)
    eps = rng.standard_normal(y_star.shape)
    y_t = corrupt(y_star, h, t, proc, eps)
    y_hat, cache = model.denoiser.forward(y_t, h, c, t)
    loss, g_out = prediction_loss(y_hat, y_star, loss_kind)
    if not np.isfinite(loss):
        raise NumericError("non-finite training loss; batch rejected")
    pgrads, igrads = model.denoiser.backward(cache, g_out)
    grads = {f"denoiser.{k}": v for k, v in pgrads.items()}
    if model.train_cond:
        grads["cond_E.weight"], grads["cond_E.bias"] = model.cond.backward(x, igrads["c"])
    return loss, grads


def forecast(model: BridgeModel, proc: BridgeProcess, x, n_samples: int = 1, seed: int = 0, chunk: int = 256) -> ForecastResult:
    """Sample forecasts for a batch of lookbacks ``(B, H, d)`` in fixed-size chunks."""
    x = np.asarray(x, dtype=np.float64)
    points, ens = [], []
    for k, lo in enumerate(range(0, x.shape[0], chunk)):
        h, c = model.condition(x[lo : lo + chunk])
        res = sample(model.denoiser, h, c, proc, n_samples=n_samples, seed=(int(seed), k))
        (points if res.point is not None else ens).append(res.point if res.point is not None else res.samples)
    if points:
        return ForecastResult(point=np.concatenate(points), label_len=proc.label_len)
    return ForecastResult(samples=np.concatenate(ens, axis=1), label_len=proc.label_len)
