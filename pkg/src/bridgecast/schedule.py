"""Diffusion coefficients for the bridge forecaster.

Two families live here:

* ``BridgeSchedule``: a Brownian bridge pinned at the data (``alpha_hat[0] = 1``)
  and at the prior forecast ``h`` (``alpha_hat[T] = 0``), with forward marginal

      y_t = alpha_hat[t] * y_0 + (1 - alpha_hat[t]) * h + beta_hat[t] * eps,
      beta_hat[t]**2 = 2 * alpha_hat[t] * (1 - alpha_hat[t]).

* ``GeneralizedSchedule``: arbitrary ``(alpha_hat, beta_hat, gamma_hat, sigma2)``
  tables for the forward map ``y_t = alpha_hat*y_0 + beta_hat*eps + gamma_hat*h``.
  DDPM-style conditional models (CSDI, TMDM, ...) are instances of it, which is
  what the cross-checks in the test-suite rely on.

A reverse step is ``y_{t-1} = kappa*y_t + lam*y_hat + zeta*h + sqrt(sigma2)*z``;
``kappa, lam, zeta`` are fixed by requiring the step to map the forward marginal
at ``t`` onto the forward marginal at ``t-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateStep, InvalidArgument, NumericDomainError

# radicands in [-RADICAND_TOL, 0) are float cancellation, not a domain error
RADICAND_TOL = 1e-12


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgument(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VariancePolicy:
    """Scale ``s`` applied to the reverse-step variance.

    ``s = 0`` gives a deterministic sampler; ``s = 2`` makes the reverse
    variance equal to the exact Gaussian posterior variance of the bridge.
    """

    s: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.s) or self.s < 0:
            raise InvalidArgument(f"variance scale s must be a finite non-negative number, got {self.s!r}")

    @property
    def deterministic(self) -> bool:
        return self.s == 0.0

    @property
    def posterior(self) -> bool:
        return self.s == 2.0


POINT = VariancePolicy(0.0)
PROB = VariancePolicy(2.0)


@dataclass(frozen=True)
class ReverseCoefficients:
    kappa: float
    lam: float
    zeta: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True, eq=False)
class BridgeSchedule:
    """Brownian-bridge coefficient table for steps ``t = 0..T``."""

    T: int
    alpha_hat: np.ndarray
    beta2_hat: np.ndarray = field(init=False, repr=False)
    beta_hat: np.ndarray = field(init=False, repr=False)
    gamma_hat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alpha = _frozen(self.alpha_hat, "alpha_hat")
        if self.T < 1 or alpha.shape != (self.T + 1,):
            raise InvalidArgument(f"alpha_hat must have length T+1 = {self.T + 1}")
        if alpha[0] != 1.0 or alpha[-1] != 0.0:
            raise InvalidArgument("bridge must satisfy alpha_hat[0] = 1 and alpha_hat[T] = 0")
        if not np.all(np.diff(alpha) < 0):
            raise InvalidArgument("alpha_hat must be strictly decreasing")
        beta2 = 2.0 * alpha * (1.0 - alpha)
        beta2.setflags(write=False)
        beta = np.sqrt(beta2)
        beta.setflags(write=False)
        gamma = 1.0 - alpha
        gamma.setflags(write=False)
        object.__setattr__(self, "alpha_hat", alpha)
        object.__setattr__(self, "beta2_hat", beta2)
        object.__setattr__(self, "beta_hat", beta)
        object.__setattr__(self, "gamma_hat", gamma)


@dataclass(frozen=True, eq=False)
class GeneralizedSchedule:
    """Coefficient rows of the generalized conditional forward process."""

    name: str
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    gamma_hat: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        arrays = {}
        for key in ("alpha_hat", "beta_hat", "gamma_hat", "sigma2"):
            arrays[key] = _frozen(getattr(self, key), key)
            object.__setattr__(self, key, arrays[key])
        n = arrays["alpha_hat"].shape[0]
        if n < 2 or any(a.shape[0] != n for a in arrays.values()):
            raise InvalidArgument("all coefficient sequences must share length T+1 >= 2")
        if np.any(arrays["beta_hat"] < 0) or np.any(arrays["sigma2"] < 0):
            raise InvalidArgument("beta_hat and sigma2 must be non-negative")
        slack = arrays["beta_hat"][:-1] ** 2 - arrays["sigma2"][1:]
        if np.any(slack < -RADICAND_TOL):
            t = int(np.argmin(slack)) + 1
            raise InvalidArgument(f"sigma2[{t}] exceeds beta_hat[{t - 1}]**2")

    @property
    def T(self) -> int:
        return self.alpha_hat.shape[0] - 1

    @property
    def beta2_hat(self) -> np.ndarray:
        return self.beta_hat**2


def make_linear_bridge(T: int) -> BridgeSchedule:
    """Linear bridge ``alpha_hat[t] = (T - t) / T``."""
    if int(T) != T or T < 2:
        raise InvalidArgument(f"T must be an integer >= 2, got {T!r}")
    T = int(T)
    return BridgeSchedule(T, np.arange(T, -1, -1, dtype=np.float64) / T)


def _check_step(T: int, t: int, lo: int) -> int:
    if int(t) != t or not lo <= t <= T:
        raise InvalidArgument(f"step t={t!r} outside [{lo}, {T}]")
    return int(t)


def beta_hat(sched: BridgeSchedule, t: int) -> float:
    t = _check_step(sched.T, t, 0)
    return float(sched.beta_hat[t])


def sigma2(sched: BridgeSchedule, t: int, policy: VariancePolicy) -> float:
    """Reverse-step variance at step ``t`` under ``policy``.

    At ``t = T`` the generic expression is evaluated in its ``alpha_hat[T] -> 0``
    limit and clamped to the forward variance at ``T-1``.
    """
    t = _check_step(sched.T, t, 1)
    a_prev = float(sched.alpha_hat[t - 1])
    a = float(sched.alpha_hat[t])
    if t == sched.T:
        v = policy.s * a_prev * (1.0 - a_prev)
        return min(max(v, 0.0), float(sched.beta2_hat[t - 1]))
    return policy.s * (1.0 - a_prev) * (a_prev - a) / (1.0 - a)


def reverse_coefficients(sched: BridgeSchedule, t: int, policy: VariancePolicy) -> ReverseCoefficients:
    t = _check_step(sched.T, t, 1)
    var = sigma2(sched, t, policy)
    a_prev = float(sched.alpha_hat[t - 1])
    a = float(sched.alpha_hat[t])
    if t == sched.T:
        # y_T = h exactly: land on the forward marginal at T-1
        return ReverseCoefficients(0.0, a_prev, 1.0 - a_prev, var)
    if policy.posterior:
        # closed form of the general solve; the prior weight vanishes identically
        return ReverseCoefficients((1.0 - a_prev) / (1.0 - a), (a_prev - a) / (1.0 - a), 0.0, var)
    radicand = float(sched.beta2_hat[t - 1]) - var
    if radicand < 0.0:
        if radicand < -RADICAND_TOL:
            raise NumericDomainError(
                f"sigma2={var!r} exceeds forward variance {float(sched.beta2_hat[t - 1])!r} at t={t}"
            )
        radicand = 0.0
    kappa = math.sqrt(radicand / float(sched.beta2_hat[t]))
    return ReverseCoefficients(kappa, a_prev - a * kappa, 1.0 - a_prev - kappa * (1.0 - a), var)


def general_reverse_coefficients(gen: GeneralizedSchedule, t: int) -> ReverseCoefficients:
    t = _check_step(gen.T, t, 1)
    b = float(gen.beta_hat[t])
    if b == 0.0:
        raise DegenerateStep(f"beta_hat[{t}] = 0; the step must be special-cased by the caller")
    var = float(gen.sigma2[t])
    radicand = float(gen.beta_hat[t - 1]) ** 2 - var
    if radicand < 0.0:
        if radicand < -RADICAND_TOL:
            raise NumericDomainError(f"negative radicand {radicand!r} at t={t}")
        radicand = 0.0
    kappa = math.sqrt(radicand) / b
    lam = float(gen.alpha_hat[t - 1]) - float(gen.alpha_hat[t]) * kappa
    zeta = float(gen.gamma_hat[t - 1]) - float(gen.gamma_hat[t]) * kappa
    return ReverseCoefficients(kappa, lam, zeta, var)


def ddpm_alpha_bar(betas: Sequence[float]) -> np.ndarray:
    """Cumulative products ``alpha_bar[0..T]`` with the empty product at index 0."""
    b = np.asarray(betas, dtype=np.float64)
    if b.ndim != 1 or b.size == 0 or np.any(b <= 0) or np.any(b >= 1):
        raise InvalidArgument("DDPM betas must be a non-empty sequence in (0, 1)")
    return np.concatenate([[1.0], np.cumprod(1.0 - b)])


_DDPM_ROWS = {"csdi": False, "sssd": False, "timediff": False, "tmdm": True}


def framework_instance(
    name: str, T: int, ddpm_betas: Sequence[float] | None = None, s: float = 2.0
) -> GeneralizedSchedule:
    """Express a known diffusion forecaster as a ``GeneralizedSchedule``.

    ``csdi``/``sssd``/``timediff`` share the plain DDPM coefficients, ``tmdm``
    adds the prior shift ``gamma_hat = 1 - sqrt(alpha_bar)``, and ``bridge`` is
    the linear Brownian bridge with variance scale ``s``.
    """
    key = name.lower()
    if key == "bridge":
        sched = make_linear_bridge(T)
        t = np.arange(T + 1, dtype=np.float64)
        var = [0.0] + [sigma2(sched, k, VariancePolicy(s)) for k in range(1, T + 1)]
        return GeneralizedSchedule(
            "bridge", (T - t) / T, np.sqrt(2.0 * t * (T - t) / T**2), t / T, np.array(var)
        )
    if key not in _DDPM_ROWS:
        raise InvalidArgument(f"unknown framework instance {name!r}")
    if ddpm_betas is None:
        raise InvalidArgument(f"{key} requires a DDPM beta sequence")
    if len(ddpm_betas) != T:
        raise InvalidArgument(f"expected {T} DDPM betas, got {len(ddpm_betas)}")
    abar = ddpm_alpha_bar(ddpm_betas)
    betas = np.concatenate([[0.0], np.asarray(ddpm_betas, dtype=np.float64)])
    var = np.zeros(T + 1)
    var[1:] = (1.0 - abar[:-1]) / (1.0 - abar[1:]) * betas[1:]
    gamma = 1.0 - np.sqrt(abar) if _DDPM_ROWS[key] else np.zeros(T + 1)
    return GeneralizedSchedule(key, np.sqrt(abar), np.sqrt(1.0 - abar), gamma, var)


def consistency_residuals(sched, t: int, c: ReverseCoefficients) -> tuple[float, float, float]:
    """Residuals of the three marginal-matching identities at step ``t``.

    Works for both schedule kinds (anything with ``alpha_hat``, ``beta2_hat``
    and ``gamma_hat``).
    """
    a, g, b2 = sched.alpha_hat, sched.gamma_hat, sched.beta2_hat
    return (
        c.kappa * a[t] + c.lam - a[t - 1],
        c.kappa * g[t] + c.zeta - g[t - 1],
        c.kappa**2 * b2[t] + c.sigma2 - b2[t - 1],
    )


@dataclass(frozen=True, eq=False)
class ReverseTable:
    """Dense per-step reverse coefficients; index 0 is unused (NaN)."""

    kappa: np.ndarray
    lam: np.ndarray
    zeta: np.ndarray
    sigma2: np.ndarray

    def at(self, t: int) -> ReverseCoefficients:
        return ReverseCoefficients(
            float(self.kappa[t]), float(self.lam[t]), float(self.zeta[t]), float(self.sigma2[t])
        )


def reverse_table(sched: BridgeSchedule, policy: VariancePolicy) -> ReverseTable:
    cols = np.full((4, sched.T + 1), np.nan)
    for t in range(1, sched.T + 1):
        c = reverse_coefficients(sched, t, policy)
        cols[:, t] = (c.kappa, c.lam, c.zeta, c.sigma2)
    for row in cols:
        row.setflags(write=False)
    return ReverseTable(*cols)


COEFFICIENT_COLUMNS = ("t", "alpha_hat", "beta_hat", "gamma_hat", "kappa", "lambda", "zeta", "sigma2")


def coefficient_rows(sched: BridgeSchedule, policy: VariancePolicy) -> list[dict]:
    """One row per step; reverse columns are ``None`` at ``t = 0``."""
    table = reverse_table(sched, policy)
    rows = []
    for t in range(sched.T + 1):
        rev = (None,) * 4 if t == 0 else (table.kappa[t], table.lam[t], table.zeta[t], table.sigma2[t])
        vals = (t, sched.alpha_hat[t], sched.beta_hat[t], sched.gamma_hat[t]) + rev
        rows.append({k: (None if v is None else (int(v) if k == "t" else float(v))) for k, v in zip(COEFFICIENT_COLUMNS, vals)})
    return rows


def max_identity_residual(sched: BridgeSchedule, policy: VariancePolicy, table: ReverseTable | None = None) -> tuple[float, int]:
    """Largest identity residual over the steps where all three identities apply.

    The variance identity is skipped at ``t = T``: there the variance is set by
    the policy and only equals the forward variance for ``s = 2``.
    Returns ``(residual, step)``.
    """
    table = table or reverse_table(sched, policy)
    worst, where = 0.0, 0
    for t in range(1, sched.T + 1):
        r = consistency_residuals(sched, t, table.at(t))
        r = r[:2] if t == sched.T else r
        m = max(abs(x) for x in r)
        if not m <= worst:
            worst, where = m, t
    return worst, where
