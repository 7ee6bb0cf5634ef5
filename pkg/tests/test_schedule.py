import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgecast.errors import DegenerateStep, InvalidArgument, NumericDomainError
from bridgecast.schedule import (
    BridgeSchedule,
    GeneralizedSchedule,
    VariancePolicy,
    beta_hat,
    coefficient_rows,
    consistency_residuals,
    ddpm_alpha_bar,
    framework_instance,
    general_reverse_coefficients,
    make_linear_bridge,
    max_identity_residual,
    reverse_coefficients,
    sigma2,
)
from bridgecast.verify import deterministic_closed_form

SCALES = (0.0, 0.5, 1.0, 2.0)


def test_linear_bridge_endpoints_and_values():
    sched = make_linear_bridge(50)
    assert sched.alpha_hat[0] == 1.0 and sched.alpha_hat[-1] == 0.0
    assert beta_hat(sched, 25) == pytest.approx(0.7071067811865476, abs=1e-15)
    assert beta_hat(sched, 0) == 0.0
    assert beta_hat(sched, 50) == 0.0
    assert np.all(sched.gamma_hat == 1.0 - sched.alpha_hat)


def test_schedule_arrays_are_read_only():
    sched = make_linear_bridge(10)
    with pytest.raises(ValueError):
        sched.alpha_hat[3] = 0.5
    with pytest.raises(ValueError):
        sched.beta2_hat[3] = 0.5


@pytest.mark.parametrize("T", [1, 0, 2.5])
def test_rejects_bad_T(T):
    with pytest.raises(InvalidArgument):
        make_linear_bridge(T)


def test_rejects_bad_alpha_table():
    with pytest.raises(InvalidArgument):
        BridgeSchedule(3, np.array([0.0, 0.3, 0.6, 1.0]))  # reversed endpoints
    with pytest.raises(InvalidArgument):
        BridgeSchedule(3, np.array([1.0, 0.6, 0.7, 0.0]))  # not decreasing


def test_beta_unimodal_peak_at_half():
    sched = make_linear_bridge(50)
    assert int(np.argmax(sched.beta_hat)) == 25
    assert np.all(np.diff(sched.beta_hat[:26]) > 0)
    assert np.all(np.diff(sched.beta_hat[25:]) < 0)


def test_sigma2_cases():
    T = 50
    sched = make_linear_bridge(T)
    for t in range(1, T):
        assert sigma2(sched, t, VariancePolicy(2.0)) == pytest.approx(2 * (t - 1) / (T * t), abs=1e-15)
        assert sigma2(sched, t, VariancePolicy(0.0)) == 0.0
    assert sigma2(sched, 1, VariancePolicy(2.0)) == 0.0
    # t = T limit: s * a(1-a) at T-1, equal to the forward variance for s = 2
    assert sigma2(sched, T, VariancePolicy(2.0)) == pytest.approx(sched.beta2_hat[T - 1], abs=1e-15)
    assert sigma2(sched, T, VariancePolicy(10.0)) == sched.beta2_hat[T - 1]  # clamped
    with pytest.raises(InvalidArgument):
        sigma2(sched, 0, VariancePolicy(1.0))
    with pytest.raises(InvalidArgument):
        sigma2(sched, T + 1, VariancePolicy(1.0))


def test_policy_rejects_negative_or_nan():
    for s in (-1.0, math.nan, math.inf):
        with pytest.raises(InvalidArgument):
            VariancePolicy(s)


@pytest.mark.parametrize("s", SCALES)
def test_identities_below_1e12(s):
    sched = make_linear_bridge(50)
    for t in range(2, 50):
        r = consistency_residuals(sched, t, reverse_coefficients(sched, t, VariancePolicy(s)))
        assert max(abs(x) for x in r) < 1e-12, (t, r)


def test_deterministic_closed_form():
    T = 50
    sched = make_linear_bridge(T)
    for t in range(1, T):
        c = reverse_coefficients(sched, t, VariancePolicy(0.0))
        k, l, z = deterministic_closed_form(T, t)
        assert abs(c.kappa - k) < 1e-12
        assert abs(c.lam - l) < 1e-12
        assert abs(c.zeta - z) < 1e-12


def test_t1_deterministic_emits_prediction():
    c = reverse_coefficients(make_linear_bridge(50), 1, VariancePolicy(0.0))
    assert (c.kappa, c.lam, c.zeta, c.sigma2) == (0.0, 1.0, 0.0, 0.0)


@pytest.mark.parametrize("T", [2, 8, 50, 257])
def test_posterior_form_exact_zero_zeta(T):
    sched = make_linear_bridge(T)
    for t in range(1, T):
        c = reverse_coefficients(sched, t, VariancePolicy(2.0))
        assert c.zeta == 0.0
        assert abs(c.kappa - (t - 1) / t) < 1e-12
        assert abs(c.lam - 1 / t) < 1e-12
        assert abs(c.sigma2 - 2 * (t - 1) / (T * t)) < 1e-12


def test_posterior_branch_matches_generic_solve():
    # the generic radicand formula agrees with the closed form up to rounding
    T = 50
    sched = make_linear_bridge(T)
    a, b2 = sched.alpha_hat, sched.beta2_hat
    for t in range(2, T):
        var = sigma2(sched, t, VariancePolicy(2.0))
        kappa = math.sqrt((b2[t - 1] - var) / b2[t])
        c = reverse_coefficients(sched, t, VariancePolicy(2.0))
        assert abs(c.kappa - kappa) < 1e-12
        assert abs(1 - a[t - 1] - kappa * (1 - a[t])) < 1e-12


def test_t_equals_T_lands_on_previous_marginal():
    T = 50
    sched = make_linear_bridge(T)
    for s in SCALES:
        c = reverse_coefficients(sched, T, VariancePolicy(s))
        assert c.kappa == 0.0
        assert c.lam == sched.alpha_hat[T - 1]
        assert c.zeta == 1.0 - sched.alpha_hat[T - 1]


def test_negative_radicand_raises():
    sched = make_linear_bridge(10)
    with pytest.raises(NumericDomainError):
        reverse_coefficients(sched, 5, VariancePolicy(50.0))


@pytest.mark.parametrize("s", SCALES)
def test_general_solver_equals_bridge_solver(s):
    T = 50
    sched = make_linear_bridge(T)
    gen = framework_instance("bridge", T, s=s)
    assert np.allclose(gen.beta_hat, np.sqrt(2.0 * np.arange(T + 1) * (T - np.arange(T + 1)) / T**2), atol=1e-15)
    for t in range(1, T):
        a = reverse_coefficients(sched, t, VariancePolicy(s))
        b = general_reverse_coefficients(gen, t)
        for x, y in zip((a.kappa, a.lam, a.zeta, a.sigma2), (b.kappa, b.lam, b.zeta, b.sigma2)):
            assert abs(x - y) < 1e-12


def test_general_degenerate_and_zero_radicand():
    gen = framework_instance("bridge", 10, s=2.0)
    with pytest.raises(DegenerateStep):
        general_reverse_coefficients(gen, 10)
    g = GeneralizedSchedule(
        "toy", [1.0, 0.8, 0.5], [0.0, 0.6, 0.8], [0.0, 0.1, 0.3], [0.0, 0.0, 0.36]
    )
    c = general_reverse_coefficients(g, 2)
    assert c.kappa == 0.0 and c.lam == 0.8 and c.zeta == 0.1


def test_ddpm_alpha_bar_constant_beta():
    beta, T = 0.02, 20
    abar = ddpm_alpha_bar([beta] * T)
    ref = [1.0]
    for _ in range(T):
        ref.append(ref[-1] * (1 - beta))
    assert np.allclose(abar, ref, rtol=0, atol=1e-15)
    with pytest.raises(InvalidArgument):
        ddpm_alpha_bar([0.1, 1.0])


def _ddpm_posterior_mean_weights(abar, betas, t):
    """Textbook DDPM posterior mean weights on (x_t, x0_hat)."""
    alpha_t = 1 - betas[t - 1]
    c_x0 = math.sqrt(abar[t - 1]) * betas[t - 1] / (1 - abar[t])
    c_xt = math.sqrt(alpha_t) * (1 - abar[t - 1]) / (1 - abar[t])
    return c_xt, c_x0


@pytest.mark.parametrize("name", ["csdi", "sssd", "timediff"])
def test_ddpm_rows_reproduce_posterior_mean(name):
    T = 50
    betas = np.linspace(1e-4, 0.5, T)
    gen = framework_instance(name, T, betas)
    abar = ddpm_alpha_bar(betas)
    assert np.all(gen.gamma_hat == 0.0)
    for t in range(2, T + 1):
        c = general_reverse_coefficients(gen, t)
        assert c.zeta == 0.0
        c_xt, c_x0 = _ddpm_posterior_mean_weights(abar, betas, t)
        assert c.kappa == pytest.approx(c_xt, rel=1e-10)
        assert c.lam == pytest.approx(c_x0, rel=1e-10)
        r = consistency_residuals(gen, t, c)
        assert max(abs(x) for x in r) < 1e-12


def test_tmdm_row():
    T = 30
    betas = np.full(T, 0.05)
    gen = framework_instance("tmdm", T, betas)
    assert gen.gamma_hat[0] == 0.0
    assert np.allclose(gen.gamma_hat, 1 - gen.alpha_hat)
    for t in range(2, T + 1):
        r = consistency_residuals(gen, t, general_reverse_coefficients(gen, t))
        assert max(abs(x) for x in r) < 1e-12


def test_framework_instance_errors():
    with pytest.raises(InvalidArgument):
        framework_instance("csdi", 10)
    with pytest.raises(InvalidArgument):
        framework_instance("csdi", 10, [0.1] * 9)
    with pytest.raises(InvalidArgument):
        framework_instance("nope", 10)


def test_coefficient_rows_table():
    rows = coefficient_rows(make_linear_bridge(50), VariancePolicy(2.0))
    assert len(rows) == 51
    assert rows[0]["kappa"] is None and rows[0]["t"] == 0
    assert all(r["zeta"] == 0.0 for r in rows[1:50])
    assert max_identity_residual(make_linear_bridge(50), VariancePolicy(0.5))[0] < 1e-12


@settings(max_examples=60, deadline=None)
@given(T=st.integers(2, 400), s=st.floats(0.0, 2.0, allow_nan=False))
def test_identities_property(T, s):
    sched = make_linear_bridge(T)
    policy = VariancePolicy(s)
    for t in sorted({1, 2, T // 2, T - 1, T}):
        if t < 1:
            continue
        c = reverse_coefficients(sched, t, policy)
        r = consistency_residuals(sched, t, c)
        assert abs(r[0]) < 1e-12 and abs(r[1]) < 1e-12
        if t < T:
            assert abs(r[2]) < 1e-12
        assert c.kappa >= 0 and c.sigma2 >= 0
