import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgecast.errors import InvalidArgument
from bridgecast.metrics import ScoreReport, crps, crps_empirical, crps_quantile, crps_sum, mae, mse, score


def brute_crps(xs, y):
    """Naive double loop in plain Python floats."""
    n = len(xs)
    s1 = 0.0
    for x in xs:
        s1 = s1 + abs(x - y)
    s2 = 0.0
    for a in xs:
        for b in xs:
            s2 = s2 + abs(a - b)
    return s1 / n - s2 / (2.0 * n * n)


def test_point_metrics():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0 and mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse(np.ones(4), np.zeros(4)) == 1.0 and mae(np.ones(4), np.zeros(4)) == 1.0
    assert mse([1.0, -3.0], [0.0, 0.0]) == 5.0 and mae([1.0, -3.0], [0.0, 0.0]) == 2.0
    with pytest.raises(InvalidArgument):
        mse([1.0], [1.0, 2.0])


def test_crps_hand_cases():
    assert crps_empirical([0.0, 2.0], 1.0) == 0.5
    assert crps_empirical([3.5], 1.25) == 2.25
    assert crps_empirical([2.0, 2.0, 2.0], 2.0) == 0.0
    with pytest.raises(InvalidArgument):
        crps_empirical([], 0.0)


def test_crps_sum_hand_cases():
    samples = np.array([[[0.0, 0.0]], [[2.0, 2.0]]])  # (n=2, L=1, d=2)
    assert crps_sum(samples, np.array([[1.0, 1.0]])) == 1.0
    one = np.random.default_rng(0).standard_normal((5, 4, 1))
    truth = np.random.default_rng(1).standard_normal((4, 1))
    assert crps_sum(one, truth) == crps(one, truth)
    exact = np.broadcast_to(truth, (3, 4, 1))
    assert crps_sum(exact, truth) == 0.0


@pytest.mark.parametrize("n", range(1, 7))
def test_bitwise_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(25):
        xs = rng.standard_normal(n) * 10 ** rng.uniform(-3, 3)
        y = float(rng.standard_normal())
        assert crps_empirical(xs, y) == brute_crps([float(v) for v in xs], y)


def test_single_sample_equals_mae():
    rng = np.random.default_rng(2)
    pred = rng.standard_normal((3, 7, 2))
    truth = rng.standard_normal((3, 7, 2))
    assert crps(pred[None], truth) == mae(pred, truth)


@settings(max_examples=80, deadline=None)
@given(
    xs=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=12),
    y=st.floats(-1e3, 1e3, allow_nan=False),
    c=st.floats(-1e3, 1e3, allow_nan=False),
    a=st.floats(-10, 10, allow_nan=False),
)
def test_translation_and_scale(xs, y, c, a):
    base = crps_empirical(xs, y)
    assert base >= 0
    tol = 1e-12 * max(1.0, max(abs(v) for v in xs + [y, c])) * 8
    assert abs(crps_empirical([x + c for x in xs], y + c) - base) <= tol
    assert abs(crps_empirical([a * x for x in xs], a * y) - abs(a) * base) <= tol * max(1.0, abs(a))


def test_quantile_estimator_close_to_energy():
    rng = np.random.default_rng(3)
    samples = rng.standard_normal((2000, 20, 1))
    truth = rng.standard_normal((20, 1))
    e, q = crps(samples, truth), crps_quantile(samples, truth)
    assert abs(e - q) / e < 0.1


def test_score_report():
    rng = np.random.default_rng(4)
    truth = rng.standard_normal((3, 5, 2))
    samples = truth + rng.standard_normal((10, 3, 5, 2))
    rep = score(samples.mean(0), truth, samples)
    assert rep.n_windows == 3 and rep.n_samples == 10 and rep.crps > 0
    assert json.loads(rep.to_json())["crps_sum"] == rep.crps_sum
    assert score(truth, truth).crps is None
    with pytest.raises(InvalidArgument):
        ScoreReport(mse=-1.0, mae=0.0)
    with pytest.raises(InvalidArgument):
        score(truth, truth, samples, estimator="pit")
