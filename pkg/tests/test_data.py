import logging

import numpy as np
import pytest

from bridgecast.data import (
    Dataset,
    NormStats,
    denormalize,
    load_csv,
    make_windows,
    normalize,
    save_csv,
    split,
    synthetic_series,
)
from bridgecast.errors import DataError, InvalidArgument


def _ramp(n, d=1):
    return Dataset(np.arange(n * d, dtype=float).reshape(n, d), [f"c{i}" for i in range(d)])


def test_load_toy_csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n")
    ds = load_csv(p)
    assert ds.values.shape == (3, 2)
    assert ds.channels == ["a", "b"] and ds.timestamps[0] == "2020-01-01"
    p.write_text("a,b\n1,2\n3,4\n")
    assert load_csv(p).values.shape == (2, 2)


def test_load_rejects_nan_with_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("date,a\nx,1\ny,NaN\nz,3\nw,\n")
    with pytest.raises(DataError, match="rows 1, 3"):
        load_csv(p)
    p.write_text("date,a\nx,1\ny,abc\n")
    with pytest.raises(DataError, match="row 2"):
        load_csv(p)
    p.write_text("")
    with pytest.raises(DataError):
        load_csv(p)
    with pytest.raises(DataError):
        load_csv(tmp_path / "missing.csv")


def test_csv_round_trip(tmp_path):
    ds = synthetic_series(50, 3, seed=1)
    save_csv(ds, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv")
    assert np.array_equal(back.values, ds.values) and back.channels == ds.channels


def test_split_sizes_with_overlap():
    train, val, test = split(_ramp(100), (0.7, 0.1, 0.2), lookback=10, horizon=5)
    assert (len(train), len(val), len(test)) == (70, 20, 30)
    assert val.values[0, 0] == 60 and test.values[0, 0] == 70
    assert test.values[-1, 0] == 99


def test_split_errors_and_train_only():
    with pytest.raises(InvalidArgument):
        split(_ramp(100), (0.7, 0.3, 0.2), 10, 5)
    with pytest.raises(InvalidArgument):
        split(_ramp(20), (0.7, 0.1, 0.2), 10, 5)
    train, val, test = split(_ramp(100), (1, 0, 0), 10, 5)
    assert len(train) == 100 and len(val) == 0 and len(test) == 0


def test_normalisation_uses_train_only_and_inverts():
    ds = Dataset(np.linspace(0, 10, 200)[:, None] + np.zeros((200, 2)), ["a", "b"])
    train, val, test = split(ds, (0.6, 0.2, 0.2), 10, 5)
    st = NormStats.fit(train)
    assert not np.allclose(NormStats.fit(test).mean, st.mean)
    z = normalize(test, st)
    assert np.allclose(denormalize(z.values, st), test.values, atol=1e-12)


def test_constant_channel(caplog):
    ds = Dataset(np.column_stack([np.full(10, 3.0), np.arange(10.0)]), ["k", "r"])
    with caplog.at_level(logging.WARNING):
        st = NormStats.fit(ds)
    assert st.std[0] == 1.0 and "constant" in caplog.text
    assert np.all(normalize(ds, st).values[:, 0] == 0.0)


def test_window_count_and_labels():
    ds = _ramp(10)
    w = make_windows(ds, 4, 2)
    assert len(w) == 5
    x, y, y_star = w.batch()
    assert np.array_equal(y_star, y)
    w2 = make_windows(ds, 4, 2, label_len=2)
    x, y, y_star = w2.batch()
    assert np.array_equal(y_star[:, :2], x[:, -2:])
    assert np.array_equal(y_star[:, 2:], y)
    one = w2[3]
    assert one.x[0, 0] == 3 and one.y[0, 0] == 7 and one.y_star.shape == (4, 1)
    assert len(make_windows(ds, 4, 2, stride=2)) == 3
    with pytest.raises(InvalidArgument):
        make_windows(_ramp(5), 4, 2)
    with pytest.raises(InvalidArgument):
        make_windows(ds, 4, 2, label_len=4)


def test_views_match_batches():
    w = make_windows(_ramp(30, 2), 6, 3, label_len=2)
    x, _, ys = w.batch()
    vx, vy = w.views()
    assert np.array_equal(vx, x) and np.array_equal(vy, ys)


def test_synthetic_series_deterministic():
    a, b = synthetic_series(300, 2, seed=4), synthetic_series(300, 2, seed=4)
    assert np.array_equal(a.values, b.values) and a.values.shape == (300, 2)
