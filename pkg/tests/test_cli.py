import csv
import io
import json

import numpy as np
import pytest

from bridgecast import cli
from bridgecast.checkpoint import load_tensors, save_tensors
from bridgecast.data import Dataset, save_csv

SMALL = ["--lookback", "24", "--horizon", "8", "--label-len", "4", "--steps", "10"]


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["make-synthetic", "--out", str(d / "syn.csv"), "--length", "400"]) == 0
    code = cli.main(["train", "--data", str(d / "syn.csv"), *SMALL, "--epochs", "1", "--width", "8",
                     "--batch", "16", "--out", str(d / "run")])
    assert code == 0
    return d


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_inspect_schedule(capsys):
    code, out = run(["inspect-schedule", "--steps", "50", "--s", "0"], capsys)
    rows = list(csv.reader(io.StringIO(out.out)))
    assert code == 0 and rows[0][:2] == ["t", "alpha_hat"] and len(rows) == 52
    code, out = run(["inspect-schedule", "--steps", "50", "--s", "2"], capsys)
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert all(float(r["zeta"]) == 0.0 for r in rows[1:50])
    code, out = run(["inspect-schedule", "--steps", "1"], capsys)
    assert code == 1 and "error" in out.err


def test_verify(capsys):
    code, out = run(["verify", "--draws", "20000"], capsys)
    assert code == 0 and "[FAIL]" not in out.out
    code, out = run(["verify", "--inject-fault", "--draws", "2000"], capsys)
    assert code == 4 and "[FAIL] coefficient identities" in out.out and "t=" in out.err
    code, out = run(["verify", "--draws", "10"], capsys)
    assert "widened" in out.err


def test_usage_errors(capsys):
    assert run(["train", "--preset", "bogus"], capsys)[0] == 1
    assert run(["nope"], capsys)[0] == 1
    assert run(["train", "--data", "x.csv", "--preset", "point", "--samples", "5"], capsys)[0] == 1


def test_train_outputs(workdir):
    run_dir = workdir / "run"
    assert {p.name for p in run_dir.iterdir()} >= {"config.json", "training_curve.csv", "checkpoint.bin"}
    curve = _rows(run_dir / "training_curve.csv")
    assert curve[0] == ["step", "epoch", "lr", "loss"] and len(curve) > 2


def test_point_forecast_and_evaluate(workdir, capsys):
    out = workdir / "fc_point"
    code, _ = run(["forecast", "--checkpoint", workdir / "run" / "checkpoint.bin", "--out", out, "--plot", "1"], capsys)
    assert code == 0
    rows = _rows(out / "forecasts.csv")
    assert rows[0] == ["window_id", "channel", "horizon_step", "y_true", "y_point"]
    assert json.loads((out / "baselines.json").read_text())["prior_mse"] > 0
    assert len(list((out / "plots").glob("*.svg"))) == 2
    code, res = run(["evaluate", "--forecasts", out / "forecasts.csv", "--out", out], capsys)
    assert code == 0 and json.loads(res.out)["crps"] is None
    assert _rows(out / "per_window.csv")[0] == ["window_id", "mse", "mae"]


def test_prob_forecast_reproducible(workdir, capsys):
    ck = workdir / "run" / "checkpoint.bin"
    for name in ("p1", "p2"):
        code, _ = run(["forecast", "--checkpoint", ck, "--preset", "prob", "--samples", "6", "--seed", "3",
                       "--out", workdir / name], capsys)
        assert code == 0
    a = (workdir / "p1" / "forecasts.csv").read_bytes()
    assert a == (workdir / "p2" / "forecasts.csv").read_bytes()
    header = _rows(workdir / "p1" / "forecasts.csv")[0]
    assert header[5:8] == ["q05", "q50", "q95"] and header[-1] == "s5"
    code, res = run(["evaluate", "--forecasts", workdir / "p1" / "forecasts.csv", "--out", workdir / "p1",
                     "--crps-estimator", "quantile"], capsys)
    assert code == 0 and json.loads(res.out)["crps"] > 0


def test_prob_single_sample_column(workdir, capsys):
    code, _ = run(["forecast", "--checkpoint", workdir / "run" / "checkpoint.bin", "--preset", "prob",
                   "--samples", "1", "--out", workdir / "one"], capsys)
    assert code == 0
    header = _rows(workdir / "one" / "forecasts.csv")[0]
    assert [h for h in header if h.startswith("s") and h[1:].isdigit()] == ["s0"]


def test_forecast_errors(workdir, capsys):
    ck = workdir / "run" / "checkpoint.bin"
    assert run(["forecast", "--checkpoint", workdir / "missing.bin"], capsys)[0] == 2
    code, out = run(["forecast", "--checkpoint", ck, "--horizon", "12", "--out", workdir / "x"], capsys)
    assert code == 2 and "horizon" in out.err
    code, out = run(["forecast", "--checkpoint", ck, "--split", "1,0,0", "--out", workdir / "x"], capsys)
    assert code == 2 and "test" in out.err
    assert run(["evaluate", "--forecasts", workdir / "none.csv"], capsys)[0] == 2


def test_bad_data_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("date,a\n1,2\n2,nan\n")
    code, out = run(["train", "--data", p, *SMALL], capsys)
    assert code == 2 and "row" in out.err


def test_oracle_stub_checkpoint_reproduces_targets(tmp_path, capsys):
    """Exact linear prior + zero denoiser output: the reverse chain stays on h = truth."""
    n, H, L, lab = 300, 24, 8, 4
    t = np.arange(n, dtype=float)
    save_csv(Dataset(np.column_stack([0.5 + 0.01 * t, 3.0 - 0.02 * t]), ["a", "b"]), tmp_path / "lin.csv")
    args = ["--lookback", H, "--horizon", L, "--label-len", lab, "--steps", 10]
    assert run(["train", "--data", tmp_path / "lin.csv", *args, "--epochs", 0, "--out", tmp_path / "r"], capsys)[0] == 0
    ck = tmp_path / "r" / "checkpoint.bin"
    tensors, meta = load_tensors(ck)
    # label rows copy the lookback tail; future rows extrapolate the last slope
    w = np.zeros((lab + L, H))
    for r in range(lab):
        w[r, H - lab + r] = 1.0
    for k in range(L):
        w[lab + k, -1] = k + 2.0
        w[lab + k, -2] = -(k + 1.0)
    for name in ("prior_F", "cond_E"):
        tensors[f"{name}.weight"], tensors[f"{name}.bias"] = w, np.zeros(lab + L)
    save_tensors(ck, tensors, meta)
    assert run(["forecast", "--checkpoint", ck, "--out", tmp_path / "f", "--raw-scale"], capsys)[0] == 0
    rows = list(csv.DictReader(open(tmp_path / "f" / "forecasts.csv", newline="")))
    err = max(abs(float(r["y_point"]) - float(r["y_true"])) for r in rows)
    assert err < 1e-9
