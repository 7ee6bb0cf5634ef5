"""End-to-end training, forecasting and scoring on a CSV dataset."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .bridge import BridgeModel, BridgeProcess, ForecastResult, forecast, training_step
from .checkpoint import load_tensors, save_tensors
from .config import RunConfig
from .data import Dataset, NormStats, WindowSet, denormalize, load_csv, make_windows, normalize, split
from .errors import DataError
from .neural import AdamState, Denoiser, EmaState, adam_step, ema_update, linear_lr
from .priors import LinearMap, fit_prior, init_conditioner, last_value_map

log = logging.getLogger(__name__)

# rows of (window x sample x target row) handled per sampling chunk
SAMPLE_ROW_BUDGET = 65536


@dataclass
class Prepared:
    train: Dataset
    val: Dataset
    test: Dataset
    stats: NormStats
    channels: list


def prepare_data(cfg: RunConfig, ds: Dataset | None = None, stats: NormStats | None = None) -> Prepared:
    if ds is None:
        if not cfg.data:
            raise DataError("no dataset given (--data)")
        ds = load_csv(cfg.data, cfg.date_column)
    train, val, test = split(ds, cfg.split, cfg.lookback, cfg.horizon)
    stats = stats or NormStats.fit(train)
    return Prepared(normalize(train, stats), normalize(val, stats), normalize(test, stats), stats, list(ds.channels))


@dataclass
class TrainResult:
    model: BridgeModel  # EMA weights, used for sampling
    live: BridgeModel
    stats: NormStats
    channels: list
    curve: list = field(default_factory=list)


def train(cfg: RunConfig, ds: Dataset | None = None, progress=None) -> TrainResult:
    """Fit F by ridge regression, then train E and the denoiser with Adam + EMA."""
    prep = prepare_data(cfg, ds)
    windows = make_windows(prep.train, cfg.lookback, cfg.horizon, cfg.label_len)
    rng = np.random.default_rng(cfg.seed)

    prior = fit_prior(*windows.views(), ridge=cfg.ridge)
    cond = init_conditioner(prior, cfg.cond_init)
    den = Denoiser.init(windows.d, cfg.width, cfg.emb_dim, rng=rng)
    model = BridgeModel(prior, cond, den, train_cond=not cfg.freeze_conditioner)
    proc = BridgeProcess.linear(cfg.steps, 0.0, cfg.label_len)

    params = model.trainable()
    adam = AdamState.zeros_like(params, lr_max=cfg.lr_max, lr_min=cfg.lr_min)
    ema = EmaState.from_params(params, decay=cfg.ema_decay, interval=cfg.ema_interval)
    n = len(windows)
    per_epoch = math.ceil(n / cfg.batch)
    total = cfg.epochs * per_epoch
    curve = []
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for b in range(per_epoch):
            idx = perm[b * cfg.batch : (b + 1) * cfg.batch]
            x, _, y_star = windows.batch(idx)
            lr = linear_lr(step, total, cfg.lr_max, cfg.lr_min)
            loss, grads = training_step(model, x, y_star, proc, rng, cfg.loss)
            adam_step(params, grads, adam, lr)
            step += 1
            ema_update(ema, params, step)
            curve.append((step, epoch, lr, loss))
        if progress:
            progress(epoch, float(np.mean([c[3] for c in curve[-per_epoch:]])))
    return TrainResult(model.with_params(ema.shadow), model, prep.stats, prep.channels, curve)


def write_curve(path, curve) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "epoch", "lr", "loss"])
        for step, epoch, lr, loss in curve:
            w.writerow([step, epoch, repr(float(lr)), repr(float(loss))])


def save_checkpoint(path, cfg: RunConfig, res: TrainResult) -> None:
    t = {
        "prior_F.weight": res.model.prior.weight,
        "prior_F.bias": res.model.prior.bias,
        "cond_E.weight": res.model.cond.weight,
        "cond_E.bias": res.model.cond.bias,
    }
    t.update({f"denoiser.{k}": v for k, v in res.model.denoiser.params.items()})
    t.update({f"live.{k}": v for k, v in res.live.trainable().items()})
    t["norm.mean"] = res.stats.mean
    t["norm.std"] = res.stats.std
    meta = {
        "config": cfg.to_json(),
        "channels": res.channels,
        "activation": res.model.denoiser.activation,
        "emb_dim": res.model.denoiser.emb_dim,
        "lookback": cfg.lookback,
        "target_rows": cfg.label_len + cfg.horizon,
    }
    save_tensors(path, t, meta)


def load_checkpoint(path):
    """Return ``(model, config, stats, channels)``; the model carries EMA weights."""
    t, meta = load_tensors(path)
    cfg = RunConfig.from_json(meta["config"])
    prior = LinearMap(t["prior_F.weight"], t["prior_F.bias"])
    cond = LinearMap(t["cond_E.weight"], t["cond_E.bias"])
    den = Denoiser(
        {k.split(".", 1)[1]: v for k, v in t.items() if k.startswith("denoiser.")},
        emb_dim=meta["emb_dim"],
        activation=meta["activation"],
    )
    if prior.in_len != cfg.lookback or prior.out_len != cfg.label_len + cfg.horizon:
        raise DataError("checkpoint tensors disagree with their own config header")
    stats = NormStats(t["norm.mean"], t["norm.std"], np.zeros_like(t["norm.std"], dtype=bool))
    return BridgeModel(prior, cond, den, not cfg.freeze_conditioner), cfg, stats, meta["channels"]


SHAPE_KEYS = ("lookback", "horizon", "label_len", "steps", "width", "emb_dim")


def check_shape_drift(ckpt_cfg: RunConfig, requested: dict) -> None:
    for k in SHAPE_KEYS:
        if k in requested and requested[k] is not None and requested[k] != getattr(ckpt_cfg, k):
            raise DataError(f"--{k.replace('_', '-')}={requested[k]} disagrees with checkpoint ({getattr(ckpt_cfg, k)})")


@dataclass
class ForecastRun:
    result: ForecastResult
    x: np.ndarray
    truth: np.ndarray  # (B, L, d)
    window_ids: np.ndarray
    stats: NormStats
    channels: list

    def point(self) -> np.ndarray:
        return self.result.horizon_point()

    def samples(self):
        return self.result.horizon_samples()


def eval_windows(cfg: RunConfig, stats: NormStats, ds: Dataset | None = None) -> WindowSet:
    prep = prepare_data(cfg, ds, stats)
    if len(prep.test) == 0:
        raise DataError("the configured split has no test portion; nothing to evaluate")
    return make_windows(prep.test, cfg.lookback, cfg.horizon, cfg.label_len, stride=cfg.eval_stride)


def run_forecast(cfg: RunConfig, model: BridgeModel, stats: NormStats, ds: Dataset | None = None, channels=None) -> ForecastRun:
    windows = eval_windows(cfg, stats, ds)
    x, y, _ = windows.batch()
    proc = BridgeProcess.linear(cfg.steps, cfg.effective_s, cfg.label_len)
    n = cfg.effective_samples
    chunk = max(1, SAMPLE_ROW_BUDGET // (n * (cfg.label_len + cfg.horizon)))
    res = forecast(model, proc, x, n_samples=n, seed=cfg.seed, chunk=chunk)
    return ForecastRun(res, x, y, windows.starts.copy(), stats, channels or list(windows.ds.channels))


def baseline_scores(run: ForecastRun, model: BridgeModel, label_len: int) -> dict:
    """Horizon MSE/MAE of the frozen prior F and of last-value repetition."""
    H = run.x.shape[1]
    R = model.prior.out_len
    out = {}
    for name, m in (("prior", model.prior), ("last_value", last_value_map(H, R, label_len))):
        pred = m.apply(run.x)[:, label_len:]
        out[f"{name}_mse"] = metrics.mse(pred, run.truth)
        out[f"{name}_mae"] = metrics.mae(pred, run.truth)
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def write_forecasts(path, run: ForecastRun, raw_scale: bool = False) -> None:
    """Long-format CSV: one row per (window, channel, horizon step)."""
    truth, point, samples = run.truth, run.point(), run.samples()
    if raw_scale:
        truth, point = denormalize(truth, run.stats), denormalize(point, run.stats)
        samples = None if samples is None else denormalize(samples, run.stats)
    header = ["window_id", "channel", "horizon_step", "y_true", "y_point"]
    if samples is not None:
        qs = np.quantile(samples, [0.05, 0.5, 0.95], axis=0)
        header += ["q05", "q50", "q95"] + [f"s{i}" for i in range(samples.shape[0])]
    B, L, d = truth.shape
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for b in range(B):
            for ch in range(d):
                for k in range(L):
                    row = [int(run.window_ids[b]), run.channels[ch], k, _fmt(truth[b, k, ch]), _fmt(point[b, k, ch])]
                    if samples is not None:
                        row += [_fmt(q) for q in qs[:, b, k, ch]]
                        row += [_fmt(v) for v in samples[:, b, k, ch]]
                    w.writerow(row)


def read_forecasts(path) -> dict:
    """Inverse of :func:`write_forecasts`: arrays shaped (B, L, d) / (n, B, L, d)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"forecast file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path} holds no forecasts")
    header, body = rows[0], rows[1:]
    col = {name: i for i, name in enumerate(header)}
    for need in ("window_id", "channel", "horizon_step", "y_true", "y_point"):
        if need not in col:
            raise DataError(f"{path} lacks column {need!r}")
    sample_cols = [i for i, name in enumerate(header) if name.startswith("s") and name[1:].isdigit()]
    wids, chans = [], []
    for r in body:
        if not wids or wids[-1] != int(r[col["window_id"]]):
            wids.append(int(r[col["window_id"]]))
        if r[col["channel"]] not in chans:
            chans.append(r[col["channel"]])
    B, d = len(wids), len(chans)
    if len(body) % (B * d):
        raise DataError(f"{path}: ragged forecast table")
    L = len(body) // (B * d)
    vals = np.array([[float(r[col["y_true"]]), float(r[col["y_point"]])] + [float(r[i]) for i in sample_cols] for r in body])
    # rows are ordered window -> channel -> step
    vals = vals.reshape(B, d, L, -1).transpose(0, 2, 1, 3)
    out = {"window_ids": np.array(wids), "channels": chans, "truth": vals[..., 0], "point": vals[..., 1], "samples": None}
    if sample_cols:
        out["samples"] = np.moveaxis(vals[..., 2:], -1, 0)
    return out


def evaluate_file(path, estimator: str = "energy"):
    """Score a forecast CSV. Returns ``(ScoreReport, per_window_rows)``."""
    f = read_forecasts(path)
    rep = metrics.score(f["point"], f["truth"], f["samples"], estimator=estimator)
    per_window = []
    for b, wid in enumerate(f["window_ids"]):
        row = {
            "window_id": int(wid),
            "mse": metrics.mse(f["point"][b], f["truth"][b]),
            "mae": metrics.mae(f["point"][b], f["truth"][b]),
        }
        if f["samples"] is not None:
            row["crps"] = metrics.crps(f["samples"][:, b], f["truth"][b])
        per_window.append(row)
    return rep, per_window


def write_per_window(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
