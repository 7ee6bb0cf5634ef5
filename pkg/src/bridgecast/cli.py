"""Command-line interface.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pipeline, verify
from .config import RunConfig
from .data import load_csv, save_csv, synthetic_series
from .errors import BridgecastError, DataError, VerificationFailure
from .plot import write_forecast_svg
from .schedule import COEFFICIENT_COLUMNS, VariancePolicy, coefficient_rows, make_linear_bridge, max_identity_residual

log = logging.getLogger("bridgecast")

SCHEDULE_TOL = 1e-10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _thread_limit():
    n = os.environ.get("BRIDGECAST_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def cmd_inspect_schedule(args) -> int:
    sched = make_linear_bridge(args.steps)
    policy = VariancePolicy(args.s)
    rows = coefficient_rows(sched, policy)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(COEFFICIENT_COLUMNS)
        for r in rows:
            w.writerow(["" if r[k] is None else (r[k] if k == "t" else repr(r[k])) for k in COEFFICIENT_COLUMNS])
    finally:
        if fh is not sys.stdout:
            fh.close()
    worst, t = max_identity_residual(sched, policy)
    if worst > SCHEDULE_TOL:
        raise VerificationFailure(f"identity residual {worst:.3e} at t={t}, s={args.s}")
    return 0


def cmd_verify(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        checks = verify.run_all(n_draws=args.draws, seed=args.seed, fault=1e-3 if args.inject_fault else 0.0)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    if failed:
        where = ", ".join(f"{c.name} (t={c.t}, s={c.s})" for c in failed)
        raise VerificationFailure(f"{len(failed)} check(s) failed: {where}")
    print(f"all {len(checks)} checks passed")
    return 0


def _config_from_args(args, base: RunConfig | None = None) -> RunConfig:
    cfg = base or (RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig())
    changes = {}
    mapping = {
        "data": "data", "lookback": "lookback", "horizon": "horizon", "label_len": "label_len",
        "steps": "steps", "samples": "samples", "epochs": "epochs", "batch": "batch", "seed": "seed",
        "loss": "loss", "out": "out", "width": "width", "lr": "lr_max", "ridge": "ridge",
        "cond_init": "cond_init", "eval_stride": "eval_stride",
    }
    for arg, key in mapping.items():
        v = getattr(args, arg, None)
        if v is not None:
            changes[key] = v
    if getattr(args, "split", None):
        changes["split"] = [float(r) for r in args.split.split(",")]
    if getattr(args, "freeze_conditioner", False):
        changes["freeze_conditioner"] = True
    preset, s = getattr(args, "preset", None), getattr(args, "s", None)
    if s is not None and preset is None:
        preset = "custom"
    if preset is not None:
        changes["preset"] = preset
        changes["s"] = s
        if "samples" not in changes:
            changes["samples"] = None
    return cfg.replace(**changes)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.data:
        raise DataError("no dataset given (--data)")
    ds = load_csv(cfg.data, cfg.date_column)  # fail before touching the output directory
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    res = pipeline.train(cfg, ds, progress=lambda e, loss: log.info("epoch %d  mean loss %.6f", e, loss))
    pipeline.write_curve(out / "training_curve.csv", res.curve)
    pipeline.save_checkpoint(out / "checkpoint.bin", cfg, res)
    print(f"wrote {out / 'checkpoint.bin'} ({len(res.curve)} steps)")
    return 0


def cmd_forecast(args) -> int:
    model, ckpt_cfg, stats, channels = pipeline.load_checkpoint(args.checkpoint)
    pipeline.check_shape_drift(ckpt_cfg, {k: getattr(args, k, None) for k in pipeline.SHAPE_KEYS})
    cfg = _config_from_args(args, base=ckpt_cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    run = pipeline.run_forecast(cfg, model, stats, channels=channels)
    pipeline.write_forecasts(out / "forecasts.csv", run, raw_scale=args.raw_scale)
    base = pipeline.baseline_scores(run, model, cfg.label_len)
    (out / "baselines.json").write_text(json.dumps(base, indent=2) + "\n")
    if args.plot:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        point, samples = run.point(), run.samples()
        for b in range(min(args.plot, run.truth.shape[0])):
            for ch, name in enumerate(run.channels):
                band = {}
                if samples is not None:
                    band = {"lower": np.quantile(samples[:, b, :, ch], 0.05, axis=0), "upper": np.quantile(samples[:, b, :, ch], 0.95, axis=0)}
                write_forecast_svg(
                    pdir / f"window{int(run.window_ids[b])}_{name}.svg",
                    run.truth[b, :, ch], point[b, :, ch], history=run.x[b, :, ch],
                    title=f"window {int(run.window_ids[b])} / {name}", **band,
                )
    print(f"wrote {out / 'forecasts.csv'} ({run.truth.shape[0]} windows, preset {cfg.preset}, s={cfg.effective_s})")
    return 0


def cmd_evaluate(args) -> int:
    rep, per_window = pipeline.evaluate_file(args.forecasts, estimator=args.crps_estimator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(rep.to_json())
    pipeline.write_per_window(out / "per_window.csv", per_window)
    print(rep.to_json(), end="")
    return 0


def cmd_make_synthetic(args) -> int:
    save_csv(synthetic_series(args.length, args.channels, args.seed, args.noise), args.out)
    print(f"wrote {args.out}")
    return 0


def _add_run_flags(p, train: bool):
    p.add_argument("--data", help="CSV with header and optional leading date column")
    p.add_argument("--lookback", type=int, help="input length H")
    p.add_argument("--horizon", type=int, help="forecast length L")
    p.add_argument("--label-len", dest="label_len", type=int, help="lookback rows re-predicted with the horizon")
    p.add_argument("--steps", type=int, help="diffusion steps T")
    p.add_argument("--preset", choices=["point", "prob", "custom"])
    p.add_argument("--s", type=float, help="reverse variance scale (implies --preset custom)")
    p.add_argument("--samples", type=int, help="ensemble size for stochastic presets")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--split", help="train,val,test ratios, e.g. 0.7,0.1,0.2")
    p.add_argument("--eval-stride", dest="eval_stride", type=int)
    if train:
        p.add_argument("--config", help="start from a saved config.json")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch", type=int)
        p.add_argument("--loss", choices=["mae", "mse"])
        p.add_argument("--width", type=int, help="denoiser hidden width")
        p.add_argument("--lr", type=float, help="peak learning rate")
        p.add_argument("--ridge", type=float)
        p.add_argument("--cond-init", dest="cond_init", choices=["prior", "zeros"])
        p.add_argument("--freeze-conditioner", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bridgecast", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inspect-schedule", help="dump per-step bridge coefficients as CSV")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_inspect_schedule)

    p = sub.add_parser("verify", help="coefficient identities, oracle chains, Monte-Carlo marginals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--inject-fault", action="store_true", help="perturb kappa (negative control)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="fit F, train E and the denoiser")
    _add_run_flags(p, train=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="sample test-split forecasts from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_run_flags(p, train=False)
    p.add_argument("--width", type=int, help=argparse.SUPPRESS)
    p.add_argument("--raw-scale", action="store_true", help="write denormalised values")
    p.add_argument("--plot", type=int, default=0, metavar="N", help="SVG plots for the first N windows")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="score a forecasts.csv")
    p.add_argument("--forecasts", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--crps-estimator", choices=["energy", "quantile"], default="energy")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-synthetic", help="write the sinusoid+trend+noise benchmark CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=int, default=3000)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_make_synthetic)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except BridgecastError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
