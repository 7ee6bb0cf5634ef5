"""Static SVG forecast plots: truth line, point/median line, optional 5-95% band."""

from __future__ import annotations

from pathlib import Path

import numpy as np

W, H, PAD = 640, 320, 40


def _scale(values, lo, hi, out_lo, out_hi):
    if hi == lo:
        return np.full_like(values, (out_lo + out_hi) / 2, dtype=float)
    return out_lo + (np.asarray(values, dtype=float) - lo) / (hi - lo) * (out_hi - out_lo)


def _points(xs, ys) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def forecast_svg(truth, point, history=None, lower=None, upper=None, title: str = "") -> str:
    history = np.asarray(history if history is not None else [], dtype=float)
    truth, point = np.asarray(truth, dtype=float), np.asarray(point, dtype=float)
    n_hist, L = history.size, truth.size
    everything = [truth, point, history] + [np.asarray(b, dtype=float) for b in (lower, upper) if b is not None]
    lo = min(float(np.min(a)) for a in everything if a.size)
    hi = max(float(np.max(a)) for a in everything if a.size)
    xs = _scale(np.arange(n_hist + L), 0, max(n_hist + L - 1, 1), PAD, W - PAD)
    ys = lambda v: _scale(v, lo, hi, H - PAD, PAD)
    fut = xs[n_hist:]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{PAD}" y="{PAD - 12}" font-family="sans-serif" font-size="13">{title}</text>',
    ]
    if lower is not None and upper is not None:
        band = _points(fut, ys(upper)) + " " + _points(fut[::-1], ys(np.asarray(lower, dtype=float))[::-1])
        parts.append(f'<polygon points="{band}" fill="#4c72b0" fill-opacity="0.25" stroke="none"/>')
    if n_hist:
        parts.append(f'<polyline points="{_points(xs[:n_hist], ys(history))}" fill="none" stroke="#555" stroke-width="1.2"/>')
    parts.append(f'<polyline points="{_points(fut, ys(truth))}" fill="none" stroke="black" stroke-width="1.5"/>')
    parts.append(f'<polyline points="{_points(fut, ys(point))}" fill="none" stroke="#c44e52" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_forecast_svg(path, *args, **kw) -> None:
    Path(path).write_text(forecast_svg(*args, **kw))
