"""Dense numeric core: the per-timestep MLP denoiser with hand-written
reverse-mode gradients, Adam and parameter EMA.

The denoiser works row by row. Each row of the label-extended target is fed
``[y_t | h | c | step embedding]`` and the network predicts a correction that
is added to ``h``. With the output layer at zero the prediction is exactly the
prior forecast, so training starts from the linear baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, InvalidState, NumericError

PARAM_NAMES = ("w_in", "b_in", "w_h1", "b_h1", "w_h2", "b_h2", "w_out", "b_out")
_LAYERS = (("w_in", "b_in"), ("w_h1", "b_h1"), ("w_h2", "b_h2"))

ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "identity": (lambda z: z, lambda a: np.ones_like(a)),
}


def sinusoidal_embedding(t, dim: int) -> np.ndarray:
    """Sin/cos step embedding; returns shape ``(dim,)`` for scalar ``t`` else ``(len(t), dim)``."""
    if dim <= 0 or dim % 2:
        raise InvalidArgument(f"embedding dim must be a positive even integer, got {dim}")
    t_arr = np.asarray(t, dtype=np.float64)
    freqs = 10000.0 ** (-np.arange(0, dim, 2, dtype=np.float64) / dim)
    angles = t_arr[..., None] * freqs
    out = np.empty(t_arr.shape + (dim,))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


@dataclass
class DenoiserCache:
    lead: tuple
    rows: int
    x: np.ndarray
    acts: list


def _check_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


class Denoiser:
    """Data-prediction network ``y_theta(y_t, h, c, t)``.

    ``params`` maps the names in ``PARAM_NAMES`` to float64 arrays; weights use
    the row-vector convention ``x @ W + b``.
    """

    def __init__(self, params: dict, emb_dim: int = 8, activation: str = "tanh"):
        if activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {activation!r}")
        missing = set(PARAM_NAMES) - set(params)
        if missing:
            raise InvalidArgument(f"missing denoiser parameters: {sorted(missing)}")
        self.params = params
        self.emb_dim = emb_dim
        self.activation = activation
        self.d = params["w_out"].shape[1]
        self.width = params["w_in"].shape[1]
        if params["w_in"].shape[0] != 3 * self.d + emb_dim:
            raise InvalidArgument("input projection does not match 3*d + emb_dim")

    @classmethod
    def init(cls, d: int, width: int = 64, emb_dim: int = 8, rng=None, activation: str = "tanh", zero_output: bool = True):
        rng = np.random.default_rng(rng)
        shapes = {"w_in": (3 * d + emb_dim, width), "w_h1": (width, width), "w_h2": (width, width), "w_out": (width, d)}
        params = {}
        for name in PARAM_NAMES:
            if name.startswith("b_"):
                params[name] = np.zeros(shapes["w" + name[1:]][1])
            elif name == "w_out" and zero_output:
                params[name] = np.zeros(shapes[name])
            else:
                fan_in, fan_out = shapes[name]
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                params[name] = rng.uniform(-bound, bound, size=shapes[name])
        return cls(params, emb_dim=emb_dim, activation=activation)

    def _features(self, y_t, h, c, t):
        y_t, h, c = (np.asarray(a, dtype=np.float64) for a in (y_t, h, c))
        if y_t.shape != h.shape or y_t.shape != c.shape or y_t.ndim < 2:
            raise InvalidArgument(f"y_t {y_t.shape}, h {h.shape}, c {c.shape} must share shape (..., rows, d)")
        if y_t.shape[-1] != self.d:
            raise InvalidArgument(f"expected {self.d} channels, got {y_t.shape[-1]}")
        lead, rows = y_t.shape[:-2], y_t.shape[-2]
        n_series = int(np.prod(lead, dtype=np.int64))
        t_arr = np.asarray(t)
        if t_arr.ndim == 0:
            emb = np.broadcast_to(sinusoidal_embedding(float(t_arr), self.emb_dim), (n_series * rows, self.emb_dim))
        else:
            if t_arr.shape != lead:
                raise InvalidArgument(f"per-series steps must have shape {lead}, got {t_arr.shape}")
            emb = np.repeat(sinusoidal_embedding(t_arr.reshape(-1), self.emb_dim), rows, axis=0)
        flat = lambda a: a.reshape(-1, self.d)
        x = np.concatenate([flat(y_t), flat(h), flat(c), emb], axis=1)
        return lead, rows, x, flat(h)

    def forward(self, y_t, h, c, t):
        """Return ``(prediction, cache)``; the cache feeds :meth:`backward`."""
        lead, rows, x, h_flat = self._features(y_t, h, c, t)
        act = ACTIVATIONS[self.activation][0]
        p = self.params
        acts = []
        a = x
        for w, b in _LAYERS:
            a = act(a @ p[w] + p[b])
            acts.append(a)
        out = a @ p["w_out"] + p["b_out"] + h_flat
        _check_finite(out, "denoiser output")
        return out.reshape(lead + (rows, self.d)), DenoiserCache(lead, rows, x, acts)

    def __call__(self, y_t, h, c, t):
        return self.forward(y_t, h, c, t)[0]

    def backward(self, cache: DenoiserCache | None, grad_out):
        """Exact gradients of ``sum(grad_out * forward(...))``.

        Returns ``(param_grads, input_grads)`` with input gradients for
        ``y_t``, ``h`` and ``c`` in the caller's shape.
        """
        if cache is None:
            raise InvalidState("backward called without a forward cache")
        g = np.asarray(grad_out, dtype=np.float64).reshape(-1, self.d)
        if g.shape[0] != cache.x.shape[0]:
            raise InvalidArgument("output gradient does not match the cached forward pass")
        deriv = ACTIVATIONS[self.activation][1]
        p = self.params
        grads = {"w_out": cache.acts[-1].T @ g, "b_out": g.sum(axis=0)}
        upstream = g @ p["w_out"].T
        for i in range(len(_LAYERS) - 1, -1, -1):
            w, b = _LAYERS[i]
            gz = upstream * deriv(cache.acts[i])
            below = cache.acts[i - 1] if i > 0 else cache.x
            grads[w] = below.T @ gz
            grads[b] = gz.sum(axis=0)
            upstream = gz @ p[w].T
        d = self.d
        shape = cache.lead + (cache.rows, d)
        inputs = {
            "y_t": upstream[:, :d].reshape(shape),
            "h": (upstream[:, d : 2 * d] + g).reshape(shape),
            "c": upstream[:, 2 * d : 3 * d].reshape(shape),
        }
        return grads, inputs


def denoiser_forward(model: Denoiser, y_t, h, c, t):
    return model.forward(y_t, h, c, t)


def denoiser_backward(model: Denoiser, cache, grad_out):
    return model.backward(cache, grad_out)


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_max: float = 1e-4
    lr_min: float = 5e-7

    @classmethod
    def zeros_like(cls, params: dict, **kw):
        return cls({k: np.zeros_like(v) for k, v in params.items()}, {k: np.zeros_like(v) for k, v in params.items()}, **kw)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """Bias-corrected Adam update, applied in place. Rejects the whole step on any non-finite gradient."""
    if not lr > 0:
        raise InvalidArgument(f"learning rate must be positive, got {lr}")
    for k, g in grads.items():
        if k not in params or params[k].shape != g.shape:
            raise InvalidArgument(f"gradient {k!r} does not match a parameter")
        _check_finite(g, f"gradient {k!r}")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for k, g in grads.items():
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def linear_lr(step: int, total: int, lr_max: float = 1e-4, lr_min: float = 5e-7) -> float:
    """Linear decay from ``lr_max`` at step 0 to ``lr_min`` at step ``total - 1``."""
    if total <= 1:
        return lr_max
    frac = min(max(step / (total - 1), 0.0), 1.0)
    return lr_max * (1.0 - frac) + lr_min * frac


@dataclass
class EmaState:
    shadow: dict
    decay: float = 0.995
    interval: int = 8

    @classmethod
    def from_params(cls, params: dict, **kw):
        return cls({k: v.copy() for k, v in params.items()}, **kw)


def ema_update(ema: EmaState, params: dict, step_index: int) -> EmaState:
    if step_index < 1:
        raise InvalidArgument("EMA step index starts at 1")
    if step_index % ema.interval:
        return ema
    for k, s in ema.shadow.items():
        p = params[k]
        if p.shape != s.shape:
            raise InvalidArgument(f"EMA shadow {k!r} has shape {s.shape}, parameter has {p.shape}")
        # incremental form keeps shadow == params a bitwise fixed point
        s += (1.0 - ema.decay) * (p - s)
    return ema
