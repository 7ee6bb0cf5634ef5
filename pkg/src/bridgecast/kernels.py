"""Backend selection for the hot kernels.

The Cython build is used when importable; set ``BRIDGECAST_PURE_PYTHON=1`` to
force the numpy implementation. Both accept arbitrary-shaped arrays here and
hand flat contiguous float64 buffers to the backend.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

if os.environ.get("BRIDGECAST_PURE_PYTHON", "") not in ("", "0"):
    _backend = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _backend

        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _pykernels
        BACKEND = "python"

_BACKENDS = {"python": _pykernels}
if BACKEND == "cython":
    _BACKENDS["cython"] = _backend


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def _flat(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def crps_energy_cells(samples, truth, backend: str | None = None) -> np.ndarray:
    """Energy-form CRPS for each cell.

    ``samples`` has the ensemble on its last axis, shape ``(*cells, n)``;
    ``truth`` has shape ``cells``. Returns an array shaped like ``truth``.
    """
    mod = _BACKENDS[backend] if backend else _backend
    samples = np.asarray(samples, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if samples.shape[:-1] != truth.shape:
        raise ValueError(f"samples {samples.shape} do not match truth {truth.shape}")
    n = samples.shape[-1]
    flat = np.ascontiguousarray(samples.reshape(-1, n))
    out = np.empty(flat.shape[0])
    mod.crps_energy(flat, _flat(truth), out)
    return out.reshape(truth.shape)


def reverse_update(y, y_hat, h, kappa, lam, zeta, sigma=0.0, z=None, backend: str | None = None) -> np.ndarray:
    """``kappa*y + lam*y_hat + zeta*h + sigma*z`` in one pass (``z`` optional)."""
    mod = _BACKENDS[backend] if backend else _backend
    shape = np.shape(y)
    out = np.empty(int(np.prod(shape)))
    if z is None:
        mod.reverse_update(_flat(y), _flat(y_hat), _flat(h), float(kappa), float(lam), float(zeta), out)
    else:
        mod.reverse_update_noisy(
            _flat(y), _flat(y_hat), _flat(h), _flat(z), float(kappa), float(lam), float(zeta), float(sigma), out
        )
    return out.reshape(shape)
