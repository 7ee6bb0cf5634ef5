"""Numpy fallback for the compiled kernels in ``_ckernels.pyx``.

Per-element operation order mirrors the Cython loops exactly.
"""
import numpy as np


def crps_energy(samples, truth, out):
    n = samples.shape[1]
    nn = float(n)
    s1 = np.zeros(samples.shape[0])
    for i in range(n):
        s1 += np.abs(samples[:, i] - truth)
    s2 = np.zeros(samples.shape[0])
    for i in range(n):
        xi = samples[:, i]
        for j in range(n):
            s2 += np.abs(xi - samples[:, j])
    out[:] = s1 / nn - s2 / (2.0 * nn * nn)


def reverse_update(y, y_hat, h, kappa, lam, zeta, out):
    out[:] = kappa * y + lam * y_hat + zeta * h


def reverse_update_noisy(y, y_hat, h, z, kappa, lam, zeta, sigma, out):
    out[:] = kappa * y + lam * y_hat + zeta * h + sigma * z
