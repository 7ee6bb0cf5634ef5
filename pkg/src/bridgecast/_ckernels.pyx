# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Summation order is identical to ``_pykernels`` so both backends agree bit for
bit; keep the two files in step when editing either.
"""
from libc.math cimport fabs


def crps_energy(const double[:, ::1] samples, const double[::1] truth, double[::1] out):
    cdef Py_ssize_t cells = samples.shape[0]
    cdef Py_ssize_t n = samples.shape[1]
    cdef Py_ssize_t c, i, j
    cdef double y, xi, s1, s2
    cdef double nn = <double>n
    with nogil:
        for c in range(cells):
            y = truth[c]
            s1 = 0.0
            for i in range(n):
                s1 = s1 + fabs(samples[c, i] - y)
            s2 = 0.0
            for i in range(n):
                xi = samples[c, i]
                for j in range(n):
                    s2 = s2 + fabs(xi - samples[c, j])
            out[c] = s1 / nn - s2 / (2.0 * nn * nn)


def reverse_update(const double[::1] y, const double[::1] y_hat, const double[::1] h,
                   double kappa, double lam, double zeta, double[::1] out):
    cdef Py_ssize_t k, m = y.shape[0]
    with nogil:
        for k in range(m):
            out[k] = kappa * y[k] + lam * y_hat[k] + zeta * h[k]


def reverse_update_noisy(const double[::1] y, const double[::1] y_hat, const double[::1] h,
                         const double[::1] z, double kappa, double lam, double zeta,
                         double sigma, double[::1] out):
    cdef Py_ssize_t k, m = y.shape[0]
    with nogil:
        for k in range(m):
            out[k] = kappa * y[k] + lam * y_hat[k] + zeta * h[k] + sigma * z[k]
