"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is used when numba imports successfully and the environment
variable ``LANDAUCS_DISABLE_NUMBA`` is unset (or set to 0/false/no/off).
Both paths are deterministic: the numba kernels run compensated (Kahan)
summation in a fixed index order, the numpy fallbacks use ``math.fsum``
(exactly rounded) for reductions and BLAS/einsum with fixed shapes for the
frame accumulation.  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("LANDAUCS_DISABLE_NUMBA", "").strip().lower()
_DISABLED_BY_ENV = _flag not in ("", "0", "false", "no", "off")

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

NUMBA_ACTIVE = _HAVE_NUMBA and not _DISABLED_BY_ENV


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if NUMBA_ACTIVE else "numpy"


# ---------------------------------------------------------------------------
# numpy fallbacks


def _kahan_sum_numpy(x):
    return math.fsum(x)


def _cdot_numpy(a, b):
    p = np.conjugate(a) * b
    return complex(math.fsum(p.real), math.fsum(p.imag))


def _abs2_weighted_sum_numpy(values, coeffs):
    mags = coeffs.real * coeffs.real + coeffs.imag * coeffs.imag
    return math.fsum(values * mags)


def _frame_accumulate_numpy(vectors, weights):
    # F[a, b] = sum_i w_i V[i, a] conj(V[i, b])
    return (vectors * weights[:, None]).T @ np.conjugate(vectors)


def _kummer_series_numpy(gamma, x, rel_tol, max_terms):
    s = 1.0
    c = 0.0
    term = 1.0
    n = 0
    while n < max_terms:
        term = term * x / (gamma + n)
        y = term - c
        t = s + y
        c = (t - s) - y
        s = t
        n += 1
        if term < rel_tol * s:
            return s, n, True
    return s, n, False


# ---------------------------------------------------------------------------
# numba kernels

if _HAVE_NUMBA:

    @njit(cache=True)
    def _kahan_sum_numba(x):
        s = 0.0
        c = 0.0
        for i in range(x.shape[0]):
            y = x[i] - c
            t = s + y
            c = (t - s) - y
            s = t
        return s

    @njit(cache=True)
    def _cdot_numba(a, b):
        sr = 0.0
        si = 0.0
        cr = 0.0
        ci = 0.0
        for i in range(a.shape[0]):
            p = np.conj(a[i]) * b[i]
            yr = p.real - cr
            tr = sr + yr
            cr = (tr - sr) - yr
            sr = tr
            yi = p.imag - ci
            ti = si + yi
            ci = (ti - si) - yi
            si = ti
        return complex(sr, si)

    @njit(cache=True)
    def _abs2_weighted_sum_numba(values, coeffs):
        s = 0.0
        c = 0.0
        for i in range(values.shape[0]):
            m = coeffs[i].real * coeffs[i].real + coeffs[i].imag * coeffs[i].imag
            y = values[i] * m - c
            t = s + y
            c = (t - s) - y
            s = t
        return s

    @njit(cache=True)
    def _frame_accumulate_numba(vectors, weights):
        m, d = vectors.shape
        out = np.zeros((d, d), dtype=np.complex128)
        comp = np.zeros((d, d), dtype=np.complex128)
        for i in range(m):
            w = weights[i]
            for a in range(d):
                va = w * vectors[i, a]
                for b in range(d):
                    p = va * np.conj(vectors[i, b])
                    y = p - comp[a, b]
                    t = out[a, b] + y
                    comp[a, b] = (t - out[a, b]) - y
                    out[a, b] = t
        return out

    @njit(cache=True)
    def _kummer_series_numba(gamma, x, rel_tol, max_terms):
        s = 1.0
        c = 0.0
        term = 1.0
        n = 0
        while n < max_terms:
            term = term * x / (gamma + n)
            y = term - c
            t = s + y
            c = (t - s) - y
            s = t
            n += 1
            if term < rel_tol * s:
                return s, n, True
        return s, n, False


# ---------------------------------------------------------------------------
# dispatching surface


def kahan_sum(x) -> float:
    """Compensated sum of a 1-d float64 array in index order."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if NUMBA_ACTIVE:
        return float(_kahan_sum_numba(x))
    return float(_kahan_sum_numpy(x))


def cdot(a, b) -> complex:
    """sum_i conj(a_i) * b_i with compensated accumulation."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    if NUMBA_ACTIVE:
        return complex(_cdot_numba(a, b))
    return _cdot_numpy(a, b)


def abs2_weighted_sum(values, coeffs) -> float:
    """sum_i values_i * |coeffs_i|^2 with compensated accumulation."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    if NUMBA_ACTIVE:
        return float(_abs2_weighted_sum_numba(values, coeffs))
    return _abs2_weighted_sum_numpy(values, coeffs)


def frame_accumulate(vectors, weights) -> np.ndarray:
    """Weighted sum of outer products sum_i w_i |v_i><v_i|.

    ``vectors`` has one row per quadrature node; entry (a, b) of the result
    is sum_i w_i v[i, a] conj(v[i, b]).  Rows are consumed in order.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.complex128)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if vectors.ndim != 2 or weights.shape != (vectors.shape[0],):
        raise ValueError("vectors must be (nodes, dim) and weights (nodes,)")
    if NUMBA_ACTIVE:
        return _frame_accumulate_numba(vectors, weights)
    return _frame_accumulate_numpy(vectors, weights)


def kummer_series(gamma: float, x: float, rel_tol: float, max_terms: int):
    """Partial sum of sum_n x^n / (gamma)_n with a next-term stop rule.

    Returns (value, terms_used, converged).  Terms are positive for x >= 0,
    so the forward recurrence is stable; the stop test fires only once the
    term ratio has dropped below one, which makes it safe against the
    initial growth phase at large x.
    """
    if NUMBA_ACTIVE:
        return _kummer_series_numba(gamma, x, rel_tol, max_terms)
    return _kummer_series_numpy(gamma, x, rel_tol, max_terms)
