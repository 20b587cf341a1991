"""Scalar special functions feeding normalization constants and densities.

Everything here is pure and reentrant.  Values that can overflow in double
precision (rising factorials, level products at large order) have log-space
companions; callers combine logs and exponentiate once.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

from scipy.special import gammaln

from ._kernels import kummer_series
from .errors import DomainError, LandauCSError

#: Relative size of the first neglected term at which series summation stops.
SERIES_REL_TOL = 1e-16

#: Hard cap on series length; generous for arguments up to x ~ 50.
SERIES_MAX_TERMS = 10_000


def ln_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    return float(gammaln(x))


def pochhammer(gamma: float, n: int) -> float:
    """Rising factorial (gamma)_n = gamma (gamma+1) ... (gamma+n-1).

    The empty product (n = 0) is 1.  A zero factor yields an exact 0; callers
    that cannot accept a degenerate product must screen gamma upstream.
    """
    if n < 0:
        raise DomainError(f"pochhammer requires n >= 0, got {n}")
    out = 1.0
    for j in range(n):
        out *= gamma + j
    return out


def ln_pochhammer(gamma: float, n: int) -> float:
    """log (gamma)_n for gamma > 0, stable for large n."""
    if n < 0:
        raise DomainError(f"ln_pochhammer requires n >= 0, got {n}")
    if not gamma > 0:
        raise DomainError(f"ln_pochhammer requires gamma > 0, got {gamma!r}")
    if n == 0:
        return 0.0
    return float(gammaln(gamma + n) - gammaln(gamma))


def kummer_1f1_unit(gamma: float, x: float) -> float:
    """Confluent hypergeometric series with unit numerator parameter.

    Sums sum_{n>=0} x^n / (gamma)_n by forward recurrence, stopping when the
    next term falls below SERIES_REL_TOL times the partial sum.
    """
    if not gamma > 0:
        raise DomainError(f"kummer_1f1_unit requires gamma > 0, got {gamma!r}")
    if x < 0:
        raise DomainError(f"kummer_1f1_unit requires x >= 0, got {x!r}")
    if x == 0.0:
        return 1.0
    value, _, converged = kummer_series(gamma, x, SERIES_REL_TOL, SERIES_MAX_TERMS)
    if not converged:
        raise LandauCSError(
            f"series for 1F1(1;{gamma};{x}) did not converge in {SERIES_MAX_TERMS} terms"
        )
    return value


def generalized_factorial(factors: Sequence[float], k: int) -> float:
    """Level-product eps_k! = eps_k eps_{k-1} ... eps_1 over positive factors.

    ``factors[j]`` is the level-(j+1) factor; k = 0 returns the conventional
    empty product 1.
    """
    if k < 0:
        raise DomainError(f"generalized_factorial requires k >= 0, got {k}")
    if k > len(factors):
        raise DomainError(
            f"generalized_factorial needs {k} factors, got {len(factors)}"
        )
    out = 1.0
    for j in range(k):
        f = factors[j]
        if not f > 0:
            raise DomainError(f"factor {j + 1} is {f!r}, must be > 0")
        out *= f
    return out


def ln_generalized_factorial(factors: Sequence[float], k: int) -> float:
    """log of generalized_factorial, stable for long products."""
    if k < 0:
        raise DomainError(f"ln_generalized_factorial requires k >= 0, got {k}")
    if k > len(factors):
        raise DomainError(
            f"ln_generalized_factorial needs {k} factors, got {len(factors)}"
        )
    out = 0.0
    for j in range(k):
        f = factors[j]
        if not f > 0:
            raise DomainError(f"factor {j + 1} is {f!r}, must be > 0")
        out += math.log(f)
    return out
