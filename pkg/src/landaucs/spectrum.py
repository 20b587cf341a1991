"""Physical parameters, derived scales, level energies, and level products.

Two discretization regimes are supported for the level-shift sequence
``alpha_k``:

* ``SHIFTED_BOUNDED`` -- 0 <= alpha_k <= m*omega_c/lambda, alpha_k strictly
  decreasing; the induced ladder eps_k = n_ref*m*omega_c/lambda - alpha_k is
  strictly increasing and positive.
* ``NON_POSITIVE`` -- alpha_k <= 0 with eps_k = -alpha_k strictly increasing
  and positive from k = 1 on.

All energy formulas are scale-covariant; the CLI defaults to natural units
hbar = m = omega_c = lambda = 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrumError, DomainError, ValidationError
from .specfun import generalized_factorial, ln_generalized_factorial, ln_pochhammer, pochhammer


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, cyclotron frequency, field coupling, and action quantum."""

    m: float = 1.0
    omega_c: float = 1.0
    lam: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "omega_c", "lam", "hbar"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"PhysicalParams.{name} must be finite and > 0, got {v!r}")

    @property
    def alpha_bound(self) -> float:
        """Upper admissibility bound m*omega_c/lambda for the shifted regime."""
        return self.m * self.omega_c / self.lam


@dataclass(frozen=True)
class SpectralScales:
    """Energy scales kappa = hbar*omega_c, xi = hbar*lambda/m, ratio = xi/kappa."""

    kappa: float
    xi: float
    ratio: float

    @classmethod
    def from_params(cls, p: PhysicalParams) -> "SpectralScales":
        kappa = p.hbar * p.omega_c
        xi = p.hbar * p.lam / p.m
        return cls(kappa=kappa, xi=xi, ratio=xi / kappa)


class Regime(enum.Enum):
    SHIFTED_BOUNDED = "shifted_bounded"
    NON_POSITIVE = "non_positive"


@dataclass(frozen=True)
class AlphaSequence:
    """User-supplied discretization of the level shift.

    ``n_ref`` is the fixed oscillator index used to induce the eps ladder in
    the shifted regime; it is ignored in the non-positive regime.
    ``eps_limit`` is the limit of the eps ladder used for convergence radii:
    None means unbounded (+inf), the default for the non-positive regime.
    """

    values: tuple[float, ...]
    regime: Regime
    n_ref: int = 0
    eps_limit: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) == 0:
            raise DomainError("AlphaSequence needs at least one value")

    @classmethod
    def linear_shifted(cls, alpha0: float, step: float, count: int, n_ref: int,
                       params: PhysicalParams | None = None) -> "AlphaSequence":
        """alpha_k = alpha0 - k*step, the built-in bounded-regime generator."""
        vals = tuple(alpha0 - k * step for k in range(count))
        bound = (params or PhysicalParams()).alpha_bound
        limit = n_ref * bound - min(vals) if vals else None
        return cls(values=vals, regime=Regime.SHIFTED_BOUNDED, n_ref=n_ref, eps_limit=limit)

    @classmethod
    def linear_nonpositive(cls, step: float, count: int) -> "AlphaSequence":
        """alpha_k = -k*step; the eps ladder k*step is unbounded."""
        vals = tuple(-k * step for k in range(count))
        return cls(values=vals, regime=Regime.NON_POSITIVE, eps_limit=None)

    def epsilons(self, params: PhysicalParams) -> np.ndarray:
        """Full ladder eps_0, eps_1, ... induced by the regime."""
        a = np.asarray(self.values, dtype=np.float64)
        if self.regime is Regime.SHIFTED_BOUNDED:
            return self.n_ref * params.alpha_bound - a
        return -a


def energy(p: PhysicalParams, n: int, alpha: float) -> float:
    """Unshifted eigenenergy hbar*omega_c*(2n+1)/2 - hbar*lambda*alpha/m - lambda^2/(2m)."""
    return (
        0.5 * p.hbar * p.omega_c * (2 * n + 1)
        - p.hbar * p.lam * alpha / p.m
        - p.lam * p.lam / (2.0 * p.m)
    )


def shifted_energy(s: SpectralScales, n: int, alpha: float) -> float:
    """Shifted eigenenergy kappa*(n - ratio*alpha) = hbar*omega_c*n - (hbar*lambda/m)*alpha."""
    return s.kappa * (n - s.ratio * alpha)


def gamma_param(s: SpectralScales, alpha: float) -> float:
    """Spectral offset gamma = 1 - ratio*alpha; must stay positive."""
    g = 1.0 - s.ratio * alpha
    if not g > 0:
        raise DegenerateSpectrumError(
            f"gamma = 1 - (lambda/(m*omega_c))*alpha = {g!r} <= 0: degenerate spectrum"
        )
    return g


def rho(s: SpectralScales, alpha: float, n: int) -> float:
    """Product of the first n shifted energies: rho(n) = kappa^n (gamma)_n; rho(0) = 1."""
    g = gamma_param(s, alpha)
    return s.kappa**n * pochhammer(g, n)


def ln_rho(s: SpectralScales, alpha: float, n: int) -> float:
    g = gamma_param(s, alpha)
    return n * math.log(s.kappa) + ln_pochhammer(g, n)


def rho_bar(s: SpectralScales, eps_products: np.ndarray, k: int) -> float:
    """Ladder product rho_bar(k) = eps_k! * xi^k over factors eps_1..eps_k.

    ``eps_products[j]`` is the level-(j+1) ladder value, i.e. the full eps
    array with the k = 0 entry dropped.
    """
    return generalized_factorial(eps_products, k) * s.xi**k


def ln_rho_bar(s: SpectralScales, eps_products: np.ndarray, k: int) -> float:
    return ln_generalized_factorial(eps_products, k) + k * math.log(s.xi)


def rho1(s: SpectralScales, n: int) -> float:
    """Oscillator-ladder product rho1(n) = n! * kappa^n."""
    return math.factorial(n) * s.kappa**n


def ln_rho1(s: SpectralScales, n: int) -> float:
    return math.lgamma(n + 1) + n * math.log(s.kappa)


@dataclass(frozen=True)
class Violation:
    """One violated constraint, with the offending index where applicable."""

    field: str
    index: int | None
    message: str

    def __str__(self):
        where = f"[{self.index}]" if self.index is not None else ""
        return f"{self.field}{where}: {self.message}"


@dataclass(frozen=True)
class ValidatedBundle:
    """Parameters plus derived scales and the induced eps ladder.

    ``eps`` is the full ladder (index 0 included); ``eps_products`` drops the
    leading entry and feeds ladder products.  ``radius`` is the convergence
    radius for the radial label of ladder series (ratio test, xi * lim eps);
    ``radius_strict`` the sqrt(lim eps) variant kept behind a flag.
    """

    params: PhysicalParams
    scales: SpectralScales
    alpha: AlphaSequence
    eps: np.ndarray
    radius: float
    radius_strict: float

    @property
    def eps_products(self) -> np.ndarray:
        return self.eps[1:]

    def alpha_value(self, k: int) -> float:
        return self.alpha.values[k]


def check(p: PhysicalParams, a: AlphaSequence) -> list[Violation]:
    """Collect every violated structural constraint without raising."""
    out: list[Violation] = []
    eps = a.epsilons(p)
    vals = a.values
    if a.regime is Regime.SHIFTED_BOUNDED:
        bound = p.alpha_bound
        for k, v in enumerate(vals):
            if v < 0 or v > bound:
                out.append(Violation("alpha", k, f"{v!r} outside [0, {bound!r}]"))
        for k, e in enumerate(eps):
            if not e > 0:
                out.append(Violation("eps", k, f"{float(e)!r} not > 0 (raise n_ref or shrink alpha)"))
        if a.n_ref < 0:
            out.append(Violation("n_ref", None, f"{a.n_ref} must be >= 0"))
    else:
        for k, v in enumerate(vals):
            if v > 0:
                out.append(Violation("alpha", k, f"{v!r} not <= 0"))
        for k, e in enumerate(eps[1:], start=1):
            if not e > 0:
                out.append(Violation("eps", k, f"{float(e)!r} not > 0 for k >= 1"))
    for k in range(1, len(eps)):
        if not eps[k] > eps[k - 1]:
            out.append(Violation(
                "eps", k, f"{float(eps[k])!r} not > eps[{k - 1}] = {float(eps[k - 1])!r}"))
    return out


def validate(p: PhysicalParams, a: AlphaSequence) -> ValidatedBundle:
    """Check every invariant and return the derived-scale bundle, or raise.

    Raises ValidationError carrying the full violation list.
    """
    violations = check(p, a)
    if violations:
        raise ValidationError(violations)
    s = SpectralScales.from_params(p)
    eps = a.epsilons(p)
    if a.eps_limit is None:
        if a.regime is Regime.SHIFTED_BOUNDED:
            limit = float(eps[-1])
        else:
            limit = math.inf
    else:
        limit = float(a.eps_limit)
    radius = s.xi * limit
    radius_strict = math.sqrt(limit) if math.isfinite(limit) else math.inf
    return ValidatedBundle(
        params=p, scales=s, alpha=a, eps=eps, radius=radius, radius_strict=radius_strict
    )
