"""Builders for every coherent-state family, over truncated bases.

Each builder evaluates the family's coefficient formula with its analytic
normalization constants, measures the truncated squared norm, and returns a
unit-normalized state together with that raw squared norm and the constants
actually used.  Keeping the raw norm exact lets the identity-resolution
machinery undo the renormalization without any loss.

Families whose analytic constants normalize the whole vector family rather
than a single fiber (the fixed-level families below) come out with raw norm
equal to the fiber weight; summing it over the fixed level recovers 1, which
the test suite checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ._kernels import cdot, kahan_sum
from .errors import ConvergenceDomainError, DomainError, TailBoundError
from .fockspace import BasisCutoffs, TruncatedState, inner_product
from .spectrum import (
    PhysicalParams,
    Regime,
    SpectralScales,
    ValidatedBundle,
    gamma_param,
    shifted_energy,
)
from .specfun import kummer_1f1_unit

TAU = 2.0 * math.pi


def _check_nonneg(name: str, v: float) -> float:
    if not (math.isfinite(v) and v >= 0):
        raise DomainError(f"{name} must be finite and >= 0, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class OneDOFLabel:
    """Ladder-series state at fixed oscillator indices (n, l)."""

    K: float
    delta: float = 0.0
    n: int = 0
    l: int = 0

    def __post_init__(self):
        _check_nonneg("K", self.K)


@dataclass(frozen=True)
class TwoDOFLabel:
    """Oscillator-series state at a fixed level shift, fixed (l, k)."""

    J: float
    theta: float = 0.0
    Jp: float = 0.0
    thetap: float = 0.0
    l: int = 0
    k: int = 0

    def __post_init__(self):
        _check_nonneg("J", self.J)
        _check_nonneg("Jp", self.Jp)


@dataclass(frozen=True)
class ThreeDOFIndependentLabel:
    """Product family over one oscillator axis and the ladder axis.

    ``fixed`` selects which oscillator index is held ("l" or "n") at value
    ``index``; the sum then runs over the other oscillator index and k.
    """

    J: float
    theta: float = 0.0
    Jp: float = 0.0
    thetap: float = 0.0
    K: float = 0.0
    delta: float = 0.0
    fixed: str = "l"
    index: int = 0

    def __post_init__(self):
        _check_nonneg("J", self.J)
        _check_nonneg("Jp", self.Jp)
        _check_nonneg("K", self.K)
        if self.fixed not in ("l", "n"):
            raise DomainError(f"fixed must be 'l' or 'n', got {self.fixed!r}")


@dataclass(frozen=True)
class ThreeDOFDependentLabel:
    """Coupled family: the oscillator sum depends on the ladder index."""

    J: float
    theta: float = 0.0
    Jp: float = 0.0
    thetap: float = 0.0
    K: float = 0.0
    delta: float = 0.0
    l: int = 0

    def __post_init__(self):
        _check_nonneg("J", self.J)
        _check_nonneg("Jp", self.Jp)
        _check_nonneg("K", self.K)


@dataclass(frozen=True)
class BiCoherentLabel:
    """Doubly-labeled Gaussian family on the (n, l) grid.

    ``k`` picks the ladder fiber; None spreads the state uniformly over all
    fibers up to the cutoff (so the fiber norms sum to one).
    """

    z: complex
    zp: complex
    k: Optional[int] = 0

    def __post_init__(self):
        for name in ("z", "zp"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise DomainError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_angles(cls, J: float, theta: float, Jp: float, thetap: float,
                    k: Optional[int] = 0) -> "BiCoherentLabel":
        _check_nonneg("J", J)
        _check_nonneg("Jp", Jp)
        return cls(
            z=math.sqrt(J) * complex(math.cos(theta), -math.sin(theta)),
            zp=math.sqrt(Jp) * complex(math.cos(thetap), -math.sin(thetap)),
            k=k,
        )

    @property
    def J(self) -> float:
        return abs(self.z) ** 2

    @property
    def Jp(self) -> float:
        return abs(self.zp) ** 2


FamilyLabel = Union[
    OneDOFLabel, TwoDOFLabel, ThreeDOFIndependentLabel, ThreeDOFDependentLabel, BiCoherentLabel
]


@dataclass(frozen=True)
class BuildResult:
    """A normalized state plus the diagnostics the verifiers need."""

    state: TruncatedState
    raw_norm_sq: float
    norms: dict
    label: FamilyLabel
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# series helpers (all series here have positive terms)


def _ln_terms_ladder(K: float, xi: float, eps: np.ndarray, count: int) -> np.ndarray:
    """ln of t_k = (K/xi)^k / eps_k!, k = 0..count-1; requires len(eps) >= count."""
    k = np.arange(count)
    if K == 0.0:
        out = np.full(count, -np.inf)
        out[0] = 0.0
        return out
    ln_fact = np.concatenate(([0.0], np.cumsum(np.log(eps[1:count]))))
    return k * math.log(K / xi) - ln_fact


def _ln_terms_osc(x: float, kappa: float, gamma: float, count: int) -> np.ndarray:
    """ln of t_n = (x/kappa)^n / (gamma)_n, n = 0..count-1."""
    n = np.arange(count)
    if x == 0.0:
        out = np.full(count, -np.inf)
        out[0] = 0.0
        return out
    ln_poch = np.concatenate(([0.0], np.cumsum(np.log(gamma + np.arange(count - 1)))))
    return n * math.log(x / kappa) - ln_poch


def _series_sum(ln_terms: np.ndarray) -> tuple[float, int, bool]:
    """Stable sum of exp(ln_terms) with the standard next-term stop rule.

    Returns (sum, terms_used, converged); converged means the first unused
    term (or the lattermost ratio) certifies a relative tail below 1e-15.
    """
    m = ln_terms.max()
    terms = np.exp(ln_terms - m)
    total = 0.0
    used = len(terms)
    for i, t in enumerate(terms):
        total += t
        if t < 1e-16 * total and i + 1 < len(terms) and terms[i + 1] <= t:
            used = i + 1
            break
    s = math.exp(m) * kahan_sum(terms[:used])
    converged = used < len(terms) or (len(terms) >= 2 and terms[-1] < 1e-15 * total)
    return s, used, converged


def _tail_after(ln_terms: np.ndarray, cut: int, norm: float) -> float:
    """Geometric-majorant bound on sum_{j>cut} t_j / norm.

    Uses the first neglected term and the next term ratio; inf when the
    ratio is not (certifiably) below one.
    """
    if cut + 1 >= len(ln_terms):
        return math.inf
    t1 = math.exp(ln_terms[cut + 1])
    if t1 == 0.0:
        return 0.0
    if cut + 2 < len(ln_terms):
        r = math.exp(ln_terms[cut + 2] - ln_terms[cut + 1])
    else:
        return math.inf
    if r >= 1.0:
        return math.inf
    return t1 / (1.0 - r) / norm


def _auto_cut(ln_terms: np.ndarray, norm: float, budget: float) -> int:
    """Smallest cut with tail bound <= budget, else raise."""
    for cut in range(len(ln_terms) - 2):
        if _tail_after(ln_terms, cut, norm) <= budget:
            return cut
    raise TailBoundError(
        f"cannot certify tail <= {budget:g} with {len(ln_terms)} available terms"
    )


def _osc_count_for(x: float, kappa: float, tol_scale: float = 1.0) -> int:
    """Enough oscillator-series terms for tails far below 1e-15."""
    mean = x / kappa
    return int(mean + 14.0 * math.sqrt(mean + 40.0) + 40.0 * tol_scale)


def _powers_over_sqrt_factorial(w: complex, count: int) -> np.ndarray:
    """w^j / sqrt(j!) for j = 0..count-1, stable in log space."""
    j = np.arange(count)
    if w == 0:
        out = np.zeros(count, dtype=np.complex128)
        out[0] = 1.0
        return out
    ln_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1.0, count)))))
    mods = np.exp(j * math.log(abs(w)) - 0.5 * ln_fact)
    return mods * np.exp(1j * j * np.angle(w))


def _resolve_cut(ln_terms, norm, budget, explicit, axis):
    """Pick (cut, tail) honoring an explicit cutoff or auto-selecting one."""
    if explicit is None:
        if budget is None:
            raise DomainError(f"axis {axis}: auto cutoffs need a tail tolerance")
        cut = _auto_cut(ln_terms, norm, budget)
    else:
        cut = int(explicit)
        if cut + 1 > len(ln_terms):
            raise TailBoundError(
                f"axis {axis}: cutoff {cut} exceeds the {len(ln_terms)} available terms"
            )
    tail = _tail_after(ln_terms, cut, norm)
    if budget is not None and not tail <= budget:
        raise TailBoundError(
            f"axis {axis}: tail bound {tail:g} exceeds tolerance {budget:g} at cutoff {cut}"
        )
    return cut, tail


def _finish(raw: np.ndarray, cutoffs: BasisCutoffs, tail: float, norms: dict,
            label, meta: dict) -> BuildResult:
    flat = raw.reshape(-1)
    nrm2 = cdot(flat, flat).real
    if nrm2 <= 0.0:
        raise DomainError("state has zero norm; label degenerates on this fiber")
    coeffs = raw / math.sqrt(nrm2)
    state = TruncatedState(coeffs=coeffs, cutoffs=cutoffs, tail_bound=tail)
    return BuildResult(state=state, raw_norm_sq=nrm2, norms=norms, label=label, meta=meta)


# ---------------------------------------------------------------------------
# norm constants


def ladder_norm_constant(bundle: ValidatedBundle, K: float) -> tuple[float, int, bool]:
    """N(K) = sum_k K^k / (eps_k! xi^k) over the available ladder."""
    _check_nonneg("K", K)
    s = bundle.scales
    ln_t = _ln_terms_ladder(K, s.xi, bundle.eps, len(bundle.eps))
    return _series_sum(ln_t)


def dependent_norm_constant(bundle: ValidatedBundle, K: float, J: float, Jp: float):
    """N(K, J): ladder series damped by the per-level oscillator constants.

    Returns (value, per-level 1F1 array, per-level gamma array, converged).
    Each ladder term is divided by exp(Jp/kappa) and by the level's own
    1F1(1; gamma_k; J/kappa), so the sum is bounded by the plain ladder
    series term by term.
    """
    s = bundle.scales
    count = len(bundle.eps)
    gammas = np.array([gamma_param(s, a) for a in bundle.alpha.values])
    one_f1 = np.array([kummer_1f1_unit(g, J / s.kappa) for g in gammas])
    ln_t = _ln_terms_ladder(K, s.xi, bundle.eps, count)
    ln_t = ln_t - (Jp / s.kappa) - np.log(one_f1)
    value, _, converged = _series_sum(ln_t)
    return value, one_f1, gammas, converged


# ---------------------------------------------------------------------------
# builders


def build_one_dof(bundle: ValidatedBundle, label: OneDOFLabel,
                  cutoffs: BasisCutoffs | None = None,
                  tail_tol: float | None = 1e-12,
                  strict_radius: bool = False) -> BuildResult:
    """Ladder-series state on the fixed (n, l) fiber.

    Coefficients K^{k/2} e^{-i E'(n, alpha_k) delta} / sqrt(eps_k! xi^k),
    normalized; K must lie inside the convergence radius.
    """
    s = bundle.scales
    radius = bundle.radius_strict if strict_radius else bundle.radius
    if not label.K < radius:
        raise ConvergenceDomainError(
            f"K = {label.K!r} outside convergence domain [0, {radius!r})"
        )
    ln_t = _ln_terms_ladder(label.K, s.xi, bundle.eps, len(bundle.eps))
    norm_K, terms_K, converged = _series_sum(ln_t)
    k_cut, tail = _resolve_cut(
        ln_t, norm_K, tail_tol, cutoffs.k_max if cutoffs else None, "k"
    )
    if cutoffs is None:
        cutoffs = BasisCutoffs(n_max=label.n, l_max=label.l, k_max=k_cut)

    k = np.arange(cutoffs.k_max + 1)
    energies = np.array([shifted_energy(s, label.n, a) for a in bundle.alpha.values[: len(k)]])
    amps = np.exp(0.5 * ln_t[: len(k)]) / math.sqrt(norm_K)
    fiber = amps * np.exp(-1j * energies * label.delta)

    raw = np.zeros(cutoffs.shape, dtype=np.complex128)
    raw[label.n, label.l, :] = fiber
    meta = {"family": "one_dof", "k_terms": terms_K, "norm_converged": converged,
            "tails": {"k": tail}}
    return _finish(raw, cutoffs, tail, {"K": norm_K}, label, meta)


def build_two_dof(params: PhysicalParams, alpha_k: float, label: TwoDOFLabel,
                  cutoffs: BasisCutoffs | None = None,
                  tail_tol: float | None = 1e-12) -> BuildResult:
    """Oscillator-series state at fixed level shift, on the fixed (l, k) fiber.

    Coefficients J^{n/2} e^{-i E'(n) theta} / sqrt(rho(n) rho(l)) carry the
    global factor Jp^{l/2} e^{+i E'(l) thetap} and the analytic constants
    1F1(1; gamma; J/kappa) per radial label.  The raw fiber weight is
    Jp^l / (rho(l) N(Jp)); summed over l it recovers 1.
    """
    s = SpectralScales.from_params(params)
    g = gamma_param(s, alpha_k)
    if label.Jp == 0.0 and label.l > 0:
        raise DomainError("Jp = 0 with l > 0 puts no weight on this fiber")

    norm_J = kummer_1f1_unit(g, label.J / s.kappa)
    norm_Jp = kummer_1f1_unit(g, label.Jp / s.kappa)

    count = cutoffs.n_max + 3 if cutoffs is not None else _osc_count_for(label.J, s.kappa)
    ln_t = _ln_terms_osc(label.J, s.kappa, g, count)
    n_cut, tail = _resolve_cut(
        ln_t, norm_J, tail_tol, cutoffs.n_max if cutoffs else None, "n"
    )
    if cutoffs is None:
        cutoffs = BasisCutoffs(n_max=n_cut, l_max=label.l, k_max=label.k)

    n = np.arange(cutoffs.n_max + 1)
    e_n = s.kappa * (n - s.ratio * alpha_k)
    e_l = shifted_energy(s, label.l, alpha_k)
    # ln of the global fiber factor Jp^l / rho(l), combined at half power
    ln_fiber = _ln_terms_osc(label.Jp, s.kappa, g, label.l + 1)[label.l]
    ln_amp = 0.5 * (ln_t[: len(n)] + ln_fiber) - 0.5 * (math.log(norm_J) + math.log(norm_Jp))
    phases = np.exp(-1j * e_n * label.theta) * np.exp(1j * e_l * label.thetap)
    fiber = np.exp(ln_amp) * phases

    raw = np.zeros(cutoffs.shape, dtype=np.complex128)
    raw[:, label.l, label.k] = fiber
    meta = {"family": "two_dof", "gamma": g, "alpha_k": alpha_k, "tails": {"n": tail}}
    return _finish(raw, cutoffs, tail, {"J": norm_J, "Jp": norm_Jp}, label, meta)


def build_three_dof_independent(bundle: ValidatedBundle, label: ThreeDOFIndependentLabel,
                                cutoffs: BasisCutoffs | None = None,
                                tail_tol: float | None = 1e-12,
                                strict_radius: bool = False) -> BuildResult:
    """Product of an oscillator series and a ladder series at one fixed level.

    Requires the non-positive shift regime, where the oscillator weights
    reduce to n! kappa^n and the oscillator constants to exp(J/kappa).
    """
    if bundle.alpha.regime is not Regime.NON_POSITIVE:
        raise DomainError("independent product family needs the non-positive regime")
    s = bundle.scales
    radius = bundle.radius_strict if strict_radius else bundle.radius
    if not label.K < radius:
        raise ConvergenceDomainError(
            f"K = {label.K!r} outside convergence domain [0, {radius!r})"
        )

    norm_J = math.exp(label.J / s.kappa)
    norm_Jp = math.exp(label.Jp / s.kappa)
    ln_lad = _ln_terms_ladder(label.K, s.xi, bundle.eps, len(bundle.eps))
    norm_K, terms_K, conv_K = _series_sum(ln_lad)

    budget = None if tail_tol is None else 0.5 * tail_tol
    osc_axis = "n" if label.fixed == "l" else "l"
    osc_x = label.J if label.fixed == "l" else label.Jp
    explicit_osc = None
    explicit_k = None
    if cutoffs is not None:
        explicit_osc = cutoffs.n_max if label.fixed == "l" else cutoffs.l_max
        explicit_k = cutoffs.k_max
        count = explicit_osc + 3
    else:
        count = _osc_count_for(osc_x, s.kappa)
    ln_osc = _ln_terms_osc(osc_x, s.kappa, 1.0, count)
    osc_norm = math.exp(osc_x / s.kappa)
    osc_cut, tail_osc = _resolve_cut(ln_osc, osc_norm, budget, explicit_osc, osc_axis)
    k_cut, tail_k = _resolve_cut(ln_lad, norm_K, budget, explicit_k, "k")
    tail = tail_osc + tail_k

    fixed_x = label.Jp if label.fixed == "l" else label.J
    ln_fixed = _ln_terms_osc(fixed_x, s.kappa, 1.0, label.index + 1)[label.index]
    if math.isinf(ln_fixed):
        raise DomainError("zero radial label with a nonzero fixed level: empty fiber")

    if cutoffs is None:
        if label.fixed == "l":
            cutoffs = BasisCutoffs(n_max=osc_cut, l_max=label.index, k_max=k_cut)
        else:
            cutoffs = BasisCutoffs(n_max=label.index, l_max=osc_cut, k_max=k_cut)

    k = np.arange(cutoffs.k_max + 1)
    eps_f = bundle.eps[: len(k)]
    lad_amp = np.exp(0.5 * ln_lad[: len(k)]) / math.sqrt(norm_K)
    lad = lad_amp * np.exp(-1j * s.xi * eps_f * label.delta)

    osc_n = np.arange((cutoffs.n_max if label.fixed == "l" else cutoffs.l_max) + 1)
    osc_amp = np.exp(0.5 * ln_osc[: len(osc_n)]) / math.sqrt(norm_J if label.fixed == "l" else norm_Jp)
    fixed_amp = math.exp(0.5 * ln_fixed) / math.sqrt(norm_Jp if label.fixed == "l" else norm_J)

    raw = np.zeros(cutoffs.shape, dtype=np.complex128)
    if label.fixed == "l":
        osc = osc_amp * np.exp(-1j * s.kappa * osc_n * label.theta)
        fixed_phase = np.exp(1j * s.kappa * label.index * label.thetap)
        raw[:, label.index, :] = np.outer(osc, lad) * (fixed_amp * fixed_phase)
    else:
        osc = osc_amp * np.exp(1j * s.kappa * osc_n * label.thetap)
        fixed_phase = np.exp(-1j * s.kappa * label.index * label.theta)
        raw[label.index, :, :] = np.outer(osc, lad) * (fixed_amp * fixed_phase)

    meta = {"family": "three_dof_independent", "fixed": label.fixed,
            "k_terms": terms_K, "norm_converged": conv_K,
            "tails": {osc_axis: tail_osc, "k": tail_k}}
    return _finish(raw, cutoffs, tail, {"J": norm_J, "Jp": norm_Jp, "K": norm_K}, label, meta)


def build_three_dof_dependent(bundle: ValidatedBundle, label: ThreeDOFDependentLabel,
                              cutoffs: BasisCutoffs | None = None,
                              tail_tol: float | None = 1e-12,
                              strict_radius: bool = False) -> BuildResult:
    """Coupled family: each ladder level carries its own oscillator series.

    Per level k the oscillator weights are kappa^n (gamma_k)_n with
    gamma_k = 1 + ratio*eps_k, and the ladder term is damped by that level's
    1F1 constant; the overall constant is the damped ladder sum N(K, J).
    """
    if bundle.alpha.regime is not Regime.NON_POSITIVE:
        raise DomainError("dependent family needs the non-positive regime")
    s = bundle.scales
    radius = bundle.radius_strict if strict_radius else bundle.radius
    if not label.K < radius:
        raise ConvergenceDomainError(
            f"K = {label.K!r} outside convergence domain [0, {radius!r})"
        )

    norm_Jp = math.exp(label.Jp / s.kappa)
    norm_KJ, one_f1, gammas, conv = dependent_norm_constant(
        bundle, label.K, label.J, label.Jp
    )
    ln_lad = _ln_terms_ladder(label.K, s.xi, bundle.eps, len(bundle.eps))
    ln_lad_damped = ln_lad - (label.Jp / s.kappa) - np.log(one_f1)

    budget = None if tail_tol is None else 0.5 * tail_tol
    explicit_n = cutoffs.n_max if cutoffs is not None else None
    explicit_k = cutoffs.k_max if cutoffs is not None else None
    # worst oscillator tail over levels is at the smallest gamma (level 0)
    count = explicit_n + 3 if explicit_n is not None else _osc_count_for(label.J, s.kappa)
    ln_osc_worst = _ln_terms_osc(label.J, s.kappa, gammas[0], count)
    n_cut, tail_n = _resolve_cut(ln_osc_worst, one_f1[0], budget, explicit_n, "n")
    k_cut, tail_k = _resolve_cut(ln_lad_damped, norm_KJ, budget, explicit_k, "k")
    tail = tail_n + tail_k

    if label.Jp == 0.0 and label.l > 0:
        raise DomainError("Jp = 0 with l > 0 puts no weight on this fiber")
    ln_fiber = _ln_terms_osc(label.Jp, s.kappa, 1.0, label.l + 1)[label.l]

    if cutoffs is None:
        cutoffs = BasisCutoffs(n_max=n_cut, l_max=label.l, k_max=k_cut)

    n = np.arange(cutoffs.n_max + 1)
    k = np.arange(cutoffs.k_max + 1)
    eps_f = bundle.eps[: len(k)]
    block = np.zeros((len(n), len(k)), dtype=np.complex128)
    for kk in k:
        g = gammas[kk]
        ln_osc = _ln_terms_osc(label.J, s.kappa, g, len(n))
        e_n = s.kappa * n + s.xi * eps_f[kk]
        e_l = s.kappa * label.l + s.xi * eps_f[kk]
        ln_amp = 0.5 * (
            ln_osc
            + ln_lad[kk]
            + ln_fiber
        ) - 0.5 * (
            math.log(one_f1[kk]) + math.log(norm_Jp) + math.log(norm_KJ)
        )
        phases = (
            np.exp(-1j * e_n * label.theta)
            * np.exp(1j * e_l * label.thetap)
            * np.exp(-1j * s.xi * eps_f[kk] * label.delta)
        )
        block[:, kk] = np.exp(ln_amp) * phases

    raw = np.zeros(cutoffs.shape, dtype=np.complex128)
    raw[:, label.l, :] = block
    meta = {"family": "three_dof_dependent", "norm_converged": conv,
            "tails": {"n": tail_n, "k": tail_k}}
    norms = {"Jp": norm_Jp, "KJ": norm_KJ, "J_per_k": one_f1, "gammas": gammas}
    return _finish(raw, cutoffs, tail, norms, label, meta)


def build_bicoherent(label: BiCoherentLabel,
                     cutoffs: BasisCutoffs | None = None,
                     tail_tol: float | None = 1e-12) -> BuildResult:
    """Gaussian doubly-labeled state on the (n, l) grid.

    Coefficients z^n conj(zp)^l / sqrt(n! l!) with the Gaussian prefactor;
    exactly normalized analytically, so the raw norm is 1 minus the tail.
    """
    J = label.J
    Jp = label.Jp
    budget = None if tail_tol is None else 0.5 * tail_tol
    explicit_n = explicit_l = None
    if cutoffs is not None:
        explicit_n, explicit_l = cutoffs.n_max, cutoffs.l_max
        count_n, count_l = explicit_n + 3, explicit_l + 3
    else:
        count_n = _osc_count_for(J, 1.0)
        count_l = _osc_count_for(Jp, 1.0)
    ln_tn = _ln_terms_osc(J, 1.0, 1.0, count_n)
    ln_tl = _ln_terms_osc(Jp, 1.0, 1.0, count_l)
    n_cut, tail_n = _resolve_cut(ln_tn, math.exp(J), budget, explicit_n, "n")
    l_cut, tail_l = _resolve_cut(ln_tl, math.exp(Jp), budget, explicit_l, "l")
    tail = tail_n + tail_l

    if cutoffs is None:
        k_top = 0 if label.k is None else label.k
        cutoffs = BasisCutoffs(n_max=n_cut, l_max=l_cut, k_max=k_top)
    if label.k is not None and label.k > cutoffs.k_max:
        raise DomainError(f"fiber k = {label.k} exceeds k_max = {cutoffs.k_max}")

    col = _powers_over_sqrt_factorial(label.z, cutoffs.n_max + 1)
    row = _powers_over_sqrt_factorial(np.conjugate(label.zp), cutoffs.l_max + 1)
    grid = math.exp(-0.5 * (J + Jp)) * np.outer(col, row)

    raw = np.zeros(cutoffs.shape, dtype=np.complex128)
    if label.k is None:
        raw[:, :, :] = grid[:, :, None] / math.sqrt(cutoffs.k_max + 1)
    else:
        raw[:, :, label.k] = grid
    meta = {"family": "bicoherent", "tails": {"n": tail_n, "l": tail_l}}
    return _finish(raw, cutoffs, tail, {"J": math.exp(J), "Jp": math.exp(Jp)}, label, meta)


def build(label: FamilyLabel, *, bundle: ValidatedBundle | None = None,
          params: PhysicalParams | None = None, alpha_k: float | None = None,
          cutoffs: BasisCutoffs | None = None, tail_tol: float | None = 1e-12,
          strict_radius: bool = False) -> BuildResult:
    """Dispatch to the family builder selected by the label type."""
    if isinstance(label, OneDOFLabel):
        if bundle is None:
            raise DomainError("one-dof states need a validated bundle")
        return build_one_dof(bundle, label, cutoffs=cutoffs, tail_tol=tail_tol,
                             strict_radius=strict_radius)
    if isinstance(label, TwoDOFLabel):
        if params is None:
            if bundle is None:
                raise DomainError("two-dof states need params (or a bundle)")
            params = bundle.params
        if alpha_k is None:
            if bundle is None:
                raise DomainError("two-dof states need alpha_k (or a bundle)")
            alpha_k = bundle.alpha_value(label.k)
        return build_two_dof(params, alpha_k, label, cutoffs=cutoffs, tail_tol=tail_tol)
    if isinstance(label, ThreeDOFIndependentLabel):
        if bundle is None:
            raise DomainError("independent product states need a validated bundle")
        return build_three_dof_independent(bundle, label, cutoffs=cutoffs,
                                           tail_tol=tail_tol, strict_radius=strict_radius)
    if isinstance(label, ThreeDOFDependentLabel):
        if bundle is None:
            raise DomainError("dependent states need a validated bundle")
        return build_three_dof_dependent(bundle, label, cutoffs=cutoffs,
                                         tail_tol=tail_tol, strict_radius=strict_radius)
    if isinstance(label, BiCoherentLabel):
        return build_bicoherent(label, cutoffs=cutoffs, tail_tol=tail_tol)
    raise DomainError(f"no builder for label {type(label).__name__}")


def overlap(a: BuildResult | TruncatedState, b: BuildResult | TruncatedState) -> complex:
    """Inner product of two built states sharing a basis."""
    sa = a.state if isinstance(a, BuildResult) else a
    sb = b.state if isinstance(b, BuildResult) else b
    return inner_product(sa, sb)
