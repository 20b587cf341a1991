"""Quadrature measures, the moment-problem solver, and identity resolution.

The radial measure for the ladder label is synthesized from its power
moments with the classical Chebyshev recurrence-coefficient extraction
followed by the Golub-Welsch eigenvalue step (Gautschi, "Orthogonal
Polynomials: Computation and Approximation").  The moment map is badly
conditioned in double precision, so the extraction runs in extended
precision; the Jacobi-matrix eigenproblem that follows is well conditioned
and stays in float64.

Angular integrals of oscillator phase factors are applied as factor
matrices on the assembled frame operator: either exact equal-energy deltas
(the almost-periodic average, exact for any level spacing) or a uniform
trapezoid average over the angle (exact for integer level spacings once the
point count exceeds the spacing range).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from mpmath import mp
from scipy.linalg import eigh_tridiagonal
from scipy.special import roots_genlaguerre

from ._kernels import active_backend, frame_accumulate
from .errors import DomainError, LandauCSError, MomentProblemError, QuadratureOrderError
from .fockspace import BasisCutoffs, OperatorAccumulator
from .spectrum import PhysicalParams, SpectralScales, ValidatedBundle, gamma_param, shifted_energy
from .specfun import ln_gamma
from .states import (
    BiCoherentLabel,
    FamilyLabel,
    OneDOFLabel,
    ThreeDOFDependentLabel,
    ThreeDOFIndependentLabel,
    TwoDOFLabel,
    build_bicoherent,
    build_one_dof,
    build_three_dof_dependent,
    build_three_dof_independent,
    build_two_dof,
)

#: Above this node count the moment map is flagged as ill-conditioned.
CONDITIONING_NODE_LIMIT = 12

#: Working precision (decimal digits) for the moment-to-recurrence step.
MOMENT_DPS = 60


class ConditioningWarning(UserWarning):
    """Moment problem solved past the trusted conditioning range."""


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many nodes with positive weights on a half-line interval."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if nodes.ndim != 1 or weights.shape != nodes.shape:
            raise DomainError("nodes and weights must be matching 1-d arrays")
        if nodes.size and np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("weights must be strictly positive")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.nodes)

    def moments(self, count: int) -> np.ndarray:
        """First ``count`` power moments sum_i w_i x_i^k."""
        powers = self.nodes[None, :] ** np.arange(count)[:, None]
        return powers @ self.weights


@dataclass(frozen=True)
class AngularExact:
    """Equal-energy delta: the almost-periodic average of the phase factor."""

    atol: float = 1e-9


@dataclass(frozen=True)
class AngularTrapezoid:
    """Uniform average of the phase factor over ``points`` angle samples."""

    points: int = 128

    def __post_init__(self):
        if self.points < 1:
            raise DomainError("trapezoid rule needs at least one point")


AngularRule = Union[AngularExact, AngularTrapezoid]


@dataclass(frozen=True)
class QuadratureConfig:
    """Orders for the radial rules and the angular averaging rule."""

    j_order: int = 64
    jp_order: int = 64
    k_nodes: int = 10
    angular: AngularRule = field(default_factory=AngularExact)

    def __post_init__(self):
        for name in ("j_order", "jp_order", "k_nodes"):
            if getattr(self, name) < 1:
                raise DomainError(f"QuadratureConfig.{name} must be >= 1")


# ---------------------------------------------------------------------------
# moment-problem solver


def _chebyshev_recurrence(moments, n_nodes):
    """Recurrence coefficients (a, b) from 2*n_nodes power moments.

    Classical Chebyshev algorithm; runs at MOMENT_DPS digits because the
    map from moments to coefficients loses roughly a digit per node.
    """
    two_m = len(moments)
    with mp.workdps(MOMENT_DPS):
        sig_prev = [mp.mpf(0)] * two_m
        sig_curr = [mp.mpf(repr(float(v))) for v in moments]
        if sig_curr[0] <= 0:
            raise MomentProblemError("zeroth moment must be positive")
        a = [sig_curr[1] / sig_curr[0]]
        b = [sig_curr[0]]
        for j in range(1, n_nodes):
            sig_next = [mp.mpf(0)] * two_m
            for l in range(j, two_m - j):
                sig_next[l] = (
                    sig_curr[l + 1]
                    - a[j - 1] * sig_curr[l]
                    - b[j - 1] * sig_prev[l]
                )
            if sig_next[j] <= 0 or sig_curr[j - 1] <= 0:
                raise MomentProblemError(
                    f"moment sequence is not positive definite at level {j}"
                )
            a.append(sig_next[j + 1] / sig_next[j] - sig_curr[j] / sig_curr[j - 1])
            b.append(sig_next[j] / sig_curr[j - 1])
            sig_prev, sig_curr = sig_curr, sig_next
        return [float(v) for v in a], [float(v) for v in b]


def _check_hankel(moments):
    """Positive-definiteness of the two Hankel matrices (Stieltjes validity)."""
    m = len(moments) // 2
    with mp.workdps(MOMENT_DPS):
        vals = [mp.mpf(repr(float(v))) for v in moments]
        for shift, name in ((0, "Hankel"), (1, "shifted Hankel")):
            h = mp.matrix(m, m)
            for i in range(m):
                for j in range(m):
                    h[i, j] = vals[i + j + shift]
            try:
                mp.cholesky(h)
            except ValueError as exc:
                raise MomentProblemError(
                    f"{name} matrix is not positive definite: {exc}"
                ) from None


def gauss_from_moments(moments, scale: float | None = None) -> DiscreteMeasure:
    """M-node measure matching 2M power moments.

    ``scale`` rescales the variable (node x -> scale * u) before the Hankel
    assembly to keep the moment matrix near unit scale; pass the natural
    per-step growth of the moments (the ladder energy scale) when known.
    """
    moments = np.ascontiguousarray(moments, dtype=np.float64)
    if moments.ndim != 1 or len(moments) < 2 or len(moments) % 2 != 0:
        raise DomainError("need an even number (>= 2) of moments")
    if not np.all(np.isfinite(moments)):
        raise DomainError("moments must be finite")
    n_nodes = len(moments) // 2
    if scale is None or scale <= 0:
        scale = 1.0
    scaled = moments / scale ** np.arange(len(moments))
    _check_hankel(scaled)
    if n_nodes > CONDITIONING_NODE_LIMIT:
        warnings.warn(
            f"{n_nodes} nodes exceeds the trusted conditioning range "
            f"({CONDITIONING_NODE_LIMIT}); verify with moment_check",
            ConditioningWarning,
            stacklevel=2,
        )
    a, b = _chebyshev_recurrence(scaled, n_nodes)
    if any(v <= 0 for v in b):
        raise MomentProblemError("extracted recurrence has nonpositive beta")
    if n_nodes == 1:
        nodes = np.array([a[0]])
        weights = np.array([b[0]])
    else:
        off = np.sqrt(np.asarray(b[1:]))
        vals, vecs = eigh_tridiagonal(np.asarray(a), off)
        nodes = vals
        weights = b[0] * vecs[0, :] ** 2
    return DiscreteMeasure(nodes=nodes * scale, weights=weights)


def ladder_moments(eps: np.ndarray, xi: float, count: int) -> np.ndarray:
    """Target moments eps_k! xi^k for k = 0..count-1."""
    if count > len(eps):
        raise DomainError(f"need {count} ladder levels, have {len(eps)}")
    factors = np.concatenate(([1.0], eps[1:count] * xi))
    return np.cumprod(factors)


def ladder_measure(bundle: ValidatedBundle, n_nodes: int) -> DiscreteMeasure:
    """Radial measure for the ladder label, synthesized from its moments."""
    moments = ladder_moments(bundle.eps, bundle.scales.xi, 2 * n_nodes)
    return gauss_from_moments(moments, scale=bundle.scales.xi)


def moment_check(measure: DiscreteMeasure, eps: np.ndarray, xi: float, k_max: int) -> np.ndarray:
    """Relative errors of the measure's moments against eps_k! xi^k."""
    if k_max > 2 * len(measure) - 1:
        raise DomainError(
            f"k_max = {k_max} exceeds the 2M-1 = {2 * len(measure) - 1} matched moments"
        )
    target = ladder_moments(eps, xi, k_max + 1)
    got = measure.moments(k_max + 1)
    return np.abs(got - target) / target


# ---------------------------------------------------------------------------
# classical radial rules


def jtheta_quadrature(gamma: float, kappa: float, order: int) -> DiscreteMeasure:
    """Nodes/weights for integrals against J^(gamma-1) exp(-J/kappa) dJ.

    Exact for polynomial factors up to degree 2*order - 1; in particular it
    reproduces kappa^(n+gamma) Gamma(n+gamma) for the pure powers J^n.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma!r}")
    if not kappa > 0:
        raise DomainError(f"kappa must be > 0, got {kappa!r}")
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    u, w = roots_genlaguerre(order, gamma - 1.0)
    return DiscreteMeasure(nodes=kappa * u, weights=kappa**gamma * w)


def legendre_quadrature(a: float, b: float, order: int) -> DiscreteMeasure:
    """Gauss-Legendre rule mapped to [a, b]."""
    if not b > a:
        raise DomainError(f"need b > a, got [{a!r}, {b!r}]")
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return DiscreteMeasure(nodes=a + half * (x + 1.0), weights=half * w)


# ---------------------------------------------------------------------------
# angular averaging


def angular_factor(signed_energies: np.ndarray, rule: AngularRule) -> np.ndarray:
    """Matrix of angle averages of exp(i (e_a - e_b) phi) over the subspace.

    ``signed_energies`` carries the per-element phase energy with its sign
    as it appears in the coefficient (negative for forward phases).
    """
    e = np.asarray(signed_energies, dtype=np.float64)
    diff = e[:, None] - e[None, :]
    if isinstance(rule, AngularExact):
        return (np.abs(diff) <= rule.atol).astype(np.float64)
    phi = 2.0 * np.pi * np.arange(rule.points) / rule.points
    return np.exp(1j * diff[:, :, None] * phi).mean(axis=2)


# ---------------------------------------------------------------------------
# identity resolution


@dataclass(frozen=True)
class IdentityCheckReport:
    """Frame operator on a declared subspace and its deviation from identity."""

    family: str
    subspace: list
    matrix: np.ndarray
    max_offdiag: float
    max_diag_dev: float
    metadata: dict

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm > 1e-12 * (1.0 + np.max(np.abs(m), initial=0.0)):
            raise LandauCSError(f"frame operator not conjugate-symmetric: {herm:.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def deviation(self) -> float:
        return max(self.max_offdiag, self.max_diag_dev)

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "subspace": [list(map(int, t)) for t in self.subspace],
            "max_offdiag": self.max_offdiag,
            "max_diag_dev": self.max_diag_dev,
            "deviation": self.deviation,
            "metadata": self.metadata,
            "matrix": {
                "re": self.matrix.real.tolist(),
                "im": self.matrix.imag.tolist(),
            },
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        """Long-format dump: row, col, re, im."""
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "re", "im"])
            for i in range(self.matrix.shape[0]):
                for j in range(self.matrix.shape[1]):
                    v = self.matrix[i, j]
                    writer.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])


def _apply_masks(frame: np.ndarray, masks: list[np.ndarray]) -> np.ndarray:
    out = frame
    for m in masks:
        out = out * m
    return out


def _report(family, triples, frame, masks, metadata) -> IdentityCheckReport:
    matrix = _apply_masks(frame, masks)
    d = matrix.shape[0]
    off = matrix - np.diag(np.diag(matrix))
    max_off = float(np.max(np.abs(off))) if d > 1 else 0.0
    max_diag = float(np.max(np.abs(np.diag(matrix) - 1.0)))
    return IdentityCheckReport(
        family=family,
        subspace=triples,
        matrix=matrix,
        max_offdiag=max_off,
        max_diag_dev=max_diag,
        metadata=metadata,
    )


def _raw_rows(acc: OperatorAccumulator, results) -> np.ndarray:
    rows = np.empty((len(results), acc.dimension), dtype=np.complex128)
    for i, r in enumerate(results):
        rows[i] = acc.extract(r.state) * math.sqrt(r.raw_norm_sq)
    return rows


def resolve_identity(label: FamilyLabel, cutoffs: BasisCutoffs, quad: QuadratureConfig,
                     *, bundle: ValidatedBundle | None = None,
                     params: PhysicalParams | None = None,
                     alpha_k: float | None = None) -> IdentityCheckReport:
    """Assemble the weighted frame operator of a family and compare it to I.

    States are rebuilt at every radial quadrature node with zero phase
    labels; angular integrals enter as factor matrices (see angular_factor).
    The quadrature weights carry the measure densities of the family,
    including the normalization-constant factor, evaluated with the exact
    constants each node's builder used, so the analytic cancellations hold
    to rounding.
    """
    if isinstance(label, OneDOFLabel):
        return _resolve_one_dof(label, cutoffs, quad, bundle)
    if isinstance(label, TwoDOFLabel):
        if params is None:
            if bundle is None:
                raise DomainError("two-dof resolution needs params (or a bundle)")
            params = bundle.params
        if alpha_k is None:
            if bundle is None:
                raise DomainError("two-dof resolution needs alpha_k (or a bundle)")
            alpha_k = bundle.alpha_value(label.k)
        return _resolve_two_dof(label, cutoffs, quad, params, alpha_k)
    if isinstance(label, ThreeDOFIndependentLabel):
        return _resolve_three_independent(label, cutoffs, quad, bundle)
    if isinstance(label, ThreeDOFDependentLabel):
        return _resolve_three_dependent(label, cutoffs, quad, bundle)
    if isinstance(label, BiCoherentLabel):
        return _resolve_bicoherent(label, cutoffs, quad)
    raise DomainError(f"no identity resolution for label {type(label).__name__}")


def _base_metadata(quad: QuadratureConfig) -> dict:
    ang = quad.angular
    return {
        "backend": active_backend(),
        "j_order": quad.j_order,
        "jp_order": quad.jp_order,
        "k_nodes": quad.k_nodes,
        "angular": type(ang).__name__,
        "angular_points": getattr(ang, "points", None),
    }


def _resolve_one_dof(label, cutoffs, quad, bundle):
    if bundle is None:
        raise DomainError("one-dof resolution needs a validated bundle")
    s = bundle.scales
    if quad.k_nodes < cutoffs.k_max + 1:
        raise QuadratureOrderError(
            f"k_nodes = {quad.k_nodes} < subspace size {cutoffs.k_max + 1}"
        )
    measure = ladder_measure(bundle, quad.k_nodes)
    results = [
        build_one_dof(
            bundle,
            OneDOFLabel(K=float(K), delta=0.0, n=label.n, l=label.l),
            cutoffs=cutoffs,
            tail_tol=None,
        )
        for K in measure.nodes
    ]
    triples = [(label.n, label.l, k) for k in range(cutoffs.k_max + 1)]
    acc = OperatorAccumulator(cutoffs, triples)
    rows = _raw_rows(acc, results)
    weights = measure.weights * np.array([r.norms["K"] for r in results])
    frame = frame_accumulate(rows, weights)
    energies = np.array(
        [shifted_energy(s, label.n, bundle.alpha_value(k)) for k in range(cutoffs.k_max + 1)]
    )
    masks = [angular_factor(-energies / s.kappa, quad.angular)]
    meta = _base_metadata(quad)
    meta["k_moment_errors"] = moment_check(
        measure, bundle.eps, s.xi, min(2 * quad.k_nodes - 1, len(bundle.eps) - 1)
    ).tolist()
    return _report("one_dof", triples, frame, masks, meta)


def _resolve_two_dof(label, cutoffs, quad, params, alpha_k):
    s = SpectralScales.from_params(params)
    g = gamma_param(s, alpha_k)
    if quad.j_order < cutoffs.n_max + 1:
        raise QuadratureOrderError(
            f"j_order = {quad.j_order} < subspace size {cutoffs.n_max + 1}"
        )
    if quad.jp_order < label.l + 1:
        raise QuadratureOrderError(
            f"jp_order = {quad.jp_order} < fixed level + 1 = {label.l + 1}"
        )
    mj = jtheta_quadrature(g, s.kappa, quad.j_order)
    mjp = jtheta_quadrature(g, s.kappa, quad.jp_order)
    density_norm = s.kappa**g * math.exp(ln_gamma(g))

    triples = [(n, label.l, label.k) for n in range(cutoffs.n_max + 1)]
    acc = OperatorAccumulator(cutoffs, triples)
    rows = []
    weights = []
    for J, wj in zip(mj.nodes, mj.weights):
        for Jp, wjp in zip(mjp.nodes, mjp.weights):
            r = build_two_dof(
                params,
                alpha_k,
                TwoDOFLabel(J=float(J), Jp=float(Jp), l=label.l, k=label.k),
                cutoffs=cutoffs,
                tail_tol=None,
            )
            rows.append(acc.extract(r.state) * math.sqrt(r.raw_norm_sq))
            weights.append(
                wj * wjp * r.norms["J"] * r.norms["Jp"] / density_norm**2
            )
    frame = frame_accumulate(np.asarray(rows), np.asarray(weights))
    n = np.arange(cutoffs.n_max + 1)
    e_n = s.kappa * (n - s.ratio * alpha_k)
    masks = [angular_factor(-e_n / s.kappa, quad.angular)]
    meta = _base_metadata(quad)
    meta["gamma"] = g
    return _report("two_dof", triples, frame, masks, meta)


def _resolve_three_independent(label, cutoffs, quad, bundle):
    if bundle is None:
        raise DomainError("independent-family resolution needs a validated bundle")
    s = bundle.scales
    osc_max = cutoffs.n_max if label.fixed == "l" else cutoffs.l_max
    if quad.j_order < osc_max + 1:
        raise QuadratureOrderError(
            f"j_order = {quad.j_order} < subspace size {osc_max + 1}"
        )
    if quad.jp_order < label.index + 1:
        raise QuadratureOrderError(
            f"jp_order = {quad.jp_order} < fixed level + 1 = {label.index + 1}"
        )
    if quad.k_nodes < cutoffs.k_max + 1:
        raise QuadratureOrderError(
            f"k_nodes = {quad.k_nodes} < ladder subspace size {cutoffs.k_max + 1}"
        )
    mj = jtheta_quadrature(1.0, s.kappa, quad.j_order)
    mjp = jtheta_quadrature(1.0, s.kappa, quad.jp_order)
    mk = ladder_measure(bundle, quad.k_nodes)

    if label.fixed == "l":
        triples = [
            (n, label.index, k)
            for n in range(cutoffs.n_max + 1)
            for k in range(cutoffs.k_max + 1)
        ]
    else:
        triples = [
            (label.index, l, k)
            for l in range(cutoffs.l_max + 1)
            for k in range(cutoffs.k_max + 1)
        ]
    acc = OperatorAccumulator(cutoffs, triples)
    rows = []
    weights = []
    for J, wj in zip(mj.nodes, mj.weights):
        for Jp, wjp in zip(mjp.nodes, mjp.weights):
            for K, wk in zip(mk.nodes, mk.weights):
                radial = {"J": float(J), "Jp": float(Jp)} if label.fixed == "l" else {
                    "J": float(Jp), "Jp": float(J)}
                lab = ThreeDOFIndependentLabel(
                    K=float(K), fixed=label.fixed, index=label.index, **radial
                )
                r = build_three_dof_independent(
                    bundle, lab, cutoffs=cutoffs, tail_tol=None
                )
                rows.append(acc.extract(r.state) * math.sqrt(r.raw_norm_sq))
                w_osc = r.norms["J"] if label.fixed == "l" else r.norms["Jp"]
                w_fix = r.norms["Jp"] if label.fixed == "l" else r.norms["J"]
                weights.append(
                    wj * wjp * wk * w_osc * w_fix * r.norms["K"] / s.kappa**2
                )
    frame = frame_accumulate(np.asarray(rows), np.asarray(weights))
    osc = np.arange(osc_max + 1)
    eps_f = bundle.eps[: cutoffs.k_max + 1]
    sign = -1.0 if label.fixed == "l" else 1.0
    osc_energy = np.repeat(sign * osc, cutoffs.k_max + 1)
    lad_energy = np.tile(-s.ratio * eps_f, osc_max + 1)
    masks = [
        angular_factor(osc_energy, quad.angular),
        angular_factor(lad_energy, quad.angular),
    ]
    meta = _base_metadata(quad)
    meta["k_moment_errors"] = moment_check(
        mk, bundle.eps, s.xi, min(2 * quad.k_nodes - 1, len(bundle.eps) - 1)
    ).tolist()
    return _report("three_dof_independent", triples, frame, masks, meta)


def _resolve_three_dependent(label, cutoffs, quad, bundle):
    if bundle is None:
        raise DomainError("dependent-family resolution needs a validated bundle")
    s = bundle.scales
    if quad.j_order < cutoffs.n_max + 1:
        raise QuadratureOrderError(
            f"j_order = {quad.j_order} < subspace size {cutoffs.n_max + 1}"
        )
    if quad.jp_order < label.l + 1:
        raise QuadratureOrderError(
            f"jp_order = {quad.jp_order} < fixed level + 1 = {label.l + 1}"
        )
    if quad.k_nodes < cutoffs.k_max + 1:
        raise QuadratureOrderError(
            f"k_nodes = {quad.k_nodes} < ladder subspace size {cutoffs.k_max + 1}"
        )
    mj = jtheta_quadrature(1.0, s.kappa, quad.j_order)
    mjp = jtheta_quadrature(1.0, s.kappa, quad.jp_order)
    mk = ladder_measure(bundle, quad.k_nodes)

    k_count = cutoffs.k_max + 1
    triples = [
        (n, label.l, k) for n in range(cutoffs.n_max + 1) for k in range(k_count)
    ]
    acc = OperatorAccumulator(cutoffs, triples)
    gammas = np.array([gamma_param(s, a) for a in bundle.alpha.values[:k_count]])
    ln_gammas = np.array([ln_gamma(g) for g in gammas])
    poly_exact = bool(np.allclose(gammas - 1.0, np.round(gammas - 1.0), atol=1e-12))

    rows = []
    weights = []
    for J, wj in zip(mj.nodes, mj.weights):
        # per-level density ratio against the plain exp(-J/kappa) base rule
        h = np.exp((gammas - 1.0) * math.log(J) - gammas * math.log(s.kappa) - ln_gammas)
        for Jp, wjp in zip(mjp.nodes, mjp.weights):
            for K, wk in zip(mk.nodes, mk.weights):
                lab = ThreeDOFDependentLabel(
                    J=float(J), Jp=float(Jp), K=float(K), l=label.l
                )
                r = build_three_dof_dependent(
                    bundle, lab, cutoffs=cutoffs, tail_tol=None
                )
                vec = acc.extract(r.state) * math.sqrt(r.raw_norm_sq)
                mod = np.sqrt(np.tile(h * r.norms["J_per_k"][:k_count], cutoffs.n_max + 1))
                rows.append(vec * mod)
                weights.append(wj * wjp * wk * r.norms["KJ"] * r.norms["Jp"] / s.kappa)
    frame = frame_accumulate(np.asarray(rows), np.asarray(weights))

    n = np.arange(cutoffs.n_max + 1)
    eps_f = bundle.eps[:k_count]
    e_theta = -(np.repeat(n, k_count) + s.ratio * np.tile(eps_f, len(n)))
    e_thetap = label.l + s.ratio * np.tile(eps_f, len(n))
    e_delta = -s.ratio * np.tile(eps_f, len(n))
    masks = [
        angular_factor(e_theta, quad.angular),
        angular_factor(e_thetap, quad.angular),
        angular_factor(e_delta, quad.angular),
    ]
    meta = _base_metadata(quad)
    meta["polynomial_exact"] = poly_exact
    meta["k_moment_errors"] = moment_check(
        mk, bundle.eps, s.xi, min(2 * quad.k_nodes - 1, len(bundle.eps) - 1)
    ).tolist()
    return _report("three_dof_dependent", triples, frame, masks, meta)


def _resolve_bicoherent(label, cutoffs, quad):
    if label.k is None:
        raise DomainError("identity resolution runs on a fixed ladder fiber")
    if quad.j_order < cutoffs.n_max + 1:
        raise QuadratureOrderError(
            f"j_order = {quad.j_order} < subspace size {cutoffs.n_max + 1}"
        )
    if quad.jp_order < cutoffs.l_max + 1:
        raise QuadratureOrderError(
            f"jp_order = {quad.jp_order} < subspace size {cutoffs.l_max + 1}"
        )
    mj = jtheta_quadrature(1.0, 1.0, quad.j_order)
    mjp = jtheta_quadrature(1.0, 1.0, quad.jp_order)

    triples = [
        (n, l, label.k)
        for n in range(cutoffs.n_max + 1)
        for l in range(cutoffs.l_max + 1)
    ]
    acc = OperatorAccumulator(cutoffs, triples)
    rows = []
    weights = []
    for J, wj in zip(mj.nodes, mj.weights):
        for Jp, wjp in zip(mjp.nodes, mjp.weights):
            lab = BiCoherentLabel(
                z=complex(math.sqrt(J)), zp=complex(math.sqrt(Jp)), k=label.k
            )
            r = build_bicoherent(lab, cutoffs=cutoffs, tail_tol=None)
            rows.append(acc.extract(r.state) * math.sqrt(r.raw_norm_sq))
            weights.append(wj * wjp * r.norms["J"] * r.norms["Jp"])
    frame = frame_accumulate(np.asarray(rows), np.asarray(weights))
    n = np.arange(cutoffs.n_max + 1)
    l = np.arange(cutoffs.l_max + 1)
    e_theta = -np.repeat(n, len(l))
    e_thetap = np.tile(l.astype(np.float64), len(n))
    masks = [
        angular_factor(e_theta, quad.angular),
        angular_factor(e_thetap, quad.angular),
    ]
    return _report("bicoherent", triples, frame, masks, _base_metadata(quad))
