"""Truncated triple-indexed basis, coefficient tensors, and inner products.

Coefficient tensors are laid out row-major over (n, l, k) with k fastest,
matching the innermost ladder sums of every state family.  All reductions
use the compensated kernels so results are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import cdot
from .errors import CutoffMismatchError, DomainError, SubspaceMismatchError

#: Default upper bound on total tensor size (n+1)(l+1)(k+1).
DEFAULT_DIMENSION_CAP = 2_000_000


@dataclass(frozen=True)
class BasisCutoffs:
    """Truncation indices for the three basis directions."""

    n_max: int
    l_max: int
    k_max: int
    cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        for name in ("n_max", "l_max", "k_max"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 0):
                raise DomainError(f"BasisCutoffs.{name} must be an integer >= 0, got {v!r}")
        if self.dimension > self.cap:
            raise DomainError(
                f"total dimension {self.dimension} exceeds cap {self.cap}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_max + 1, self.l_max + 1, self.k_max + 1)

    @property
    def dimension(self) -> int:
        return (self.n_max + 1) * (self.l_max + 1) * (self.k_max + 1)

    def same_shape(self, other: "BasisCutoffs") -> bool:
        return self.shape == other.shape


@dataclass(frozen=True)
class TruncatedState:
    """Complex coefficient tensor over (n, l, k) plus neglected-mass bound.

    ``tail_bound`` is an upper bound on the squared-norm mass of the terms
    dropped by the truncation, so a normalized state satisfies
    ||coeffs||^2 + tail_bound ~ 1.
    """

    coeffs: np.ndarray
    cutoffs: BasisCutoffs
    tail_bound: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.cutoffs.shape:
            raise DomainError(
                f"coefficient shape {c.shape} does not match cutoffs {self.cutoffs.shape}"
            )
        if not np.all(np.isfinite(c.view(np.float64))):
            raise DomainError("coefficients must be finite")
        if not (self.tail_bound >= 0):
            raise DomainError(f"tail_bound must be >= 0, got {self.tail_bound!r}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def norm_sq(self) -> float:
        return cdot(self.flat(), self.flat()).real


def basis_state(cutoffs: BasisCutoffs, n: int, l: int, k: int) -> TruncatedState:
    """The basis tensor e_(n,l,k); exact, so the tail bound is zero."""
    c = np.zeros(cutoffs.shape, dtype=np.complex128)
    c[n, l, k] = 1.0
    return TruncatedState(coeffs=c, cutoffs=cutoffs, tail_bound=0.0)


def inner_product(a: TruncatedState, b: TruncatedState) -> complex:
    """<a|b> = sum conj(a) * b over all indices in fixed (n, l, k) order."""
    if not a.cutoffs.same_shape(b.cutoffs):
        raise CutoffMismatchError(
            f"cutoff shapes differ: {a.cutoffs.shape} vs {b.cutoffs.shape}"
        )
    return cdot(a.flat(), b.flat())


class OperatorAccumulator:
    """Single-writer accumulator for sums of weighted projectors.

    The subspace is declared up front as a list of (n, l, k) triples; states
    added later must carry (numerically) all their weight on those triples.
    """

    def __init__(self, cutoffs: BasisCutoffs, subspace: list[tuple[int, int, int]],
                 support_tol: float = 1e-13):
        self.cutoffs = cutoffs
        self.subspace = list(subspace)
        self.support_tol = float(support_tol)
        shape = cutoffs.shape
        flat = [int(np.ravel_multi_index(t, shape)) for t in self.subspace]
        if len(set(flat)) != len(flat):
            raise DomainError("subspace triples must be distinct")
        self._flat_idx = np.asarray(flat, dtype=np.intp)
        self._mask = np.zeros(cutoffs.dimension, dtype=bool)
        self._mask[self._flat_idx] = True
        d = len(self.subspace)
        self.matrix = np.zeros((d, d), dtype=np.complex128)

    @property
    def dimension(self) -> int:
        return len(self.subspace)

    def extract(self, state: TruncatedState) -> np.ndarray:
        """Coefficient vector of ``state`` on the declared subspace."""
        if not state.cutoffs.same_shape(self.cutoffs):
            raise CutoffMismatchError(
                f"cutoff shapes differ: {state.cutoffs.shape} vs {self.cutoffs.shape}"
            )
        flat = state.flat()
        outside = np.abs(flat[~self._mask])
        if outside.size and outside.max() > self.support_tol:
            raise SubspaceMismatchError(
                f"state carries weight {outside.max():.3e} outside the declared subspace"
            )
        return flat[self._flat_idx]

    def add(self, state: TruncatedState, weight: float) -> None:
        """matrix += weight * |state><state| restricted to the subspace."""
        if weight == 0.0:
            return
        v = self.extract(state)
        self.matrix += weight * np.outer(v, np.conjugate(v))


def outer_accumulate(acc: OperatorAccumulator, state: TruncatedState, weight: float) -> OperatorAccumulator:
    """Functional wrapper over OperatorAccumulator.add; returns the accumulator."""
    acc.add(state, weight)
    return acc
