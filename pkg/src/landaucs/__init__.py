"""Coherent-state families over Landau levels, with numerical verification.

Construct the discrete-spectrum families on truncated tensor-product bases
and verify their defining properties: unit normalization, resolution of the
identity under the family's measure, temporal stability, and (for the
doubly-labeled Gaussian family) the action identity.
"""

from ._kernels import NUMBA_ACTIVE, active_backend
from .errors import (
    ConfigError,
    ConvergenceDomainError,
    CutoffMismatchError,
    DegenerateSpectrumError,
    DomainError,
    LandauCSError,
    MomentProblemError,
    QuadratureOrderError,
    SubspaceMismatchError,
    TailBoundError,
    ValidationError,
)
from .fockspace import BasisCutoffs, OperatorAccumulator, TruncatedState, basis_state, inner_product, outer_accumulate
from .spectrum import (
    AlphaSequence,
    PhysicalParams,
    Regime,
    SpectralScales,
    ValidatedBundle,
    energy,
    gamma_param,
    rho,
    rho1,
    rho_bar,
    shifted_energy,
    validate,
)
from .states import (
    BiCoherentLabel,
    BuildResult,
    OneDOFLabel,
    ThreeDOFDependentLabel,
    ThreeDOFIndependentLabel,
    TwoDOFLabel,
    build,
    build_bicoherent,
    build_one_dof,
    build_three_dof_dependent,
    build_three_dof_independent,
    build_two_dof,
    overlap,
)
from .measures import (
    AngularExact,
    AngularTrapezoid,
    DiscreteMeasure,
    IdentityCheckReport,
    QuadratureConfig,
    gauss_from_moments,
    jtheta_quadrature,
    ladder_measure,
    legendre_quadrature,
    moment_check,
    resolve_identity,
)
from .dynamics import (
    HamiltonianKind,
    HamiltonianSpec,
    check_temporal_stability,
    evolve,
    expectation_energy,
    hamiltonian_for,
    stability_shift,
)

__version__ = "0.1.0"
