"""Exception hierarchy for the landaucs package."""


class LandauCSError(Exception):
    """Base class for all package errors."""


class DomainError(LandauCSError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateSpectrumError(LandauCSError, ValueError):
    """The level-shift parameter makes gamma <= 0, collapsing the spectrum."""


class ValidationError(LandauCSError, ValueError):
    """Parameter bundle violates one or more structural constraints.

    Carries the full list of violations so callers (notably the CLI) can
    report every offending entry, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConvergenceDomainError(LandauCSError, ValueError):
    """A radial label lies outside the convergence domain of its series."""


class TailBoundError(LandauCSError, RuntimeError):
    """The requested truncation cannot reach the required tail bound."""


class CutoffMismatchError(LandauCSError, ValueError):
    """Two states (or a state and an accumulator) disagree on basis cutoffs."""


class SubspaceMismatchError(LandauCSError, ValueError):
    """A state has support outside the subspace declared for an accumulator."""


class MomentProblemError(LandauCSError, ValueError):
    """The supplied moments do not define a valid nonnegative measure."""


class QuadratureOrderError(LandauCSError, ValueError):
    """Quadrature order too low for the subspace it must resolve."""


class ConfigError(LandauCSError, ValueError):
    """A run configuration file is malformed or inconsistent."""
