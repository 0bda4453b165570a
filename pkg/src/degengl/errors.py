"""Error types shared across the numerical modules and the CLI."""

from __future__ import annotations


class LabError(ValueError):
    """Base class for every failure the lab reports to callers."""

    exit_code = 1
    kind = "error"


class ConfigError(LabError):
    """Raised for invalid run configs, overrides or unknown experiments."""

    kind = "config"


class ParameterError(LabError):
    """Raised when energy parameters violate their invariants."""

    kind = "parameter"


class DomainError(LabError):
    """Raised when a value leaves the admissible range [-1, 1]."""

    kind = "domain"


class QuadratureError(LabError):
    """Raised when a profile integral cannot be formed."""

    kind = "quadrature"


class InfeasibleError(LabError):
    """Raised when no transversal super-solution parameters exist."""

    kind = "infeasible"


class FitError(LabError):
    """Raised when a fit has too few usable samples."""

    kind = "fit"


class HypothesisError(LabError):
    """Raised when an induction seed fails the induction hypothesis."""

    kind = "hypothesis"


class InconclusiveError(LabError):
    """Raised when a search finds no qualifying cell inside the box."""

    kind = "inconclusive"


class DegenerateCompetitorError(LabError):
    """Raised when a competitor has zero energy while the field does not."""

    kind = "degenerate-competitor"


class ConvergenceError(LabError):
    """Raised when a pipeline requires a converged solve and did not get one."""

    exit_code = 2
    kind = "convergence"


class GeometryError(LabError):
    """Raised when balls or regions do not fit inside the grid box."""

    exit_code = 3
    kind = "geometry"
