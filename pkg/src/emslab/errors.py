"""Exception hierarchy shared by the numerical engine and the CLI."""

from __future__ import annotations


class EmslabError(Exception):
    """Base class for all emslab errors."""


class DomainError(EmslabError, ValueError):
    """An argument lies outside the domain of the operation."""


class SweepConfigError(EmslabError, ValueError):
    """Raised when a sweep configuration cannot be read or fails validation."""


class ComparisonError(EmslabError, ValueError):
    """An estimate and a prediction describe different protocols."""


class NumericalError(EmslabError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ConvergenceError(NumericalError):
    """An iteration, bracket expansion or series failed to converge."""


class SingularSystemError(NumericalError):
    """A discretized integral equation cannot be solved for the given parameters."""


class RunawayEpisodeError(EmslabError, RuntimeError):
    """An episode exceeded the configured slot cap."""


class DecodabilityError(EmslabError, RuntimeError):
    """A runtime decodability or trajectory invariant was violated."""
