"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, DomainError and
subclasses -> 3, RuntimeInvariantError and subclasses -> 4.
"""


class QctError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(QctError):
    """Invalid or inconsistent run configuration."""


class DomainError(QctError):
    """Inputs outside the mathematical domain of a relation."""


class InfeasibleError(DomainError):
    """Requested noise level lies outside the weak-theory validity domain."""


class DivisionDomainError(DomainError):
    """A scale relation has a vanishing denominator at the evaluation point."""


class RuntimeInvariantError(QctError):
    """A runtime invariant of a simulation was violated."""


class TruncationError(RuntimeInvariantError):
    """State preparation places non-negligible mass outside the grid."""


class NormCollapse(RuntimeInvariantError):
    """Pre-normalization norm dropped below threshold (time step too large)."""


class BoundaryLeak(RuntimeInvariantError):
    """Probability mass reached the grid boundary."""


class PositivityLoss(RuntimeInvariantError):
    """Density matrix developed a significant negative eigenvalue."""


class OutOfRange(RuntimeInvariantError):
    """Samples fall outside the requested histogram axes."""


class AxisMismatch(QctError):
    """Two phase-space grids do not share the same axes."""


class InsufficientSamples(QctError):
    """Too few samples per analysis window."""


class NonConvergenceError(QctError):
    """A time average failed its self-consistency check."""


class FormatError(QctError):
    """A binary dump or CSV file does not match the expected format."""
