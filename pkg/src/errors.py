"""Exception types raised by the lab.

Every error derives from ``LabError`` and from the closest builtin, so callers
may catch either ``LabError`` or e.g. ``ValueError``.
"""


class LabError(Exception):
    """Base class for all lab errors."""


class DimensionMismatchError(LabError, ValueError):
    """A vector or matrix does not match the interface it is fed to."""


class NonFiniteError(LabError, ArithmeticError):
    """A NaN or infinity appeared in an input, intermediate, or loss."""


class ConvergenceError(LabError, RuntimeError):
    """An iterative routine ran out of iterations before meeting its tolerance."""


class PreconditionError(LabError, ValueError):
    """An operation was called outside its stated precondition."""


class NonContractiveError(PreconditionError):
    """The map is not a contraction at its fixed point (spectral radius >= 1)."""


class InsufficientDataError(LabError, ValueError):
    """Too few samples, trajectories, or checkpoints for the requested fit."""


class SamplerError(LabError, RuntimeError):
    """A sampler is degenerate or its acceptance rate collapsed."""


class AnchorUpdateError(LabError, ValueError):
    """An update was attempted on a frozen anchor client."""


class AnchorIntegrityError(LabError, RuntimeError):
    """A frozen anchor's parameters changed between rounds."""


class ConfigError(LabError, ValueError):
    """A run configuration failed to parse or validate."""


class BoundViolationError(LabError, ArithmeticError):
    """Counted frequencies broke an inequality that holds by construction."""
