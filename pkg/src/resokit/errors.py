"""Exception types shared across the toolkit.

Each class maps to one failure mode of the analysis chain so callers (and the
CLI exit-code table) can tell user error, bad data and numerical breakdown
apart.
"""


class ResokitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ResokitError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class DegenerateDataError(ResokitError, ValueError):
    """Input data carries no usable geometric information (e.g. collinear points)."""


class SingularJacobianError(ResokitError):
    """The fit Jacobian is rank deficient; the parameter set is not identifiable."""

    def __init__(self, rank: int, n_params: int):
        self.rank = rank
        self.n_params = n_params
        super().__init__(f"singular Jacobian: rank {rank} < {n_params} parameters")


class NoResonanceError(ResokitError):
    """The trace shows no resonance dip deep enough to fit."""


class UnphysicalValueError(ResokitError, ValueError):
    """A derived quantity violates a physical constraint (e.g. Q_l > Q_c)."""


class TraceParseError(ResokitError, ValueError):
    """A trace file could not be parsed. Carries the 1-based source line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ManifestError(ResokitError, ValueError):
    """A sweep manifest is malformed or references unusable files."""
