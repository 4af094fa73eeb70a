"""
Exception types raised by omtherm.

Each class subclasses the builtin a caller would expect (``ValueError`` for
bad inputs, ``RuntimeError`` for solver failures) so plain ``except
ValueError`` handlers keep working. ``exit_code`` is what the command-line
front end returns when the error reaches it.
"""

from typing import Optional


class OmthermError(Exception):
    """Base class for all omtherm errors."""

    exit_code = 1


class DomainError(OmthermError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 3


class ResolutionError(DomainError):
    """The time step does not resolve the relaxation rate."""


class InconsistencyError(DomainError):
    """Two measured quantities contradict each other."""


class ConfigError(OmthermError, ValueError):
    """The run configuration is malformed or contains unknown keys."""

    exit_code = 3


class FitError(OmthermError, RuntimeError):
    """A least-squares fit or an occupancy integration failed to converge.

    Attributes:
        residual_rms: RMS residual at the last iterate, if available
        n_evaluations: Number of model evaluations spent
    """

    exit_code = 4

    def __init__(
        self,
        message: str,
        residual_rms: Optional[float] = None,
        n_evaluations: Optional[int] = None,
    ):
        details = []
        if residual_rms is not None:
            details.append(f"residual rms {residual_rms:.3e}")
        if n_evaluations is not None:
            details.append(f"{n_evaluations} evaluations")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.residual_rms = residual_rms
        self.n_evaluations = n_evaluations


class FormatError(OmthermError, ValueError):
    """A file does not follow the expected layout.

    Attributes:
        field: Name of the offending header field or column
    """

    exit_code = 5

    def __init__(self, message: str, field: Optional[str] = None):
        if field is not None:
            message = f"{message} [field: {field}]"
        super().__init__(message)
        self.field = field


class ResourceError(OmthermError, MemoryError):
    """A requested ensemble would exceed the memory budget.

    Attributes:
        required_bytes: Bytes the request needs
        limit_bytes: Configured budget
    """

    exit_code = 6

    def __init__(self, required_bytes: int, limit_bytes: int):
        super().__init__(
            f"ensemble needs {required_bytes:,} bytes "
            f"({required_bytes / 2**20:.1f} MiB), limit is {limit_bytes:,} bytes; "
            "reduce n_reps or t_pulse, or raise output.max_bytes"
        )
        self.required_bytes = required_bytes
        self.limit_bytes = limit_bytes


class DependencyError(OmthermError, RuntimeError):
    """A pipeline stage is missing the outputs of an earlier stage."""

    exit_code = 7


class UsageError(OmthermError):
    """A command was invoked without the inputs it needs."""

    exit_code = 2
