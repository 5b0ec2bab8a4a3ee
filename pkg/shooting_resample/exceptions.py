"""Exception hierarchy with stable CLI exit codes."""

from typing import Optional


class ShootingResampleError(Exception):
    """Base class for every error raised by the package."""
    exit_code = 4


class MissingInputError(ShootingResampleError):
    """A required fixture file does not exist."""
    exit_code = 2

    def __init__(self, path, dataset: Optional[str] = None):
        self.path = path
        self.dataset = dataset
        label = f"{dataset} " if dataset else ""
        super().__init__(f"missing {label}input: {path}")


class InputError(ShootingResampleError):
    """A fixture file violates its schema."""
    exit_code = 3

    def __init__(self, message: str, dataset: Optional[str] = None, line: Optional[int] = None):
        self.dataset = dataset
        self.line = line
        where = []
        if dataset:
            where.append(dataset)
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ParseError(InputError):
    """Row cannot be split into the expected fields."""


class SchemaError(InputError):
    """A cell holds a value outside its column's domain."""


class ConsistencyError(InputError):
    """Cross-field invariant broken, e.g. race totals vs total population."""


class UniquenessError(InputError):
    """A key that must be unique appears twice."""


class ConfigError(InputError):
    """The run configuration is missing a value or holds an invalid one."""


class LinkageError(ShootingResampleError):
    """Records cannot be joined."""


class CanonicalizationError(LinkageError):
    """A county name cannot be canonicalized."""


class UnmappedCityError(LinkageError):
    """City/state pair absent from the city-to-county map."""

    def __init__(self, city: str, state: str):
        self.city = city
        self.state = state
        super().__init__(f"unmapped city: {city}, {state}")


class DistributionError(ShootingResampleError):
    """A county cannot yield a race distribution for the requested mode."""


class SimulationError(ShootingResampleError):
    """Invalid simulation inputs."""


class InferenceError(ShootingResampleError):
    """Statistic undefined for the given data."""


class ReportError(ShootingResampleError):
    """Report files could not be produced."""


class StageError(ShootingResampleError):
    """Failure inside a named pipeline stage; keeps the cause's exit code."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", ShootingResampleError.exit_code)
        super().__init__(f"[{stage}] {cause}")
