from enum import Enum


class ExitCode(Enum):
    """Enum for command line exit codes."""
    OK = 0
    USAGE = 1
    INPUT_PARSE = 2
    SCHEMA = 3
    MODEL = 4


class PerformanceModelError(Exception):
    """Base exception for every failure raised by the performance model."""
    exit_code = ExitCode.MODEL


class UsageError(PerformanceModelError):
    """Exception raised for malformed command line requests."""
    exit_code = ExitCode.USAGE


# ------------------------------------------Input parse errors------------------------------------------
class KernelParseError(PerformanceModelError):
    """Exception raised when a kernel source cannot be turned into a loop-nest IR."""
    exit_code = ExitCode.INPUT_PARSE


class KernelSyntaxError(KernelParseError):
    """Exception raised when the kernel text is not well-formed C."""
    pass


class RestrictionViolation(KernelParseError):
    """Exception raised when the kernel uses a construct outside the supported subset."""
    pass


class MissingConstant(KernelParseError):
    """Exception raised when a symbolic size has no bound value."""
    pass


class FormatError(PerformanceModelError):
    """Exception raised when a measured-results or port-table file does not parse."""
    exit_code = ExitCode.INPUT_PARSE


# ------------------------------------------Schema errors------------------------------------------
class MachineSchemaError(PerformanceModelError):
    """Exception raised for invalid machine description files."""
    exit_code = ExitCode.SCHEMA


class SchemaError(MachineSchemaError):
    """Exception raised when a machine key is missing, mistyped or carries a bad unit."""
    pass


class ConsistencyError(MachineSchemaError):
    """Exception raised when machine values contradict each other."""
    pass


class PortTableSchemaError(PerformanceModelError):
    """Exception raised when a port-cycle table misses required fields."""
    exit_code = ExitCode.SCHEMA


# ------------------------------------------Model errors------------------------------------------
class ModelError(PerformanceModelError):
    """Exception raised when a model cannot be evaluated for the given inputs."""
    exit_code = ExitCode.MODEL


class NoMeasurement(ModelError):
    """Exception raised when no benchmark measurement exists for a level and thread count."""
    pass


class UnknownPrecision(ModelError):
    """Exception raised when the machine has no peak figures for a precision."""
    pass


class UnknownPort(ModelError):
    """Exception raised when a port table names a port the machine does not have."""
    pass


class ZeroIterations(ModelError):
    """Exception raised when a port table covers no loop iterations."""
    pass


class MissingBandwidth(ModelError):
    """Exception raised when a level has neither transfer cycles nor a bandwidth."""
    pass


class ZeroCycles(ModelError):
    """Exception raised when a zero cycle count is converted to a rate."""
    pass


class RangeError(ModelError):
    """Exception raised for empty or invalid sweep ranges."""
    pass


class TooLarge(ModelError):
    """Exception raised when an access trace exceeds the simulation limit."""
    pass


class UnresolvableFootprint(ModelError):
    """Exception raised when a loop nest is too short to reach steady state in a cache."""
    pass
