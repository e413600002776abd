"""Exception types raised across the package.

Every error that callers are expected to branch on gets its own class;
all inherit from GraspSynthError so CLI code can catch one base type.
"""


class GraspSynthError(Exception):
    """Base class for all graspsynth errors."""


class InvalidArgumentError(GraspSynthError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateDirectionError(GraspSynthError):
    """A vector is too short to define a direction (norm <= UNIT_EPS)."""


class EmptyContactMapError(GraspSynthError):
    """A contact map has no contacted points in any finger category."""


class ParseError(GraspSynthError):
    """A file could not be parsed; message carries line/element context."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class InitializationFailureError(GraspSynthError):
    """Hand placement could not find a penetration-free start pose."""


class DivergedError(GraspSynthError):
    """Optimization produced a non-finite energy or pose."""

    def __init__(self, message, iteration):
        self.iteration = iteration
        super().__init__(f"{message} (iteration {iteration})")


class OptimizationFailureError(GraspSynthError):
    """Every restart candidate diverged."""


class ScriptingFailureError(GraspSynthError):
    """A scripted reference grasp could not close onto the object."""


class ContractViolationError(GraspSynthError):
    """A pluggable component returned a value outside its contract."""
