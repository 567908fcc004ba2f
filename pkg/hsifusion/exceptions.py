"""
Exceptions for hsifusion
========================

Every failure raised by the library derives from FusionException so callers
(and the CLI) can catch one type.
"""

from typing import Any, List, Optional


class FusionException(Exception):
    """Base exception for all hsifusion errors"""
    pass


class ShapeError(FusionException, ValueError):
    """Array or cube dimensions are inconsistent"""
    pass


class ParameterError(FusionException, ValueError):
    """A scalar parameter is outside its valid range"""
    pass


class SolverError(FusionException):
    """An iterative solver diverged or produced non-finite values"""

    def __init__(self, message: str, trace: Optional[Any] = None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class GraphError(FusionException):
    """Misuse of a computation graph (unbound input, backward before forward)"""
    pass


class OptimizerError(FusionException):
    """Optimizer step rejected"""
    pass


class FormatError(FusionException):
    """A persisted file violates its format"""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(FusionException):
    """Invalid or unknown experiment configuration"""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or []
