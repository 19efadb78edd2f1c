"""
Exception types raised by the solver package
"""


class InterfaceSolverError(Exception):
    """Base class for all package errors"""


class DegenerateGradientError(InterfaceSolverError, ValueError):
    """Level-set gradient too small to define a normal"""


class UnsupportedGeometryError(InterfaceSolverError, ValueError):
    """Operation needs a parameterization the geometry does not have"""


class DimensionMismatchError(InterfaceSolverError, ValueError):
    """Point, network or dataset dimensions disagree"""


class AlignmentError(InterfaceSolverError, ValueError):
    """Grid alignment does not match what the solver expects"""


class NonNestedGridError(InterfaceSolverError, ValueError):
    """Coarse grid nodes are not a subset of the fine grid nodes"""


class InvalidErrorValueError(InterfaceSolverError, ValueError):
    """Zero, negative or non-finite error passed to order estimation"""


class ExpressionError(InterfaceSolverError, ValueError):
    """Closed-form expression could not be parsed"""


class ConfigError(InterfaceSolverError, ValueError):
    """Invalid experiment or optimizer configuration"""


class NetFormatError(InterfaceSolverError, ValueError):
    """Malformed or unsupported network file"""
