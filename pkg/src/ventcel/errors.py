"""Exception types shared across the library."""


class VentcelError(Exception):
    """Base class for all library errors."""


class NoConvergence(VentcelError):
    """An iterative geometric query failed to converge."""


class UnsupportedDegree(VentcelError):
    """Requested polynomial or quadrature degree is out of range."""


class BadParameter(VentcelError):
    """Invalid argument to a mesh generator or study configuration."""


class ParseError(VentcelError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFeature(VentcelError):
    """Mesh file uses a feature outside the supported MSH subset."""


class SingularGeometry(VentcelError):
    """An element map has a non-positive Jacobian determinant."""


class NotConverged(VentcelError):
    """Eigenvalue or linear solver exhausted its iteration budget."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class InnerSolveFailure(VentcelError):
    """The inner linear solver of the eigensolver broke down."""


class SingularGram(VentcelError):
    """Gram matrix of an eigenspace basis is numerically singular."""


class BadSequence(VentcelError):
    """Error/mesh-size sequences unsuitable for convergence rates."""
