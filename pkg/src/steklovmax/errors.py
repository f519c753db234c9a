"""Exception hierarchy shared by all modules."""


class SteklovMaxError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateBoundary(SteklovMaxError):
    """Boundary polyline has coincident consecutive vertices or too few points."""


class SelfIntersection(SteklovMaxError):
    """Two non-adjacent boundary edges cross each other."""

    def __init__(self, edge_i, edge_j):
        super().__init__(f"edges {edge_i} and {edge_j} intersect")
        self.edge_i = edge_i
        self.edge_j = edge_j


class EmptyDiameterSet(SteklovMaxError):
    """No diameter-achieving vertex pair available."""


class MeshFailure(SteklovMaxError):
    """Triangulation could not meet its quality contract within the vertex budget."""


class SolverFailure(SteklovMaxError):
    """Factorization of the interior block failed (degenerate mesh)."""


class ZeroBoundaryTrace(SteklovMaxError):
    """Rayleigh quotient denominator vanishes."""


class ClusteredEigenvalue(SteklovMaxError):
    """Requested a simple-eigenvalue derivative at a clustered eigenvalue."""


class ProjectionFailure(SteklovMaxError):
    """Polyhedron projection did not converge within its iteration cap."""


class NoAscent(SteklovMaxError):
    """No feasible improving step exists at the minimum step size."""


class ConfigError(SteklovMaxError):
    """Invalid configuration key or value."""
