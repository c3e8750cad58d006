"""Exception types shared across the package.

Every error raised by the core modules derives from :class:`IdcpError`
so callers (CLI, HTTP service) can map failures uniformly.
"""

from __future__ import annotations


class IdcpError(Exception):
    """Base class for all package errors."""


# --- mesh construction -------------------------------------------------------

class NotADisk(IdcpError):
    """Complex is not a triangulated disk (wrong Euler characteristic,
    disconnected, or boundary is not a single cycle)."""


class NonManifoldEdge(IdcpError):
    """An edge is contained in more than two faces."""


class OrientationConflict(IdcpError):
    """Face orientations are not globally consistent."""


class ScaleTooCoarse(IdcpError):
    """No lattice triangle fits inside the domain at the requested scale."""


class MarkerAdjustmentFailed(IdcpError):
    """Could not produce three distinct one-face boundary markers."""


# --- per-triangle metric quantities ------------------------------------------

class AmbiguousDegeneracy(IdcpError):
    """|Q| is within tolerance of zero but no vertex matches the flat-vertex
    root within tolerance."""


class DegenerateInput(IdcpError):
    """Operation requires a non-degenerate triangle."""


class InadmissibleInput(IdcpError):
    """Operation requires an admissible (possibly degenerate) triangle."""


class IntervalNotAdmissible(IdcpError):
    """Requested radius interval contains no admissible packing."""


class InadmissibleFace(IdcpError):
    """A face of the state is inadmissible where admissibility is required."""

    def __init__(self, face: int, message: str | None = None):
        self.face = face
        super().__init__(message or f"inadmissible face {face}")


class DegenerateFace(IdcpError):
    """A face is degenerate where a non-degenerate one is required."""

    def __init__(self, face: int, message: str | None = None):
        self.face = face
        super().__init__(message or f"degenerate face {face}")


# --- flows --------------------------------------------------------------------

class NonPositiveConductance(IdcpError):
    """An edge conductance is not strictly positive."""

    def __init__(self, edge: tuple[int, int], value: float):
        self.edge = edge
        self.value = value
        super().__init__(f"conductance {value:.3e} on edge {edge} is not positive")


class SolverFailure(IdcpError):
    """Sparse factorization or linear solve failed."""


class HypothesesNotMet(IdcpError):
    """Sample does not satisfy the maximal-principle hypotheses (skip, not a failure)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class RootNotBracketed(IdcpError):
    """One-dimensional root search could not bracket a sign change."""


class CornerDegreeUnsupported(IdcpError):
    """Boundary corner has a degree outside {3, 4, 5, 6}."""

    def __init__(self, vertex: int, degree: int):
        self.vertex = vertex
        self.degree = degree
        super().__init__(f"corner vertex {vertex} has unsupported degree {degree}")


class OverlappingCornerBalls(IdcpError):
    """Two corner diffusion balls intersect; rerun with a finer subdivision."""


class SubdivisionTooCoarse(IdcpError):
    """Subdivision too coarse for the corner diffusion step (needs n >= 3)."""


# --- layouts ------------------------------------------------------------------

class TriangleInequalityViolation(IdcpError):
    """A face violates the strict triangle inequality."""

    def __init__(self, face: int, message: str | None = None):
        self.face = face
        super().__init__(message or f"face {face} violates the strict triangle inequality")


class MarkersCollinear(IdcpError):
    """Marker images are collinear; no similarity normalization exists."""


# --- spiral lattice -----------------------------------------------------------

class BracketNotFound(IdcpError):
    """Bisection bracket expansion exhausted without a sign change."""


# --- pipeline -----------------------------------------------------------------

class PointOutsideDomain(IdcpError):
    """Evaluation point lies outside the source layout footprint."""
