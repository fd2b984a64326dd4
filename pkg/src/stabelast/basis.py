"""Reference-element machinery: P1 shape functions, edge/cubic bubbles and
symmetric triangle quadrature rules in barycentric coordinates.

Weights sum to one; multiply by the physical triangle area at the use site.
"""

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedElementError

__all__ = [
    "QuadRule",
    "LocalBubbleSpace",
    "quadrature_rule",
    "edge_quadrature",
    "p1_eval",
    "bubble_space",
]


@dataclass(frozen=True)
class QuadRule:
    """Symmetric quadrature rule on the reference triangle."""

    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sum to 1
    degree: int  # polynomial exactness


def _centroid_rule() -> QuadRule:
    return QuadRule(np.full((1, 3), 1.0 / 3.0), np.array([1.0]), 1)


def _three_point_rule() -> QuadRule:
    pts = np.array(
        [
            [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        ]
    )
    return QuadRule(pts, np.full(3, 1.0 / 3.0), 2)


def _seven_point_rule() -> QuadRule:
    a1, b1, w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
    a2, b2, w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
    pts = [[1.0 / 3.0] * 3]
    wts = [0.225]
    for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
        pts += [[a, b, b], [b, a, b], [b, b, a]]
        wts += [w, w, w]
    return QuadRule(np.array(pts), np.array(wts), 5)


_RULES = {1: _centroid_rule, 2: _three_point_rule, 3: _seven_point_rule, 5: _seven_point_rule}


def quadrature_rule(degree: int) -> QuadRule:
    """Return a positive-weight symmetric rule exact to at least `degree`.

    Supported degrees: 1 (centroid), 2 (3 points), 3 and 5 (7 points; the
    degree-3 request is served by the degree-5 rule since the classical
    4-point degree-3 rule has a negative weight).
    """
    try:
        return _RULES[degree]()
    except KeyError:
        raise ValueError(f"unsupported quadrature degree {degree}; use one of {sorted(_RULES)}")


def edge_quadrature() -> tuple[np.ndarray, np.ndarray]:
    """2-point Gauss rule on [0, 1] (degree 3). Returns (points, weights)."""
    c = 1.0 / (2.0 * np.sqrt(3.0))
    return np.array([0.5 - c, 0.5 + c]), np.array([0.5, 0.5])


def p1_eval(bary) -> tuple[np.ndarray, np.ndarray]:
    """Values and reference gradients of the three P1 shape functions.

    Values at a barycentric point are the coordinates themselves; gradients
    are constant on the reference triangle (0,0)-(1,0)-(0,1).
    """
    bary = np.asarray(bary, dtype=float)
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return bary, grads


# local edge e is opposite vertex e and joins the other two vertices
EDGE_VERTICES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True)
class LocalBubbleSpace:
    """Bubble basis on one physical triangle: one quadratic edge bubble
    psi_E = 4*lam_a*lam_b per interior edge plus the cubic B_T = 27*lam0*lam1*lam2.
    """

    vertices: np.ndarray  # (3, 2) physical coordinates
    lam_grads: np.ndarray  # (3, 2) gradients of barycentric coordinates
    edge_ids: np.ndarray  # local indices of the interior edges, ascending

    @property
    def basis_count(self) -> int:
        return len(self.edge_ids) + 1

    def values(self, bary) -> np.ndarray:
        lam = np.asarray(bary, dtype=float)
        out = np.empty(self.basis_count)
        for k, e in enumerate(self.edge_ids):
            a, b = EDGE_VERTICES[e]
            out[k] = 4.0 * lam[a] * lam[b]
        out[-1] = 27.0 * lam[0] * lam[1] * lam[2]
        return out

    def gradients(self, bary) -> np.ndarray:
        lam = np.asarray(bary, dtype=float)
        g = self.lam_grads
        out = np.empty((self.basis_count, 2))
        for k, e in enumerate(self.edge_ids):
            a, b = EDGE_VERTICES[e]
            out[k] = 4.0 * (lam[a] * g[b] + lam[b] * g[a])
        out[-1] = 27.0 * (
            lam[1] * lam[2] * g[0] + lam[0] * lam[2] * g[1] + lam[0] * lam[1] * g[2]
        )
        return out


def bubble_space(triangle, interior_edge_flags) -> LocalBubbleSpace:
    """Build the local bubble space for one triangle.

    `triangle` holds the three vertex coordinates (ccw), `interior_edge_flags`
    says per local edge whether it lies in the interior of the domain.
    """
    verts = np.asarray(triangle, dtype=float).reshape(3, 2)
    flags = np.asarray(interior_edge_flags, dtype=bool).reshape(3)
    if not flags.any():
        raise UnsupportedElementError("triangle has no interior edge; no bubble space exists")
    d1 = verts[1] - verts[0]
    d2 = verts[2] - verts[0]
    area2 = d1[0] * d2[1] - d1[1] * d2[0]
    if area2 <= 0.0:
        raise UnsupportedElementError("triangle is degenerate or not counterclockwise")
    lam_grads = (
        np.array(
            [
                [verts[1, 1] - verts[2, 1], verts[2, 0] - verts[1, 0]],
                [verts[2, 1] - verts[0, 1], verts[0, 0] - verts[2, 0]],
                [verts[0, 1] - verts[1, 1], verts[1, 0] - verts[0, 0]],
            ]
        )
        / area2
    )
    return LocalBubbleSpace(verts, lam_grads, np.flatnonzero(flags))
