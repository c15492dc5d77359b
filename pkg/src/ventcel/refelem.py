"""Reference simplices: Lagrange bases and quadrature rules.

The reference triangle is the unit simplex with vertices (0,0), (1,0),
(0,1); the reference segment is [0,1].  Lagrange nodes sit on the
equispaced principal lattice, ordered vertices first, then edge nodes
(walking each edge from its first to its second vertex), then interior
nodes.  Basis functions are evaluated through the nodal product formula
(products of shifted linear factors of the barycentric coordinates),
which is exact at the nodes up to roundoff and stable for the supported
degrees.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .errors import UnsupportedDegree

MAX_DEGREE = 6
MAX_QUAD_DEGREE = 20

#: Vertices of the reference triangle.
TRI_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

#: Local edges of the reference triangle as (first, second) vertex pairs.
TRI_EDGES = ((0, 1), (1, 2), (2, 0))


def barycentric(points):
    """Barycentric coordinates of Cartesian points in the reference triangle.

    ``points`` has shape (n, 2); returns shape (n, 3) with columns
    (1 - x - y, x, y).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.empty((pts.shape[0], 3))
    lam[:, 0] = 1.0 - pts[:, 0] - pts[:, 1]
    lam[:, 1] = pts[:, 0]
    lam[:, 2] = pts[:, 1]
    return lam


def edge_point(edge, t):
    """Cartesian point(s) on a local edge of the reference triangle.

    ``t`` runs from 0 at the edge's first vertex to 1 at its second.
    """
    a, b = TRI_EDGES[edge]
    t = np.asarray(t, dtype=float)
    return np.outer(1.0 - t, TRI_VERTICES[a]) + np.outer(t, TRI_VERTICES[b])


def _check_degree(k):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_DEGREE:
        raise UnsupportedDegree(f"Lagrange degree must be in 1..{MAX_DEGREE}, got {k}")


@lru_cache(maxsize=None)
def _lattice_2d(k):
    """Lattice multi-indices (i, j, l) with i+j+l = k, in node order.

    Index ``i`` weights vertex 0, ``j`` vertex 1, ``l`` vertex 2; the
    node's barycentric coordinates are (i, j, l)/k.
    """
    verts = [(k, 0, 0), (0, k, 0), (0, 0, k)]
    edges = []
    weight_of_vertex = {0: "i", 1: "j", 2: "l"}
    for a, b in TRI_EDGES:
        for m in range(1, k):
            w = [0, 0, 0]
            w[a] = k - m
            w[b] = m
            edges.append(tuple(w))
    interior = [
        (i, j, k - i - j)
        for i in range(1, k)
        for j in range(1, k - i)
        if k - i - j >= 1
    ]
    del weight_of_vertex
    return tuple(verts + edges + interior)


def lagrange_nodes(dim, k):
    """Equispaced Lagrange nodes of degree ``k``, as barycentric coordinates.

    Returns shape (n, dim+1); n = k+1 on the segment and
    (k+1)(k+2)/2 on the triangle.
    """
    _check_degree(k)
    if dim == 1:
        ts = [0.0, 1.0] + [m / k for m in range(1, k)]
        return np.array([[1.0 - t, t] for t in ts])
    if dim == 2:
        return np.array(_lattice_2d(k), dtype=float) / k
    raise UnsupportedDegree(f"unsupported dimension {dim}")


def node_kinds(k):
    """Classify the 2D degree-``k`` nodes in lattice order.

    Returns a list of tuples: ``('vertex', v)``, ``('edge', e, m)`` with
    ``m`` in 1..k-1 counting from the edge's first vertex, or
    ``('interior', idx)``.
    """
    _check_degree(k)
    kinds = [("vertex", v) for v in range(3)]
    for e in range(3):
        kinds += [("edge", e, m) for m in range(1, k)]
    n_int = (k - 1) * (k - 2) // 2
    kinds += [("interior", idx) for idx in range(n_int)]
    return kinds


@lru_cache(maxsize=None)
def edge_lattice_indices(k, edge):
    """Indices of the degree-``k`` lattice nodes on a local edge.

    Ordered like the 1D node list: the edge's first vertex, its second
    vertex, then the interior edge nodes walking from first to second.
    """
    a, b = TRI_EDGES[edge]
    order = [None] * (k + 1)
    for idx, kind in enumerate(node_kinds(k)):
        if kind[0] == "vertex":
            if kind[1] == a:
                order[0] = idx
            elif kind[1] == b:
                order[1] = idx
        elif kind[0] == "edge" and kind[1] == edge:
            order[1 + kind[2]] = idx
    return tuple(order)


def _nodal_factor(m, t):
    """Value and derivative of prod_{a<m} (t - a)/(m - a), vectorized in t."""
    v = np.ones_like(t)
    dv = np.zeros_like(t)
    for a in range(m):
        f = (t - a) / (m - a)
        dv = dv * f + v / (m - a)
        v = v * f
    return v, dv


@dataclass(frozen=True)
class LagrangeBasis:
    """Nodal Lagrange basis of degree ``k`` on the reference simplex."""

    dim: int
    degree: int

    @property
    def nodes(self):
        return lagrange_nodes(self.dim, self.degree)

    @property
    def cardinality(self):
        k = self.degree
        return k + 1 if self.dim == 1 else (k + 1) * (k + 2) // 2

    def eval(self, points):
        """Evaluate all basis functions and gradients at reference points.

        ``points``: (n,) or (n, 1) for the segment, (n, 2) for the
        triangle.  Returns ``(values, gradients)`` with shapes (n, nb)
        and (n, nb, dim).
        """
        if self.dim == 1:
            return self._eval_1d(points)
        return self._eval_2d(points)

    def _eval_1d(self, points):
        t = np.asarray(points, dtype=float).reshape(-1)
        k = self.degree
        nb = k + 1
        vals = np.empty((t.size, nb))
        grads = np.empty((t.size, nb, 1))
        lam = np.stack([1.0 - t, t], axis=1)
        dlam = np.array([-1.0, 1.0])
        ms = np.rint(lagrange_nodes(1, k) * k).astype(int)
        for i, (m0, m1) in enumerate(ms):
            p0, dp0 = _nodal_factor(m0, k * lam[:, 0])
            p1, dp1 = _nodal_factor(m1, k * lam[:, 1])
            vals[:, i] = p0 * p1
            grads[:, i, 0] = k * (dp0 * p1 * dlam[0] + p0 * dp1 * dlam[1])
        return vals, grads

    def _eval_2d(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.degree
        lam = barycentric(pts)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        multi = _lattice_2d(k)
        nb = len(multi)
        vals = np.empty((pts.shape[0], nb))
        grads = np.empty((pts.shape[0], nb, 2))
        for i, (mi, mj, ml) in enumerate(multi):
            p = np.empty((3, pts.shape[0]))
            dp = np.empty((3, pts.shape[0]))
            for c, m in enumerate((mi, mj, ml)):
                p[c], dp[c] = _nodal_factor(m, k * lam[:, c])
            vals[:, i] = p[0] * p[1] * p[2]
            # d(phi)/dx = sum_c dphi/dlam_c * dlam_c/dx, dphi/dlam_c = k * dp_c * prod others
            coef = np.stack(
                [dp[0] * p[1] * p[2], p[0] * dp[1] * p[2], p[0] * p[1] * dp[2]]
            )
            grads[:, i, :] = k * coef.T @ dlam
        return vals, grads


@dataclass(frozen=True)
class QuadratureRule:
    """Positive quadrature rule on the reference segment or triangle."""

    dim: int
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


def _check_quad_degree(degree):
    if degree < 0 or degree > MAX_QUAD_DEGREE:
        raise UnsupportedDegree(
            f"quadrature degree must be in 0..{MAX_QUAD_DEGREE}, got {degree}"
        )


@lru_cache(maxsize=None)
def quadrature(dim, required_degree):
    """Quadrature rule exact for polynomials up to ``required_degree``.

    The segment rule is Gauss-Legendre on [0,1].  The triangle rule is
    the conical product of Gauss-Legendre and Gauss-Jacobi((1-v) weight)
    rules, collapsed from the unit square; all weights are positive and
    sum to the reference measure.
    """
    required_degree = int(required_degree)
    _check_quad_degree(required_degree)
    n = required_degree // 2 + 1
    exact = 2 * n - 1
    if dim == 1:
        t, w = leggauss(n)
        return QuadratureRule(1, (t + 1.0) / 2.0, w / 2.0, exact)
    if dim == 2:
        tu, wu = leggauss(n)
        u, wu = (tu + 1.0) / 2.0, wu / 2.0
        tv, wv = roots_jacobi(n, 1.0, 0.0)
        v, wv = (tv + 1.0) / 2.0, wv / 4.0
        uu, vv = np.meshgrid(u, v, indexing="ij")
        pts = np.stack([(uu * (1.0 - vv)).ravel(), vv.ravel()], axis=1)
        wts = np.outer(wu, wv).ravel()
        return QuadratureRule(2, pts, wts, exact)
    raise UnsupportedDegree(f"unsupported dimension {dim}")


def volume_rule_degree(k, r):
    """Assembly quadrature degree for volume forms on an order-r mesh."""
    return 2 * k + 2 * (r - 1) + 2


def boundary_rule_degree(k, r):
    """Assembly quadrature degree for boundary forms on an order-r mesh."""
    return 2 * k + 2 * r
