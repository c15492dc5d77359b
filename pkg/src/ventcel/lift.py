"""Exact element maps: evaluate the curved-to-physical correspondence.

Every mesh element T of order r comes with the polynomial map F_r from
the reference triangle.  Elements whose boundary face lies on the mesh
boundary additionally carry an *exact* map

    F_e(x) = F_r(x) + w(x)^(r+2) * (b(y) - y),

where w is the barycentric weight of the boundary-flagged vertices,
y = F_r(yhat) is the image of the boundary-face point associated with
x, and b is the orthogonal projection onto the domain boundary.  F_e
maps the reference triangle onto a curvilinear element of the physical
domain; composed with F_r^{-1} it is the piecewise transformation that
carries mesh functions onto the domain, but it is only ever evaluated
through reference coordinates so F_r is never inverted.

Integrals of lifted functions are therefore plain reference-simplex
quadratures weighted by det(DF_e); gradients transform by DF_e^{-T}.
"""

import numpy as np

from . import refelem
from .errors import SingularGeometry

#: Gradients of the barycentric coordinates on the reference triangle.
_BARY_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

_W_TINY = 1e-14


def boundary_weight(flags, ref_points):
    """Boundary-vertex barycentric weight and boundary-face foot point.

    ``flags`` marks which of the element's three vertices lie on the
    domain boundary.  For reference points (n, 2) returns ``(w, foot)``
    where ``w`` (n,) is the summed barycentric weight of the flagged
    vertices and ``foot`` (n, 2) the associated point on the flagged
    face, NaN where w = 0.  A single point returns scalars and ``foot``
    is None where undefined.
    """
    eps = np.asarray(flags, dtype=float)
    pts = np.asarray(ref_points, dtype=float)
    single = pts.ndim == 1
    lam = refelem.barycentric(np.atleast_2d(pts))
    w = lam @ eps
    foot = np.full((lam.shape[0], 2), np.nan)
    active = w > _W_TINY
    if np.any(active):
        bary = (lam[active] * eps) / w[active, None]
        foot[active] = bary @ refelem.TRI_VERTICES
    if single:
        if w[0] <= _W_TINY:
            return float(w[0]), None
        return float(w[0]), foot[0]
    return w, foot


class ExactMap:
    """Exact map of a single element of a curved mesh.

    Pure evaluator over immutable mesh and domain data; all methods are
    vectorized over reference points.  ``fd_step`` is the centered
    finite-difference step used by :meth:`differential_fd`.
    """

    def __init__(self, cmesh, elem, fd_step=1e-6):
        self.order = cmesh.order
        self.geo = cmesh.geo_nodes[elem]
        self.flags = np.asarray(cmesh.elem_flags[elem], dtype=bool)
        self.domain = cmesh.domain
        self.fd_step = float(fd_step)
        self._basis = cmesh.geo_basis
        self._eps = self.flags.astype(float)
        self._curved = int(self.flags.sum()) >= 2
        # Constant ingredients of the displacement differential.
        self._grad_w = self._eps @ _BARY_GRADS
        self._v_eps = np.einsum(
            "i,id,ig->dg", self._eps, refelem.TRI_VERTICES, _BARY_GRADS
        )

    # -- polynomial element map ----------------------------------------

    def mapped(self, ref_points):
        """F_r at reference points, shape (n, 2)."""
        vals, _ = self._basis.eval(ref_points)
        return vals @ self.geo

    def mapped_jacobian(self, ref_points):
        """DF_r at reference points, shape (n, 2, 2)."""
        _, grads = self._basis.eval(ref_points)
        return np.einsum("gd,qgs->qds", self.geo, grads)

    # -- exact map -------------------------------------------------------

    def point(self, ref_points):
        """F_e at reference points, shape (n, 2) (or (2,) for one point)."""
        pts = np.asarray(ref_points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        x = self.mapped(pts)
        if self._curved:
            w, foot = boundary_weight(self.flags, pts)
            active = w > _W_TINY
            if np.any(active):
                y = self.mapped(foot[active])
                b, _ = self.domain.closest_point(y)
                x[active] += (w[active] ** (self.order + 2))[:, None] * (b - y)
        return x[0] if single else x

    def differential(self, ref_points):
        """DF_e and the Jacobian ratio det(DF_e)/det(DF_r).

        Returns ``(D, Jh)`` with shapes (n, 2, 2) and (n,).  Raises
        SingularGeometry when det(DF_r) is not positive.
        """
        pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
        D = self.mapped_jacobian(pts)
        det_r = _det22(D)
        if np.any(det_r <= 0.0):
            raise SingularGeometry("element map has non-positive Jacobian")
        if self._curved:
            w, foot = boundary_weight(self.flags, pts)
            active = w > _W_TINY
            if np.any(active):
                D[active] += self._displacement_jacobian(
                    w[active], foot[active]
                )
        Jh = _det22(D) / det_r
        return D, Jh

    def _displacement_jacobian(self, w, foot):
        p = self.order + 2
        y = self.mapped(foot)
        dfr_y = self.mapped_jacobian(foot)
        b, theta, d = self.domain.project(y)
        db = self.domain.projection_jacobian(theta, d)
        shift = b - y
        # d/dx [w^p (b(y) - y)] expanded by the chain rule; the foot-point
        # differential carries a 1/w that cancels against w^p.
        term1 = (p * w ** (p - 1))[:, None, None] * np.einsum(
            "qd,s->qds", shift, self._grad_w
        )
        dyhat = self._v_eps[None, :, :] - np.einsum("qd,s->qds", foot, self._grad_w)
        dy = np.einsum("qde,qes->qds", dfr_y, dyhat)
        dbi = db - np.eye(2)[None, :, :]
        term2 = (w ** (p - 1))[:, None, None] * np.einsum("qde,qes->qds", dbi, dy)
        return term1 + term2

    def differential_fd(self, ref_points, step=None):
        """Centered finite-difference estimate of DF_e (validation path)."""
        h = self.fd_step if step is None else float(step)
        pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
        D = np.empty((pts.shape[0], 2, 2))
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            D[:, :, axis] = (self.point(pts + e) - self.point(pts - e)) / (2 * h)
        return D


def _det22(mats):
    return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]


def exact_area(cmesh, degree=12):
    """Area of the physical domain integrated through the exact maps.

    Sum over elements of the reference-simplex quadrature of det(DF_e);
    converges to the domain area at the geometric rate of the mesh.
    """
    rule = refelem.quadrature(2, degree)
    total = 0.0
    flagged = cmesh.elem_flags.sum(axis=1) >= 2
    internal = np.flatnonzero(~flagged)
    if internal.size:
        _, jac = cmesh.element_maps(rule.points, internal)
        total += float(np.einsum("q,eq->", rule.weights, _det22(jac)))
    for elem in np.flatnonzero(flagged):
        D, _ = ExactMap(cmesh, elem).differential(rule.points)
        total += float(rule.weights @ _det22(D))
    return total
