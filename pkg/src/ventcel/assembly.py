"""Global Lagrange spaces on curved meshes and sparse form assembly.

The operator form combines three symmetric pieces, all integrated by
pullback to the reference simplex or segment:

* volume stiffness: grad U . grad V with DF^{-T}-pulled-back gradients
  and |det DF| weights;
* boundary tangential stiffness: arclength derivatives along each
  curved boundary edge, weight 1/|s'(t)|;
* boundary mass: arclength weight |s'(t)|.

The spectral mass form is either the volume mass (the classical weak
form) or the boundary mass (spectral parameter in the boundary
condition); both are assembled by the same kernels.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import refelem
from .errors import SingularGeometry, UnsupportedDegree

_CHUNK = 2048


@dataclass
class FESpace:
    """Continuous P^k space on a curved mesh.

    ``elem_dofs[t]`` lists the global DOFs of element t in reference
    lattice order; ``boundary_edge_dofs[i]`` lists the k+1 DOFs of the
    i-th boundary edge in 1D node order (first vertex, second vertex,
    then interior nodes walking the edge).
    """

    mesh: object
    degree: int
    num_dofs: int
    elem_dofs: np.ndarray
    boundary_edge_dofs: np.ndarray
    boundary_dofs: np.ndarray = field(default=None)

    @property
    def basis(self):
        return refelem.LagrangeBasis(2, self.degree)

    def dof_points(self):
        """Physical coordinates of the DOF nodes (images under F_r)."""
        lattice = refelem.lagrange_nodes(2, self.degree)[:, 1:]
        pts, _ = self.mesh.element_maps(lattice)
        coords = np.zeros((self.num_dofs, 2))
        coords[self.elem_dofs.ravel()] = pts.reshape(-1, 2)
        return coords

    def interpolate(self, fn):
        """Nodal interpolant coefficients of a callable fn((n,2)) -> (n,)."""
        return np.asarray(fn(self.dof_points()), dtype=float)


def build_fespace(cmesh, k):
    """Number the global DOFs of the P^k space on a curved mesh."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= 4:
        raise UnsupportedDegree(f"finite element degree must be in 1..4, got {k}")
    mesh = cmesh.base
    tris = mesh.triangles
    nv, nt = mesh.num_vertices, mesh.num_triangles

    edge_ids = {}
    for tri in tris:
        for a, b in refelem.TRI_EDGES:
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            if key not in edge_ids:
                edge_ids[key] = len(edge_ids)
    ne = len(edge_ids)
    n_int = (k - 1) * (k - 2) // 2
    num_dofs = nv + (k - 1) * ne + n_int * nt

    kinds = refelem.node_kinds(k)
    elem_dofs = np.empty((nt, len(kinds)), dtype=np.int64)
    for t, tri in enumerate(tris):
        for i, kind in enumerate(kinds):
            if kind[0] == "vertex":
                elem_dofs[t, i] = tri[kind[1]]
            elif kind[0] == "edge":
                a, b = refelem.TRI_EDGES[kind[1]]
                ga, gb = tri[a], tri[b]
                eid = edge_ids[(min(ga, gb), max(ga, gb))]
                m = kind[2] if ga < gb else k - kind[2]
                elem_dofs[t, i] = nv + eid * (k - 1) + (m - 1)
            else:
                elem_dofs[t, i] = nv + ne * (k - 1) + t * n_int + kind[1]

    edge_dofs = np.empty((len(mesh.boundary_edges), k + 1), dtype=np.int64)
    for i, (t, le) in enumerate(mesh.boundary_edges):
        edge_dofs[i] = elem_dofs[t, list(refelem.edge_lattice_indices(k, le))]

    boundary_dofs = np.unique(edge_dofs)
    return FESpace(cmesh, int(k), num_dofs, elem_dofs, edge_dofs, boundary_dofs)


def _det22(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _inv22(m, det):
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1]
    inv[..., 1, 1] = m[..., 0, 0]
    inv[..., 0, 1] = -m[..., 0, 1]
    inv[..., 1, 0] = -m[..., 1, 0]
    return inv / det[..., None, None]


def _scatter(rows, cols, vals, shape):
    mat = sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()
    mat.eliminate_zeros()
    return mat


def _assemble_volume(space, kind, degree):
    cmesh, k = space.mesh, space.degree
    rule = refelem.quadrature(2, degree)
    phi, dphi = space.basis.eval(rule.points)
    n = space.num_dofs
    total = sp.csr_matrix((n, n))
    for start in range(0, cmesh.base.num_triangles, _CHUNK):
        elems = np.arange(start, min(start + _CHUNK, cmesh.base.num_triangles))
        _, jac = cmesh.element_maps(rule.points, elems)
        det = _det22(jac)
        if np.any(det <= 0.0):
            raise SingularGeometry("non-positive Jacobian in volume assembly")
        w = rule.weights[None, :] * det
        if kind == "stiffness":
            inv = _inv22(jac, det)
            g = np.einsum("qis,eqsd->eqid", dphi, inv)
            k_elem = np.einsum("eqid,eqjd,eq->eij", g, g, w)
        else:
            k_elem = np.einsum("qi,qj,eq->eij", phi, phi, w)
        dofs = space.elem_dofs[elems]
        rows = np.broadcast_to(dofs[:, :, None], k_elem.shape)
        cols = np.broadcast_to(dofs[:, None, :], k_elem.shape)
        total = total + _scatter(rows, cols, k_elem, (n, n))
    total.eliminate_zeros()
    return total


def _assemble_boundary(space, kind, degree):
    cmesh, k = space.mesh, space.degree
    n = space.num_dofs
    if len(cmesh.base.boundary_edges) == 0:
        return sp.csr_matrix((n, n))
    rule = refelem.quadrature(1, degree)
    psi, dpsi = refelem.LagrangeBasis(1, k).eval(rule.points)
    _, dgeo = refelem.LagrangeBasis(1, cmesh.order).eval(rule.points)
    nodes = cmesh.boundary_edge_nodes()
    tangent = np.einsum("egd,qg->eqd", nodes, dgeo[:, :, 0])
    speed = np.linalg.norm(tangent, axis=2)
    if kind == "stiffness":
        w = rule.weights[None, :] / speed
        k_elem = np.einsum("qi,qj,eq->eij", dpsi[:, :, 0], dpsi[:, :, 0], w)
    else:
        w = rule.weights[None, :] * speed
        k_elem = np.einsum("qi,qj,eq->eij", psi, psi, w)
    dofs = space.boundary_edge_dofs
    rows = np.broadcast_to(dofs[:, :, None], k_elem.shape)
    cols = np.broadcast_to(dofs[:, None, :], k_elem.shape)
    return _scatter(rows, cols, k_elem, (n, n))


def assemble_a(space, volume_degree=None, boundary_degree=None):
    """Operator matrix: volume stiffness + boundary stiffness + boundary mass.

    Symmetric positive definite: the boundary mass removes the constant
    kernel of the two stiffness parts.
    """
    k, r = space.degree, space.mesh.order
    vd = refelem.volume_rule_degree(k, r) if volume_degree is None else volume_degree
    bd = (
        refelem.boundary_rule_degree(k, r)
        if boundary_degree is None
        else boundary_degree
    )
    mat = (
        _assemble_volume(space, "stiffness", vd)
        + _assemble_boundary(space, "stiffness", bd)
        + _assemble_boundary(space, "mass", bd)
    )
    mat.eliminate_zeros()
    return mat


def assemble_m(space, placement="volume", volume_degree=None, boundary_degree=None):
    """Mass matrix for the requested placement ('volume' or 'boundary')."""
    k, r = space.degree, space.mesh.order
    if placement == "volume":
        vd = (
            refelem.volume_rule_degree(k, r) if volume_degree is None else volume_degree
        )
        return _assemble_volume(space, "mass", vd)
    if placement == "boundary":
        bd = (
            refelem.boundary_rule_degree(k, r)
            if boundary_degree is None
            else boundary_degree
        )
        return _assemble_boundary(space, "mass", bd)
    raise ValueError(f"unknown mass placement '{placement}'")
