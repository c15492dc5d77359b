"""Meshes of star-shaped smooth domains and their curved refinement.

Affine meshes are built from a structured concentric-ring triangulation
of the unit disk, radially stretched onto the target domain; boundary
vertices sit exactly on the boundary curve at equally spaced polar
angles.  Curving to geometric order r moves the Lagrange lattice of
every element touching the boundary onto images of the exact element
map (a boundary-weighted blend between the straight element and the
orthogonal projection of its boundary face).

A minimal Gmsh MSH 4.1 ASCII subset (triangles only) is supported for
interchange.
"""

from dataclasses import dataclass, field

import numpy as np

from . import refelem
from .errors import BadParameter, ParseError, UnsupportedDegree, UnsupportedFeature

_TWO_PI = 2.0 * np.pi

#: Local edges of a triangle, matching the reference element convention.
LOCAL_EDGES = refelem.TRI_EDGES


@dataclass
class AffineMesh:
    """Straight-sided triangulation with boundary bookkeeping.

    ``boundary_edges`` lists (element, local_edge) pairs; a local edge
    (a, b) of element t connects vertices triangles[t, a] and
    triangles[t, b].
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_edges: np.ndarray
    h: float
    h_min: float = 0.0

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        v = self.vertices[self.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_vertices(self, elem, local_edge):
        a, b = LOCAL_EDGES[local_edge]
        tri = self.triangles[elem]
        return tri[a], tri[b]

    def validate(self):
        """Check orientation, conformity and boundary-flag sanity."""
        if np.any(self.triangle_areas() <= 0):
            raise BadParameter("mesh has non-positively oriented triangles")
        counts = {}
        for t, tri in enumerate(self.triangles):
            for a, b in LOCAL_EDGES:
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                counts[key] = counts.get(key, 0) + 1
        n_bnd = sum(1 for c in counts.values() if c == 1)
        if any(c > 2 for c in counts.values()):
            raise BadParameter("non-conforming mesh: edge shared by >2 triangles")
        if n_bnd != len(self.boundary_edges):
            raise BadParameter("boundary edge list inconsistent with topology")
        flags = self.boundary_vertex_flags[self.triangles]
        if np.any(flags.sum(axis=1) == 3):
            raise BadParameter("element with all three vertices on the boundary")
        return self


def _merge_rings(inner, outer):
    """Zigzag triangulation of the annulus between two vertex rings.

    Rings are index arrays ordered by increasing polar angle starting
    at angle 0; triangles come out counterclockwise.
    """
    n_i, n_o = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < n_i or j < n_o:
        advance_outer = j < n_o and (i == n_i or (j + 1) / n_o <= (i + 1) / n_i)
        if advance_outer:
            tris.append((inner[i % n_i], outer[j % n_o], outer[(j + 1) % n_o]))
            j += 1
        else:
            tris.append((inner[i % n_i], outer[j % n_o], inner[(i + 1) % n_i]))
            i += 1
    return tris


def _ring_factor(n_boundary_edges):
    divisors = [c for c in range(3, n_boundary_edges + 1) if n_boundary_edges % c == 0]
    return min(divisors, key=lambda c: abs(c - 5.5))


def generate_star_mesh(dom, n_boundary_edges):
    """Quasi-uniform affine mesh of a star-shaped domain.

    The boundary polygon has exactly ``n_boundary_edges`` edges with
    vertices on the domain boundary at equal polar angles.  The interior
    is a structured disk triangulation (concentric rings with vertex
    counts growing linearly) stretched radially by the domain's radial
    profile.
    """
    nb = int(n_boundary_edges)
    if nb < 8 or nb % 2 != 0:
        raise BadParameter("n_boundary_edges must be even and >= 8")
    c = _ring_factor(nb)
    n_rings = nb // c

    verts = [(0.0, 0.0)]
    rings = []
    for m in range(1, n_rings + 1):
        count = c * m
        theta = _TWO_PI * np.arange(count) / count
        rho = m / n_rings
        start = len(verts)
        radius = dom.profile(theta)[0]
        pts = (rho * radius)[:, None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=1
        )
        verts.extend(map(tuple, pts))
        rings.append(np.arange(start, start + count))

    tris = [(0, rings[0][j], rings[0][(j + 1) % c]) for j in range(c)]
    for m in range(n_rings - 1):
        tris.extend(_merge_rings(rings[m], rings[m + 1]))

    vertices = np.array(verts)
    triangles = np.array(tris, dtype=np.int64)
    flags = np.zeros(len(vertices), dtype=bool)
    flags[rings[-1]] = True

    boundary_edges = []
    outer = set(rings[-1])
    for t, tri in enumerate(triangles):
        for le, (a, b) in enumerate(LOCAL_EDGES):
            if tri[a] in outer and tri[b] in outer:
                boundary_edges.append((t, le))
    if len(boundary_edges) != nb:
        raise BadParameter("internal error: boundary edge count mismatch")

    diam = _diameters(vertices, triangles)
    mesh = AffineMesh(
        vertices,
        triangles,
        flags,
        np.array(boundary_edges, dtype=np.int64),
        float(diam.max()),
        float(diam.min()),
    )
    return mesh.validate()


def _diameters(vertices, triangles):
    v = vertices[triangles]
    e0 = np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
    e1 = np.linalg.norm(v[:, 2] - v[:, 1], axis=1)
    e2 = np.linalg.norm(v[:, 0] - v[:, 2], axis=1)
    return np.max(np.stack([e0, e1, e2]), axis=0)


@dataclass
class CurvedMesh:
    """Mesh of order ``order``: one geometric Lagrange lattice per element.

    ``geo_nodes[t, i]`` is the image of the i-th reference lattice node
    under the element map of triangle t; for elements away from the
    boundary these are the affine images.  ``elem_flags[t]`` marks which
    of the element's vertices lie on the domain boundary.
    """

    base: AffineMesh
    order: int
    geo_nodes: np.ndarray
    elem_flags: np.ndarray
    domain: object = field(repr=False, default=None)

    @property
    def h(self):
        return self.base.h

    @property
    def geo_basis(self):
        return refelem.LagrangeBasis(2, self.order)

    def element_maps(self, ref_points, elems=None):
        """Map reference points through every element map.

        Returns ``(points, jacobians)`` with shapes (ne, nq, 2) and
        (ne, nq, 2, 2) for the selected elements (all by default).
        """
        nodes = self.geo_nodes if elems is None else self.geo_nodes[elems]
        vals, grads = self.geo_basis.eval(ref_points)
        pts = np.einsum("egd,qg->eqd", nodes, vals)
        jac = np.einsum("egd,qgs->eqds", nodes, grads)
        return pts, jac

    def boundary_edge_nodes(self):
        """Geometric nodes along each boundary edge, in 1D node order."""
        idx = np.array(
            [
                refelem.edge_lattice_indices(self.order, le)
                for le in self.base.boundary_edges[:, 1]
            ]
        )
        return self.geo_nodes[self.base.boundary_edges[:, 0][:, None], idx]


_FLAG_PATTERNS = [(1, 1, 0), (1, 0, 1), (0, 1, 1)]


def curve_mesh(mesh, dom, r):
    """Curve an affine mesh to geometric order ``r``.

    Every element whose vertex flags carry positive boundary weight gets
    its lattice nodes displaced by (weight)^(r+2) times the gap between
    the boundary-face point and its orthogonal projection; elements with
    at most one boundary vertex are left affine (their displacement
    vanishes identically).
    """
    if r not in (1, 2, 3):
        raise UnsupportedDegree(f"mesh order must be 1, 2 or 3, got {r}")
    lattice = refelem.lagrange_nodes(2, r)
    n_geo = lattice.shape[0]
    tri_flags = mesh.boundary_vertex_flags[mesh.triangles]

    # Affine images of the lattice for all elements at once.
    corner = mesh.vertices[mesh.triangles]
    geo = np.einsum("gc,ecd->egd", lattice, corner)

    for pattern in _FLAG_PATTERNS:
        sel = np.flatnonzero((tri_flags == np.array(pattern, dtype=bool)).all(axis=1))
        if sel.size == 0:
            continue
        eps = np.array(pattern, dtype=float)
        lam_star = lattice @ eps
        active = lam_star > 1e-14
        yhat = (lattice[active] * eps) / lam_star[active, None]
        # y = affine image of the boundary-face point, x the node's image.
        y = np.einsum("gc,ecd->egd", yhat, corner[sel])
        flat = y.reshape(-1, 2)
        b, _ = dom.closest_point(flat)
        shift = (b - flat).reshape(len(sel), -1, 2)
        weight = lam_star[active] ** (r + 2)
        geo_sel = geo[sel]
        geo_sel[:, active, :] += weight[None, :, None] * shift
        geo[sel] = geo_sel

    return CurvedMesh(mesh, r, geo, tri_flags.astype(bool), dom)


def mesh_area(cmesh, degree=12):
    """Area of the curved mesh domain (quadrature of det DF over elements)."""
    rule = refelem.quadrature(2, degree)
    _, jac = cmesh.element_maps(rule.points)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return float(np.einsum("q,eq->", rule.weights, det))


def mesh_perimeter(cmesh, degree=12):
    """Length of the curved mesh boundary (arclength quadrature per edge)."""
    rule = refelem.quadrature(1, degree)
    basis = refelem.LagrangeBasis(1, cmesh.order)
    _, dpsi = basis.eval(rule.points)
    nodes = cmesh.boundary_edge_nodes()
    tangent = np.einsum("egd,qg->eqd", nodes, dpsi[:, :, 0])
    speed = np.linalg.norm(tangent, axis=2)
    return float(np.einsum("q,eq->", rule.weights, speed))


# ---------------------------------------------------------------------------
# MSH 4.1 ASCII subset
# ---------------------------------------------------------------------------


class _LineReader:
    def __init__(self, fh):
        self.fh = fh
        self.lineno = 0

    def next(self):
        while True:
            line = self.fh.readline()
            if not line:
                return None
            self.lineno += 1
            stripped = line.strip()
            if stripped:
                return stripped

    def expect(self, what):
        line = self.next()
        if line is None:
            raise ParseError(f"unexpected end of file, expected {what}", self.lineno)
        return line


def write_msh(mesh, path):
    """Write an affine mesh as MSH 4.1 ASCII (one 2D entity block)."""
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
        nv = mesh.num_vertices
        fh.write(f"$Nodes\n1 {nv} 1 {nv}\n2 1 0 {nv}\n")
        for i in range(nv):
            fh.write(f"{i + 1}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write("$EndNodes\n")
        nt = mesh.num_triangles
        fh.write(f"$Elements\n1 {nt} 1 {nt}\n2 1 2 {nt}\n")
        for i, tri in enumerate(mesh.triangles):
            fh.write(f"{i + 1} {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
        fh.write("$EndElements\n")


def _parse_nodes(reader):
    header = reader.expect("$Nodes header")
    try:
        n_blocks, n_nodes = int(header.split()[0]), int(header.split()[1])
    except (ValueError, IndexError):
        raise ParseError("malformed $Nodes header", reader.lineno) from None
    tags, coords = [], []
    for _ in range(n_blocks):
        block = reader.expect("node block header")
        try:
            dim, _tag, parametric, count = (int(v) for v in block.split()[:4])
        except (ValueError, IndexError):
            raise ParseError("malformed node block header", reader.lineno) from None
        if parametric:
            raise UnsupportedFeature("parametric nodes are not supported")
        block_tags = [int(reader.expect("node tag")) for _ in range(count)]
        for _ in range(count):
            parts = reader.expect("node coordinates").split()
            if len(parts) != 3:
                raise ParseError("expected 'x y z' node line", reader.lineno)
            x, y, z = (float(p) for p in parts)
            if abs(z) > 1e-12:
                raise UnsupportedFeature("3D node coordinates are not supported")
            coords.append((x, y))
        tags.extend(block_tags)
    if len(tags) != n_nodes:
        raise ParseError("node count mismatch", reader.lineno)
    end = reader.expect("$EndNodes")
    if end != "$EndNodes":
        raise ParseError("expected $EndNodes", reader.lineno)
    return tags, coords


_HIGHER_ORDER_TYPES = {9, 10, 16, 20, 21, 22, 23, 24, 25, 26, 27, 28}
_VOLUME_TYPES = {4, 5, 6, 7, 11, 12, 13, 14, 17, 18, 19, 29, 30, 31}


def _parse_elements(reader):
    header = reader.expect("$Elements header")
    try:
        n_blocks = int(header.split()[0])
    except (ValueError, IndexError):
        raise ParseError("malformed $Elements header", reader.lineno) from None
    triangles = []
    seen_2d_block = False
    for _ in range(n_blocks):
        block = reader.expect("element block header")
        try:
            dim, _tag, etype, count = (int(v) for v in block.split()[:4])
        except (ValueError, IndexError):
            raise ParseError("malformed element block header", reader.lineno) from None
        if etype in _VOLUME_TYPES:
            raise UnsupportedFeature("3D cells are not supported")
        if etype in _HIGHER_ORDER_TYPES:
            raise UnsupportedFeature("higher-order cells are not supported")
        if etype == 2:
            if seen_2d_block:
                raise UnsupportedFeature("multiple 2D element blocks")
            seen_2d_block = True
            for _ in range(count):
                parts = reader.expect("triangle connectivity").split()
                if len(parts) != 4:
                    raise ParseError(
                        "expected 'tag v1 v2 v3' triangle line", reader.lineno
                    )
                triangles.append(tuple(int(p) for p in parts[1:]))
        elif etype in (1, 8, 15):
            # Point/line elements carry no 2D connectivity; skip them.
            for _ in range(count):
                reader.expect("element line")
        else:
            raise UnsupportedFeature(f"unsupported element type {etype}")
    end = reader.expect("$EndElements")
    if end != "$EndElements":
        raise ParseError("expected $EndElements", reader.lineno)
    if not triangles:
        raise ParseError("no triangles found", reader.lineno)
    return triangles


def read_msh(path, dom=None):
    """Read the MSH 4.1 ASCII subset written by :func:`write_msh`.

    Boundary edges are recovered topologically.  If ``dom`` is given,
    vertices of boundary edges are flagged as lying on the domain
    boundary when their unsigned distance is at most 1e-8.
    """
    with open(path) as fh:
        reader = _LineReader(fh)
        tags = coords = triangles = None
        while True:
            line = reader.next()
            if line is None:
                break
            if line == "$MeshFormat":
                version = reader.expect("format line").split()
                if not version or not version[0].startswith("4"):
                    raise UnsupportedFeature(
                        f"MSH version {version[0] if version else '?'}; need 4.x ASCII"
                    )
                if len(version) > 1 and version[1] != "0":
                    raise UnsupportedFeature("binary MSH is not supported")
                if reader.expect("$EndMeshFormat") != "$EndMeshFormat":
                    raise ParseError("expected $EndMeshFormat", reader.lineno)
            elif line == "$Nodes":
                tags, coords = _parse_nodes(reader)
            elif line == "$Elements":
                triangles = _parse_elements(reader)
            elif line.startswith("$End"):
                raise ParseError(f"unexpected section end {line}", reader.lineno)
            elif line.startswith("$"):
                # Skip sections outside the supported subset.
                name = line[1:]
                while True:
                    skip = reader.next()
                    if skip is None:
                        raise ParseError(f"unterminated section ${name}", reader.lineno)
                    if skip == f"$End{name}":
                        break
            else:
                raise ParseError(f"unexpected content '{line}'", reader.lineno)
    if tags is None or triangles is None:
        raise ParseError("missing $Nodes or $Elements section", 0)

    remap = {tag: i for i, tag in enumerate(tags)}
    vertices = np.array(coords)
    try:
        tri = np.array(
            [[remap[a], remap[b], remap[c]] for a, b, c in triangles], dtype=np.int64
        )
    except KeyError as exc:
        raise ParseError(f"triangle references unknown node tag {exc}", 0) from None

    counts = {}
    location = {}
    for t in range(tri.shape[0]):
        for le, (a, b) in enumerate(LOCAL_EDGES):
            key = (min(tri[t, a], tri[t, b]), max(tri[t, a], tri[t, b]))
            counts[key] = counts.get(key, 0) + 1
            location[key] = (t, le)
    boundary_edges = np.array(
        [location[k] for k, cnt in counts.items() if cnt == 1], dtype=np.int64
    )

    flags = np.zeros(len(vertices), dtype=bool)
    candidate_list = [
        tri[t, v] for t, le in boundary_edges for v in LOCAL_EDGES[le]
    ]
    candidates = np.unique(candidate_list) if candidate_list else np.array([], int)
    if dom is None:
        flags[candidates] = True
    elif candidates.size:
        d = dom.signed_distance(vertices[candidates])
        flags[candidates] = np.abs(d) <= 1e-8

    diam = _diameters(vertices, tri)
    mesh = AffineMesh(
        vertices,
        tri,
        flags,
        boundary_edges,
        float(diam.max()),
        float(diam.min()),
    )
    return mesh.validate()
