"""Error measurement against analytic eigenspaces and convergence studies.

Eigenfunction errors are distances, in L2 and H1-seminorm over the
physical domain, between the lifted discrete eigenfunction and a small
analytic eigenspace; the infimum over the space is computed by a Gram
projection and then re-integrated pointwise so that tiny errors are not
lost to cancellation.  All integrals run over the reference simplex
through the exact element maps.

A study runs the full pipeline (mesh, curve, assemble, solve, measure)
over a ladder of boundary-edge-doubling meshes and reports per-level
errors and estimated convergence orders.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import refelem
from .assembly import assemble_a, assemble_m, build_fespace
from .eigsolve import solve_generalized
from .errors import BadParameter, BadSequence, SingularGeometry, SingularGram, VentcelError
from .geometry import make_domain
from .lift import ExactMap
from .meshing import curve_mesh, generate_star_mesh


# ---------------------------------------------------------------------------
# Analytic eigenstructure on the disk
# ---------------------------------------------------------------------------


class HarmonicSpace:
    """Homogeneous harmonic polynomials of degree n on the plane.

    For n >= 1 the basis is Re(x+iy)^n, Im(x+iy)^n; for n = 0 the
    constant.  On the unit disk these span the eigenspaces of the
    boundary-spectral problem: u = Re z^n satisfies Laplace's equation
    with -u'' along the circle contributing n^2 u, the normal
    derivative n u and the zero-order term u, hence the eigenvalue
    n^2 + n + 1.
    """

    def __init__(self, degree):
        if degree < 0:
            raise BadParameter("harmonic degree must be >= 0")
        self.degree = int(degree)
        self.dim = 1 if degree == 0 else 2

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.degree == 0:
            return np.ones((pts.shape[0], 1))
        z = (pts[:, 0] + 1j * pts[:, 1]) ** self.degree
        return np.stack([z.real, z.imag], axis=1)

    def gradients(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.degree
        out = np.zeros((pts.shape[0], self.dim, 2))
        if n == 0:
            return out
        dz = n * (pts[:, 0] + 1j * pts[:, 1]) ** (n - 1)
        out[:, 0, 0] = dz.real
        out[:, 0, 1] = -dz.imag
        out[:, 1, 0] = dz.imag
        out[:, 1, 1] = dz.real
        return out


def analytic_eigenvalues_disk(count):
    """First eigenvalues of the unit-disk problem with boundary mass.

    Separation of variables with harmonic modes r^n e^{i n t} gives the
    increasing sequence 1 (constant), then n^2 + n + 1 with multiplicity
    2 for n = 1, 2, ...; returned as (value, multiplicity) pairs whose
    multiplicities sum to at least ``count``.
    """
    if count < 1:
        raise BadParameter("count must be >= 1")
    pairs = [(1.0, 1)]
    total = 1
    n = 1
    while total < count:
        pairs.append((float(n * n + n + 1), 2))
        total += 2
        n += 1
    return pairs


def expand_eigenvalues(pairs):
    """Flatten (value, multiplicity) pairs into a sorted value list."""
    flat = []
    for value, mult in pairs:
        flat.extend([value] * mult)
    return flat


def disk_mode_degree(index):
    """Harmonic degree of the 1-based eigenvalue index on the disk."""
    if index < 1:
        raise BadParameter("eigenvalue index must be >= 1")
    return 0 if index == 1 else (index - 2) // 2 + 1


def eigenvalue_error(lam, reference):
    """Absolute eigenvalue error |reference - lam|."""
    return abs(float(lam) - float(reference))


def eoc(errors, hs):
    """Estimated orders of convergence between successive refinements.

    ``hs`` must decrease by (approximately) a factor 2 per level; the
    order between levels n and n+1 is log(e_n/e_{n+1}) / log(h_n/h_{n+1}).
    """
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise BadSequence("need matching error/h sequences of length >= 2")
    if any(e <= 0 for e in errors):
        raise BadSequence("errors must be positive")
    for h0, h1 in zip(hs, hs[1:]):
        if not (h1 < h0 and 1.5 <= h0 / h1 <= 2.5):
            raise BadSequence("mesh sizes must decrease by a factor of about 2")
    return [
        math.log(e0 / e1) / math.log(h0 / h1)
        for (e0, e1, h0, h1) in zip(errors, errors[1:], hs, hs[1:])
    ]


# ---------------------------------------------------------------------------
# Lift-based eigenfunction errors
# ---------------------------------------------------------------------------


def _exact_map_tables(cmesh, degree):
    """Quadrature tables of the exact maps for every element.

    Returns (rule, z, D, det) with the physical quadrature points,
    differentials and Jacobian determinants of the exact map; the
    polynomial map is used verbatim on elements its displacement
    vanishes on.
    """
    rule = refelem.quadrature(2, degree)
    z, D = cmesh.element_maps(rule.points)
    flagged = np.flatnonzero(cmesh.elem_flags.sum(axis=1) >= 2)
    for e in flagged:
        em = ExactMap(cmesh, e)
        z[e] = em.point(rule.points)
        D[e], _ = em.differential(rule.points)
    det = D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]
    if np.any(det <= 0.0):
        raise SingularGeometry("exact map with non-positive Jacobian")
    return rule, z, D, det


def _solve_gram(G, beta):
    scale = float(np.max(np.abs(G)))
    if scale <= 1e-30:
        return np.zeros_like(beta)
    if np.linalg.cond(G) > 1e13:
        raise SingularGram("eigenspace Gram matrix is numerically singular")
    return np.linalg.solve(G, beta)


def _lifted_error(space, coeffs, eigenspace, kind, degree):
    cmesh = space.mesh
    if degree is None:
        degree = 2 * space.degree + 6
    rule, z, D, det = _exact_map_tables(cmesh, degree)
    w = rule.weights[None, :] * det
    U = np.asarray(coeffs, dtype=float)[space.elem_dofs]
    phi, dphi = space.basis.eval(rule.points)
    flat = z.reshape(-1, 2)
    ne, nq = det.shape

    if kind == "l2":
        uh = np.einsum("qi,ei->eq", phi, U)
        basis = eigenspace.values(flat).reshape(ne, nq, -1)
        G = np.einsum("eqa,eqb,eq->ab", basis, basis, w)
        beta = np.einsum("eq,eqa,eq->a", uh, basis, w)
        c = _solve_gram(G, beta)
        resid = uh - basis @ c
        norm2 = np.einsum("eq,eq->", uh * uh, w)
    else:
        inv_t = np.linalg.inv(D).transpose(0, 1, 3, 2)
        grad_uh = np.einsum("eqds,qis,ei->eqd", inv_t, dphi, U)
        basis = eigenspace.gradients(flat).reshape(ne, nq, -1, 2)
        G = np.einsum("eqad,eqbd,eq->ab", basis, basis, w)
        beta = np.einsum("eqd,eqad,eq->a", grad_uh, basis, w)
        c = _solve_gram(G, beta)
        resid_vec = grad_uh - np.einsum("a,eqad->eqd", c, basis)
        resid = np.linalg.norm(resid_vec, axis=2)
        norm2 = np.einsum("eqd,eqd,eq->", grad_uh, grad_uh, w)

    err2_direct = float(np.einsum("eq,eq->", resid * resid, w))
    err2_gram = float(norm2 - beta @ c)
    return math.sqrt(max(err2_direct, 0.0)), math.sqrt(max(err2_gram, 0.0)), c


def lifted_l2_error(space, coeffs, eigenspace, degree=None):
    """L2(domain) distance between the lifted function and an eigenspace.

    The infimum over the span is solved by a Gram system and the
    residual re-integrated directly at the quadrature points.
    """
    return _lifted_error(space, coeffs, eigenspace, "l2", degree)[0]


def lifted_h1_error(space, coeffs, eigenspace, degree=None):
    """L2 distance between lifted gradient and the eigenspace gradients."""
    return _lifted_error(space, coeffs, eigenspace, "h1", degree)[0]


# ---------------------------------------------------------------------------
# Study driver
# ---------------------------------------------------------------------------


@dataclass
class StudyConfig:
    """Configuration of a multi-level convergence study."""

    domain: str = "disk"
    alpha: float = 0.3
    beta: float = 0.4
    order: int = 1
    degree: int = 1
    levels: int = 4
    base_edges: int = 20
    tracked_index: int = 6
    placement: str = "boundary"
    n_eig: int = 12
    shift: float = -1.0
    lanczos_tol: float = 1e-12
    inner_tol: float = 1e-14
    max_iter: int = 500
    seed: int = 0
    threads: int = 1
    inner_solver: str = "direct"
    out_dir: str = ""
    reference_lambda: float = None
    reference_order: int = 3
    reference_degree: int = 4

    def validate(self):
        problems = []
        if self.domain not in ("disk", "flower"):
            problems.append(f"domain must be 'disk' or 'flower', got '{self.domain}'")
        if self.order not in (1, 2, 3):
            problems.append(f"order must be 1, 2 or 3, got {self.order}")
        if not 1 <= self.degree <= 4:
            problems.append(f"degree must be in 1..4, got {self.degree}")
        if self.levels < 1:
            problems.append("levels must be >= 1")
        if self.base_edges < 8 or self.base_edges % 2:
            problems.append("base_edges must be even and >= 8")
        if self.placement not in ("volume", "boundary"):
            problems.append(
                f"placement must be 'volume' or 'boundary', got '{self.placement}'"
            )
        if self.tracked_index < 1:
            problems.append("tracked_index must be >= 1")
        if self.n_eig < self.tracked_index + 1:
            problems.append("n_eig must exceed tracked_index (cluster slack)")
        if self.shift >= 0:
            problems.append("shift must be negative")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.inner_solver not in ("direct", "pcg"):
            problems.append("inner_solver must be 'direct' or 'pcg'")
        if problems:
            raise BadParameter("; ".join(problems))
        return self


@dataclass
class StudyLevel:
    """One refinement level of a study."""

    level: int
    n_edges: int
    h: float
    ndof: int
    lam: float
    e_lambda: float
    e_l2: float
    e_h10: float


@dataclass
class StudyReport:
    """Per-level results plus convergence orders between level pairs."""

    config: StudyConfig
    reference: float
    levels: list = field(default_factory=list)

    def _orders(self, attr):
        hs = [lv.h for lv in self.levels]
        es = [getattr(lv, attr) for lv in self.levels]
        out = []
        for i in range(len(self.levels) - 1):
            if es[i] > 0 and es[i + 1] > 0 and not (
                math.isnan(es[i]) or math.isnan(es[i + 1])
            ):
                out.append(
                    math.log(es[i] / es[i + 1]) / math.log(hs[i] / hs[i + 1])
                )
            else:
                out.append(float("nan"))
        return out

    @property
    def orders_lambda(self):
        return self._orders("e_lambda")

    @property
    def orders_l2(self):
        return self._orders("e_l2")

    @property
    def orders_h10(self):
        return self._orders("e_h10")


class PartialReport(VentcelError):
    """A study level failed; carries the report of the completed levels."""

    def __init__(self, report, cause):
        super().__init__(f"study stopped after level {len(report.levels)}: {cause}")
        self.report = report
        self.cause = cause


def _reference_values(cfg, dom):
    """Reference eigenvalue list and the tracked value for a study."""
    j = cfg.tracked_index
    if cfg.domain == "disk":
        ref = expand_eigenvalues(analytic_eigenvalues_disk(max(cfg.n_eig, j + 1)))
        return ref, ref[j - 1]
    if cfg.reference_lambda is not None:
        return None, float(cfg.reference_lambda)
    nb = cfg.base_edges * 2**cfg.levels
    res = _solve_level(
        replace(cfg, order=cfg.reference_order, degree=cfg.reference_degree), dom, nb
    )[0]
    ref = list(res.values)
    return ref, ref[j - 1]


def _solve_level(cfg, dom, n_edges):
    mesh = generate_star_mesh(dom, n_edges)
    cmesh = curve_mesh(mesh, dom, cfg.order)
    space = build_fespace(cmesh, cfg.degree)
    A = assemble_a(space)
    m_vol = assemble_m(space, "volume")
    pencil = m_vol if cfg.placement == "volume" else assemble_m(space, "boundary")
    result = solve_generalized(
        A,
        pencil,
        cfg.n_eig,
        shift=cfg.shift,
        tol=cfg.lanczos_tol,
        max_iter=cfg.max_iter,
        seed=cfg.seed,
        m_norm=m_vol,
        inner=cfg.inner_solver,
        inner_tol=cfg.inner_tol,
    )
    return result, space, mesh


def _cluster_radius(reference_list, lam_ref):
    if not reference_list:
        return 0.15 * abs(lam_ref)
    gaps = [abs(v - lam_ref) for v in reference_list if abs(v - lam_ref) > 1e-9]
    if not gaps:
        return 0.15 * abs(lam_ref)
    return 0.3 * min(gaps)


def _match_cluster(values, lam_ref, radius, index):
    """Pick the tracked eigenvalue: sorted rank if inside the cluster,
    otherwise the nearest cluster member."""
    j = index - 1
    members = np.flatnonzero(np.abs(values - lam_ref) <= radius)
    if members.size == 0:
        warnings.warn(
            f"no computed eigenvalue within {radius:.3g} of reference "
            f"{lam_ref:g}; falling back to nearest",
            stacklevel=2,
        )
        return int(np.argmin(np.abs(values - lam_ref)))
    if j in members:
        return j
    return int(members[np.argmin(np.abs(values[members] - lam_ref))])


def _run_level(cfg, dom, level, reference_list, lam_ref):
    n_edges = cfg.base_edges * 2 ** (level - 1)
    result, space, mesh = _solve_level(cfg, dom, n_edges)
    radius = _cluster_radius(reference_list, lam_ref)
    chosen = _match_cluster(result.values, lam_ref, radius, cfg.tracked_index)
    lam = float(result.values[chosen])
    e_lam = eigenvalue_error(lam, lam_ref)
    if cfg.domain == "disk":
        mode = HarmonicSpace(disk_mode_degree(cfg.tracked_index))
        vec = result.vectors[:, chosen]
        e_l2 = lifted_l2_error(space, vec, mode)
        e_h10 = lifted_h1_error(space, vec, mode)
    else:
        e_l2 = float("nan")
        e_h10 = float("nan")
    return StudyLevel(
        level, n_edges, mesh.h, space.num_dofs, lam, e_lam, e_l2, e_h10
    )


def run_study(cfg):
    """Run a convergence study; returns a :class:`StudyReport`.

    Levels n = 1..levels use base_edges * 2^(n-1) boundary edges.  The
    tracked eigenvalue is matched to its reference by cluster proximity
    rather than raw index.  If a level fails, a :class:`PartialReport`
    carrying the completed levels is raised.
    """
    cfg.validate()
    dom = make_domain(cfg.domain, cfg.alpha, cfg.beta)
    reference_list, lam_ref = _reference_values(cfg, dom)
    report = StudyReport(cfg, lam_ref)

    def work(level):
        return _run_level(cfg, dom, level, reference_list, lam_ref)

    levels = range(1, cfg.levels + 1)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {level: pool.submit(work, level) for level in levels}
            for level in levels:
                try:
                    report.levels.append(futures[level].result())
                except VentcelError as exc:
                    for fut in futures.values():
                        fut.cancel()
                    raise PartialReport(report, exc) from exc
    else:
        for level in levels:
            try:
                report.levels.append(work(level))
            except VentcelError as exc:
                raise PartialReport(report, exc) from exc
    return report


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.12g}"


def report_csv(report):
    """CSV body: one row per level."""
    lines = ["level,h,ndof,lambda,e_lambda,e_l2,e_h10"]
    for lv in report.levels:
        lines.append(
            f"{lv.level},{_fmt(lv.h)},{lv.ndof},{_fmt(lv.lam)},"
            f"{_fmt(lv.e_lambda)},{_fmt(lv.e_l2)},{_fmt(lv.e_h10)}"
        )
    return "\n".join(lines) + "\n"


def eoc_csv(report):
    """CSV of convergence orders between successive level pairs."""
    lines = ["pair,order_lambda,order_l2,order_h10"]
    ol, o2, oh = report.orders_lambda, report.orders_l2, report.orders_h10
    for i in range(len(ol)):
        pair = f"{report.levels[i].level}-{report.levels[i + 1].level}"
        lines.append(f"{pair},{_fmt(ol[i])},{_fmt(o2[i])},{_fmt(oh[i])}")
    return "\n".join(lines) + "\n"


def report_table(report):
    """Human-readable per-level table with trailing convergence orders."""
    cfg = report.config
    head = (
        f"domain={cfg.domain} r={cfg.order} k={cfg.degree} "
        f"placement={cfg.placement} tracked_index={cfg.tracked_index} "
        f"reference={_fmt(report.reference)}"
    )
    cols = f"{'lvl':>3} {'edges':>6} {'h':>12} {'ndof':>8} {'lambda':>18} {'e_lambda':>12} {'e_l2':>12} {'e_h10':>12}"
    rows = [head, cols]
    for lv in report.levels:
        rows.append(
            f"{lv.level:>3} {lv.n_edges:>6} {lv.h:>12.5e} {lv.ndof:>8} "
            f"{lv.lam:>18.12f} {lv.e_lambda:>12.4e} {lv.e_l2:>12.4e} {lv.e_h10:>12.4e}"
        )
    if len(report.levels) >= 2:
        ol, o2, oh = report.orders_lambda, report.orders_l2, report.orders_h10
        rows.append(
            "orders (finest pair): "
            f"lambda={_fmt(ol[-1])} l2={_fmt(o2[-1])} h10={_fmt(oh[-1])}"
        )
    return "\n".join(rows) + "\n"


def plot_data(report):
    """Gnuplot-friendly whitespace table: h and the three errors."""
    lines = ["# h e_lambda e_l2 e_h10"]
    for lv in report.levels:
        lines.append(
            f"{_fmt(lv.h)} {_fmt(lv.e_lambda)} {_fmt(lv.e_l2)} {_fmt(lv.e_h10)}"
        )
    return "\n".join(lines) + "\n"
