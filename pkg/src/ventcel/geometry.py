"""Smooth star-shaped 2D domains with boundary projection queries.

A domain is described by a positive radial profile rho(theta), so its
boundary is the closed curve gamma(theta) = rho(theta) (cos theta,
sin theta).  Two profiles are provided: the disk (constant radius) and
a flower-like profile used for non-convex, non-symmetric geometry.
All boundary derivatives are analytic, which keeps Newton projection
and the element-map differentials free of finite-difference noise.

All queries are vectorized over points; scalars in, scalars out.
"""

import warnings

import numpy as np

from .errors import BadParameter, NoConvergence

_TWO_PI = 2.0 * np.pi


class SmoothDomain:
    """Closed smooth domain bounded by a radial-profile Jordan curve.

    Subclasses implement ``profile`` returning the radius and its first
    three derivatives with respect to theta.
    """

    def __init__(self, closest_point_tol=1e-12):
        self.closest_point_tol = float(closest_point_tol)
        theta = np.linspace(0.0, _TWO_PI, 4096, endpoint=False)
        rho = self.profile(theta)[0]
        if np.min(rho) <= 0.0:
            raise BadParameter("radial profile must stay positive (star-shapedness)")
        self._rho_min = float(np.min(rho))
        kappa = self.curvature(theta)
        reach = 1.0 / max(np.max(np.abs(kappa)), 1e-30)
        # Conservative half-width of the strip where the projection is trusted.
        self.tube_width = 0.5 * min(reach, self._rho_min)

    def profile(self, theta):
        """Radius rho and derivatives (rho, rho', rho'', rho''') at theta."""
        raise NotImplementedError

    # -- boundary curve ------------------------------------------------

    def boundary_point(self, theta):
        """Point gamma(theta) on the boundary."""
        theta = np.asarray(theta, dtype=float)
        rho = self.profile(theta)[0]
        out = np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)
        return out

    def boundary_derivatives(self, theta):
        """gamma, gamma' and gamma'' stacked ala (..., 2) arrays."""
        theta = np.asarray(theta, dtype=float)
        rho, d1, d2, _ = self.profile(theta)
        er = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        et = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        g = rho[..., None] * er
        g1 = d1[..., None] * er + rho[..., None] * et
        g2 = (d2 - rho)[..., None] * er + (2.0 * d1)[..., None] * et
        return g, g1, g2

    def curvature(self, theta):
        """Signed curvature of the boundary (positive where convex)."""
        _, g1, g2 = self.boundary_derivatives(theta)
        cross = g1[..., 0] * g2[..., 1] - g1[..., 1] * g2[..., 0]
        speed = np.sqrt(g1[..., 0] ** 2 + g1[..., 1] ** 2)
        return cross / speed**3

    def outward_normal(self, theta):
        """Unit outward normal at gamma(theta)."""
        _, g1, _ = self.boundary_derivatives(theta)
        speed = np.sqrt(g1[..., 0] ** 2 + g1[..., 1] ** 2)
        return np.stack([g1[..., 1], -g1[..., 0]], axis=-1) / speed[..., None]

    # -- projection queries ---------------------------------------------

    def contains(self, x):
        """True for points inside the domain (star-shape radial test)."""
        x = np.asarray(x, dtype=float)
        theta = np.arctan2(x[..., 1], x[..., 0])
        rho = self.profile(theta)[0]
        return np.hypot(x[..., 0], x[..., 1]) < rho

    def closest_point(self, x, max_iter=50):
        """Orthogonal projection onto the boundary.

        Returns ``(b, theta)`` with b = gamma(theta) the closest boundary
        point.  Newton iteration on the stationarity condition
        (x - gamma).gamma' = 0, seeded by the polar angle, with a scan +
        golden-section fallback for stragglers.  Raises NoConvergence if
        the stationarity residual cannot be driven below tolerance.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        theta = self._newton_project(pts, theta, max_iter)
        b = self.boundary_point(theta)
        self._warn_if_outside_tube(pts, b)
        if single:
            return b[0], float(theta[0])
        return b, theta

    def signed_distance(self, x):
        """Distance to the boundary, negative inside the domain."""
        x = np.asarray(x, dtype=float)
        b, _ = self.closest_point(x)
        dist = np.linalg.norm(np.atleast_2d(x) - np.atleast_2d(b), axis=1)
        sign = np.where(self.contains(np.atleast_2d(x)), -1.0, 1.0)
        d = sign * dist
        return float(d[0]) if x.ndim == 1 else d

    def project(self, x):
        """Projection with bookkeeping: returns (b, theta, signed distance)."""
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        b, theta = self.closest_point(pts)
        dist = np.linalg.norm(pts - b, axis=1)
        d = np.where(self.contains(pts), -dist, dist)
        if x.ndim == 1:
            return b[0], float(theta[0]), float(d[0])
        return b, theta, d

    def projection_jacobian(self, theta, d):
        """Differential of the projection map at distance d from gamma(theta).

        On a plane curve the projection is constant along normals and
        contracts tangentially by 1/(1 + d*curvature), hence
        Db = tau tau^T / (1 + d kappa).
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        _, g1, _ = self.boundary_derivatives(theta)
        speed = np.linalg.norm(g1, axis=-1)
        tau = g1 / speed[:, None]
        kappa = self.curvature(theta)
        factor = 1.0 / (1.0 + d * kappa)
        return factor[:, None, None] * tau[:, :, None] * tau[:, None, :]

    # -- internals -------------------------------------------------------

    def _stationarity(self, pts, theta):
        g, g1, g2 = self.boundary_derivatives(theta)
        r = pts - g
        f = np.einsum("ij,ij->i", r, g1)
        df = -np.einsum("ij,ij->i", g1, g1) + np.einsum("ij,ij->i", r, g2)
        return f, df, g1

    def _newton_project(self, pts, theta, max_iter):
        tol = self.closest_point_tol
        active = np.ones(len(theta), dtype=bool)
        for _ in range(max_iter):
            f, df, g1 = self._stationarity(pts[active], theta[active])
            speed = np.linalg.norm(g1, axis=1)
            done = np.abs(f) <= tol * speed
            if np.all(done):
                active[active] = ~done
                break
            step = np.clip(-f / np.where(np.abs(df) > 1e-300, df, 1.0), -0.5, 0.5)
            step[done] = 0.0
            theta_active = theta[active]
            theta_active += step
            theta[active] = theta_active
            sub = active.copy()
            sub[active] = ~done
            active = sub
        if np.any(active):
            idx = np.flatnonzero(active)
            theta[idx] = self._scan_project(pts[idx])
            f, _, g1 = self._stationarity(pts[idx], theta[idx])
            bad = np.abs(f) > tol * np.linalg.norm(g1, axis=1)
            if np.any(bad):
                raise NoConvergence(
                    f"projection failed for {int(bad.sum())} point(s); "
                    "outside the tubular neighborhood or tolerance too tight"
                )
        return theta

    def _scan_project(self, pts):
        """Dense scan plus golden-section refinement; fallback path."""
        grid = np.linspace(0.0, _TWO_PI, 2048, endpoint=False)
        g = self.boundary_point(grid)
        d2 = (
            (pts[:, None, 0] - g[None, :, 0]) ** 2
            + (pts[:, None, 1] - g[None, :, 1]) ** 2
        )
        best = np.argmin(d2, axis=1)
        step = grid[1] - grid[0]
        lo = grid[best] - step
        hi = grid[best] + step
        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        for _ in range(80):
            m1 = hi - invphi * (hi - lo)
            m2 = lo + invphi * (hi - lo)
            f1 = np.linalg.norm(pts - self.boundary_point(m1), axis=1)
            f2 = np.linalg.norm(pts - self.boundary_point(m2), axis=1)
            take1 = f1 < f2
            hi = np.where(take1, m2, hi)
            lo = np.where(take1, lo, m1)
        return 0.5 * (lo + hi)

    def _warn_if_outside_tube(self, pts, b):
        dist = np.linalg.norm(pts - b, axis=1)
        if np.any(dist > self.tube_width):
            warnings.warn(
                "projection queried outside the trusted boundary strip "
                f"(max distance {dist.max():.3g} > {self.tube_width:.3g})",
                stacklevel=3,
            )


class Disk(SmoothDomain):
    """Disk of given radius centered at the origin."""

    def __init__(self, radius=1.0, **kwargs):
        if radius <= 0:
            raise BadParameter("disk radius must be positive")
        self.radius = float(radius)
        super().__init__(**kwargs)

    def profile(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.radius)
        z = np.zeros_like(theta)
        return r, z, z, z

    def closest_point(self, x, max_iter=50):
        # Analytic radial projection; the generic Newton path stays
        # available through SmoothDomain for cross-checking.
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        norms = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(norms < 1e-300):
            raise NoConvergence("projection undefined at the disk center")
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        b = self.radius * pts / norms[:, None]
        self._warn_if_outside_tube(pts, b)
        if single:
            return b[0], float(theta[0])
        return b, theta


class StarCurve(SmoothDomain):
    """Flower-like domain with profile 1 + a cos t + b sin t + (b/2) sin 3t."""

    def __init__(self, alpha=0.3, beta=0.4, **kwargs):
        self.alpha = float(alpha)
        self.beta = float(beta)
        super().__init__(**kwargs)

    def profile(self, theta):
        theta = np.asarray(theta, dtype=float)
        a, b = self.alpha, self.beta
        ct, st = np.cos(theta), np.sin(theta)
        c3, s3 = np.cos(3.0 * theta), np.sin(3.0 * theta)
        rho = 1.0 + a * ct + b * st + 0.5 * b * s3
        d1 = -a * st + b * ct + 1.5 * b * c3
        d2 = -a * ct - b * st - 4.5 * b * s3
        d3 = a * st - b * ct - 13.5 * b * c3
        return rho, d1, d2, d3


def make_domain(kind, alpha=0.3, beta=0.4, radius=1.0):
    """Build a domain from its CLI/config name: 'disk' or 'flower'."""
    kind = kind.strip().lower()
    if kind == "disk":
        return Disk(radius=radius)
    if kind == "flower":
        return StarCurve(alpha=alpha, beta=beta)
    raise BadParameter(f"unknown domain '{kind}' (expected 'disk' or 'flower')")
