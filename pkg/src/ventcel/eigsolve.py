"""Generalized symmetric eigensolver: shift-invert Lanczos.

Solves A x = L M x for the smallest eigenvalues of an SPD/PSD pencil by
Lanczos iteration on (A - shift*M)^{-1} M with the M-(semi)inner
product and full reorthogonalization.  A negative shift keeps
A - shift*M positive definite even when M is singular (boundary mass),
and singular directions of M are invisible to the iteration because the
start vector is pushed into the range of the operator.

Inner solves use a Cholesky/LU factorization by default (fast, exact);
a Jacobi-preconditioned conjugate gradient is available as an option
and as a standalone solver.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InnerSolveFailure, NotConverged

_DENSE_LIMIT = 5000


def solve_spd(K, b, tol=1e-14, max_iter=None):
    """Jacobi-preconditioned conjugate gradient for SPD systems.

    Stops when ||K x - b||_2 <= tol * ||b||_2.  Raises
    InnerSolveFailure on a non-positive diagonal and NotConverged when
    the iteration budget (default 10n) runs out.
    """
    K = sp.csr_matrix(K)
    b = np.asarray(b, dtype=float)
    n = K.shape[0]
    diag = K.diagonal()
    if np.any(diag <= 0.0):
        raise InnerSolveFailure("matrix has a non-positive diagonal entry")
    limit = 10 * n if max_iter is None else int(max_iter)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n)
    x = np.zeros(n)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    for it in range(1, limit + 1):
        Kp = K @ p
        alpha = rz / (p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        if np.linalg.norm(r) <= tol * norm_b:
            return x
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NotConverged(
        f"PCG stalled at relative residual "
        f"{np.linalg.norm(r) / norm_b:.3e} after {limit} iterations",
        iterations=limit,
    )


@dataclass
class EigenResult:
    """Eigenpairs of the pencil, ascending, with recomputed residuals.

    ``residuals[j]`` is ||A x_j - L_j M x_j||_2 / ||x_j||_2, recomputed
    from the returned vectors; ``iterations`` counts Lanczos steps.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int


def _make_inner_solver(K, mode, inner_tol):
    if mode == "pcg":
        return lambda rhs: solve_spd(K, rhs, tol=inner_tol)
    if mode != "direct":
        raise ValueError(f"unknown inner solver '{mode}'")
    try:
        if K.shape[0] <= _DENSE_LIMIT:
            chol = sla.cho_factor(K.toarray(), check_finite=False)
            return lambda rhs: sla.cho_solve(chol, rhs, check_finite=False)
        lu = spla.splu(K.tocsc())
        return lu.solve
    except (sla.LinAlgError, RuntimeError) as exc:
        raise InnerSolveFailure(f"factorization of A - shift*M failed: {exc}") from exc


def _lanczos(op, M, v0, m_dim, n_eig, tol):
    """One Lanczos sweep of dimension m_dim in the M-inner product.

    Returns (ritz values nu descending, ritz vectors, error bounds,
    steps) for the n_eig largest nu.
    """
    n = v0.shape[0]
    V = np.zeros((n, m_dim))
    MV = np.zeros((n, m_dim))
    alphas = np.zeros(m_dim)
    betas = np.zeros(m_dim)
    v = v0
    beta_prev = 0.0
    steps = 0
    for j in range(m_dim):
        V[:, j] = v
        Mv = M @ v
        MV[:, j] = Mv
        w = op(Mv)
        alpha = w @ Mv
        alphas[j] = alpha
        w = w - alpha * v
        if j > 0:
            w = w - beta_prev * V[:, j - 1]
        for _ in range(2):
            w = w - V[:, : j + 1] @ (MV[:, : j + 1].T @ w)
        beta = np.sqrt(max(w @ (M @ w), 0.0))
        steps = j + 1
        scale = max(np.max(np.abs(alphas[: j + 1])), 1.0)
        if beta <= 1e-13 * scale or j == m_dim - 1:
            betas[j] = beta
            break
        betas[j] = beta
        beta_prev = beta
        v = w / beta
    m_eff = steps
    T_diag = alphas[:m_eff]
    T_off = betas[: m_eff - 1]
    nu, Y = sla.eigh_tridiagonal(T_diag, T_off)
    take = min(n_eig, m_eff)
    idx = np.argsort(nu)[::-1][:take]
    nu_sel = nu[idx]
    Y_sel = Y[:, idx]
    bounds = np.abs(betas[m_eff - 1] * Y_sel[m_eff - 1, :])
    vectors = V[:, :m_eff] @ Y_sel
    return nu_sel, vectors, bounds, steps


def solve_generalized(
    A,
    M,
    n_eig,
    shift=-1.0,
    tol=1e-12,
    max_iter=500,
    seed=0,
    m_norm=None,
    inner="direct",
    inner_tol=1e-14,
):
    """Smallest ``n_eig`` eigenvalues of A x = L M x by shift-invert Lanczos.

    ``A`` must be SPD and ``M`` symmetric positive semidefinite with
    rank >= n_eig; ``shift`` must be negative so the shifted matrix
    stays definite.  Eigenvectors are scaled to unit ``m_norm``-norm
    (the pencil mass by default) and eigenvalues certified against
    recomputed residuals at tolerance ``tol``.  Deterministic for fixed
    ``seed``.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    n = A.shape[0]
    if not 1 <= n_eig <= n:
        raise ValueError(f"n_eig must be in 1..{n}, got {n_eig}")
    if shift >= 0.0:
        raise ValueError("shift must be negative to keep A - shift*M definite")
    K = (A - shift * M).tocsc()
    solve = _make_inner_solver(K, inner, inner_tol)

    rng = np.random.default_rng(seed)
    r0 = rng.standard_normal(n)
    v = solve(M @ r0)
    beta0 = np.sqrt(max(v @ (M @ v), 0.0))
    if beta0 <= 0.0:
        raise InnerSolveFailure("mass matrix annihilates the start vector")
    v = v / beta0

    m_dim = min(n, max(4 * n_eig + 20, n_eig + 2))
    cap = min(n, max(int(max_iter), m_dim))
    total_steps = 0
    while True:
        nu, vectors, bounds, steps = _lanczos(solve, M, v, m_dim, n_eig, tol)
        total_steps += steps
        ok = len(nu) == n_eig and np.all(nu > 0.0)
        ok = ok and np.all(bounds <= tol * np.maximum(np.abs(nu), 1e-300))
        if ok or m_dim >= cap:
            break
        m_dim = min(cap, int(1.6 * m_dim) + 1)
    if not ok:
        raise NotConverged(
            f"Lanczos did not converge {n_eig} eigenvalues within "
            f"Krylov dimension {m_dim}",
            iterations=total_steps,
        )

    values = shift + 1.0 / nu
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]

    norm_mat = M if m_norm is None else sp.csr_matrix(m_norm)
    for j in range(n_eig):
        s = np.sqrt(vectors[:, j] @ (norm_mat @ vectors[:, j]))
        if s <= 0.0:
            raise NotConverged("eigenvector with zero norm in the scaling mass")
        vectors[:, j] /= s

    residuals = np.empty(n_eig)
    scale = spla.norm(A, 1) + np.abs(values) * spla.norm(M, 1)
    for j in range(n_eig):
        x = vectors[:, j]
        residuals[j] = np.linalg.norm(A @ x - values[j] * (M @ x)) / np.linalg.norm(x)
    if np.any(residuals > tol * scale):
        worst = float(np.max(residuals / scale))
        raise NotConverged(
            f"residual certificate failed: max scaled residual {worst:.3e} > {tol:g}",
            iterations=total_steps,
        )
    return EigenResult(values, vectors, residuals, total_steps)
