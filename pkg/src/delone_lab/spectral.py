"""Eigenpairs and resolvent estimates for discretised Hamiltonians.

Every routine accepts either a :class:`~delone_lab.hamiltonian.DiscretizedHamiltonian`
or a bare symmetric matrix (dense or sparse); for bare matrices the node
weight is 1 and grid-based helpers are unavailable.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import DiscretizedHamiltonian

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
EXACT_HIT_TOL = 1e-12
RESIDUAL_RTOL = 1e-8
CT_SLACK = 1.1


class SpectralError(RuntimeError):
    pass


class ConvergenceError(SpectralError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


def _unpack(H):
    if isinstance(H, DiscretizedHamiltonian):
        return H.matrix, H.grid.cell_volume, H.grid
    if sp.issparse(H):
        return H.tocsr(), 1.0, None
    return np.asarray(H, dtype=float), 1.0, None


def _is_tridiagonal(A):
    if not sp.issparse(A):
        return False
    coo = A.tocoo()
    return bool(np.all(np.abs(coo.row - coo.col) <= 1))


@dataclass
class EigenResult:
    """Eigenpairs in ascending order; vectors are unit-norm in the ``h^d``-weighted product."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    cell_volume: float = 1.0
    exact_hit: bool = False
    method: str = ""

    def __len__(self):
        return len(self.eigenvalues)

    def to_csv(self, path, ipr=None, decay_rate=None):
        n = len(self)
        ipr = ipr if ipr is not None else [float("nan")] * n
        decay_rate = decay_rate if decay_rate is not None else [float("nan")] * n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue", "residual", "IPR", "decay_rate"])
            for i in range(n):
                w.writerow([i] + [f"{float(v):.17g}" for v in
                                  (self.eigenvalues[i], self.residuals[i], ipr[i], decay_rate[i])])


def _finish(A, lam, vecs, cell_volume, method, exact_hit=False):
    """Normalise the pairs and enforce the residual contract."""
    order = np.argsort(lam, kind="stable")
    lam = np.asarray(lam, dtype=float)[order]
    vecs = np.asarray(vecs, dtype=float)[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    res = np.linalg.norm(A @ vecs - vecs * lam, axis=0)
    bad = res > RESIDUAL_RTOL * (1 + np.abs(lam))
    if np.any(bad):
        raise ConvergenceError(
            f"eigenpair residual contract violated ({method}): max residual {res.max():.3e}", res
        )
    # Fix signs so the largest-magnitude component is positive.
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs / math.sqrt(cell_volume)
    return EigenResult(lam, vecs, res, cell_volume, exact_hit, method)


class _ShiftInvert:
    """Factorised ``(A - sigma)^{-1}``; nudges sigma off an exact singularity."""

    def __init__(self, A, sigma):
        n = A.shape[0]
        scale = 1.0 + abs(sigma)
        self.sigma = sigma
        for attempt in range(4):
            try:
                if sp.issparse(A):
                    lu = spla.splu((A - self.sigma * sp.identity(n, format="csr")).tocsc())
                    self.solve = lu.solve
                else:
                    lu = sla.lu_factor(A - self.sigma * np.eye(n), check_finite=False)
                    if np.any(np.abs(np.diag(lu[0])) == 0):
                        raise RuntimeError("singular")
                    self.solve = lambda b, lu=lu: sla.lu_solve(lu, b, check_finite=False)
                return
            except RuntimeError:
                self.sigma = sigma + scale * 1e-10 * 10 ** attempt
        raise SpectralError(f"cannot factorise A - {sigma} I")


def lanczos_shift_invert(A, sigma, k, max_iter=400, start=None):
    """Lanczos with full reorthogonalisation on ``(A - sigma)^{-1}``.

    Returns the ``k`` eigenpairs of ``A`` closest to ``sigma`` as
    ``(eigenvalues, vectors, effective_sigma)``; vectors are Euclidean-unit.
    """
    n = A.shape[0]
    k = min(k, n)
    op = _ShiftInvert(A, sigma)
    rng = np.random.default_rng(20240611)
    q = rng.standard_normal(n) if start is None else np.asarray(start, dtype=float).copy()
    q /= np.linalg.norm(q)
    m_max = min(n, max(max_iter, 2 * k + 20))
    Q = np.zeros((n, m_max + 1))
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    Q[:, 0] = q
    lam = vecs = None
    for j in range(m_max):
        w = op.solve(Q[:, j])
        alpha[j] = Q[:, j] @ w
        w -= alpha[j] * Q[:, j]
        if j > 0:
            w -= beta[j - 1] * Q[:, j - 1]
        for _ in range(2):
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        b = np.linalg.norm(w)
        m = j + 1
        if m >= k and (m % 5 == 0 or m == m_max or b < 1e-12 * max(1.0, abs(alpha[j]))):
            theta, s = sla.eigh_tridiagonal(alpha[:m], beta[: m - 1])
            pick = np.argsort(-np.abs(theta), kind="stable")[:k]
            est = np.abs(b * s[-1, pick])
            if np.all(est <= 1e-12 * np.abs(theta[pick])) or m == m_max:
                lam = op.sigma + 1.0 / theta[pick]
                vecs = Q[:, :m] @ s[:, pick]
                res = np.linalg.norm(A @ vecs / np.linalg.norm(vecs, axis=0)
                                     - vecs / np.linalg.norm(vecs, axis=0) * lam, axis=0)
                if np.all(res <= RESIDUAL_RTOL * (1 + np.abs(lam))) or m == m_max:
                    break
        if b < 1e-12 * max(1.0, abs(alpha[j])):
            # invariant subspace: continue with a fresh orthogonal direction
            w = rng.standard_normal(n)
            for _ in range(2):
                w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
            b_new = np.linalg.norm(w)
            beta[j] = 0.0
            if b_new == 0:
                break
            Q[:, j + 1] = w / b_new
            continue
        beta[j] = b
        Q[:, j + 1] = w / b
    if lam is None:
        raise ConvergenceError("Lanczos did not produce Ritz pairs")
    lam, vecs = _refine(A, op, lam, vecs)
    return lam, vecs, op.sigma


def _refine(A, op, lam, vecs, steps=2):
    """Subspace inverse iteration plus Rayleigh-Ritz to polish Ritz pairs.

    Lanczos convergence is judged on ``(A - sigma)^{-1}``; one or two extra
    solves remove the ``||A||`` amplification of the residual in ``A``-space.
    """
    order = np.argsort(np.abs(lam - op.sigma))
    V = vecs[:, order]
    for _ in range(steps):
        V = np.column_stack([op.solve(V[:, i]) for i in range(V.shape[1])])
        V, _ = np.linalg.qr(V)
        theta, S = np.linalg.eigh(V.T @ (A @ V))
        V = V @ S
    return theta, V


def _lower_bound(A):
    if sp.issparse(A):
        diag = A.diagonal()
        off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    else:
        diag = np.diag(A)
        off = np.abs(A).sum(axis=1) - np.abs(diag)
    return float(np.min(diag - off))


def lowest_eigenpairs(H, k=1, method="auto") -> EigenResult:
    """The ``k`` smallest eigenpairs."""
    A, vol, _ = _unpack(H)
    n = A.shape[0]
    k = min(k, n)
    if method == "auto":
        if _is_tridiagonal(A) and n > 64:
            method = "tridiagonal"
        elif n <= DENSE_LIMIT:
            method = "dense"
        else:
            method = "lanczos"
    if method == "tridiagonal":
        lam, vecs = sla.eigh_tridiagonal(A.diagonal(), A.diagonal(1), select="i",
                                         select_range=(0, k - 1))
    elif method == "dense":
        dense = A.toarray() if sp.issparse(A) else A
        lam, vecs = sla.eigh(dense, subset_by_index=(0, k - 1))
    elif method == "lanczos":
        sigma = _lower_bound(A) - 1.0
        lam, vecs, _ = lanczos_shift_invert(A, sigma, k)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _finish(A, lam, vecs, vol, method)


def ground_state(H, method="auto"):
    """Smallest eigenvalue and its weighted-normalised eigenvector."""
    res = lowest_eigenpairs(H, 1, method)
    return float(res.eigenvalues[0]), res.eigenvectors[:, 0]


def eigs_near(H, E, k=1, method="auto") -> EigenResult:
    """The ``k`` eigenvalues closest to ``E`` (ties toward the smaller eigenvalue)."""
    A, vol, _ = _unpack(H)
    n = A.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, n)
    if method == "auto":
        if n <= 64:
            method = "dense"
        elif _is_tridiagonal(A):
            method = "tridiagonal"
        else:
            method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "tridiagonal":
        diag, off = A.diagonal(), A.diagonal(1)
        below = _sturm_count(diag, off, E)
        lo, hi = max(0, below - k), min(n - 1, below + k - 1)
        lam, vecs = sla.eigh_tridiagonal(diag, off, select="i", select_range=(lo, hi))
        order = np.lexsort((lam, np.abs(lam - E)))[:k]
        lam, vecs = lam[order], vecs[:, order]
    elif method == "dense":
        dense = A.toarray() if sp.issparse(A) else A
        lam, vecs = sla.eigh(dense)
        order = np.lexsort((lam, np.abs(lam - E)))[:k]
        lam, vecs = lam[order], vecs[:, order]
    elif method == "lanczos":
        lam, vecs, _ = lanczos_shift_invert(A, E, k)
        order = np.lexsort((lam, np.abs(lam - E)))
        lam, vecs = lam[order], vecs[:, order]
    else:
        raise ValueError(f"unknown method {method!r}")
    hit = bool(np.min(np.abs(lam - E)) <= EXACT_HIT_TOL * max(1.0, abs(E)))
    return _finish(A, lam, vecs, vol, method, exact_hit=hit)


def _sturm_count(diag, off, E):
    """Number of eigenvalues of the symmetric tridiagonal matrix strictly below ``E``."""
    count = 0
    q = 1.0
    off2 = np.square(off).tolist()
    tiny = np.finfo(float).tiny
    for i, a in enumerate(diag.tolist()):
        q = a - E - (off2[i - 1] / q if i else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def resolvent_norm(H, E, method="auto") -> float:
    """``||(H - E)^{-1}|| = 1 / dist(E, sigma(H))`` for symmetric ``H``."""
    res = eigs_near(H, E, 1, method)
    if res.exact_hit:
        raise SpectralError(f"E = {E} in spectrum")
    return 1.0 / abs(float(res.eigenvalues[0]) - E)


class ResolventSolver:
    """Factorisation of ``H - E`` reused across block-norm evaluations."""

    def __init__(self, H, E):
        A, _, grid = _unpack(H)
        self.grid = grid
        self.E = E
        n = A.shape[0]
        M = A - E * (sp.identity(n, format="csr") if sp.issparse(A) else np.eye(n))
        if sp.issparse(M):
            try:
                self.solve = spla.splu(sp.csc_matrix(M)).solve
            except RuntimeError as exc:
                raise SpectralError(f"E = {E} in spectrum (singular factorisation)") from exc
        else:
            lu = sla.lu_factor(M, check_finite=False)
            if np.any(np.abs(np.diag(lu[0])) <= 1e-300):
                raise SpectralError(f"E = {E} in spectrum (singular factorisation)")
            self.solve = lambda b: sla.lu_solve(lu, b, check_finite=False)

    def block_norm(self, mask_y, mask_z, tol=1e-6, max_iter=200):
        """``||P_y (H - E)^{-1} P_z||`` by power iteration on ``B^T B``."""
        if not mask_y.any() or not mask_z.any():
            return 0.0
        v = mask_z.astype(float)
        v /= np.linalg.norm(v)
        est = 0.0
        for it in range(max_iter):
            w = self.solve(v)
            w[~mask_y] = 0.0
            u = self.solve(w)
            u[~mask_z] = 0.0
            new = float(v @ u)
            nu = np.linalg.norm(u)
            if not np.isfinite(nu):
                raise SpectralError("non-finite resolvent solve")
            if nu == 0.0:
                return 0.0
            v = u / nu
            if it > 0 and abs(new - est) <= tol * abs(new):
                est = new
                break
            est = new
        else:
            log.warning("block norm power iteration hit the %d-iteration cap", max_iter)
        return math.sqrt(max(est, 0.0))


def _grid_masks(grid, y, z, s):
    from .geometry import cube_contains_cube

    y = np.broadcast_to(np.asarray(y, dtype=float), (grid.dim,))
    z = np.broadcast_to(np.asarray(z, dtype=float), (grid.dim,))
    for c in (y, z):
        if not cube_contains_cube(grid.centre, grid.L, c, s):
            raise ValueError(f"Lambda_{s}({c}) is not contained in the grid box")
    return grid.mask_in_cube(y, s), grid.mask_in_cube(z, s)


def local_resolvent_block(H, E, y, z, s, solver=None, tol=1e-6) -> float:
    """Operator norm of ``chi_y (H - E)^{-1} chi_z`` for node indicators of width ``s``."""
    if not isinstance(H, DiscretizedHamiltonian):
        raise TypeError("local_resolvent_block needs a DiscretizedHamiltonian")
    my, mz = _grid_masks(H.grid, y, z, s)
    solver = solver or ResolventSolver(H, E)
    return solver.block_norm(my, mz, tol=tol)


def combes_thomas_bound(eta: float, d: int, dist: float) -> float:
    """``4/(3 eta) * exp(sqrt(eta)/2 * (sqrt(d) - dist))``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if dist < 0:
        raise ValueError("distance must be non-negative")
    return 4.0 / (3.0 * eta) * math.exp(0.5 * math.sqrt(eta) * (math.sqrt(d) - dist))


@dataclass
class CombesThomasReport:
    E: float
    lambda0: float
    eta: float
    width: float
    slack: float
    rows: list = field(default_factory=list)

    @property
    def failures(self):
        return [r for r in self.rows if not r["holds"]]

    @property
    def holds(self):
        return not self.failures


def combes_thomas_check(H, E, pairs, width=1.0, slack=CT_SLACK) -> CombesThomasReport:
    """Compare measured block norms with the Combes-Thomas bound below the spectrum."""
    lam0, _ = ground_state(H)
    if E >= lam0:
        raise ValueError(f"E = {E} is not below inf sigma(H) = {lam0}")
    eta = lam0 - E
    solver = ResolventSolver(H, E)
    rep = CombesThomasReport(E, lam0, eta, width, slack)
    d = H.grid.dim
    for y, z in pairs:
        dist = float(np.linalg.norm(np.atleast_1d(y) - np.atleast_1d(z)))
        measured = local_resolvent_block(H, E, y, z, width, solver=solver)
        bound = combes_thomas_bound(eta, d, dist)
        rep.rows.append({
            "y": np.atleast_1d(y).tolist(), "z": np.atleast_1d(z).tolist(), "dist": dist,
            "measured": measured, "bound": bound,
            "margin": bound / measured if measured > 0 else math.inf,
            "holds": measured <= slack * bound,
        })
    return rep


def inverse_participation_ratio(phi, cell_volume=1.0) -> float:
    """``sum phi^4 h^d / (sum phi^2 h^d)^2``."""
    phi = np.asarray(phi, dtype=float)
    num = np.sum(phi ** 4) * cell_volume
    den = (np.sum(phi ** 2) * cell_volume) ** 2
    return float(num / den)


def decay_rate(phi, grid) -> float:
    """Negative least-squares slope of log shell-max |phi| versus sup-norm radius."""
    a = np.abs(np.asarray(phi, dtype=float)).reshape(grid.shape)
    centre = np.unravel_index(int(np.argmax(a)), a.shape)
    idx = np.indices(a.shape)
    shell = np.max(np.abs(idx - np.asarray(centre).reshape((-1,) + (1,) * grid.dim)), axis=0)
    nshell = int(shell.max()) + 1
    smax = np.zeros(nshell)
    np.maximum.at(smax, shell.ravel(), a.ravel())
    radius = grid.h * np.arange(nshell)
    ok = smax > 1e-300
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(radius[ok], np.log(smax[ok]), 1)[0]
    return float(-slope)


@dataclass
class LocalizationProfile:
    eigen: EigenResult
    ipr: np.ndarray
    decay_rate: np.ndarray

    def to_csv(self, path):
        self.eigen.to_csv(path, self.ipr, self.decay_rate)


def localization_profile(H: DiscretizedHamiltonian, k: int) -> LocalizationProfile:
    """IPR and envelope decay rate of the ``k`` lowest eigenvectors."""
    if k < 1:
        raise ValueError("k must be at least 1")
    res = lowest_eigenpairs(H, k)
    vol = H.grid.cell_volume
    ipr = np.array([inverse_participation_ratio(res.eigenvectors[:, i], vol) for i in range(len(res))])
    rates = np.array([decay_rate(res.eigenvectors[:, i], H.grid) for i in range(len(res))])
    return LocalizationProfile(res, ipr, rates)


__all__ = [
    "CombesThomasReport", "ConvergenceError", "EigenResult", "LocalizationProfile",
    "ResolventSolver", "SpectralError", "combes_thomas_bound", "combes_thomas_check",
    "decay_rate", "eigs_near", "ground_state", "inverse_participation_ratio",
    "lanczos_shift_invert", "local_resolvent_block", "localization_profile",
    "lowest_eigenpairs", "resolvent_norm",
]
