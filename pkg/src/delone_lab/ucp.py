"""One-dimensional quantitative unique continuation and spectral lifting.

The constants here are astronomically small at desk-scale parameters, so every
comparison is done in log space; linear values are reported alongside and may
underflow to 0.0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import GridSpec, hamiltonian_from_potential
from .spectral import CT_SLACK, ground_state

SET_TOL = 1e-9

# UCP growth exponent gamma in C_UC(M) ~ M^{-C M^gamma} and the admissible window for p.
UCP_GAMMA = {1: (1.0, (0.0, 0.5)), 2: (4.0 / 3.0, (1.0 / 3.0, 3.0 / 8.0))}
GAMMA_LIMIT = (1.0 + math.sqrt(3.0)) / 2.0


def ucp_gamma_metadata(d: int) -> dict:
    """UCP exponent and the implied admissible range of ``p`` for the multiscale analysis."""
    gamma, (lo, hi) = UCP_GAMMA[1 if d == 1 else 2]
    return {"d": d, "gamma": gamma, "p_window": [lo, hi], "gamma_limit": GAMMA_LIMIT,
            "gamma_admissible": gamma < GAMMA_LIMIT}


def c_sve(s: float, v_sup_dev: float) -> float:
    """``2 * sqrt(2 * 18^2 / s^2 + 2 s^2 ||V - E||_inf^2)``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if v_sup_dev < 0:
        raise ValueError("||V - E||_inf must be non-negative")
    return 2.0 * math.sqrt(2.0 * 18.0 ** 2 / s ** 2 + 2.0 * s ** 2 * v_sup_dev ** 2)


def log_ucp_constant(s: float, M: float, C: float) -> float:
    """``log((s / 4M) e^{-2 C M})``."""
    if not 0 < s < M:
        raise ValueError("need 0 < s < M")
    return math.log(s / (4.0 * M)) - 2.0 * C * M


def ucp_constant(s: float, M: float, C: float) -> float:
    """``(s / 4M) e^{-2 C M}`` (may underflow to 0.0)."""
    return math.exp(log_ucp_constant(s, M, C))


def _sup_dev(V, E):
    V = np.asarray(V, dtype=float)
    return float(max(V.max() - E, E - V.min(), 0.0))


def restricted_mass(phi, grid: GridSpec, centre, side) -> float:
    """``||phi||^2`` on the open window ``Lambda_side(centre)`` by node quadrature."""
    phi = np.asarray(phi, dtype=float)
    return float(np.sum(phi[grid.mask_in_cube(centre, side)] ** 2) * grid.cell_volume)


def _inside(c, s, x, L, tol=SET_TOL):
    """``Lambda_s(c) subset Lambda_L(x)`` in 1D (open intervals)."""
    return abs(c - x) <= (L - s) / 2 + tol


@dataclass
class TranslateBoundResult:
    lhs: float
    rhs: float
    log_lhs: float
    log_rhs: float
    C: float
    holds: bool
    vacuous: bool = False


def translate_bound_check(H, phi, lam, s, k, y, slack=CT_SLACK) -> TranslateBoundResult:
    """Check ``||phi||^2_{Lambda_s(k+y)} <= e^{C|y|} ||phi||^2_{Lambda_s(k)}`` on a 1D box."""
    grid = H.grid
    if grid.dim != 1:
        raise ValueError("translate bound is one-dimensional")
    x, L = float(grid.centre[0]), grid.L
    for c in (k, k + y):
        if not _inside(c, s, x, L):
            raise ValueError(f"Lambda_{s}({c}) is not inside Lambda_{L}({x})")
    C = c_sve(s, _sup_dev(H.potential, lam))
    lhs = restricted_mass(phi, grid, k + y, s)
    base = restricted_mass(phi, grid, k, s)
    if base <= 1e-300:
        return TranslateBoundResult(lhs, math.inf if lhs > 0 else 0.0, _log(lhs), math.inf, C,
                                    True, vacuous=True)
    log_rhs = C * abs(y) + math.log(base)
    holds = _log(lhs) <= math.log(slack) + log_rhs
    return TranslateBoundResult(lhs, _exp(log_rhs), _log(lhs), log_rhs, C, holds)


def _log(v):
    return math.log(v) if v > 0 else -math.inf


def _exp(v):
    return math.exp(v) if v < 709 else math.inf


@dataclass(frozen=True)
class IndexSets:
    J1: tuple
    J2: tuple
    J: tuple

    def covers(self, x, L, M) -> bool:
        """Whether the closed intervals of side ``M`` around ``J`` cover ``[x - L/2, x + L/2]``."""
        reach = x - L / 2
        for c in sorted(self.J):
            if c - M / 2 > reach + SET_TOL:
                return False
            reach = max(reach, c + M / 2)
        return reach >= x + L / 2 - SET_TOL


def index_sets(x: float, L: float, M: float) -> IndexSets:
    """``J1 = {k in M Z : Lambda_M(k) in Lambda_L(x)}``, ``J2`` the two boundary centres, ``J`` the union."""
    if not 0 < M < L:
        raise ValueError("need 0 < M < L")
    half = (L - M) / 2
    jlo = math.ceil((x - half) / M - SET_TOL)
    jhi = math.floor((x + half) / M + SET_TOL)
    J1 = tuple(j * M for j in range(jlo, jhi + 1))
    J2 = (x - L / 2 + M / 2, x + L / 2 - M / 2)
    J = list(J1)
    for c in J2:
        if all(abs(c - k) > SET_TOL for k in J):
            J.append(c)
    return IndexSets(J1, J2, tuple(sorted(J)))


@dataclass
class UcpSetup:
    """Window length ``s``, cell length ``M``, centres ``gamma_{jM}`` keyed by ``j`` and energy interval."""

    s: float
    M: float
    centres: dict
    interval: tuple
    V: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.s < self.M:
            raise ValueError("need 0 < s < M")
        lo, hi = self.interval
        if not lo < hi:
            raise ValueError("energy interval must be non-degenerate")
        for j, g in self.centres.items():
            if abs(g - j * self.M) > (self.M - self.s) / 2 + SET_TOL:
                raise ValueError(f"Lambda_s(gamma_{j}) = Lambda_{self.s}({g}) not inside Lambda_M({j * self.M})")

    def gamma(self, k: float) -> float:
        j = int(round(k / self.M))
        if abs(k - j * self.M) > SET_TOL * max(1.0, abs(k)):
            raise ValueError(f"{k} is not in M Z")
        if j not in self.centres:
            raise KeyError(f"no centre recorded for k = {k}")
        return self.centres[j]

    @classmethod
    def from_points(cls, s, M, points, j_range, interval, V=None):
        """Pick, for each ``j`` in ``j_range``, the admissible point closest to ``jM``; fall back to ``jM``."""
        pts = np.sort(np.asarray(points, dtype=float).ravel())
        centres = {}
        for j in j_range:
            k = j * M
            ok = pts[np.abs(pts - k) <= (M - s) / 2]
            centres[j] = float(ok[np.argmin(np.abs(ok - k))]) if ok.size else float(k)
        return cls(s, M, centres, tuple(interval), V)


def _j_span(x, L, M):
    return range(math.floor((x - L / 2) / M) - 1, math.ceil((x + L / 2) / M) + 2)


def tau_map(kappa: float, x: float, L: float, M: float, setup: UcpSetup) -> float:
    """The boundary-aware map ``J -> J1 union {k_l, k_r}`` of the mass-bound proof."""
    sets = index_sets(x, L, M)
    if not sets.J1:
        raise ValueError("J1 is empty; the map needs L >= 2M")
    if not any(abs(kappa - c) <= SET_TOL for c in sets.J):
        raise ValueError(f"{kappa} is not in J")
    for k in sets.J1:
        if abs(kappa - k) <= SET_TOL:
            return k
    s = setup.s
    if abs(kappa - sets.J2[0]) <= SET_TOL:
        kl = min(sets.J1) - M
        return kl if _inside(setup.gamma(kl), s, x, L, tol=0.0) else min(sets.J1)
    kr = max(sets.J1) + M
    return kr if _inside(setup.gamma(kr), s, x, L, tol=0.0) else max(sets.J1)


@dataclass
class UcpMassResult:
    index: int
    eigenvalue: float
    mass_sum: float
    total: float
    constant: float
    log_constant: float
    C: float
    log_ratio: float
    holds: bool

    @property
    def ratio(self):
        return _exp(self.log_ratio)


def ucp_mass_check(phi, lam, setup: UcpSetup, H, index=0, slack=CT_SLACK) -> UcpMassResult:
    """``sum_{gamma_k in Lambda_{L-s}(x)} ||phi||^2_{Lambda_s(gamma_k)} >= C_UC ||phi||^2``."""
    grid = H.grid
    if grid.dim != 1:
        raise ValueError("the mass bound is one-dimensional")
    lo, hi = setup.interval
    if not lo <= lam <= hi:
        raise ValueError(f"eigenvalue {lam} outside the interval {setup.interval}")
    x, L = float(grid.centre[0]), grid.L
    s, M = setup.s, setup.M
    V = H.potential if setup.V is None else setup.V
    C = c_sve(s, _sup_dev(V, lam))
    log_c = log_ucp_constant(s, M, C)
    mass = 0.0
    for j in _j_span(x, L, M):
        g = setup.gamma(j * M)
        if abs(g - x) < (L - s) / 2:
            mass += restricted_mass(phi, grid, g, s)
    total = float(np.sum(np.asarray(phi) ** 2) * grid.cell_volume)
    log_ratio = _log(mass) - log_c - math.log(total)
    holds = log_ratio >= -math.log(slack)
    return UcpMassResult(index, float(lam), mass, total, _exp(log_c), log_c, C, log_ratio, holds)


def write_mass_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "mass_sum", "constant", "log_constant", "ratio", "log_ratio", "holds"])
        for r in rows:
            w.writerow([r.index, f"{r.eigenvalue:.17g}", f"{r.mass_sum:.17g}", f"{r.constant:.17g}",
                        f"{r.log_constant:.17g}", f"{r.ratio:.17g}", f"{r.log_ratio:.17g}", int(r.holds)])


@dataclass
class LiftingReport:
    t: np.ndarray
    lam: np.ndarray
    lam0: float
    bound: np.ndarray
    C_minus: float
    C_svi: float
    interval: tuple
    log_c_uc: float
    slope_fd: float
    slope_oracle: float
    monotone: bool
    lipschitz: bool
    rows: list = field(default_factory=list)

    @property
    def holds(self):
        return all(r["holds"] for r in self.rows)

    @property
    def slope_rel_error(self):
        return abs(self.slope_fd - self.slope_oracle) / abs(self.slope_oracle)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lambda", "bound", "margin"])
            for r in self.rows:
                w.writerow([f"{r['t']:.17g}", f"{r['lambda']:.17g}", f"{r['bound']:.17g}",
                            f"{r['margin']:.17g}"])


def sup_constant(s, V0, W, interval):
    """``C_{s,V,I} = sup_{t in (0,1], E in I} c_sve(s, ||V0 + tW - E||_inf)``.

    The deviation is jointly convex in ``(t, E)``, so the supremum sits on the
    corners ``t in {0, 1}``, ``E in {min I, max I}`` (``t -> 0+`` by continuity).
    """
    V0 = np.asarray(V0, dtype=float)
    W = np.asarray(W, dtype=float)
    best = 0.0
    for t in (0.0, 1.0):
        for E in interval:
            best = max(best, c_sve(s, _sup_dev(V0 + t * W, E)))
    return best


def lifting_1d(V0, W, grid: GridSpec, setup: UcpSetup, t_grid=None, C_minus=None,
               fd_step=1e-6, slack=CT_SLACK) -> LiftingReport:
    """Check ``lambda(t) >= lambda(0) + t C_- C_UC(M)`` for ``H(t) = -Delta + V0 + tW``.

    ``W >= C_-`` is required on the windows ``Lambda_s(gamma_k)`` with
    ``gamma_k`` in ``Lambda_{L-s}(x)``, the same windows the mass bound sums over.
    """
    if grid.dim != 1:
        raise ValueError("lifting_1d is one-dimensional")
    if not (grid.L >= 1 and grid.L > setup.M):
        raise ValueError("need L >= 1 and L > M")
    V0 = np.asarray(V0, dtype=float).ravel()
    W = np.asarray(W, dtype=float).ravel()
    x, L, s, M = float(grid.centre[0]), grid.L, setup.s, setup.M
    chi = np.zeros(grid.size, dtype=bool)
    for j in _j_span(x, L, M):
        g = setup.gamma(j * M)
        if abs(g - x) < (L - s) / 2:
            chi |= grid.mask_in_cube(g, s)
    if C_minus is None:
        C_minus = float(W[chi].min()) if chi.any() else 0.0
    if C_minus <= 0:
        raise ValueError("C_minus must be positive")
    bad = np.flatnonzero(chi & (W < C_minus - 1e-14))
    if bad.size:
        node = float(grid.nodes()[bad[0], 0])
        raise ValueError(f"W < C_minus on the UCP windows, witness node y = {node:.17g}")
    if np.any(W < -1e-14):
        raise ValueError("W must be non-negative")
    t_grid = np.round(np.arange(1, 11) * 0.1, 12) if t_grid is None else np.asarray(t_grid, float)
    if np.any((t_grid <= 0) | (t_grid > 1)):
        raise ValueError("t values must lie in (0, 1]")

    def lam_at(t):
        return ground_state(hamiltonian_from_potential(grid, V0 + t * W))

    lam0, phi0 = lam_at(0.0)
    lam = np.array([lam_at(t)[0] for t in t_grid])
    interval = (float(lam.min()) - 1.0, float(lam.max()) + 1.0)
    C_svi = sup_constant(s, V0, W, interval)
    log_c = log_ucp_constant(s, M, C_svi)
    c_uc = _exp(log_c)
    rows = []
    for t, lt in zip(t_grid, lam):
        bound = lam0 + t * C_minus * c_uc
        lift = lt - lam0
        log_need = math.log(t * C_minus) + log_c - math.log(slack)
        holds = lift > 0 and math.log(lift) >= log_need
        rows.append({"t": float(t), "lambda": float(lt), "bound": bound, "margin": lt - bound,
                     "holds": bool(holds)})
    tol = 1e-10 * (1 + np.abs(lam))
    seq = np.concatenate([[lam0], lam])
    monotone = bool(np.all(np.diff(seq) >= -tol.max()))
    ts = np.concatenate([[0.0], t_grid])
    lipschitz = bool(np.all(np.abs(np.diff(seq)) <= np.abs(W).max() * np.diff(ts) + tol.max()))
    slope_fd = (lam_at(fd_step)[0] - lam_at(-fd_step)[0]) / (2 * fd_step)
    slope_oracle = float(np.sum(W * phi0 ** 2) * grid.cell_volume)
    return LiftingReport(t_grid, lam, lam0, np.array([r["bound"] for r in rows]), C_minus, C_svi,
                         interval, log_c, slope_fd, slope_oracle, monotone, lipschitz, rows)


__all__ = [
    "GAMMA_LIMIT", "IndexSets", "LiftingReport", "TranslateBoundResult", "UcpMassResult",
    "UcpSetup", "c_sve", "index_sets", "lifting_1d", "log_ucp_constant", "restricted_mass",
    "sup_constant", "tau_map", "translate_bound_check", "ucp_constant", "ucp_gamma_metadata",
    "ucp_mass_check", "write_mass_csv",
]
