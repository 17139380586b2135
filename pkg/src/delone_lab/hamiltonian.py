"""Finite-volume Dirichlet discretisations of Delone-Bernoulli Hamiltonians.

The Hamiltonian on ``Lambda_L(x)`` is ``-Delta_h + diag(V)`` with the standard
second-order (2d+1)-point stencil on the interior nodes ``x - L/2 + h(i+1)``;
Dirichlet conditions are imposed by dropping the boundary nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from ._kernels_py import profile_values
from .geometry import PointSet, DelonePair, GeometryError, cube_contains_cube, in_open_cube

PROFILES = {"flat": kernels.FLAT, "tent": kernels.TENT}


@dataclass(frozen=True)
class SingleSitePotential:
    """Bump ``u`` with ``u_minus * chi_{Lambda_dm} <= u <= chi_{Lambda_dp}``.

    ``flat``: equal to ``u_minus`` on ``Lambda_dm`` and tapering linearly (in the
    sup-norm radius) to zero at the boundary of ``Lambda_dp``.
    ``tent``: a sup-norm tent on ``Lambda_dp`` scaled to equal ``u_minus`` on the
    boundary of ``Lambda_dm`` and capped at 1.
    """

    u_minus: float
    delta_minus: float
    delta_plus: float
    profile: str = "flat"

    def __post_init__(self):
        if not 0 < self.u_minus <= 1:
            raise ValueError("u_minus must lie in (0, 1]")
        if not 0 < self.delta_minus < self.delta_plus:
            raise ValueError("need 0 < delta_minus < delta_plus")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")

    def __call__(self, y):
        """Evaluate at displacement(s) ``y`` of shape (..., d)."""
        y = np.asarray(y, dtype=float)
        rho = np.max(np.abs(y), axis=-1) if y.ndim else abs(float(y))
        return profile_values(rho, self.u_minus, self.delta_minus, self.delta_plus,
                              PROFILES[self.profile])

    def check_envelope(self, d=1, n=2001):
        """Verify the two-sided bound on a dense sample grid; returns True/False."""
        s = np.linspace(-0.6 * self.delta_plus, 0.6 * self.delta_plus, n)
        if d == 1:
            y = s[:, None]
        else:
            g = np.meshgrid(s[::10], s[::10], indexing="ij")
            y = np.stack([g[0].ravel(), g[1].ravel()], axis=1)
        u = self(y)
        rho = np.max(np.abs(y), axis=1)
        lower = np.where(rho < 0.5 * self.delta_minus, self.u_minus, 0.0)
        upper = np.where(rho < 0.5 * self.delta_plus, 1.0, 0.0)
        return bool(np.all(u >= lower - 1e-15) and np.all(u <= upper + 1e-15) and np.all(u >= 0))


@dataclass(frozen=True)
class BernoulliConfig:
    """Coupling values on an ordered list of sites; ``beta`` is metadata."""

    sites: np.ndarray
    values: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        if sites.size == 0:
            sites = sites.reshape(0, max(sites.shape[-1], 1))
        values = np.asarray(self.values, dtype=float).ravel()
        if len(values) != len(sites):
            raise ValueError(f"{len(values)} values for {len(sites)} sites")
        if len(values) and (values.min() < 0 or values.max() > 1):
            raise ValueError("coupling values must lie in [0, 1]")
        if self.beta is not None and not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def constant(cls, sites, value, beta=None):
        sites = np.atleast_2d(np.asarray(sites, dtype=float))
        return cls(sites, np.full(len(sites), float(value)), beta)


def sample_config(sites, beta: float, rng) -> BernoulliConfig:
    """Independent couplings: 0 with probability ``beta``, 1 otherwise."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    n = len(sites) if sites.size else 0
    values = (rng.random(n) >= beta).astype(float)
    return BernoulliConfig(sites.reshape(n, -1) if n else sites, values, beta)


def config_metric(omega: BernoulliConfig, omega_prime: BernoulliConfig) -> float:
    """``sum_g 2^{-|g|} |omega_g - omega'_g|`` with the Euclidean norm of the site."""
    if omega.sites.shape != omega_prime.sites.shape or not np.array_equal(
        omega.sites, omega_prime.sites
    ):
        raise ValueError("configurations live on different site lists")
    w = np.exp2(-np.linalg.norm(omega.sites, axis=1))
    return float(np.sum(w * np.abs(omega.values - omega_prime.values)))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``Lambda_L(x)``; ``n = L/h - 1`` interior nodes per axis."""

    dim: int
    centre: tuple
    L: float
    h: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")
        centre = tuple(float(c) for c in np.broadcast_to(np.asarray(self.centre, float), (self.dim,)))
        object.__setattr__(self, "centre", centre)
        if self.L <= 0 or self.h <= 0:
            raise ValueError("L and h must be positive")
        q = self.L / self.h
        if abs(q - round(q)) > 1e-9 * max(1.0, q):
            raise ValueError(f"L/h = {q} is not an integer")
        if round(q) < 2:
            raise ValueError("grid has no interior nodes")

    @property
    def n(self) -> int:
        return int(round(self.L / self.h)) - 1

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def origin(self):
        return np.asarray(self.centre) - 0.5 * self.L + self.h

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axes(self):
        o = self.origin
        return [o[a] + self.h * np.arange(self.n) for a in range(self.dim)]

    def nodes(self):
        """Node coordinates, shape (size, dim), in C order."""
        g = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([c.ravel() for c in g], axis=1)

    def mask_in_cube(self, centre, side):
        """Nodes strictly inside ``Lambda_side(centre)``."""
        return in_open_cube(self.nodes(), np.broadcast_to(centre, (self.dim,)), side, tol=0.0)

    def with_h(self, h):
        return GridSpec(self.dim, self.centre, self.L, h)


def dirichlet_laplacian(grid: GridSpec) -> sp.csr_matrix:
    """``-Delta_h`` with homogeneous Dirichlet conditions, scaled by ``1/h^2``."""
    n = grid.n
    t = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    if grid.dim == 1:
        lap = t
    else:
        eye = sp.identity(n, format="csr")
        lap = sp.kron(t, eye, format="csr") + sp.kron(eye, t, format="csr")
    return (lap / grid.h ** 2).tocsr()


@dataclass(frozen=True)
class DiscretizedHamiltonian:
    grid: GridSpec
    matrix: sp.csr_matrix
    potential: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.grid.size

    def shifted(self, c: float) -> "DiscretizedHamiltonian":
        """``H + c I``."""
        return DiscretizedHamiltonian(
            self.grid, (self.matrix + c * sp.identity(self.dim, format="csr")).tocsr(),
            self.potential + c,
        )

    def gershgorin_lower(self) -> float:
        m = self.matrix
        diag = m.diagonal()
        off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - off))

    def to_coo_text(self, path) -> None:
        """Write ``row col value`` per line with 17 significant digits."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{i} {j} {v:.17g}\n")


def hamiltonian_from_potential(grid: GridSpec, potential) -> DiscretizedHamiltonian:
    potential = np.asarray(potential, dtype=float).ravel()
    if potential.shape != (grid.size,):
        raise ValueError(f"potential has {potential.size} samples, grid has {grid.size} nodes")
    mat = (dirichlet_laplacian(grid) + sp.diags(potential)).tocsr()
    return DiscretizedHamiltonian(grid, mat, potential)


def _check_h(grid, u):
    if grid.h > u.delta_minus / 4 + 1e-12:
        raise ValueError(
            f"grid spacing h={grid.h} too coarse: need h <= delta_minus/4 = {u.delta_minus / 4}"
        )


def bump_potential(points, weights, u: SingleSitePotential, grid: GridSpec) -> np.ndarray:
    """``sum_c w_c u(node - c)`` at every node; no coverage check."""
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (len(pts),))
    return kernels.bump_sum(grid.origin, grid.h, grid.shape, pts, weights,
                            u.u_minus, u.delta_minus, u.delta_plus, PROFILES[u.profile])


def assemble_potential(D: PointSet, u: SingleSitePotential, grid: GridSpec) -> np.ndarray:
    """Samples of ``V_D = sum_{g in D} u(. - g)`` at the grid nodes.

    The patch window must contain the grid box dilated by ``delta_plus`` so that
    every bump reaching the box is present.
    """
    _check_h(grid, u)
    if not cube_contains_cube(D.window.centre, D.window.side, grid.centre, grid.L + u.delta_plus):
        raise GeometryError(
            "point-set window does not cover the grid box dilated by delta_plus"
        )
    return bump_potential(D.points, 1.0, u, grid)


def _match_sites(config, points, label):
    pts = np.asarray(points, dtype=float)
    if len(config) != len(pts) or (len(pts) and not np.allclose(config.sites, pts, atol=1e-12, rtol=0)):
        raise ValueError(f"{label} configuration does not index the expected site list")


def assemble_hamiltonian(pair: DelonePair, u: SingleSitePotential, omega: BernoulliConfig,
                         grid: GridSpec, tS: BernoulliConfig | None = None,
                         split=None) -> DiscretizedHamiltonian:
    """Dirichlet Hamiltonian ``-Delta + V_D + V_random`` on the grid box.

    Without ``tS`` the configuration ``omega`` indexes the sites of
    ``pair.extra`` inside the box. With free sites, ``split`` (a
    :class:`~delone_lab.geometry.FreeSiteSplit`) is required; ``omega`` then
    indexes ``D_0`` inside the box and ``tS`` indexes ``S`` inside the box.
    Only random sites strictly inside the box contribute.
    """
    V = assemble_potential(pair.base, u, grid)
    if tS is None:
        sites = box_sites(pair.extra, grid)
        _match_sites(omega, sites, "omega")
        V = V + bump_potential(omega.sites, omega.values, u, grid)
    else:
        if split is None:
            raise ValueError("free-site assembly needs the D0/S split")
        _match_sites(omega, box_sites(split.d0, grid), "omega")
        _match_sites(tS, box_sites(split.s, grid), "t_S")
        V = V + bump_potential(omega.sites, omega.values, u, grid)
        V = V + bump_potential(tS.sites, tS.values, u, grid)
    return hamiltonian_from_potential(grid, V)


def box_sites(ps: PointSet, grid: GridSpec) -> np.ndarray:
    """Sites of ``ps`` strictly inside the grid box, in patch order."""
    if not cube_contains_cube(ps.window.centre, ps.window.side, grid.centre, grid.L):
        raise GeometryError("site patch does not cover the grid box")
    return ps.restrict(grid.centre, grid.L)


__all__ = [
    "BernoulliConfig", "DiscretizedHamiltonian", "GridSpec", "SingleSitePotential",
    "assemble_hamiltonian", "assemble_potential", "box_sites", "bump_potential",
    "config_metric", "dirichlet_laplacian", "hamiltonian_from_potential", "sample_config",
]
