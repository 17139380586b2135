"""A Delone-Bernoulli model bundling geometry and disorder with a grid policy."""

from __future__ import annotations

import numpy as np

from .geometry import (
    DelonePair, FreeSiteSplit, PointSet, free_sites_split, generate_lattice,
    generate_perturbed_lattice, make_delone_pair, make_window, shifted_pair,
)
from .hamiltonian import (
    BernoulliConfig, DiscretizedHamiltonian, GridSpec, SingleSitePotential, assemble_potential,
    box_sites, bump_potential, hamiltonian_from_potential, sample_config,
)


class Model:
    """Everything needed to assemble ``H_{omega,x,L}`` for any box inside the patch.

    Treated as immutable; background potentials are cached per box.
    """

    def __init__(self, pair: DelonePair, u: SingleSitePotential, beta: float, h: float,
                 split: FreeSiteSplit | None = None):
        if not 0 < beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        self.pair = pair
        self.u = u
        self.beta = beta
        self.h = h
        self.split = split
        self._background = {}

    @property
    def dim(self):
        return self.pair.base.dim

    def grid(self, x, L) -> GridSpec:
        return GridSpec(self.dim, x, L, self.h)

    def _key(self, x, L):
        return tuple(np.broadcast_to(np.asarray(x, float), (self.dim,)).tolist()), float(L)

    def background_potential(self, x, L) -> np.ndarray:
        key = self._key(x, L)
        if key not in self._background:
            self._background[key] = assemble_potential(self.pair.base, self.u, self.grid(x, L))
        return self._background[key]

    def background(self, x, L) -> DiscretizedHamiltonian:
        """``H_{D,x,L}``."""
        return hamiltonian_from_potential(self.grid(x, L), self.background_potential(x, L))

    def random_sites(self, x, L) -> np.ndarray:
        """Sites carrying random couplings inside the box (``D_0`` when split, else ``D'``)."""
        ps = self.split.d0 if self.split is not None else self.pair.extra
        return box_sites(ps, self.grid(x, L))

    def sample(self, x, L, rng) -> BernoulliConfig:
        return sample_config(self.random_sites(x, L), self.beta, rng)

    def hamiltonian(self, x, L, omega: BernoulliConfig, tS: BernoulliConfig | None = None):
        """``H_{omega,x,L}``; with a split, free sites take ``tS`` (default all 0)."""
        grid = self.grid(x, L)
        V = self.background_potential(x, L) + bump_potential(omega.sites, omega.values, self.u, grid)
        if self.split is not None and tS is not None:
            V = V + bump_potential(tS.sites, tS.values, self.u, grid)
        return hamiltonian_from_potential(grid, V)


def build_pointset(dim, kind, window_side, seed=0, spacing=1.0, rho=0.3, path=None) -> PointSet:
    from .geometry import read_pointset

    window = make_window(np.zeros(dim), window_side)
    if kind == "lattice":
        return generate_lattice(dim, spacing, window)
    if kind == "perturbed":
        return generate_perturbed_lattice(dim, rho, np.random.default_rng(seed), window)
    if kind == "file":
        return read_pointset(path)
    raise ValueError(f"unknown geometry kind {kind!r}")


def build_pair(D: PointSet, kind="annulus", seed=0, shift=0.5) -> DelonePair:
    if kind == "annulus":
        return make_delone_pair(D, np.random.default_rng(seed))
    if kind == "shifted":
        return shifted_pair(D, shift)
    raise ValueError(f"unknown pair kind {kind!r}")


def with_free_sites(model: Model, Rprime: float) -> Model:
    split = free_sites_split(model.pair.extra, Rprime)
    return Model(model.pair, model.u, model.beta, model.h, split)
