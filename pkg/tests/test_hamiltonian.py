import numpy as np
import pytest

from delone_lab.geometry import PointSet, generate_lattice, make_window, shifted_pair
from delone_lab.hamiltonian import (
    BernoulliConfig, GridSpec, SingleSitePotential, assemble_hamiltonian, assemble_potential,
    config_metric, dirichlet_laplacian, hamiltonian_from_potential, sample_config,
)
from delone_lab.spectral import lowest_eigenpairs


@pytest.mark.parametrize("profile", ["flat", "tent"])
def test_bump_envelope(profile):
    u = SingleSitePotential(0.5, 0.06, 0.1, profile)
    assert u.check_envelope(1) and u.check_envelope(2)
    assert u([0.0]) == pytest.approx(0.5 if profile == "flat" else 1.0)
    assert u([0.2]) == 0.0


def test_bump_validation():
    with pytest.raises(ValueError):
        SingleSitePotential(0.5, 0.2, 0.1)
    with pytest.raises(ValueError):
        SingleSitePotential(1.5, 0.1, 0.2)


def test_grid_layout():
    g = GridSpec(1, 0.0, 1.0, 0.25)
    assert g.n == 3
    np.testing.assert_allclose(g.nodes().ravel(), [-0.25, 0.0, 0.25])
    with pytest.raises(ValueError):
        GridSpec(1, 0.0, 1.0, 0.3)


def test_laplacian_2d_is_kron():
    g = GridSpec(2, (0, 0), 1.0, 0.25)
    A = dirichlet_laplacian(g).toarray()
    assert A.shape == (9, 9)
    assert np.allclose(A, A.T)
    assert A[4, 4] == pytest.approx(4 / 0.25 ** 2)


def test_potential_examples(bump):
    g = GridSpec(1, 0.0, 2.0, 0.0125)
    empty = PointSet(1, np.empty((0, 1)), make_window([0], 4.0))
    assert np.all(assemble_potential(empty, bump, g) == 0)
    one = PointSet(1, np.array([[0.0]]), make_window([0], 4.0))
    V = assemble_potential(one, bump, g)
    assert V.max() == pytest.approx(0.5)
    two = PointSet(1, np.array([[-0.5], [0.5]]), make_window([0], 4.0))
    assert assemble_potential(two, bump, g).max() == pytest.approx(0.5)


def test_coarse_grid_rejected(bump):
    g = GridSpec(1, 0.0, 2.0, 0.05)
    one = PointSet(1, np.array([[0.0]]), make_window([0], 4.0))
    with pytest.raises(ValueError):
        assemble_potential(one, bump, g)


def _pair():
    D = generate_lattice(1, 1.0, make_window([0], 16.0))
    return shifted_pair(D, 0.5)


def test_all_ones_equals_union(bump):
    pair = _pair()
    g = GridSpec(1, 0.0, 6.0, 0.0125)
    sites = pair.extra.restrict(g.centre, g.L)
    H1 = assemble_hamiltonian(pair, bump, BernoulliConfig.constant(sites, 1.0), g)
    union = PointSet(1, np.concatenate([pair.base.points, pair.extra.points]), pair.extra.window)
    Hu = hamiltonian_from_potential(g, assemble_potential(union, bump, g))
    assert abs(H1.matrix - Hu.matrix).max() < 1e-14


def test_coupling_flip_monotone(bump, rng):
    pair = _pair()
    g = GridSpec(1, 0.0, 6.0, 0.0125)
    sites = pair.extra.restrict(g.centre, g.L)
    omega = sample_config(sites, 0.5, rng)
    off = np.flatnonzero(omega.values == 0)[0]
    vals = omega.values.copy()
    vals[off] = 1.0
    lam_a = lowest_eigenpairs(assemble_hamiltonian(pair, bump, omega, g), 4).eigenvalues
    lam_b = lowest_eigenpairs(assemble_hamiltonian(pair, bump, BernoulliConfig(sites, vals), g), 4).eigenvalues
    assert np.all(lam_b >= lam_a - 1e-12)


def test_free_laplacian_when_empty(bump):
    g = GridSpec(1, 0.0, 1.0, 1 / 64)
    H = hamiltonian_from_potential(g, np.zeros(g.size))
    assert abs(H.matrix - dirichlet_laplacian(g)).max() == 0


def test_sample_config_mean(rng):
    sites = np.arange(10_000, dtype=float)[:, None]
    omega = sample_config(sites, 0.3, rng)
    assert abs(omega.values.mean() - 0.7) <= 3 * np.sqrt(0.21 / 10_000)
    again = sample_config(sites, 0.3, np.random.default_rng(12345))
    np.testing.assert_array_equal(omega.values, again.values)


def test_config_metric_examples():
    sites = np.array([[0.0], [2.0], [-3.0]])
    a = BernoulliConfig(sites, [1, 0, 1])
    b = BernoulliConfig(sites, [1, 1, 1])
    assert config_metric(a, a) == 0
    assert config_metric(a, b) == 0.25
