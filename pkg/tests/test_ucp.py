import math

import numpy as np
import pytest

from delone_lab.hamiltonian import GridSpec, hamiltonian_from_potential
from delone_lab.spectral import ground_state, lowest_eigenpairs
from delone_lab.ucp import (
    GAMMA_LIMIT, UcpSetup, c_sve, index_sets, lifting_1d, log_ucp_constant, restricted_mass,
    sup_constant, tau_map, translate_bound_check, ucp_gamma_metadata, ucp_mass_check,
)


def cos2_mass(c, s):
    """Exact ``int_{c-s/2}^{c+s/2} 2 cos^2(pi y) dy``."""
    a, b = c - s / 2, c + s / 2
    return (b - a) + (math.sin(2 * math.pi * b) - math.sin(2 * math.pi * a)) / (2 * math.pi)


def free_unit(h=1 / 2048):
    g = GridSpec(1, 0.0, 1.0, h)
    return hamiltonian_from_potential(g, np.zeros(g.size))


def test_c_sve_values():
    assert c_sve(1, 0) == pytest.approx(2 * math.sqrt(648), rel=1e-12)
    assert c_sve(1, 18) == pytest.approx(72, rel=1e-12)
    assert c_sve(2, 0) == pytest.approx(c_sve(1, 0) / 2, rel=1e-14)


def test_ucp_constant_limit():
    C = 3.0
    assert log_ucp_constant(0.999999, 1.0, C) == pytest.approx(math.log(0.25) - 2 * C, abs=1e-5)
    with pytest.raises(ValueError):
        log_ucp_constant(1.0, 1.0, C)


def test_gamma_metadata():
    assert ucp_gamma_metadata(1)["gamma"] == 1.0
    m2 = ucp_gamma_metadata(2)
    assert m2["gamma"] == pytest.approx(4 / 3) and m2["gamma_admissible"]
    assert GAMMA_LIMIT == pytest.approx(1.3660254037844386)


def test_restricted_mass_quadrature():
    H = free_unit()
    lam, phi = ground_state(H)
    for c, s in ((0.0, 0.2), (0.3, 0.2), (-0.1, 0.5)):
        assert restricted_mass(phi, H.grid, c, s) == pytest.approx(cos2_mass(c, s), abs=2e-3)


def test_translate_bound():
    H = free_unit()
    lam, phi = ground_state(H)
    res = translate_bound_check(H, phi, lam, 0.2, 0.0, 0.3)
    assert res.holds
    assert res.log_lhs == pytest.approx(math.log(cos2_mass(0.3, 0.2)), abs=1e-2)
    same = translate_bound_check(H, phi, lam, 0.2, 0.0, 0.0)
    assert same.holds and same.lhs == pytest.approx(math.exp(same.log_rhs))
    left = translate_bound_check(H, phi, lam, 0.2, 0.0, -0.3)
    assert left.lhs == pytest.approx(res.lhs, rel=1e-10)


def test_index_sets_examples():
    a = index_sets(0.0, 3.0, 1.0)
    assert a.J1 == (-1.0, 0.0, 1.0) and len(a.J) == 3 and a.covers(0.0, 3.0, 1.0)
    b = index_sets(0.0, 3.5, 1.0)
    assert b.J1 == (-1.0, 0.0, 1.0)
    assert b.J2 == pytest.approx((-1.25, 1.25)) and len(b.J) == 5 and b.covers(0.0, 3.5, 1.0)


def test_tau_map_cases():
    x, L, M, s = 0.0, 3.5, 1.0, 0.2
    base = {j: float(j) for j in range(-3, 4)}
    setup = UcpSetup(s, M, base, (0, 1))
    assert tau_map(0.0, x, L, M, setup) == 0.0
    # gamma_{-2} = -2 lies outside Lambda_L(0): the boundary centre maps to min J1
    assert tau_map(-1.25, x, L, M, setup) == -1.0
    inside = dict(base)
    inside[-2] = -1.6
    inside[2] = 1.6
    setup_in = UcpSetup(s, M, inside, (0, 1))
    assert tau_map(-1.25, x, L, M, setup_in) == -2.0
    assert tau_map(1.25, x, L, M, setup_in) == 2.0
    with pytest.raises(ValueError):
        tau_map(0.5, x, L, M, setup)


def test_mass_check_tiling():
    H = free_unit()
    eig = lowest_eigenpairs(H, 1)
    M, s = 0.25, 0.2
    setup = UcpSetup(s, M, {j: j * M for j in range(-4, 5)}, (0.0, 20.0))
    res = ucp_mass_check(eig.eigenvectors[:, 0], eig.eigenvalues[0], setup, H)
    assert res.holds
    assert res.mass_sum / res.total == pytest.approx(s / M, rel=0.1)
    assert res.log_ratio > 10


def test_sup_constant_corners():
    V0 = np.array([0.0, 1.0, 2.0])
    W = np.array([0.0, 0.5, 0.0])
    best = max(c_sve(0.1, max(np.max(V0 + t * W) - E, E - np.min(V0 + t * W)))
               for t in np.linspace(0, 1, 11) for E in np.linspace(-1, 4, 11))
    assert sup_constant(0.1, V0, W, (-1.0, 4.0)) == pytest.approx(best, rel=1e-14)


def test_lifting_flat_bump():
    g = GridSpec(1, 0.0, 4.0, 1 / 128)
    from delone_lab.hamiltonian import SingleSitePotential, bump_potential

    u = SingleSitePotential(0.5, 0.06, 0.1)
    M, s = 1.0, 0.06
    setup = UcpSetup(s, M, {j: j * M for j in range(-4, 5)}, (-np.inf, np.inf))
    W = bump_potential(np.arange(-1.0, 2.0)[:, None], 1.0, u, g)
    rep = lifting_1d(np.zeros(g.size), W, g, setup, C_minus=0.5)
    assert rep.monotone and rep.lipschitz and rep.holds
    assert rep.slope_rel_error < 0.1
    with pytest.raises(ValueError, match="witness"):
        lifting_1d(np.zeros(g.size), W, g, setup, C_minus=0.6)
