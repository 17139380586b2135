import math

import numpy as np
import pytest

from delone_lab.hamiltonian import GridSpec, hamiltonian_from_potential
from delone_lab.msa import GoodBoxParams, good_scale_probability, is_good_box, probe_pairs, scale_sequence
from delone_lab.spectral import ground_state, lowest_eigenpairs


def free(L=20.0, h=1 / 16):
    g = GridSpec(1, 0.0, L, h)
    return hamiltonian_from_potential(g, np.zeros(g.size))


def test_params_validation():
    with pytest.raises(ValueError):
        GoodBoxParams(0.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        GoodBoxParams(0.0, 1.0, 1.0)


def test_probe_pairs_rules():
    pairs = probe_pairs([0.0], 20.0, 1, 1000)
    assert len(pairs) == 45
    assert all(np.linalg.norm(y - z) >= 0.2 for y, z in pairs)
    capped = probe_pairs([0.0], 20.0, 1, 5)
    assert len(capped) == 5
    assert np.linalg.norm(capped[0][0] - capped[0][1]) == pytest.approx(18.0)
    again = probe_pairs([0.0], 20.0, 1, 5)
    assert all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(capped, again))
    assert len(probe_pairs([0.0, 0.0], 10.0, 2, 7)) == 7


def test_good_below_spectrum():
    H = free()
    E = ground_state(H)[0] - 4.0
    res = is_good_box(H, 20.0, GoodBoxParams(E, 0.05, 0.5, 10))
    assert res.good and res.reason == "ok"
    assert min(res.margins) >= 0


def test_large_m_is_bad():
    H = free()
    E = ground_state(H)[0] - 4.0
    res = is_good_box(H, 20.0, GoodBoxParams(E, 1e3, 0.5, 10))
    assert not res.good and res.reason == "decay"
    assert res.worst_pair is not None


def test_spectrum_hit():
    H = free()
    lam = lowest_eigenpairs(H, 3).eigenvalues[2]
    res = is_good_box(H, 20.0, GoodBoxParams(float(lam), 0.05, 0.5))
    assert not res.good and res.reason == "spectrum hit"


def test_threshold_monotone_in_zeta():
    H = free()
    E = ground_state(H)[0] - 1e-3
    margins = [is_good_box(H, 20.0, GoodBoxParams(E, 0.05, z, 2)).log_norm_margin for z in (0.1, 0.5, 0.9)]
    assert margins[0] > margins[1] > margins[2]


def test_good_scale_far_below(model_1d):
    params = GoodBoxParams(-10.0, 0.05, 0.5, 5)
    rep = good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 30, seed=1)
    assert rep.p_hat == 1.0 and rep.n_good == 30
    assert rep.wilson_95_ci[1] == 1.0 and rep.verdict == "good"


def test_good_scale_above_spectrum(model_1d):
    E0 = ground_state(model_1d.background([0.0], 10.0))[0]
    params = GoodBoxParams(E0 + 5.0, 50.0, 0.5, 5)
    rep = good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 30, seed=1)
    assert rep.p_hat == 0.0 and rep.verdict == "not good"


def test_good_scale_deterministic(model_1d):
    E0 = ground_state(model_1d.background([0.0], 10.0))[0]
    params = GoodBoxParams(E0 + 0.01, 0.05, 0.5, 5)
    a = good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 30, seed=9)
    b = good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 30, seed=9)
    c = good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 30, seed=9, threads=4)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.threshold == pytest.approx(1 - 10 ** -0.1)
    with pytest.raises(ValueError):
        good_scale_probability(model_1d, [0.0], 10.0, params, 0.1, 29, seed=9)


def test_scale_sequence():
    assert scale_sequence(10, 3) == [10, 20, 40, 80]
    assert scale_sequence(10, 0) == [10]
    seq = scale_sequence(1.5, 6)
    assert all(b / a == 2 for a, b in zip(seq, seq[1:]))
    assert math.isclose(seq[-1], 96.0)
