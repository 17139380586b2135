"""The ten acceptance criteria, each printing one PASS/FAIL line."""

import contextlib
import math
import time

import numpy as np
import pytest

from delone_lab.config import load_config
from delone_lab import cli
from delone_lab.geometry import (
    generate_lattice, hausdorff_distance, make_window, patch_convergence_check, shifted_pair, translate,
)
from delone_lab.hamiltonian import (
    BernoulliConfig, GridSpec, SingleSitePotential, bump_potential, config_metric,
    hamiltonian_from_potential,
)
from delone_lab.ilse import (
    IlseParams, choose_M, event_A_exact, event_A_from_config, event_A_probability_bound,
    k_v_bound, log_c_uc, simulate_event_A, thinned_potential,
)
from delone_lab.model import Model
from delone_lab.spectral import (
    CT_SLACK, combes_thomas_bound, combes_thomas_check, ground_state, lowest_eigenpairs,
    resolvent_norm,
)
from delone_lab.ucp import UcpSetup, c_sve, index_sets, lifting_1d, tau_map, ucp_mass_check


@pytest.fixture
def criterion(capsys):
    """Yield a dict for details; print one PASS/FAIL line when the test ends."""

    @contextlib.contextmanager
    def run(number, title, limit=None):
        info = {}
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield info
            elapsed = time.perf_counter() - t0
            info["runtime_s"] = f"{elapsed:.3g}"
            if limit is not None:
                assert elapsed < limit, f"runtime {elapsed:.3g} s exceeds {limit} s"
            status = "PASS"
        finally:
            detail = ", ".join(f"{k}={v}" for k, v in info.items())
            with capsys.disabled():
                print(f"\n[acceptance {number:2d}] {status} {title}: {detail}")

    return run


def _free(L, h):
    g = GridSpec(1, 0.0, L, h)
    return hamiltonian_from_potential(g, np.zeros(g.size))


def test_01_analytic_eigenvalue(criterion):
    with criterion(1, "free Dirichlet eigenvalue", limit=1.0) as info:
        exact = math.pi ** 2
        lam = [ground_state(_free(1.0, h))[0] for h in (1 / 512, 1 / 1024, 1 / 2048)]
        ratio = (lam[0] - exact) / (lam[1] - exact)
        info.update(lambda0=f"{lam[0]:.10g}", rel_err=f"{abs(lam[0] - exact) / exact:.3g}",
                    halving_ratio=f"{ratio:.4g}")
        assert abs(lam[0] - exact) <= 0.01 * exact
        assert 3.6 <= ratio <= 4.4


def test_02_resolvent_oracle(criterion):
    with criterion(2, "resolvent norm vs dense oracle", limit=5.0) as info:
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(30):
            A = rng.normal(size=(50, 50))
            A = (A + A.T) / 2
            w = np.linalg.eigvalsh(A)
            for E in rng.uniform(w.min() - 1, w.max() + 1, 20):
                oracle = 1.0 / np.min(np.abs(w - E))
                worst = max(worst, abs(resolvent_norm(A, E) - oracle) / oracle)
        info["max_rel_err"] = f"{worst:.3g}"
        assert worst <= 1e-10


def test_03_event_A(criterion):
    with criterion(3, "event A frequency", limit=10.0) as info:
        p = IlseParams(d=1, p=1.0, beta=0.5, R0=1.0, delta_plus=0.2, delta_minus=0.1, u_minus=0.5)
        D0 = translate(generate_lattice(1, 1.0, make_window([0], 30.0)), 0.5)
        x, M, ell = [0.0], 4.4, 3
        L = ell * M
        exact = event_A_exact(D0, x, L, M, p)
        bound = event_A_probability_bound(ell, M, p)
        rng = np.random.default_rng(3)
        n = 10_000
        hits = sum(simulate_event_A(D0, 0.5, x, L, M, p, rng).occurred for _ in range(n))
        freq = hits / n
        sigma = math.sqrt(exact * (1 - exact) / n)
        info.update(freq=freq, exact=f"{exact:.12g}", bound=bound, z=f"{(freq - exact) / sigma:.3g}")
        assert exact == pytest.approx(0.9375 ** 3, rel=1e-15)
        assert abs(freq - exact) <= 3 * sigma
        assert bound == pytest.approx(0.8125) and bound <= exact


def test_04_scale_choice(criterion):
    with criterion(4, "scale choice") as info:
        p = IlseParams(d=2, p=1.0, beta=0.5, R0=3.0, delta_plus=0.2, delta_minus=0.1, u_minus=0.5)
        M, ell = choose_M(1001, p)
        info.update(M=f"{M:.10g}", ell=ell)
        assert ell == 27 and M == pytest.approx(1001 / 27, rel=1e-14)
        rng = np.random.default_rng(4)
        for L in rng.uniform(50, 1e6, 100):
            M, ell = choose_M(L, p)
            assert ell % 2 == 1 and L / M == pytest.approx(ell, rel=1e-12)
        info["random_L_checked"] = 100


def test_05_constants(criterion):
    with criterion(5, "constant formulas") as info:
        assert abs(c_sve(1, 0) - 2 * math.sqrt(648)) <= 1e-12 * c_sve(1, 0)
        assert abs(k_v_bound(10, 2) - (400 + 2 * math.pi ** 2 / 9)) <= 1e-12 * k_v_bound(10, 2)
        ct = combes_thomas_bound(1, 1, 10)
        assert abs(ct - 4 / 3 * math.exp(-4.5)) <= 1e-12 * ct
        p = IlseParams(d=2, p=1.0, beta=0.5, R0=3.0, delta_plus=0.2, delta_minus=0.1, u_minus=0.5)
        vals = [log_c_uc(M, p) for M in np.linspace(1.0, 50.0, 20)]
        assert np.all(np.diff(vals) < 0)
        info.update(c_sve=f"{c_sve(1, 0):.15g}", k_v=f"{k_v_bound(10, 2):.15g}", ct=f"{ct:.15g}")


def test_06_combes_thomas(criterion, model_1d):
    with criterion(6, "Combes-Thomas on disordered 1D box", limit=30.0) as info:
        L = 40.0
        H = model_1d.hamiltonian([0.0], L, model_1d.sample([0.0], L, np.random.default_rng(6)))
        E = ground_state(H)[0] - 1.0
        pairs = [(-15.0, -15.0 + d) for d in np.linspace(1.0, 30.0, 10)]
        rep = combes_thomas_check(H, E, pairs, width=1.0, slack=CT_SLACK)
        worst = max(r["measured"] / r["bound"] for r in rep.rows)
        info.update(pairs=len(rep.rows), worst_measured_over_bound=f"{worst:.3g}")
        assert len(rep.rows) == 10 and rep.holds


def _thinned_fixture(model):
    """Background Delone potential plus the thinned bumps selected by event A."""
    x, L, M = [0.0], 20.0, 20.0 / 7
    p = IlseParams(d=1, p=1.0, beta=0.5, R0=1.0, delta_plus=0.1, delta_minus=0.06, u_minus=0.5)
    omega = model.sample(x, L, np.random.default_rng(7))
    res = event_A_from_config(omega, x, L, M, p)
    grid = model.grid(x, L)
    W = thinned_potential(res.chosen, model.u, M, grid)
    H = hamiltonian_from_potential(grid, model.background_potential(x, L) + W)
    return H, res, M


def test_07_ucp_mass_and_tau(criterion, model_1d):
    with criterion(7, "UCP mass bound and tau multiplicity", limit=30.0) as info:
        H, res, M = _thinned_fixture(model_1d)
        eig = lowest_eigenpairs(H, 5)
        s = model_1d.u.delta_minus
        interval = (eig.eigenvalues.min() - 1.0, eig.eigenvalues.max() + 1.0)
        pts = np.array([v[0] for v in res.absolute.values()])
        setup = UcpSetup.from_points(s, M, pts, range(-6, 7), interval)
        results = [ucp_mass_check(eig.eigenvectors[:, i], eig.eigenvalues[i], setup, H, i)
                   for i in range(5)]
        min_log10 = min(r.log_ratio for r in results) / math.log(10)
        info["min_log10_margin"] = f"{min_log10:.6g}"
        assert all(r.log_ratio >= math.log(1e3) for r in results)

        rng = np.random.default_rng(77)
        for _ in range(50):
            M = rng.uniform(0.5, 3.0)
            L = M * rng.uniform(3.0, 15.0)
            x = rng.uniform(-5, 5)
            s = rng.uniform(0.05, 0.9) * M
            j_lo, j_hi = math.floor((x - L / 2) / M) - 2, math.ceil((x + L / 2) / M) + 2
            centres = {j: j * M + rng.uniform(-1, 1) * (M - s) / 2 for j in range(j_lo, j_hi + 1)}
            setup = UcpSetup(s, M, centres, (0.0, 1.0))
            sets = index_sets(x, L, M)
            images = [tau_map(k, x, L, M, setup) for k in sets.J]
            for target in (min(sets.J1), max(sets.J1)):
                assert sum(abs(v - target) <= 1e-9 for v in images) <= 2
            assert sets.covers(x, L, M)
        info["tau_fixtures"] = 50


def test_08_lifting(criterion):
    with criterion(8, "spectral lifting on flat-bump fixture", limit=30.0) as info:
        g = GridSpec(1, 0.0, 6.0, 1 / 128)
        u = SingleSitePotential(0.5, 0.06, 0.1, "flat")
        M, s = 1.0, 0.06
        centres = {j: j * M + 0.1 * ((j % 3) - 1) for j in range(-5, 6)}
        setup = UcpSetup(s, M, centres, (-np.inf, np.inf))
        V0 = bump_potential(np.arange(-3.0, 4.0)[:, None] + 0.5, 1.0, u, g)
        inside = [c for c in centres.values() if abs(c) < (g.L - s) / 2]
        W = bump_potential(np.array(inside)[:, None], 1.0, u, g)
        rep = lifting_1d(V0, W, g, setup, t_grid=[round(0.1 * k, 12) for k in range(1, 11)],
                         C_minus=u.u_minus)
        info.update(monotone=rep.monotone, bound_holds=rep.holds, slope_fd=f"{rep.slope_fd:.8g}",
                    slope_oracle=f"{rep.slope_oracle:.8g}", rel_err=f"{rep.slope_rel_error:.3g}")
        assert rep.monotone and rep.holds
        assert rep.slope_rel_error <= 0.10


def test_09_good_scale_trend(criterion, tmp_path):
    from importlib import resources

    fixture = str(resources.files("delone_lab") / "fixtures" / "good_scale_1d.yaml")
    with criterion(9, "good-scale pipeline at L = 20, 40, 80", limit=300.0) as info:
        trend = []
        for L in (20, 40, 80):
            cfg = load_config(fixture, {"L": L, "n_trials": 200})
            a = cli.run(cfg, tmp_path / f"a{L}")
            b = cli.run(cfg, tmp_path / f"b{L}")
            for name in ("report.json", "good_scale.csv"):
                assert (tmp_path / f"a{L}" / name).read_bytes() == (tmp_path / f"b{L}" / name).read_bytes()
            assert a.code == b.code == 0
            rep = a.report
            lo, hi = rep["wilson_95_ci"]
            assert rep["n_trials"] >= 200 and 0 <= lo <= rep["p_hat"] <= hi <= 1
            trend.append(f"L={L}:p={rep['p_hat']:.3g}[{lo:.3g},{hi:.3g}]")
        info["trend"] = " ".join(trend)


def test_10_metric_and_topology(criterion):
    with criterion(10, "metric and Hausdorff properties", limit=5.0) as info:
        rng = np.random.default_rng(10)
        sites = rng.uniform(-5, 5, size=(40, 1))
        for _ in range(1000):
            a, b, c = (BernoulliConfig(sites, rng.integers(0, 2, 40)) for _ in range(3))
            dab, dbc, dac = config_metric(a, b), config_metric(b, c), config_metric(a, c)
            assert dab == config_metric(b, a) and config_metric(a, a) == 0
            assert dac <= dab + dbc + 1e-15
            X, Y, Z = (rng.normal(size=(rng.integers(1, 8), 2)) for _ in range(3))
            hxy, hyz, hxz = hausdorff_distance(X, Y), hausdorff_distance(Y, Z), hausdorff_distance(X, Z)
            assert hxy == hausdorff_distance(Y, X) and hausdorff_distance(X, X) == 0
            assert hxz <= hxy + hyz + 1e-12
        D = generate_lattice(1, 1.0, make_window([0], 30.0))
        seq = [translate(D, 0.5 / n) for n in range(1, 11)]
        rep = patch_convergence_check(seq, D, 4.0, 0.1)
        trace = np.array(rep.trace(rep.candidates[0]))
        n = np.arange(1, 11)
        info.update(triples=1000, L_found=rep.L_found, n_times_distance=f"{np.ptp(trace * n):.3g}")
        assert rep.L_found is not None
        np.testing.assert_allclose(trace * n, 0.5, rtol=1e-12)
