"""Initial length-scale estimate: explicit constants and the checks built on them.

Constants such as ``c_uc`` underflow double precision for any realistic ``M``;
the ``log_*`` variants are exact and are what the comparisons use.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import box_decomposition, in_open_cube
from .hamiltonian import GridSpec, SingleSitePotential, bump_potential, hamiltonian_from_potential, sample_config
from .spectral import CT_SLACK, ResolventSolver, ground_state, resolvent_norm
from .stats import map_trials, trial_rng, wilson_interval
from .ucp import c_sve, ucp_gamma_metadata


@dataclass(frozen=True)
class IlseParams:
    d: int
    p: float
    beta: float
    R0: float
    delta_plus: float
    delta_minus: float
    u_minus: float
    epsilon: float = 0.1
    C_d: float = 1.0
    zeta: float = 0.5

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.R0 <= 0 or self.C_d <= 0:
            raise ValueError("R0 and C_d must be positive")
        if not 0 < self.delta_minus < self.delta_plus:
            raise ValueError("need 0 < delta_minus < delta_plus")
        if not 0 < self.u_minus <= 1:
            raise ValueError("u_minus must lie in (0, 1]")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if self.d >= 2:
            if not 0 < self.epsilon < 0.75 - 1.0 / self.d:
                raise ValueError(f"epsilon must lie in (0, 3/4 - 1/d) = (0, {0.75 - 1.0 / self.d})")
            if not (4.0 / 3.0) * (self.epsilon + 1.0 / self.d) < 1:
                raise ValueError("need (4/3)(epsilon + 1/d) < 1")

    @property
    def a(self) -> float:
        """The exponent ``epsilon + 1/d``."""
        return self.epsilon + 1.0 / self.d


# ------------------------------------------------------------------ scale choice


def _odd_scan(L, lower, upper):
    if upper <= lower:
        raise ValueError("L too small for the scale choice")
    n = max(1, math.ceil(L / upper))
    if L / n > upper * (1 + 1e-15):
        n += 1
    if n % 2 == 0:
        n += 1
    M = L / n
    if M <= lower:
        raise ValueError("L too small for the scale choice")
    return M, n


def scale_upper(L: float, params: IlseParams) -> float:
    """``4 R0 (log L)^{epsilon + 1/d}``."""
    return 4.0 * params.R0 * math.log(L) ** params.a


def scale_upper_1d(L: float, params: IlseParams) -> float:
    """``4 R0 (1 + p) log L / |log beta|``."""
    return 4.0 * params.R0 * (1 + params.p) * math.log(L) / abs(math.log(params.beta))


def choose_M(L: float, params: IlseParams):
    """Largest ``mu`` in ``(R0 + 2 delta_+, upper]`` with ``L/mu`` odd; returns ``(M, ell)``."""
    if L <= 1:
        raise ValueError("L too small for the scale choice")
    return _odd_scan(L, params.R0 + 2 * params.delta_plus, scale_upper(L, params))


def choose_M_1d(L: float, params: IlseParams):
    """As :func:`choose_M` with the one-dimensional upper bound."""
    if L <= 1:
        raise ValueError("L too small for the scale choice")
    return _odd_scan(L, params.R0 + 2 * params.delta_plus, scale_upper_1d(L, params))


# ------------------------------------------------------------------ constants


def log_c_uc(M: float, params: IlseParams) -> float:
    base = params.delta_minus / (params.C_d * M)
    if base >= 1:
        raise ValueError("M too small for the UCP-constant regime: need delta_- / (C_d M) < 1")
    return (params.C_d + 3 * params.C_d * M ** (4.0 / 3.0)) * math.log(base)


def c_uc(M: float, params: IlseParams) -> float:
    """``(delta_- / (C_d M))^{C_d + 3 C_d M^{4/3}}``."""
    return math.exp(log_c_uc(M, params))


def k_v_bound(M: float, d: int) -> float:
    """``M^2 (4 + M^{-2} d pi^2 / 9)``."""
    if M <= 0:
        raise ValueError("M must be positive")
    return M ** 2 * (4 + M ** -2 * d * math.pi ** 2 / 9)


def log_energy_threshold(L: float, params: IlseParams) -> float:
    if params.d < 2:
        raise ValueError("energy_threshold is the d >= 2 branch; use energy_threshold_1d")
    return math.log(params.u_minus) + log_c_uc(scale_upper(L, params), params)


def energy_threshold(L: float, params: IlseParams) -> float:
    """``u_- c_uc(4 R0 (log L)^{epsilon + 1/d})``."""
    return math.exp(log_energy_threshold(L, params))


def threshold_constants(params: IlseParams) -> dict:
    """``C1``, ``C2`` and ``C_{d,u,D'}`` obtained by expanding the composition above.

    With ``a = epsilon + 1/d`` the threshold equals
    ``u_- (C log L)^{-a [C1 + C2 (log L)^{4a/3}]}``.
    """
    a = params.a
    return {
        "C1": params.C_d,
        "C2": 3 * params.C_d * (4 * params.R0) ** (4.0 / 3.0),
        "C_du": (4 * params.R0 * params.C_d / params.delta_minus) ** (1.0 / a),
        "a": a,
    }


def log_energy_threshold_closed_form(L: float, params: IlseParams) -> float:
    k = threshold_constants(params)
    a, lg = k["a"], math.log(L)
    return math.log(params.u_minus) - a * (k["C1"] + k["C2"] * lg ** (4 * a / 3)) * math.log(k["C_du"] * lg)


def one_d_rate(params: IlseParams, v_sup_dev: float) -> float:
    """``C = 2 C_{s,V,I}`` with ``s = delta_-``."""
    return 2.0 * c_sve(params.delta_minus, v_sup_dev)


def log_ucp_constant_1d(M: float, delta_minus: float, C: float) -> float:
    """``log((delta_- / 4M) e^{-C M})``."""
    return math.log(delta_minus / (4.0 * M)) - C * M


def log_energy_threshold_1d(L: float, params: IlseParams, C: float) -> float:
    M, _ = choose_M_1d(L, params)
    return math.log(params.u_minus) + log_ucp_constant_1d(M, params.delta_minus, C)


def energy_threshold_1d(L: float, params: IlseParams, C: float) -> float:
    """``u_- (delta_- / 4M) e^{-C M}`` at ``M = choose_M_1d(L)``."""
    return math.exp(log_energy_threshold_1d(L, params, C))


def beta_threshold_1d(params: IlseParams, C: float) -> dict:
    """The induced ``C~ = 2 R0 (1 + p) C`` and the one-dimensional threshold ``e^{-C~}``."""
    c_tilde = 2 * params.R0 * (1 + params.p) * C
    return {"C_tilde": c_tilde, "beta_threshold": math.exp(-c_tilde)}


def mass_from_energy(E: float) -> float:
    """``sqrt(E / 64)``."""
    if E <= 0:
        raise ValueError("energy must be positive")
    return math.sqrt(E / 64.0)


# ------------------------------------------------------------------ event A


def event_A_probability_bound(ell: int, M: float, params: IlseParams) -> float:
    """``1 - ell^d beta^{floor((M - 2 delta_+)/R0)^d}``."""
    q = math.floor((M - 2 * params.delta_plus) / params.R0 + 1e-9)
    if q < 1:
        raise ValueError("floor((M - 2 delta_+)/R0) < 1: the bound is vacuous")
    return 1.0 - ell ** params.d * params.beta ** (q ** params.d)


@dataclass
class EventAResult:
    occurred: bool
    chosen: dict
    absolute: dict
    x: np.ndarray
    M: float
    ell: int


def event_A_from_config(omega, x, L, M, params: IlseParams) -> EventAResult:
    """Evaluate event A for one configuration and pick ``gamma_k`` closest to each sub-box centre."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dec = box_decomposition(L, M, x)
    on = omega.sites[omega.values >= 0.5] if len(omega) else np.zeros((0, len(x)))
    chosen, absolute = {}, {}
    occurred = True
    for k, c in zip(dec.indices, dec.centres):
        inside = on[in_open_cube(on, c, M - 2 * params.delta_plus, tol=0.0)] if len(on) else on
        if not len(inside):
            occurred = False
            continue
        dist = np.linalg.norm(inside - c, axis=1)
        order = np.lexsort(tuple(inside[:, a] for a in range(inside.shape[1] - 1, -1, -1)) + (dist,))
        g = inside[order[0]]
        key = tuple(int(v) for v in k)
        absolute[key] = g.copy()
        chosen[key] = (g - x) / M
    return EventAResult(occurred, chosen, absolute, x, M, dec.ell)


def simulate_event_A(D0, beta, x, L, M, params: IlseParams, rng) -> EventAResult:
    """Draw ``omega`` on ``D0`` inside ``Lambda_L(x)`` and evaluate event A."""
    sites = D0.restrict(np.atleast_1d(np.asarray(x, float)), L)
    omega = sample_config(sites, beta, rng)
    return event_A_from_config(omega, x, L, M, params)


def event_A_exact(D0, x, L, M, params: IlseParams) -> float:
    """``prod_k (1 - beta^{n_k})`` with ``n_k = |D0 cap Lambda_{M - 2 delta_+}(x + M k)|``."""
    dec = box_decomposition(L, M, x)
    prob = 1.0
    for c in dec.centres:
        n = int(np.count_nonzero(in_open_cube(D0.points, c, M - 2 * params.delta_plus, tol=0.0)))
        prob *= 1.0 - params.beta ** n
    return prob


# ------------------------------------------------------------------ lifting


def thinned_potential(chosen: dict, u: SingleSitePotential, M: float, grid: GridSpec, x=None) -> np.ndarray:
    """``W(y) = sum_k u(y - x - M gamma_k)`` at the grid nodes."""
    x = grid.centre if x is None else np.atleast_1d(np.asarray(x, float))
    if not chosen:
        return np.zeros(grid.size)
    pts = x + M * np.array([np.atleast_1d(v) for v in chosen.values()])
    return bump_potential(pts, 1.0, u, grid)


def one_d_rate_for_background(V_background, E0_hat, params: IlseParams, w_sup: float = 1.0) -> float:
    """``C = 2 C_{s,V,I}`` for the background plus a thinned potential bounded by ``w_sup``.

    ``I = [E0 - 1, E0 + w_sup + 1]`` contains every lifted ground state; the
    supremum over ``t`` and ``E`` sits on the corners of that box.
    """
    V = np.asarray(V_background, dtype=float)
    interval = (E0_hat - 1.0, E0_hat + w_sup + 1.0)
    dev = 0.0
    for t in (0.0, 1.0):
        for E in interval:
            dev = max(dev, V.max() + t * w_sup - E, E - V.min())
    return one_d_rate(params, dev)


@dataclass
class LiftingCheck:
    lambda_background: float
    lambda_lifted: float
    lift_measured: float
    log_lift_bound: float
    holds: bool

    @property
    def lift_bound(self):
        return math.exp(self.log_lift_bound) if self.log_lift_bound > -745 else 0.0

    @property
    def log10_ratio(self):
        if self.lift_measured <= 0:
            return -math.inf
        return (math.log(self.lift_measured) - self.log_lift_bound) / math.log(10)


def lifting_check(V_background, u, chosen, M, grid: GridSpec, params: IlseParams, C=None,
                  x=None) -> LiftingCheck:
    """Compare ``lambda0(H_D + W) - lambda0(H_D)`` with ``u_- c_uc(M)`` (or the 1D constant)."""
    V = np.asarray(V_background, dtype=float).ravel()
    W = thinned_potential(chosen, u, M, grid, x)
    lam_b, _ = ground_state(hamiltonian_from_potential(grid, V))
    lam_l, _ = ground_state(hamiltonian_from_potential(grid, V + W))
    if params.d == 1:
        if C is None:
            C = one_d_rate_for_background(V, lam_b, params)
        log_bound = math.log(params.u_minus) + log_ucp_constant_1d(M, params.delta_minus, C)
    else:
        log_bound = math.log(params.u_minus) + log_c_uc(M, params)
    lift = lam_l - lam_b
    holds = lift > 0 and math.log(lift) >= log_bound
    return LiftingCheck(lam_b, lam_l, lift, log_bound, holds)


# ------------------------------------------------------------------ experiment


@dataclass
class IlseReport:
    L: float
    M_L: float
    ell: int
    E_L: float
    log_E_L: float
    m_L: float
    p: float
    threshold: float
    n_trials: int
    n_pass: int
    p_hat: float
    ci: tuple
    lift_stats: dict
    E0_hat: float
    n_event_A: int
    violations_under_event_A: int
    event_A_bound: float | None
    constants: dict
    seed: int
    lifts: list = field(default_factory=list, repr=False)

    def to_dict(self):
        out = asdict(self)
        out.pop("lifts")
        return out


def ilse_experiment(model, x, L, params: IlseParams, n_trials: int, seed: int,
                    threads: int = 1) -> IlseReport:
    """Monte Carlo over ``omega`` with free sites at 0: how often ``lambda0 >= E0_hat + E_L``.

    Trials where event A occurs but the lift falls short are counted in
    ``violations_under_event_A``; the lifting bound predicts there are none.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    d = model.dim
    if d != params.d:
        raise ValueError("model and parameter dimensions differ")
    x = np.broadcast_to(np.asarray(x, float), (d,))
    H_bg = model.background(x, L)
    E0_hat, _ = ground_state(H_bg)
    constants = {"C_d": params.C_d, "beta": params.beta, "R0": params.R0,
                 "delta_plus": params.delta_plus, "delta_minus": params.delta_minus,
                 "u_minus": params.u_minus, "epsilon": params.epsilon, "zeta": params.zeta,
                 "ucp_gamma": ucp_gamma_metadata(d)}
    if d == 1:
        M, ell = choose_M_1d(L, params)
        C = one_d_rate_for_background(H_bg.potential, E0_hat, params)
        log_E = log_energy_threshold_1d(L, params, C)
        constants.update({"C": C, **beta_threshold_1d(params, C)})
    else:
        M, ell = choose_M(L, params)
        log_E = log_energy_threshold(L, params)
        constants.update(threshold_constants(params))
    E_L = math.exp(log_E) if log_E > -745 else 0.0
    try:
        bound_A = event_A_probability_bound(ell, M, params)
    except ValueError:
        bound_A = None

    def one(trial):
        omega = model.sample(x, L, trial_rng(seed, trial))
        lam, _ = ground_state(model.hamiltonian(x, L, omega))
        lift = lam - E0_hat
        ok = lift > 0 and math.log(lift) >= log_E
        return lift, ok, event_A_from_config(omega, x, L, M, params).occurred

    results = map_trials(one, n_trials, threads)
    lifts = [r[0] for r in results]
    n_pass = sum(r[1] for r in results)
    return IlseReport(
        L=float(L), M_L=M, ell=ell, E_L=E_L, log_E_L=log_E,
        m_L=math.exp(0.5 * (log_E - math.log(64.0))), p=params.p,
        threshold=1.0 - L ** (-params.p * d), n_trials=n_trials, n_pass=n_pass,
        p_hat=n_pass / n_trials, ci=wilson_interval(n_pass, n_trials),
        lift_stats={"min": float(np.min(lifts)), "median": float(np.median(lifts)),
                    "max": float(np.max(lifts))},
        E0_hat=E0_hat, n_event_A=sum(r[2] for r in results),
        violations_under_event_A=sum(r[2] and not r[1] for r in results), event_A_bound=bound_A,
        constants=constants, seed=seed, lifts=lifts,
    )


# ------------------------------------------------------------------ Combes-Thomas window


@dataclass
class CtWindowReport:
    lambda0: float
    E0_hat: float
    calE: float
    rows: list
    norm_below_threshold: bool

    @property
    def holds(self):
        return all(r["norm_ok"] and r["block_ok"] for r in self.rows)


def ct_window_check(H, E0_hat, calE, L, zeta, pairs, width=1.0, slack=CT_SLACK) -> CtWindowReport:
    """Check the resolvent bounds that make ``Lambda_L`` good on ``[E0, E0 + calE/2]``."""
    if calE <= 0:
        raise ValueError("energy gap must be positive")
    lam0, _ = ground_state(H)
    if lam0 < E0_hat + calE - 1e-12 * (1 + abs(lam0)):
        raise ValueError(f"lambda0 = {lam0} is below E0 + calE = {E0_hat + calE}")
    d = H.grid.dim
    from .spectral import _grid_masks, combes_thomas_bound

    rows = []
    for E in (E0_hat, E0_hat + calE / 4, E0_hat + calE / 2):
        rn = resolvent_norm(H, E)
        norm_ok = rn <= (2.0 / calE) * (1 + 1e-10)
        solver = ResolventSolver(H, E)
        pair_rows = []
        for y, z in pairs:
            my, mz = _grid_masks(H.grid, y, z, width)
            dist = float(np.linalg.norm(np.atleast_1d(y) - np.atleast_1d(z)))
            measured = solver.block_norm(my, mz)
            bound = 8.0 / (3.0 * calE) * math.exp(-math.sqrt(calE / 32.0) * dist)
            ct = combes_thomas_bound(calE / 2, d, dist)
            pair_rows.append({"dist": dist, "measured": measured, "bound": bound,
                              "ct_bound": ct, "chain": dist >= 2 * math.sqrt(d) and ct <= bound * (1 + 1e-12),
                              "holds": measured <= slack * bound})
        rows.append({"E": E, "resolvent_norm": rn, "norm_bound": 2.0 / calE, "norm_ok": norm_ok,
                     "pairs": pair_rows, "block_ok": all(r["holds"] for r in pair_rows)})
    below = math.log(2.0 / calE) <= L ** (1 - zeta)
    return CtWindowReport(lam0, E0_hat, calE, rows, below)


__all__ = [
    "CtWindowReport", "EventAResult", "IlseParams", "IlseReport", "LiftingCheck", "beta_threshold_1d",
    "c_uc", "choose_M", "choose_M_1d", "ct_window_check", "energy_threshold", "energy_threshold_1d",
    "event_A_exact", "event_A_from_config", "event_A_probability_bound", "ilse_experiment", "k_v_bound",
    "threshold_constants", "lifting_check", "log_c_uc", "log_energy_threshold",
    "log_energy_threshold_closed_form", "log_energy_threshold_1d", "log_ucp_constant_1d",
    "mass_from_energy", "one_d_rate", "one_d_rate_for_background", "scale_upper", "scale_upper_1d",
    "simulate_event_A", "thinned_potential",
]
