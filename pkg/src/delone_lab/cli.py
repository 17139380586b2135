"""Command-line entry point: ``delone-lab <subcommand> [--config PATH] [--seed U64] ...``.

Exit codes: 0 success, 2 a checked inequality was violated, 1 any error.
"""

from __future__ import annotations

import argparse
import copy
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import ENV_PREFIX, ExperimentConfig, _deep_set, load_config
from .geometry import (
    count_pattern_translates, make_window, verify_delone, write_pointset,
)
from .hamiltonian import BernoulliConfig, SingleSitePotential, bump_potential
from .ilse import IlseParams, ilse_experiment
from .model import Model, build_pair, build_pointset, with_free_sites
from .msa import GoodBoxParams, good_scale_probability
from .report import write_csv, write_json
from .spectral import ground_state, localization_profile, lowest_eigenpairs
from .stats import trial_rng
from .ucp import UcpSetup, lifting_1d, ucp_gamma_metadata, ucp_mass_check

log = logging.getLogger("delone_lab")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
SWEEP_AXES = {"L": "L", "beta": "model.beta", "E": "good_scale.E", "h": "grid.h"}


class Outcome:
    """The report of one run together with its exit code."""

    def __init__(self, report, tables=None, violated=False, summary=None):
        self.report = report
        self.tables = tables or {}
        self.code = EXIT_VIOLATION if violated else EXIT_OK
        self.summary = summary or {}


# ---------------------------------------------------------------- model assembly


def build_model(cfg: ExperimentConfig) -> Model:
    m = cfg.model
    g = m.geometry
    D = build_pointset(m.dim, g.kind, cfg.window, seed=g.seed, spacing=g.spacing, rho=g.rho, path=g.path)
    pair = build_pair(D, m.pair.kind, seed=m.pair.seed, shift=m.pair.shift)
    b = m.bump
    u = SingleSitePotential(b.u_minus, b.delta_minus, b.delta_plus, b.profile)
    model = Model(pair, u, m.beta, cfg.h)
    if m.free_sites_R is not None:
        model = with_free_sites(model, m.free_sites_R)
    return model


def _ilse_params(cfg: ExperimentConfig, model: Model) -> IlseParams:
    c = cfg.ilse
    if c.R0 is not None:
        R0 = c.R0
    elif model.split is not None:
        R0 = 3 * cfg.model.free_sites_R
    else:
        R0 = model.pair.extra.params[1]
    b = cfg.model.bump
    return IlseParams(d=model.dim, p=c.p, beta=cfg.model.beta, R0=R0, delta_plus=b.delta_plus,
                      delta_minus=b.delta_minus, u_minus=b.u_minus, epsilon=c.epsilon,
                      C_d=c.C_d, zeta=c.zeta)


def _ones(model, x, L):
    return BernoulliConfig.constant(model.random_sites(x, L), 1.0)


# ---------------------------------------------------------------- runners


def run_gen(cfg, model):
    return Outcome({"n_base": len(model.pair.base), "n_extra": len(model.pair.extra),
                    "base_params": model.pair.base.params, "extra_params": model.pair.extra.params,
                    "union_params": model.pair.union_params},
                   tables={}, summary={"n_base": len(model.pair.base)}), {
        "pointset.txt": model.pair.base, "extra.txt": model.pair.extra}


def run_verify(cfg, model):
    c = cfg.delone
    ps = {"base": model.pair.base, "extra": model.pair.extra, "union": model.pair.union}[c.target]
    rep = verify_delone(ps, c.r, c.R)
    out = {"target": c.target, "r": c.r, "R": c.R, "uniform_discrete": rep.uniform_discrete,
           "relatively_dense": rep.relatively_dense, "min_distance": rep.min_distance,
           "witnesses": {k: np.asarray(v).tolist() for k, v in rep.witnesses.items()}}
    return Outcome(out, violated=not bool(rep), summary={"delone": int(bool(rep))})


def run_spectrum(cfg, model):
    c = cfg.spectrum
    x, L = cfg.centre, cfg.L
    if c.disorder == "background":
        H = model.background(x, L)
    elif c.disorder == "ones":
        H = model.hamiltonian(x, L, _ones(model, x, L))
    else:
        H = model.hamiltonian(x, L, model.sample(x, L, trial_rng(cfg.seed, 0)))
    if c.method == "auto":
        prof = localization_profile(H, c.k)
        eig = prof.eigen
        ipr, rate = prof.ipr, prof.decay_rate
    else:
        eig = lowest_eigenpairs(H, c.k, c.method)
        ipr = rate = [math.nan] * len(eig)
    rows = [{"index": i, "eigenvalue": eig.eigenvalues[i], "residual": eig.residuals[i],
             "IPR": ipr[i], "decay_rate": rate[i]} for i in range(len(eig))]
    out = {"disorder": c.disorder, "method": eig.method, "n_nodes": H.grid.size,
           "eigenvalues": eig.eigenvalues, "max_residual": float(np.max(eig.residuals))}
    extra = {"hamiltonian.coo": H} if c.coo else {}
    return Outcome(out, {"eigen.csv": rows}, summary={"lambda0": float(eig.eigenvalues[0])}), extra


def _good_scale_energy(cfg, model):
    x, L = cfg.centre, cfg.L
    g = cfg.good_scale
    E0, _ = ground_state(model.background(x, L))
    lam1, _ = ground_state(model.hamiltonian(x, L, _ones(model, x, L)))
    E = g.E if g.E is not None else E0 + g.E_fraction * (lam1 - E0)
    return E, E0, lam1


def run_good_scale(cfg, model):
    g = cfg.good_scale
    E, E0, lam1 = _good_scale_energy(cfg, model)
    params = GoodBoxParams(E, g.m, g.zeta, g.pair_budget, g.block_width)
    rep = good_scale_probability(model, cfg.centre, cfg.L, params, g.p, cfg.n_trials, cfg.seed,
                                 threads=cfg.threads)
    out = rep.to_dict()
    out.update({"E0_hat": E0, "lambda0_all_ones": lam1})
    row = rep.csv_row()
    return Outcome(out, {"good_scale.csv": [row]},
                   summary={"p_hat": rep.p_hat, "ci_low": rep.wilson_95_ci[0],
                            "ci_high": rep.wilson_95_ci[1], "n_good": rep.n_good,
                            "verdict": rep.verdict})


def run_ilse(cfg, model):
    params = _ilse_params(cfg, model)
    rep = ilse_experiment(model, cfg.centre, cfg.L, params, cfg.n_trials, cfg.seed, cfg.threads)
    rows = [{"trial": t, "lift": v} for t, v in enumerate(rep.lifts)]
    return Outcome(rep.to_dict(), {"ilse_lifts.csv": rows}, violated=rep.violations_under_event_A > 0,
                   summary={"p_hat": rep.p_hat, "ci_low": rep.ci[0], "ci_high": rep.ci[1],
                            "n_event_A": rep.n_event_A, "log_E_L": rep.log_E_L})


def _one_d_only(model, what):
    if model.dim != 1:
        raise ValueError(f"{what} is one-dimensional; set model.dim = 1")


def run_ucp(cfg, model):
    _one_d_only(model, "ucp1d")
    c = cfg.ucp
    x, L = cfg.centre, cfg.L
    s = c.s if c.s is not None else cfg.model.bump.delta_minus
    omega = model.sample(x, L, trial_rng(cfg.seed, 0))
    H = model.hamiltonian(x, L, omega)
    eig = lowest_eigenpairs(H, c.k)
    on = omega.sites[omega.values >= 0.5].ravel()
    jr = range(math.floor((x[0] - L / 2) / c.M) - 1, math.ceil((x[0] + L / 2) / c.M) + 2)
    interval = (float(eig.eigenvalues.min()) - 1.0, float(eig.eigenvalues.max()) + 1.0)
    setup = UcpSetup.from_points(s, c.M, on, jr, interval)
    results = [ucp_mass_check(eig.eigenvectors[:, i], eig.eigenvalues[i], setup, H, i)
               for i in range(len(eig))]
    rows = [{"index": r.index, "eigenvalue": r.eigenvalue, "mass_sum": r.mass_sum,
             "constant": r.constant, "ratio": r.ratio, "log_constant": r.log_constant,
             "log_ratio": r.log_ratio, "holds": r.holds} for r in results]
    out = {"s": s, "M": c.M, "interval": interval, "rows": rows, "ucp_gamma": ucp_gamma_metadata(1)}
    return Outcome(out, {"ucp_mass.csv": rows}, violated=not all(r.holds for r in results),
                   summary={"min_log_ratio": min(r.log_ratio for r in results)})


def run_lift(cfg, model):
    _one_d_only(model, "lift")
    c = cfg.lift
    x, L = cfg.centre, cfg.L
    s = c.s if c.s is not None else cfg.model.bump.delta_minus
    grid = model.grid(x, L)
    V0 = model.background_potential(x, L)
    omega = model.sample(x, L, trial_rng(cfg.seed, 0))
    on = omega.sites[omega.values >= 0.5].ravel()
    jr = range(math.floor((x[0] - L / 2) / c.M) - 1, math.ceil((x[0] + L / 2) / c.M) + 2)
    setup = UcpSetup.from_points(s, c.M, on, jr, (-np.inf, np.inf))
    centres = np.array([setup.centres[j] for j in jr])
    centres = centres[np.abs(centres - x[0]) < L / 2 + model.u.delta_plus]
    W = bump_potential(centres[:, None], 1.0, model.u, grid)
    C_minus = c.C_minus if c.C_minus is not None else model.u.u_minus
    rep = lifting_1d(V0, W, grid, setup, c.t_grid, C_minus)
    out = {"s": s, "M": c.M, "C_minus": C_minus, "C_svi": rep.C_svi, "interval": rep.interval,
           "log_c_uc": rep.log_c_uc, "lambda0": rep.lam0, "slope_fd": rep.slope_fd,
           "slope_oracle": rep.slope_oracle, "monotone": rep.monotone, "lipschitz": rep.lipschitz,
           "holds": rep.holds, "rows": rep.rows}
    rows = [{k: r[k] for k in ("t", "lambda", "bound", "margin")} for r in rep.rows]
    ok = rep.holds and rep.monotone and rep.lipschitz
    return Outcome(out, {"lifting.csv": rows}, violated=not ok,
                   summary={"lift_at_1": float(rep.lam[-1] - rep.lam0), "slope_fd": rep.slope_fd})


def run_patterns(cfg, model):
    c = cfg.patterns
    D = model.pair.base
    centre = c.K_centre if c.K_centre is not None else [0.0] * model.dim
    K = make_window(centre, c.K_side)
    side = c.search_side if c.search_side is not None else D.window.side
    rep = count_pattern_translates(D, K, make_window(D.window.centre, side))
    out = {"K_centre": centre, "K_side": c.K_side, "search_side": side, "count": rep.count,
           "pattern": rep.pattern, "witnesses": rep.witnesses}
    return Outcome(out, summary={"count": rep.count})


RUNNERS = {
    "gen": run_gen, "verify-delone": run_verify, "spectrum": run_spectrum,
    "good-scale": run_good_scale, "ilse": run_ilse, "ucp1d": run_ucp, "lift": run_lift,
    "patterns": run_patterns,
}


def run(cfg: ExperimentConfig, out_dir=None) -> Outcome:
    """Run one experiment and write its artefacts; returns the outcome."""
    out_dir = Path(out_dir or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    res = RUNNERS[cfg.kind](cfg, model)
    outcome, files = res if isinstance(res, tuple) else (res, {})
    report = {"kind": cfg.kind, "config_hash": cfg.hash(), "seed": cfg.seed,
              "version": __version__, "exit_code": outcome.code, **outcome.report}
    write_json(report, out_dir / "report.json")
    for name, rows in outcome.tables.items():
        write_csv(rows, out_dir / name)
    for name, obj in files.items():
        if name.endswith(".coo"):
            obj.to_coo_text(out_dir / name)
        else:
            write_pointset(obj, out_dir / name)
    return outcome


def _richardson(values):
    """``(f_{k-1} - f_k) / (f_k - f_{k+1})`` for consecutive triples."""
    out = [math.nan] * len(values)
    for k in range(1, len(values) - 1):
        den = values[k] - values[k + 1]
        out[k] = (values[k - 1] - values[k]) / den if den != 0 else math.nan
    return out


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None) -> int:
    """Run ``cfg`` once per value of ``axis``; writes per-value reports and ``sweep.csv``."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    out_dir = Path(out_dir or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = cfg.model_dump()
    rows = []
    worst = EXIT_OK
    for v in values:
        data = copy.deepcopy(base)
        _deep_set(data, SWEEP_AXES[axis], v)
        row = {"axis": axis, "value": float(v)}
        try:
            sub = ExperimentConfig.model_validate(data)
            outcome = run(sub, out_dir / f"{axis}={v:.17g}")
            row.update({"exit_code": outcome.code, "config_hash": sub.hash(), **outcome.summary})
            worst = max(worst, outcome.code)
        except Exception as exc:  # noqa: BLE001 - a failed sub-run is recorded and the sweep continues
            log.error("sweep %s=%s failed: %s", axis, v, exc)
            row.update({"exit_code": EXIT_ERROR, "error": str(exc)})
            worst = max(worst, EXIT_ERROR)
        rows.append(row)
    if cfg.kind == "spectrum" and axis == "h":
        lam = [r.get("lambda0", math.nan) for r in rows]
        for r, q in zip(rows, _richardson(lam)):
            r["richardson_ratio"] = q
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    write_csv(rows, out_dir / "sweep.csv", fields)
    write_json({"axis": axis, "values": values, "config_hash": cfg.hash(), "seed": cfg.seed,
                "rows": rows}, out_dir / "sweep.json")
    return worst


# ---------------------------------------------------------------- argparse


def _common(p):
    p.add_argument("--config", help=f"YAML config (env {ENV_PREFIX}CONFIG)")
    p.add_argument("--seed", type=int, help=f"master seed, 0 <= seed < 2^64 (env {ENV_PREFIX}SEED)")
    p.add_argument("--trials", type=int, help=f"Monte Carlo trials (env {ENV_PREFIX}TRIALS)")
    p.add_argument("--out", help=f"output directory (env {ENV_PREFIX}OUT)")
    p.add_argument("--threads", type=int, help=f"trial-level threads (env {ENV_PREFIX}THREADS)")
    p.add_argument("--L", type=float, dest="L", help="box side")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="delone-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in RUNNERS:
        _common(sub.add_parser(kind, help=f"run the {kind} experiment"))
    sp = sub.add_parser("sweep", help="repeat an experiment along one parameter axis")
    _common(sp)
    sp.add_argument("--kind", required=True, choices=sorted(RUNNERS), help="experiment to sweep")
    sp.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sp.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = args.kind if args.command == "sweep" else args.command
    overrides = {"kind": kind, "seed": args.seed, "n_trials": args.trials, "out": args.out,
                 "threads": args.threads, "L": args.L}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            return sweep(cfg, args.axis, values)
        return run(cfg).code
    except (ValidationError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
