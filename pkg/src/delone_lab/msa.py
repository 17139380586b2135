"""Good boxes and Monte Carlo estimates of good scales."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import ResolventSolver, SpectralError, eigs_near
from .stats import map_trials, trial_rng, wilson_interval


@dataclass(frozen=True)
class GoodBoxParams:
    E: float
    m: float
    zeta: float
    pair_budget: int = 20
    block_width: float | None = None  # defaults to L/10

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("decay rate m must be positive")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if self.pair_budget < 1:
            raise ValueError("pair budget must be at least 1")


def probe_pairs(x, L, d, budget):
    """Pairs of coarse-subgrid centres used to sample the decay condition.

    Centres sit at the midpoints of the ``10^d`` sub-cubes of side ``L/10``;
    every pair at Euclidean distance ``>= L/100`` qualifies. When there are more
    than ``budget`` pairs, a farthest-first traversal in pair space (seeded with
    the most distant pair) picks a well-spread subset.
    """
    x = np.broadcast_to(np.asarray(x, float), (d,))
    ticks = -0.5 * L + L / 20 + (L / 10) * np.arange(10)
    centres = np.array(list(itertools.product(ticks, repeat=d))) + x
    pairs = [(i, j) for i, j in itertools.combinations(range(len(centres)), 2)
             if np.linalg.norm(centres[i] - centres[j]) >= L / 100]
    if len(pairs) <= budget:
        chosen = pairs
    else:
        feats = np.array([np.concatenate([centres[i], centres[j]]) for i, j in pairs])
        dist = np.array([np.linalg.norm(centres[i] - centres[j]) for i, j in pairs])
        first = int(np.argmax(dist))
        chosen_idx = [first]
        gap = np.linalg.norm(feats - feats[first], axis=1)
        while len(chosen_idx) < budget:
            nxt = int(np.argmax(gap))
            chosen_idx.append(nxt)
            gap = np.minimum(gap, np.linalg.norm(feats - feats[nxt], axis=1))
        chosen = [pairs[k] for k in chosen_idx]
    return [(centres[i], centres[j]) for i, j in chosen]


@dataclass
class GoodBoxResult:
    good: bool
    reason: str
    resolvent_norm: float
    log_norm_margin: float
    worst_pair: tuple | None = None
    margins: list = field(default_factory=list)


def is_good_box(H, L, params: GoodBoxParams, x=None) -> GoodBoxResult:
    """Check the resolvent-norm bound and sampled off-diagonal decay at energy ``E``.

    ``margins`` are log-margins ``-m|y-z| - log||chi_y R chi_z||`` (positive is
    good). A hit of the spectrum makes the box bad rather than raising.
    """
    grid = H.grid
    x = grid.centre if x is None else x
    E = params.E
    near = eigs_near(H, E, 1)
    if near.exact_hit:
        return GoodBoxResult(False, "spectrum hit", math.inf, -math.inf)
    rnorm = 1.0 / abs(float(near.eigenvalues[0]) - E)
    log_margin = L ** (1 - params.zeta) - math.log(rnorm)
    if log_margin < 0:
        return GoodBoxResult(False, "resolvent norm", rnorm, log_margin)
    try:
        solver = ResolventSolver(H, E)
    except SpectralError:
        return GoodBoxResult(False, "spectrum hit", math.inf, -math.inf)
    s = params.block_width if params.block_width is not None else L / 10
    worst = None
    margins = []
    for y, z in probe_pairs(x, L, grid.dim, params.pair_budget):
        my, mz = grid.mask_in_cube(y, s), grid.mask_in_cube(z, s)
        b = solver.block_norm(my, mz)
        dist = float(np.linalg.norm(y - z))
        mg = -params.m * dist - (math.log(b) if b > 0 else -math.inf)
        margins.append(mg)
        if worst is None or mg < worst[0]:
            worst = (mg, (y.tolist(), z.tolist()))
    good = all(mg >= 0 for mg in margins)
    return GoodBoxResult(good, "ok" if good else "decay", rnorm, log_margin,
                         worst[1] if worst else None, margins)


@dataclass
class GoodScaleReport:
    L: float
    x: list
    params: dict
    n_trials: int
    n_good: int
    p_hat: float
    wilson_95_ci: tuple
    threshold: float
    verdict: str
    seed: int = 0
    block_width: float = 0.0
    reasons: dict = field(default_factory=dict)

    CSV_FIELDS = ("L", "x", "E", "m", "zeta", "pair_budget", "block_width", "n_trials", "n_good",
                  "p_hat", "ci_low", "ci_high", "threshold", "verdict", "seed")

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        return {
            "L": self.L, "x": " ".join(f"{v:.17g}" for v in self.x), "E": self.params["E"],
            "m": self.params["m"], "zeta": self.params["zeta"],
            "pair_budget": self.params["pair_budget"], "block_width": self.block_width,
            "n_trials": self.n_trials, "n_good": self.n_good, "p_hat": self.p_hat,
            "ci_low": self.wilson_95_ci[0], "ci_high": self.wilson_95_ci[1],
            "threshold": self.threshold, "verdict": self.verdict, "seed": self.seed,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS)
        w.writeheader()
        w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in self.csv_row().items()})
        return buf.getvalue()


def good_scale_probability(model, x, L, params: GoodBoxParams, p: float, n_trials: int,
                           seed: int, threads: int = 1) -> GoodScaleReport:
    """Monte Carlo estimate of ``P(Lambda_L(x) is good)`` against ``1 - L^{-pd}``."""
    if n_trials < 30:
        raise ValueError("need at least 30 trials")
    x = np.broadcast_to(np.asarray(x, float), (model.dim,))

    def one(trial):
        rng = trial_rng(seed, trial)
        omega = model.sample(x, L, rng)
        return is_good_box(model.hamiltonian(x, L, omega), L, params, x)

    results = map_trials(one, n_trials, threads)
    n_good = sum(r.good for r in results)
    reasons = {}
    for r in results:
        reasons[r.reason] = reasons.get(r.reason, 0) + 1
    ci = wilson_interval(n_good, n_trials)
    thr = 1.0 - L ** (-p * model.dim)
    if ci[0] >= thr:
        verdict = "good"
    elif ci[1] < thr:
        verdict = "not good"
    else:
        verdict = "inconclusive"
    pdict = asdict(params)
    width = params.block_width if params.block_width is not None else L / 10
    return GoodScaleReport(float(L), x.tolist(), pdict, n_trials, n_good, n_good / n_trials, ci,
                           thr, verdict, seed, width, reasons)


def scale_sequence(L0: float, n: int):
    """``[L0, 2 L0, ..., 2^n L0]``."""
    if L0 <= 0:
        raise ValueError("L0 must be positive")
    return [L0 * 2 ** k for k in range(n + 1)]
