"""Generating and verifying finite patches of Delone sets.

Cubes ``Lambda_L(x)`` are open, axis-aligned, of side ``L`` (half-width ``L/2``).
A :class:`PointSet` is a finite patch together with the window on which it is
known to be complete; every verification is restricted to the part of the
window where the finite data can actually certify the property.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

MEMBERSHIP_TOL = 1e-12
DEDUP_TOL = 1e-12
PATTERN_TOL = 1e-9


class GeometryError(ValueError):
    """Raised when a patch cannot support the requested operation."""


def in_open_cube(points, centre, side, tol=MEMBERSHIP_TOL):
    """Boolean mask of points strictly inside ``Lambda_side(centre)``."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros(len(points), dtype=bool)
    off = np.abs(points - np.asarray(centre, dtype=float))
    return np.all(off < 0.5 * side - tol, axis=1)


def cube_contains_cube(outer_c, outer_side, inner_c, inner_side, tol=1e-9):
    """Closed containment of ``Lambda_inner`` in the closure of ``Lambda_outer``."""
    off = np.abs(np.asarray(inner_c, dtype=float) - np.asarray(outer_c, dtype=float))
    return bool(np.all(off + 0.5 * inner_side <= 0.5 * outer_side + tol))


@dataclass(frozen=True)
class Window:
    centre: tuple
    side: float

    @property
    def dim(self):
        return len(self.centre)

    @property
    def lo(self):
        return np.asarray(self.centre) - 0.5 * self.side

    @property
    def hi(self):
        return np.asarray(self.centre) + 0.5 * self.side

    def shrink(self, amount):
        """Window with ``amount`` removed on each side."""
        return Window(self.centre, self.side - 2.0 * amount)

    def translate(self, x):
        return Window(tuple(float(c) for c in np.asarray(self.centre) + x), self.side)


@dataclass(frozen=True)
class PointSet:
    """A finite patch of a (candidate) Delone set.

    ``points`` has shape (n, dim); ``params`` is the claimed ``(r, R)`` or
    ``None``. Either entry of ``params`` may be ``None`` when unknown.
    """

    dim: int
    points: np.ndarray
    window: Window
    params: tuple | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GeometryError(f"dimension must be 1 or 2, got {self.dim}")
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.dim)
        if self.window.dim != self.dim:
            raise GeometryError("window dimension does not match point dimension")
        if len(pts):
            outside = np.any(
                (pts < self.window.lo - MEMBERSHIP_TOL) | (pts > self.window.hi + MEMBERSHIP_TOL),
                axis=1,
            )
            if outside.any():
                raise GeometryError(f"point {pts[outside][0]} lies outside the window closure")
            pts = _dedupe(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def restrict(self, centre, side):
        """Points inside the open cube ``Lambda_side(centre)``."""
        return self.points[in_open_cube(self.points, centre, side)]


def _dedupe(pts):
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    if len(pts) < 2:
        return pts
    pairs = cKDTree(pts).query_pairs(DEDUP_TOL, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return pts
    drop = np.zeros(len(pts), dtype=bool)
    for i, j in sorted(map(tuple, pairs)):
        if not drop[i]:
            drop[max(i, j)] = True
    return pts[~drop]


def make_window(centre, side):
    centre = np.atleast_1d(np.asarray(centre, dtype=float))
    return Window(tuple(float(c) for c in centre), float(side))


# ---------------------------------------------------------------- verification


@dataclass
class DeloneReport:
    uniform_discrete: bool
    relatively_dense: bool
    witnesses: dict = field(default_factory=dict)
    test_region: Window | None = None
    min_distance: float = math.inf

    def __bool__(self):
        return self.uniform_discrete and self.relatively_dense


def verify_delone(ps: PointSet, r: float, R: float) -> DeloneReport:
    """Check the (r, R)-Delone property on the certifiable part of the patch.

    Uniform discreteness holds iff the minimal pairwise sup-norm distance is at
    least ``r``. Relative denseness is checked for cube centres in the window
    shrunk by ``R/2`` on every side, i.e. only for cubes lying in the window.
    """
    if len(ps) == 0:
        raise GeometryError("empty point set")
    if not 0 < r <= R:
        raise GeometryError(f"need 0 < r <= R, got r={r}, R={R}")
    if ps.window.side <= 2 * R:
        raise GeometryError(
            f"window side {ps.window.side} too small to certify R={R} (needs > {2 * R})"
        )
    witnesses = {}
    pts = ps.points
    min_dist = math.inf
    if len(pts) >= 2:
        dist, idx = cKDTree(pts).query(pts, k=2, p=np.inf)
        nn = dist[:, 1]
        i = int(np.argmin(nn))
        min_dist = float(nn[i])
        uniform = min_dist >= r - MEMBERSHIP_TOL
        if not uniform:
            witnesses["uniform_discrete"] = 0.5 * (pts[i] + pts[idx[i, 1]])
    else:
        uniform = True
    region = ps.window.shrink(0.5 * R)
    x = _empty_cube_witness(ps, R)
    dense = x is None
    if not dense:
        witnesses["relatively_dense"] = x
    return DeloneReport(uniform, dense, witnesses, region, min_dist)


def _empty_cube_witness(ps, R):
    """Centre x in the shrunk window with ``Lambda_R(x)`` free of points, or None."""
    half = 0.5 * R
    if ps.dim == 1:
        lo, hi = float(ps.window.lo[0]), float(ps.window.hi[0])
        xs = np.concatenate([[lo], np.sort(ps.points[:, 0]), [hi]])
        gaps = np.diff(xs)
        k = int(np.argmax(gaps))
        if gaps[k] >= R - MEMBERSHIP_TOL:
            return np.array([0.5 * (xs[k] + xs[k + 1])])
        return None
    return _empty_cube_bnb(ps, half)


def _empty_cube_bnb(ps, half, max_cells=400_000):
    # f(x) = sup-distance from x to the set is 1-Lipschitz in the sup norm;
    # branch and bound on cells of the test region.
    tree = cKDTree(ps.points)
    region = ps.window.shrink(half)
    lo, hi = region.lo, region.hi
    side = float(region.side)
    n0 = max(1, int(math.ceil(side / max(half, 1e-6))))
    g = side / n0
    axes = [lo[a] + g * (np.arange(n0) + 0.5) for a in range(ps.dim)]
    centres = np.array(list(itertools.product(*axes)))
    # Also test the corners of the region where the distance function often peaks.
    corners = np.array(list(itertools.product(*[(lo[a], hi[a]) for a in range(ps.dim)])))
    dist, _ = tree.query(corners, k=1, p=np.inf)
    if np.any(dist >= half - MEMBERSHIP_TOL):
        return corners[int(np.argmax(dist))]
    half_w = 0.5 * g
    total = 0
    while len(centres):
        total += len(centres)
        if total > max_cells:
            raise GeometryError("relative denseness check did not resolve; refine the patch")
        dist, _ = tree.query(centres, k=1, p=np.inf)
        hit = dist >= half - MEMBERSHIP_TOL
        if hit.any():
            return centres[int(np.argmax(dist))]
        keep = dist + half_w >= half - MEMBERSHIP_TOL
        if half_w < 1e-10:
            keep[:] = False
        centres = centres[keep]
        if not len(centres):
            break
        q = 0.5 * half_w
        offs = np.array(list(itertools.product((-q, q), repeat=ps.dim)))
        centres = (centres[:, None, :] + offs[None, :, :]).reshape(-1, ps.dim)
        half_w = q
    return None


# ---------------------------------------------------------------- generators


def _lattice_points(d, a, window, dilate=0.0):
    lo = window.lo - dilate
    hi = window.hi + dilate
    axes = [a * np.arange(math.ceil(lo[k] / a), math.floor(hi[k] / a) + 1) for k in range(d)]
    if any(len(ax) == 0 for ax in axes):
        return np.empty((0, d))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def generate_lattice(d: int, a: float, window: Window) -> PointSet:
    """``a Z^d`` intersected with the open window; claimed parameters ``(a, 2a)``."""
    if a <= 0:
        raise GeometryError("lattice spacing must be positive")
    pts = _lattice_points(d, a, window)
    pts = pts[in_open_cube(pts, window.centre, window.side)]
    return PointSet(d, pts, window, (a, 2 * a))


def generate_perturbed_lattice(d: int, rho: float, rng, window: Window) -> PointSet:
    """Each ``g`` in ``Z^d`` displaced uniformly inside ``Lambda_{1-rho}(0)``.

    The result is ``(rho, 2 - rho)``-Delone. Points are generated from a
    dilated window and then clipped, so the patch is complete on the window.
    """
    if not 0 < rho < 0.5:
        raise GeometryError("rho must lie in (0, 1/2)")
    if window.side <= 0:
        return PointSet(d, np.empty((0, d)), window, (rho, 2 - rho))
    base = _lattice_points(d, 1.0, window, dilate=1.0)
    disp = (rng.random(base.shape) - 0.5) * (1.0 - rho)
    pts = base + disp
    pts = pts[in_open_cube(pts, window.centre, window.side, tol=0.0)]
    return PointSet(d, pts, window, (rho, 2 - rho))


def thin_by_percolation(ps: PointSet, keep_prob: float, rng) -> PointSet:
    """Independent Bernoulli thinning; relative denseness is no longer known."""
    if not 0 < keep_prob <= 1:
        raise GeometryError("keep probability must lie in (0, 1]")
    keep = rng.random(len(ps)) < keep_prob
    r = ps.params[0] if ps.params else None
    return PointSet(ps.dim, ps.points[keep], ps.window, (r, None))


@dataclass(frozen=True)
class DelonePair:
    base: PointSet
    extra: PointSet
    union_params: tuple

    @property
    def union(self) -> PointSet:
        pts = np.concatenate([self.base.points, self.extra.points])
        pts = pts[in_open_cube(pts, self.extra.window.centre, self.extra.window.side, tol=0.0)]
        return PointSet(self.base.dim, pts, self.extra.window, self.union_params)


def make_delone_pair(D: PointSet, rng) -> DelonePair:
    """Attach to every point g one partner in ``Lambda_{r/2}(g) minus Lambda_{r/4}(g)``.

    Partners sit at sup-distance in ``[r/8, r/4)`` from their base point, so the
    union is ``(r/8, R)``-Delone and the partner set is ``(r/2, R + r/2)``-Delone.
    """
    if not D.params or D.params[0] is None or D.params[1] is None:
        raise GeometryError("base set needs claimed parameters (r, R)")
    r, R = D.params
    offsets = np.empty_like(D.points)
    for i in range(len(D)):
        while True:
            o = (rng.random(D.dim) - 0.5) * (r / 2)
            if np.max(np.abs(o)) >= r / 8:
                break
        offsets[i] = o
    extra_pts = D.points + offsets
    window = D.window.shrink(r / 4)
    keep = in_open_cube(extra_pts, window.centre, window.side, tol=0.0)
    extra = PointSet(D.dim, extra_pts[keep], window, (r / 2, R + r / 2))
    return DelonePair(D, extra, (r / 8, R))


def shifted_pair(D: PointSet, shift) -> DelonePair:
    """Deterministic pair ``D' = D + shift`` (used for reproducible fixtures)."""
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (D.dim,))
    extra_pts = D.points + shift
    window = D.window.shrink(float(np.max(np.abs(shift))))
    keep = in_open_cube(extra_pts, window.centre, window.side, tol=0.0)
    extra = PointSet(D.dim, extra_pts[keep], window, D.params)
    allpts = np.concatenate([D.points, extra_pts[keep]])
    if len(allpts) >= 2:
        dist, _ = cKDTree(allpts).query(allpts, k=2, p=np.inf)
        r_union = float(dist[:, 1].min())
    else:
        r_union = D.params[0]
    R = D.params[1] if D.params else None
    return DelonePair(D, extra, (r_union, R))


@dataclass(frozen=True)
class FreeSiteSplit:
    d0: PointSet
    s: PointSet
    generators: np.ndarray


def free_sites_split(Dprime: PointSet, Rprime: float) -> FreeSiteSplit:
    """Pick one point of ``D'`` per cell ``Lambda_{R'}(z)``, ``z`` in ``(2R' Z)^d``.

    The chosen point is the one closest (Euclidean) to ``z``; ties go to the
    lexicographically smallest point. Only cells lying in the window are used.
    """
    if Rprime <= 0:
        raise GeometryError("R' must be positive")
    inner = Dprime.window.shrink(0.5 * Rprime)
    zs = _lattice_points(Dprime.dim, 2 * Rprime, inner)
    zs = zs[np.all(np.abs(zs - np.asarray(inner.centre)) <= 0.5 * inner.side + 1e-12, axis=1)]
    pts = Dprime.points
    chosen = np.zeros(len(pts), dtype=bool)
    for z in zs:
        cand = np.nonzero(in_open_cube(pts, z, Rprime))[0]
        if len(cand) == 0:
            raise GeometryError(f"not relatively dense at claimed R'={Rprime}: empty cell at {z}")
        dist = np.linalg.norm(pts[cand] - z, axis=1)
        best = cand[dist <= dist.min() + 1e-15]
        if len(best) > 1:
            best = best[np.lexsort(pts[best].T[::-1])]
        chosen[best[0]] = True
    d0 = PointSet(Dprime.dim, pts[chosen], Dprime.window, (Rprime, 3 * Rprime))
    s_params = (Dprime.params[0], 2 * Rprime) if Dprime.params else None
    s = PointSet(Dprime.dim, pts[~chosen], Dprime.window, s_params)
    return FreeSiteSplit(d0, s, zs)


# ---------------------------------------------------------------- topology


def hausdorff_distance(X, Y) -> float:
    """Euclidean Hausdorff distance between two non-empty finite sets."""
    X = X.points if isinstance(X, PointSet) else np.atleast_2d(np.asarray(X, dtype=float))
    Y = Y.points if isinstance(Y, PointSet) else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.size == 0 or Y.size == 0:
        raise GeometryError("Hausdorff distance needs non-empty sets")
    return max(kernels.directed_hausdorff(X, Y), kernels.directed_hausdorff(Y, X))


@dataclass
class ConvergenceReport:
    L_found: float | None
    candidates: list
    distances: dict

    def trace(self, L=None):
        L = self.L_found if L is None else L
        return self.distances[L]


def patch_convergence_check(seq, D: PointSet, l: float, tol: float, n_candidates=20):
    """Search L > l such that ``d_H(D_n ∩ Lambda_L, D ∩ Lambda_L)`` ends below ``tol``."""
    if not seq:
        raise GeometryError("empty sequence")
    patches = list(seq) + [D]
    Lmax = min(
        p.window.side - 2 * float(np.max(np.abs(np.asarray(p.window.centre)))) for p in patches
    )
    if Lmax <= l:
        raise GeometryError(f"windows too small: they cover Lambda_L(0) only for L <= {Lmax}")
    candidates = [float(v) for v in np.linspace(l, Lmax, n_candidates + 1)[1:]]
    distances = {}
    L_found = None
    for L in candidates:
        target = D.restrict(np.zeros(D.dim), L)
        trace = []
        for Dn in seq:
            patch = Dn.restrict(np.zeros(D.dim), L)
            if len(patch) == 0 and len(target) == 0:
                trace.append(0.0)
            elif len(patch) == 0 or len(target) == 0:
                trace.append(math.inf)
            else:
                trace.append(hausdorff_distance(patch, target))
        distances[L] = trace
        if L_found is None and trace[-1] <= tol:
            L_found = L
    return ConvergenceReport(L_found, candidates, distances)


@dataclass
class PatternReport:
    count: int
    witnesses: np.ndarray
    pattern: np.ndarray


def count_pattern_translates(D: PointSet, K: Window, search_window: Window) -> PatternReport:
    """Count translates y with ``y + (D ∩ K) = D ∩ (y + K)`` inside ``search_window``.

    Candidates are the difference vectors ``p - q`` with ``q`` in the pattern
    (all pairwise differences when the pattern is empty), restricted to
    ``y + K`` lying in both the search window and the patch window.
    """
    pattern = D.restrict(K.centre, K.side)
    pts = D.points
    if len(pattern):
        cands = (pts[:, None, :] - pattern[None, :, :]).reshape(-1, D.dim)
    else:
        cands = (pts[:, None, :] - pts[None, :, :]).reshape(-1, D.dim)
    cands = np.vstack([np.zeros((1, D.dim)), cands])
    cands = np.unique(np.round(cands / PATTERN_TOL) * PATTERN_TOL, axis=0)
    kc = np.asarray(K.centre)
    ok = np.ones(len(cands), dtype=bool)
    for w in (search_window, D.window):
        off = np.abs(cands + kc - np.asarray(w.centre))
        ok &= np.all(off + 0.5 * K.side <= 0.5 * w.side + 1e-12, axis=1)
    cands = cands[ok]
    order = np.argsort(pts[:, 0], kind="stable")
    mask = kernels.pattern_matches(pts[order], pattern, cands, K.lo, K.hi, PATTERN_TOL)
    return PatternReport(int(mask.sum()), cands[mask], pattern)


def periodize(D: PointSet, ell: float, out_window: Window | None = None) -> PointSet:
    """Tile space with the ``ell Z^d`` translates of ``D ∩ Lambda_ell(0)``."""
    if ell <= 0:
        raise GeometryError("period must be positive")
    if not cube_contains_cube(D.window.centre, D.window.side, np.zeros(D.dim), ell):
        raise GeometryError("patch window does not contain Lambda_ell(0)")
    cell = D.restrict(np.zeros(D.dim), ell)
    if len(cell) == 0:
        raise GeometryError("D ∩ Lambda_ell(0) is empty; periodisation would not be relatively dense")
    out_window = out_window or D.window
    shifts = _lattice_points(D.dim, ell, out_window, dilate=ell)
    pts = (shifts[:, None, :] + cell[None, :, :]).reshape(-1, D.dim)
    pts = pts[in_open_cube(pts, out_window.centre, out_window.side, tol=0.0)]
    return PointSet(D.dim, pts, out_window, None)


def translate(D: PointSet, x) -> PointSet:
    x = np.broadcast_to(np.asarray(x, dtype=float), (D.dim,))
    return PointSet(D.dim, D.points + x, D.window.translate(x), D.params)


@dataclass(frozen=True)
class BoxDecomposition:
    ell: int
    indices: np.ndarray
    centres: np.ndarray
    M: float


def box_decomposition(L: float, M: float, x) -> BoxDecomposition:
    """Split ``Lambda_L(x)`` into ``ell^d`` boxes ``Lambda_M(x + M k)``, ``ell = L/M`` odd."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = L / M
    ell = int(round(q))
    if abs(q - ell) > 1e-9 or ell < 1 or ell % 2 == 0:
        raise GeometryError(f"L/M = {q} is not an odd natural number")
    half = (ell - 1) // 2
    ks = np.array(list(itertools.product(range(-half, half + 1), repeat=len(x))), dtype=int)
    return BoxDecomposition(ell, ks, x + M * ks, M)


# ---------------------------------------------------------------- text format


def _fmt(v):
    return f"{float(v):.17g}"


def write_pointset(ps: PointSet, path) -> None:
    lines = [f"dim={ps.dim}",
             "window=" + ",".join(_fmt(c) for c in ps.window.centre) + "," + _fmt(ps.window.side)]
    if ps.params:
        if ps.params[0] is not None:
            lines.append(f"r={_fmt(ps.params[0])}")
        if ps.params[1] is not None:
            lines.append(f"R={_fmt(ps.params[1])}")
    lines += [" ".join(_fmt(v) for v in p) for p in ps.points]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pointset(path) -> PointSet:
    header = {}
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                key, val = line.split("=", 1)
                header[key.strip()] = val.strip()
            else:
                rows.append([float(t) for t in line.split()])
    if "dim" not in header or "window" not in header:
        raise GeometryError("point-set file needs dim= and window= headers")
    d = int(header["dim"])
    vals = [float(t) for t in header["window"].split(",")]
    if len(vals) != d + 1:
        raise GeometryError("window header must list d centre coordinates and the side")
    r = float(header["r"]) if "r" in header else None
    R = float(header["R"]) if "R" in header else None
    params = (r, R) if (r is not None or R is not None) else None
    pts = np.array(rows, dtype=float).reshape(-1, d)
    return PointSet(d, pts, make_window(vals[:d], vals[d]), params)


__all__ = [
    "BoxDecomposition", "ConvergenceReport", "DeloneReport", "DelonePair", "FreeSiteSplit",
    "GeometryError", "PatternReport", "PointSet", "Window", "box_decomposition",
    "count_pattern_translates", "free_sites_split", "generate_lattice",
    "generate_perturbed_lattice", "hausdorff_distance", "make_delone_pair", "make_window",
    "patch_convergence_check", "periodize", "read_pointset", "shifted_pair",
    "thin_by_percolation", "translate", "verify_delone", "write_pointset",
]
