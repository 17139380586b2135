"""NumPy/SciPy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``DELONE_LAB_PURE_PYTHON`` is set.
"""

import numpy as np
from scipy.spatial import cKDTree

FLAT = 0
TENT = 1


def profile_values(rho, u_minus, dm, dp, profile):
    """Vectorised single-site profile as a function of sup-norm radius."""
    rho = np.asarray(rho, dtype=float)
    half_p = 0.5 * dp
    if profile == FLAT:
        val = np.where(rho < 0.5 * dm, u_minus, u_minus * (half_p - rho) / (0.5 * (dp - dm)))
    else:
        val = np.minimum(1.0, u_minus / (1.0 - dm / dp) * (1.0 - rho / half_p))
    return np.where(rho >= half_p, 0.0, val)


def bump_sum(origin, h, shape, centres, weights, u_minus, dm, dp, profile):
    d = len(shape)
    n0 = int(shape[0])
    n1 = int(shape[1]) if d == 2 else 1
    out = np.zeros((n0, n1))
    half_p = 0.5 * dp
    for c in range(centres.shape[0]):
        w = weights[c]
        if w == 0.0:
            continue
        ci = centres[c, 0]
        i0 = max(int(np.ceil((ci - half_p - origin[0]) / h)), 0)
        i1 = min(int(np.floor((ci + half_p - origin[0]) / h)), n0 - 1)
        if i1 < i0:
            continue
        di = np.abs(origin[0] + h * np.arange(i0, i1 + 1) - ci)
        if d == 1:
            out[i0:i1 + 1, 0] += w * profile_values(di, u_minus, dm, dp, profile)
            continue
        cj = centres[c, 1]
        j0 = max(int(np.ceil((cj - half_p - origin[1]) / h)), 0)
        j1 = min(int(np.floor((cj + half_p - origin[1]) / h)), n1 - 1)
        if j1 < j0:
            continue
        dj = np.abs(origin[1] + h * np.arange(j0, j1 + 1) - cj)
        rho = np.maximum.outer(di, dj)
        out[i0:i1 + 1, j0:j1 + 1] += w * profile_values(rho, u_minus, dm, dp, profile)
    return out.ravel()


def directed_hausdorff(X, Y):
    dist, _ = cKDTree(Y).query(X, k=1)
    return float(np.max(dist)) if len(dist) else 0.0


def pattern_matches(D, pattern, cands, klo, khi, tol):
    nc = cands.shape[0]
    mask = np.zeros(nc, dtype=np.uint8)
    if D.shape[0] == 0:
        return mask
    tree = cKDTree(D)
    first = D[:, 0]
    for c in range(nc):
        y = cands[c]
        if len(pattern):
            dist, idx = tree.query(pattern + y, k=1, p=np.inf)
            if np.any(dist > tol):
                continue
            matched = set(idx.tolist())
        else:
            matched = set()
        start = np.searchsorted(first, klo[0] + y[0], side="left")
        stop = np.searchsorted(first, khi[0] + y[0], side="left")
        block = D[start:stop]
        inside = np.all((block > klo + y) & (block < khi + y), axis=1)
        hits = np.nonzero(inside)[0] + start
        if all(int(q) in matched for q in hits):
            mask[c] = 1
    return mask
