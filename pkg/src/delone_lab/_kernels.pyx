# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``_kernels_py`` holds the reference implementations."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, fabs, sqrt, INFINITY

cnp.import_array()

cdef enum:
    FLAT = 0
    TENT = 1


cdef inline double _profile(double rho, double u_minus, double dm, double dp,
                            int profile) noexcept nogil:
    cdef double half_p = 0.5 * dp
    cdef double v
    if rho >= half_p:
        return 0.0
    if profile == FLAT:
        if rho < 0.5 * dm:
            return u_minus
        return u_minus * (half_p - rho) / (0.5 * (dp - dm))
    v = u_minus / (1.0 - dm / dp) * (1.0 - rho / half_p)
    return 1.0 if v > 1.0 else v


def bump_sum(const double[::1] origin, double h, const long[::1] shape,
             const double[:, ::1] centres, const double[::1] weights,
             double u_minus, double dm, double dp, int profile):
    """Sum of weighted bumps sampled on a uniform node grid (d = 1 or 2)."""
    cdef int d = shape.shape[0]
    cdef Py_ssize_t n0 = shape[0]
    cdef Py_ssize_t n1 = shape[1] if d == 2 else 1
    out_np = np.zeros(n0 * n1, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t c, i, j, i0, i1, j0, j1
    cdef double half_p = 0.5 * dp
    cdef double w, ci, cj, di, dj, rho
    with nogil:
        for c in range(centres.shape[0]):
            w = weights[c]
            if w == 0.0:
                continue
            ci = centres[c, 0]
            i0 = <Py_ssize_t>ceil((ci - half_p - origin[0]) / h)
            i1 = <Py_ssize_t>floor((ci + half_p - origin[0]) / h)
            if i0 < 0:
                i0 = 0
            if i1 > n0 - 1:
                i1 = n0 - 1
            if d == 1:
                for i in range(i0, i1 + 1):
                    rho = fabs(origin[0] + h * i - ci)
                    out[i] += w * _profile(rho, u_minus, dm, dp, profile)
            else:
                cj = centres[c, 1]
                j0 = <Py_ssize_t>ceil((cj - half_p - origin[1]) / h)
                j1 = <Py_ssize_t>floor((cj + half_p - origin[1]) / h)
                if j0 < 0:
                    j0 = 0
                if j1 > n1 - 1:
                    j1 = n1 - 1
                for i in range(i0, i1 + 1):
                    di = fabs(origin[0] + h * i - ci)
                    for j in range(j0, j1 + 1):
                        dj = fabs(origin[1] + h * j - cj)
                        rho = di if di > dj else dj
                        out[i * n1 + j] += w * _profile(rho, u_minus, dm, dp, profile)
    return out_np


def directed_hausdorff(const double[:, ::1] X, const double[:, ::1] Y):
    """max_x min_y |x - y| (Euclidean) with the early-break rule."""
    cdef Py_ssize_t nx = X.shape[0], ny = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, a
    cdef double cmax = 0.0, cmin, d2, t
    with nogil:
        for i in range(nx):
            cmin = INFINITY
            for j in range(ny):
                d2 = 0.0
                for a in range(d):
                    t = X[i, a] - Y[j, a]
                    d2 += t * t
                if d2 < cmax:
                    cmin = d2
                    break
                if d2 < cmin:
                    cmin = d2
            if cmin > cmax and cmin != INFINITY:
                cmax = cmin
    return sqrt(cmax)


cdef inline Py_ssize_t _lower(const double[:, ::1] D, double v) noexcept nogil:
    # first index with D[idx, 0] >= v
    cdef Py_ssize_t lo = 0, hi = D.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if D[mid, 0] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def pattern_matches(const double[:, ::1] D, const double[:, ::1] pattern,
                    const double[:, ::1] cands, const double[::1] klo, const double[::1] khi,
                    double tol):
    """Mask of candidates y with y + pattern == D inside y + K (D sorted by column 0)."""
    cdef Py_ssize_t nc = cands.shape[0], npat = pattern.shape[0]
    cdef Py_ssize_t d = D.shape[1], n = D.shape[0]
    cdef Py_ssize_t c, p, q, a, start, stop, m
    cdef double t, dev, worst
    cdef bint found, inside, ok
    mask_np = np.zeros(nc, dtype=np.uint8)
    matched_np = np.empty(max(npat, 1), dtype=np.intp)
    cdef cnp.uint8_t[::1] mask = mask_np
    cdef Py_ssize_t[::1] matched = matched_np
    with nogil:
        for c in range(nc):
            ok = True
            for p in range(npat):
                t = pattern[p, 0] + cands[c, 0]
                start = _lower(D, t - tol)
                found = False
                q = start
                while q < n and D[q, 0] <= t + tol:
                    worst = 0.0
                    for a in range(d):
                        dev = fabs(D[q, a] - pattern[p, a] - cands[c, a])
                        if dev > worst:
                            worst = dev
                    if worst <= tol:
                        found = True
                        matched[p] = q
                        break
                    q += 1
                if not found:
                    ok = False
                    break
            if not ok:
                continue
            start = _lower(D, klo[0] + cands[c, 0])
            q = start
            while q < n and D[q, 0] < khi[0] + cands[c, 0]:
                inside = D[q, 0] > klo[0] + cands[c, 0]
                a = 1
                while inside and a < d:
                    inside = (D[q, a] > klo[a] + cands[c, a]) and (D[q, a] < khi[a] + cands[c, a])
                    a += 1
                if inside:
                    found = False
                    for m in range(npat):
                        if matched[m] == q:
                            found = True
                            break
                    if not found:
                        ok = False
                        break
                q += 1
            if ok:
                mask[c] = 1
    return mask_np
