"""Kernel backend selection.

The compiled extension is used when importable; set ``DELONE_LAB_PURE_PYTHON=1``
to force the NumPy fallback. ``BACKEND`` names the active choice.
"""

import os

import numpy as np

from . import _kernels_py

FLAT = _kernels_py.FLAT
TENT = _kernels_py.TENT

_compiled = None
if not os.environ.get("DELONE_LAB_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "python"


def backends():
    """Available implementations, keyed by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def _c2(a):
    return np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype=np.float64)))


def bump_sum(origin, h, shape, centres, weights, u_minus, dm, dp, profile, impl=None):
    """Node samples of sum_c w_c u(node - centre_c), flattened in C order."""
    impl = impl or _impl
    centres = np.asarray(centres, dtype=np.float64).reshape(-1, len(shape))
    return impl.bump_sum(
        np.ascontiguousarray(origin, dtype=np.float64),
        float(h),
        np.ascontiguousarray(shape, dtype=np.int64),
        np.ascontiguousarray(centres),
        np.ascontiguousarray(weights, dtype=np.float64),
        float(u_minus), float(dm), float(dp), int(profile),
    )


# Above this many point pairs the KD-tree query beats the compiled O(nm) scan.
HAUSDORFF_BRUTE_LIMIT = 400_000


def directed_hausdorff(X, Y, impl=None):
    """``max_x min_y |x - y|``; large inputs go to the KD-tree unless ``impl`` is given."""
    X, Y = _c2(X), _c2(Y)
    if impl is None:
        impl = _impl if len(X) * len(Y) <= HAUSDORFF_BRUTE_LIMIT else _kernels_py
    return float(impl.directed_hausdorff(X, Y))


def pattern_matches(D_sorted, pattern, cands, klo, khi, tol, impl=None):
    impl = impl or _impl
    d = D_sorted.shape[1]
    return np.asarray(impl.pattern_matches(
        np.ascontiguousarray(D_sorted, dtype=np.float64),
        np.ascontiguousarray(np.asarray(pattern, dtype=np.float64).reshape(-1, d)),
        np.ascontiguousarray(np.asarray(cands, dtype=np.float64).reshape(-1, d)),
        np.ascontiguousarray(klo, dtype=np.float64),
        np.ascontiguousarray(khi, dtype=np.float64),
        float(tol),
    ), dtype=bool)
