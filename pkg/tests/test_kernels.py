import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delone_lab import kernels

IMPLS = kernels.backends()
needs_both = pytest.mark.skipif(len(IMPLS) < 2, reason="compiled backend not built")


def test_backend_name():
    assert kernels.BACKEND in IMPLS


@needs_both
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), dim=st.sampled_from([1, 2]), profile=st.sampled_from([0, 1]))
def test_bump_sum_parity(seed, dim, profile):
    rng = np.random.default_rng(seed)
    n = 40 if dim == 1 else 15
    h = 0.02
    origin = np.full(dim, -0.5 * h * (n + 1))
    centres = rng.uniform(-0.5, 0.5, size=(rng.integers(0, 12), dim))
    w = rng.random(len(centres))
    a = kernels.bump_sum(origin, h, (n,) * dim, centres, w, 0.5, 0.1, 0.2, profile, impl=IMPLS["python"])
    b = kernels.bump_sum(origin, h, (n,) * dim, centres, w, 0.5, 0.1, 0.2, profile, impl=IMPLS["cython"])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


@needs_both
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), nx=st.integers(1, 30), ny=st.integers(1, 30))
def test_directed_hausdorff_parity(seed, nx, ny):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(nx, 2)), rng.normal(size=(ny, 2))
    a = kernels.directed_hausdorff(X, Y, impl=IMPLS["python"])
    b = kernels.directed_hausdorff(X, Y, impl=IMPLS["cython"])
    assert a == pytest.approx(b, abs=1e-14)


@needs_both
def test_pattern_matches_parity():
    D = np.arange(-10.0, 11.0)[:, None]
    D = np.delete(D, [3, 15], axis=0)
    pattern = D[np.abs(D[:, 0]) < 1.5]
    cands = np.unique((D - pattern[0]), axis=0)
    args = (D, pattern, cands, np.array([-1.5]), np.array([1.5]), 1e-9)
    a = kernels.pattern_matches(*args, impl=IMPLS["python"])
    b = kernels.pattern_matches(*args, impl=IMPLS["cython"])
    np.testing.assert_array_equal(np.asarray(a, bool), np.asarray(b, bool))
    assert np.asarray(a, bool).sum() >= 1


def test_env_forces_python_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, DELONE_LAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from delone_lab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
