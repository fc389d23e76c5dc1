import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdpturnpike import _pykernels, kernels

BACKENDS = kernels.available_backends()
COMPILED = BACKENDS.get("cython")


def _law(rng, N, M):
    p = rng.random((N, M)) * (rng.random((N, M)) < 0.7)
    p[:, -1] += 1e-3
    return p / p.sum(axis=1, keepdims=True)


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, MDPTURNPIKE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import mdpturnpike.kernels as k; print(k.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_walk_forward_small_by_hand():
    # one action stepping down by 1 with reward 1: V(i) = i + 1
    V, mask = _pykernels.walk_forward(np.array([[1.0]]), np.array([1.0]), 5, 1e-9)
    assert V.tolist() == [0.0, 1, 2, 3, 4, 5, 6]
    assert mask.shape == (6, 1) and mask.all()


def test_min_row_overlap_extremes():
    I = np.eye(3)
    assert _pykernels.min_row_overlap(I) == 0.0
    same = np.tile([0.2, 0.3, 0.5], (4, 1))
    assert _pykernels.min_row_overlap(same) == pytest.approx(1.0)
    assert _pykernels.min_row_overlap(np.empty((0, 3))) == 1.0


@pytest.mark.skipif(COMPILED is None, reason="compiled extension not built")
class TestBackendEquivalence:
    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 4), M=st.integers(1, 6), i_max=st.integers(0, 300))
    def test_walk_forward(self, seed, N, M, i_max):
        rng = np.random.default_rng(seed)
        p, R = _law(rng, N, M), rng.normal(0, 2, N)
        V1, m1 = _pykernels.walk_forward(p, R, i_max, 1e-9)
        V2, m2 = COMPILED.walk_forward(p, R, i_max, 1e-9)
        np.testing.assert_allclose(V1, V2, rtol=1e-13, atol=1e-12)
        assert (m1 == m2).all()

    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 4), M=st.integers(1, 6), beta=st.floats(0.1, 1.0))
    def test_gs_sweep(self, seed, N, M, beta):
        rng = np.random.default_rng(seed)
        r = rng.normal(0, 1, (M, N))
        P = rng.random((N, M, M))
        P /= P.sum(axis=2, keepdims=True)
        W = rng.normal(0, 3, M)
        a, ma = _pykernels.gs_sweep(r, P, beta, W, 1e-9)
        b, mb = COMPILED.gs_sweep(r, P, beta, W, 1e-9)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
        assert (ma == mb).all()

    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40), M=st.integers(1, 6))
    def test_min_row_overlap(self, seed, n, M):
        rng = np.random.default_rng(seed)
        X = rng.random((n, M)) * (rng.random((n, M)) < 0.5)
        X[:, 0] += 1e-9
        X /= X.sum(axis=1, keepdims=True)
        assert _pykernels.min_row_overlap(X) == pytest.approx(COMPILED.min_row_overlap(X), abs=1e-14)

    def test_read_only_inputs(self):
        p = np.array([[0.5, 0.5]])
        p.setflags(write=False)
        R = np.array([1.0])
        R.setflags(write=False)
        V, _ = COMPILED.walk_forward(p, R, 3, 1e-9)
        assert V[2] == 1.0
