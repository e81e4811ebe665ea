import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stitchkit import benchmark, kernels
from stitchkit import _kernels_py

BACKENDS = kernels.backends()


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND == "cython"


def test_env_var_forces_fallback():
    code = "import stitchkit.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"STITCHKIT_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_farthest_pair_brute(name):
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((257, 3))
    i, j = BACKENDS[name].farthest_pair(pts)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert abs(d[i, j] - d.max()) < 1e-12


@settings(max_examples=60)
@given(st.integers(2, 80), st.integers(0, 2**31))
def test_farthest_pair_backends_agree(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.integers(-2, 3, (n, 3)).astype(float)  # many ties
    ref = _kernels_py.farthest_pair(pts)
    for mod in BACKENDS.values():
        assert tuple(mod.farthest_pair(pts)) == tuple(ref)


@settings(max_examples=60)
@given(st.integers(0, 2**31), st.integers(3, 40), st.integers(3, 40))
def test_zhang_suen_backends_agree(seed, h, w):
    rng = np.random.default_rng(seed)
    m = rng.random((h, w)) < rng.uniform(0.2, 0.8)
    ref = _kernels_py.zhang_suen(m)
    for mod in BACKENDS.values():
        assert np.array_equal(mod.zhang_suen(m), ref)


def test_farthest_pair_chunking_matches():
    rng = np.random.default_rng(9)
    pts = rng.standard_normal((300, 3))
    assert _kernels_py.farthest_pair(pts, chunk=7) == _kernels_py.farthest_pair(pts, chunk=1000)


def test_benchmark_runs_and_agrees():
    rows = benchmark.run(repeat=1, points=200, size=40)
    assert {r["kernel"] for r in rows} == {"farthest_pair", "zhang_suen"}
    assert {r["backend"] for r in rows} == set(BACKENDS)
    assert all(r["seconds"] > 0 for r in rows)
    assert "speedup" in benchmark.format_table(rows)
