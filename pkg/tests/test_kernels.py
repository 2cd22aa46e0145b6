from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrinterdict import kernels
from qrinterdict._kernels_py import sweep as py_sweep
from qrinterdict.graph import generate_random
from qrinterdict.paths import run_sweep


def _args(seed, n, p, mu, cols=2):
    inst = generate_random(n, p, 0.5, seed, mu=mu)
    net = inst.network
    rng = np.random.default_rng(seed)
    x = rng.random(net.n_vars) * 0.1
    v = net.utilities(x)
    h = np.ascontiguousarray(rng.normal(size=(net.n, cols)))
    return net, v, h


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="compiled extension not built")
@given(st.integers(0, 5000), st.integers(3, 40), st.floats(0.1, 1.0), st.sampled_from([0.05, 0.5, 2.0]))
def test_compiled_matches_python(seed, n, p, mu):
    net, v, h = _args(seed, n, p, mu)
    args = (net.succ_ptr, net.succ_idx, net.pred_ptr, net.pred_idx, v, h, mu, 1.0)
    fast = kernels.available_backends()["cython"](*args)
    slow = py_sweep(*args)
    for a, b in zip(fast, slow):
        # signed moments cancel, so compare against each array's own scale
        assert np.max(np.abs(a - b), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(b), initial=0.0))


@given(st.integers(0, 5000), st.integers(3, 30), st.integers(-60, 60))
def test_sink_scaling_invariance(seed, n, k):
    net, v, h = _args(seed, n, 0.5, 0.7)
    ref = run_sweep(net, v, h, 0.7)
    scaled = run_sweep(net, v, h, 0.7, zsink=2.0**k)
    assert scaled.log_z_origin == pytest.approx(ref.log_z_origin, rel=1e-12, abs=1e-12)
    assert np.allclose(scaled.through(), ref.through(), rtol=1e-12, atol=1e-15)
    assert np.allclose(scaled.moment_through(1), ref.moment_through(1), rtol=1e-10, atol=1e-12)
    assert scaled.mean(0) == pytest.approx(ref.mean(0), rel=1e-12, abs=1e-12)


def test_extreme_utilities_stay_finite():
    net, v, h = _args(3, 30, 0.8, 0.01)
    res = run_sweep(net, v * 1e3, h, 0.01)
    assert np.isfinite(res.log_z_origin)
    assert np.all(np.isfinite(res.through()))
    assert res.through()[0] == pytest.approx(1.0)


def test_pure_python_switch():
    env = dict(os.environ, QRINTERDICT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import qrinterdict; print(qrinterdict.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
