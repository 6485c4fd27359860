"""Compiled kernels against their plain-numpy references, and the backend
selection flag."""

import os
import subprocess
import sys

import numpy as np
import pytest

from turbotrain import kernels


@pytest.mark.parametrize("shape", [(7,), (4, 33), (2, 3, 129)])
def test_gelu_backends_agree(shape):
    x = np.random.default_rng(0).standard_normal(shape).astype(np.float32) * 4
    np.testing.assert_allclose(kernels.gelu(x), kernels.gelu_numpy(x),
                               rtol=1e-5, atol=5e-6)
    np.testing.assert_allclose(kernels.gelu_grad(x), kernels.gelu_grad_numpy(x),
                               rtol=1e-5, atol=5e-6)


def test_gelu_extremes_are_stable():
    x = np.array([-50.0, -10.0, 0.0, 10.0, 50.0], dtype=np.float32)
    y = kernels.gelu(x)
    assert np.isfinite(y).all()
    np.testing.assert_allclose(y[3:], x[3:], rtol=1e-5)
    np.testing.assert_allclose(y[:2], 0.0, atol=1e-6)
    g = kernels.gelu_grad(x)
    assert np.isfinite(g).all()


def test_gelu_matches_erf_form():
    # the tanh approximation must track the exact gaussian CDF form closely
    from math import erf
    x = np.linspace(-5, 5, 101).astype(np.float32)
    exact = np.array([0.5 * v * (1 + erf(v / np.sqrt(2))) for v in x])
    np.testing.assert_allclose(kernels.gelu(x), exact, atol=2e-3)


def test_softmax_backends_agree():
    x = np.random.default_rng(1).standard_normal((37, 65)).astype(np.float32) * 6
    a = kernels.softmax2d(np.ascontiguousarray(x))
    b = kernels.softmax2d_numpy(x)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(a.sum(1), 1.0, rtol=1e-5)


def test_env_flag_forces_numpy_backend():
    code = ("import turbotrain.kernels as k; "
            "assert not k.NUMBA_ACTIVE; "
            "assert k.gelu is k.gelu_numpy")
    env = dict(os.environ, TURBO_NO_NUMBA="1")
    subprocess.run([sys.executable, "-c", code], check=True, env=env)
