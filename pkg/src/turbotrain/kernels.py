"""Hot elementwise kernels with optional numba JIT.

Two interchangeable backends are provided for every kernel: a numba
``@njit`` version and a pure-numpy version.  The active backend is chosen
at import time; set ``TURBO_NO_NUMBA=1`` in the environment to force the
numpy path (useful for debugging and for the backend benchmark in
``benchmarks/bench_kernels.py``, which times both directly).
"""

import math
import os

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


# ---------------------------------------------------------------- numpy path

def gelu_numpy(x):
    """gelu(x), tanh approximation."""
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x * x * x)))


def gelu_grad_numpy(x):
    """d gelu / dx for the tanh approximation."""
    x2 = x * x
    t = np.tanh(_GELU_C * (x + 0.044715 * x * x2))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * 0.044715 * x2)


def softmax2d_numpy(x):
    """Row softmax of a 2-D array, max-subtracted for stability."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------- numba path

_want_numba = os.environ.get("TURBO_NO_NUMBA", "") not in ("1", "true", "yes")
NUMBA_ACTIVE = False

if _want_numba:
    try:
        from numba import njit

        # float32-typed constants keep single-precision inputs in f32
        # arithmetic inside the jit loop (they upcast cleanly for f64);
        # tanh(z) = 1 - 2/(exp(2z)+1) with a clamp vectorizes better than
        # a libm tanh call
        _C = np.float32(_GELU_C)
        _K = np.float32(0.044715)
        _HALF = np.float32(0.5)
        _ONE = np.float32(1.0)
        _TWO = np.float32(2.0)
        _CLAMP = np.float32(15.0)

        @njit(cache=True, fastmath=True)
        def _tanh_fast(z):
            if z > _CLAMP:
                return _ONE
            if z < -_CLAMP:
                return -_ONE
            return _ONE - _TWO / (np.exp(_TWO * z) + _ONE)

        @njit(cache=True, fastmath=True)
        def _gelu_nb(x, out):
            flat_x = x.ravel()
            flat_o = out.ravel()
            for i in range(flat_x.size):
                v = flat_x[i]
                t = _tanh_fast(_C * (v + _K * v * v * v))
                flat_o[i] = _HALF * v * (_ONE + t)

        @njit(cache=True, fastmath=True)
        def _gelu_grad_nb(x, out):
            flat_x = x.ravel()
            flat_o = out.ravel()
            three_k = np.float32(3.0 * 0.044715)
            for i in range(flat_x.size):
                v = flat_x[i]
                t = _tanh_fast(_C * (v + _K * v * v * v))
                flat_o[i] = _HALF * (_ONE + t) + _HALF * v * (_ONE - t * t) * _C * (
                    _ONE + three_k * v * v
                )

        @njit(cache=True, fastmath=True)
        def _softmax2d_nb(x, out):
            rows, cols = x.shape
            for i in range(rows):
                mx = x[i, 0]
                for j in range(1, cols):
                    if x[i, j] > mx:
                        mx = x[i, j]
                total = x[i, 0] * np.float32(0.0)
                for j in range(cols):
                    e = np.exp(x[i, j] - mx)
                    out[i, j] = e
                    total += e
                inv = _ONE / total
                for j in range(cols):
                    out[i, j] *= inv

        def gelu_numba(x):
            out = np.empty_like(x)
            _gelu_nb(np.ascontiguousarray(x), out)
            return out

        def gelu_grad_numba(x):
            out = np.empty_like(x)
            _gelu_grad_nb(np.ascontiguousarray(x), out)
            return out

        def softmax2d_numba(x):
            out = np.empty_like(x)
            _softmax2d_nb(np.ascontiguousarray(x), out)
            return out

        NUMBA_ACTIVE = True
    except ImportError:
        pass

if NUMBA_ACTIVE:
    gelu = gelu_numba
    gelu_grad = gelu_grad_numba
    softmax2d = softmax2d_numba
else:
    gelu = gelu_numpy
    gelu_grad = gelu_grad_numpy
    softmax2d = softmax2d_numpy
