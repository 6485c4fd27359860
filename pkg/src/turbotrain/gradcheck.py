"""Central finite-difference gradient verification.

Everything runs in float64: each check builds a scalar loss over one op
(or the full toy model step), computes analytic gradients via backward,
and compares against central differences with step 1e-5 * max(1, |x|) at
randomly sampled coordinates.
"""

from __future__ import annotations

import numpy as np

from . import losses, model as M, tensor as T
from .model import toy_config
from .partition import make_partition
from .training import _PipelineCache, classification_step


def fd_gradient(fn, x, coords, rel_step=1e-5):
    """Central differences of scalar fn at the given flat coordinates of x."""
    x = np.array(x, dtype=np.float64)
    grads = {}
    flat = x.ravel()
    for c in coords:
        h = rel_step * max(1.0, abs(flat[c]))
        orig = flat[c]
        flat[c] = orig + h
        f_plus = fn(x)
        flat[c] = orig - h
        f_minus = fn(x)
        flat[c] = orig
        grads[c] = (f_plus - f_minus) / (2.0 * h)
    return grads


def _rel_err(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)


def check_tensor_input(build_loss, x0, n_coords=64, seed=0, rel_step=1e-5):
    """Max rel. error between backward() and finite differences wrt x0.

    build_loss maps a float64 array to a scalar Tensor with a live graph.
    """
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=np.float64)
    with T.precision(np.float64):
        leaf_holder = {}

        def loss_of(arr):
            leaf = T.Tensor(np.array(arr, dtype=np.float64), requires_grad=True)
            leaf_holder["leaf"] = leaf
            return float(build_loss(leaf).data)

        # analytic pass
        leaf = T.Tensor(x0.copy(), requires_grad=True)
        out = build_loss(leaf)
        out.backward()
        analytic = leaf.grad.ravel()

        coords = rng.choice(x0.size, size=min(n_coords, x0.size), replace=False)
        numeric = fd_gradient(loss_of, x0, coords, rel_step)
    return max(_rel_err(analytic[c], numeric[c]) for c in coords)


def _op_checks(rng):
    """(name, build_loss, input) triples covering every differentiable op.

    All constants are drawn once here; the lambdas must be pure functions
    of their input or finite differences would be meaningless.
    """
    a34 = rng.standard_normal((3, 4))
    b42 = rng.standard_normal((4, 2))
    v5 = rng.standard_normal(5)
    m35 = rng.standard_normal((3, 5))
    gain = rng.standard_normal(5) * 0.5 + 1.0
    pos = np.abs(rng.standard_normal((3, 4))) + 0.5
    w5 = rng.standard_normal((1, 5))
    w35 = rng.standard_normal((3, 5))
    zt34 = rng.standard_normal((3, 4))
    x234 = rng.standard_normal((2, 3, 4))

    return [
        ("matmul_lhs", lambda x: T.matmul(x, T.Tensor(b42)).sum(), a34),
        ("matmul_rhs", lambda x: T.matmul(T.Tensor(a34), x).sum(), b42),
        ("add", lambda x: (x + T.Tensor(m35) * 2.0).sum(), m35),
        ("sub", lambda x: (T.Tensor(m35) - x * 3.0).sum(), m35),
        ("mul", lambda x: (x * T.Tensor(m35) * x).sum(), m35),
        ("div", lambda x: (T.Tensor(m35) / (x * x + 1.0)).sum(), m35),
        ("gelu", lambda x: T.gelu(x).sum(), np.array([0.7, -1.3, 0.0, 2.1])),
        ("exp", lambda x: T.exp(x).sum(), m35 * 0.3),
        ("log", lambda x: T.log(x).sum(), pos),
        ("sqrt", lambda x: T.sqrt(x).sum(), pos),
        ("softmax", lambda x: (T.softmax(x, axis=-1) * T.Tensor(w5)).sum(),
         v5.reshape(1, 5)),
        ("layernorm_x", lambda x: (T.layernorm(x, T.Tensor(gain), T.Tensor(np.zeros(5)))
                                   * T.Tensor(w35)).sum(), m35),
        ("layernorm_gain", lambda g: (T.layernorm(T.Tensor(m35), g, T.Tensor(np.zeros(5)))
                                      * T.Tensor(w35)).sum(), gain),
        ("layernorm_bias", lambda b: (T.layernorm(T.Tensor(m35), T.Tensor(gain), b)
                                      * T.Tensor(w35)).sum(), np.zeros(5)),
        ("gather_rows", lambda x: (T.gather_rows(x, [2, 0, 2]) * 1.5).sum(), a34),
        ("gather_tokens", lambda x: T.gather_tokens(x, [[1, 0], [2, 2]]).sum(), x234),
        ("slice", lambda x: T.slice_axis(x, 1, 1, 3).sum(), m35),
        ("concat", lambda x: T.concat([x, x * 2.0], axis=0).sum(), a34),
        ("reshape_transpose", lambda x: T.transpose(x.reshape(2, 6), (1, 0)).sum(), a34),
        ("mean", lambda x: x.mean(axis=1).sum(), m35),
        ("ce_loss", lambda x: losses.ce_loss(x, [1, 0, 3]), rng.standard_normal((3, 4))),
        ("info_nce", lambda x: losses.info_nce(x, T.Tensor(zt34), 1.0),
         rng.standard_normal((3, 4))),
    ]


def run_op_suite(n_coords=64, seed=0):
    """Per-op max rel. error; returns list of (name, max_rel_err)."""
    rng = np.random.default_rng(seed)
    with T.precision(np.float64):
        checks = _op_checks(rng)
    results = []
    for name, build, x0 in checks:
        results.append((name, check_tensor_input(build, x0, n_coords=n_coords, seed=seed)))
    return results


def run_model_step_check(n_coords=64, seed=0):
    """FD check of a full toy-model training-step loss wrt sampled parameter
    coordinates across every parameter tensor."""
    cfg = toy_config(m=0.5, r=0.25)
    rng = np.random.default_rng(seed)
    with T.precision(np.float64):
        state = M.init_model(cfg, seed=seed, dtype=np.float64)
        videos = rng.uniform(0, 1, size=(2, cfg.geometry.T, cfg.geometry.H,
                                         cfg.geometry.W, 3))
        labels = np.array([3, 11])
        plans = [make_partition(cfg.geometry.n, cfg.m, cfg.r, 100 + i) for i in range(2)]
        cache = _PipelineCache(state)

        def loss_value():
            bundle, _ = classification_step(state, videos, labels, plans, cache)
            return bundle.total

        loss = loss_value()
        loss.backward()
        analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                    for name, p in state.named_parameters()}
        state.zero_grad()

        names = list(state.params)
        worst = 0.0
        worst_name = None
        per_block_norms = {name: float(np.linalg.norm(analytic[name])) for name in names}
        for _ in range(n_coords):
            name = names[rng.integers(len(names))]
            p = state[name]
            c = int(rng.integers(p.size))
            flat = p.data.ravel()
            orig = flat[c]
            h = 1e-5 * max(1.0, abs(orig))
            flat[c] = orig + h
            f_plus = float(loss_value().data)
            flat[c] = orig - h
            f_minus = float(loss_value().data)
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = _rel_err(analytic[name].ravel()[c], numeric)
            if err > worst:
                worst, worst_name = err, f"{name}[{c}]"
    return worst, worst_name, per_block_norms


def run_full_suite(n_coords=64, seed=0, tol=1e-4):
    """The complete gradient suite; returns (passed, report_lines)."""
    lines = []
    passed = True
    for name, err in run_op_suite(n_coords=n_coords, seed=seed):
        ok = err <= tol
        passed &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {name:<18} max rel err {err:.3e}")
    worst, worst_name, _ = run_model_step_check(n_coords=n_coords, seed=seed)
    ok = worst <= tol
    passed &= ok
    lines.append(f"{'PASS' if ok else 'FAIL'} {'model_step':<18} max rel err {worst:.3e}"
                 f" (worst at {worst_name})")
    return passed, lines
