"""Central finite-difference gradient checking.

The checker here is the independent oracle for every backward rule in
:mod:`memtrack.tensor`: it only ever calls forward evaluations, so it
cannot inherit a mistake from the tape. ``run_op_suite`` sweeps each
differentiable op over seeded random instances; composed-model checks
(encoder layer, decoder layer, total loss) register through
``run_composed_suite`` and sample a subset of parameter coordinates per
instance to stay inside the CPU budget.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tape, Tensor

DEFAULT_H = 1e-6
DEFAULT_TOL = 1e-5


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-3)


def check_gradients(
    fn: Callable[[dict[str, Tensor]], Tensor],
    inputs: dict[str, np.ndarray],
    h: float = DEFAULT_H,
    coords_per_input: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` maps named tensors to a scalar Tensor. When ``coords_per_input``
    is set, only that many randomly chosen coordinates of each input are
    perturbed (full sweep otherwise).
    """
    tensors = {k: Tensor(v.copy(), requires_grad=True) for k, v in inputs.items()}
    with Tape() as tape:
        out = fn(tensors)
        tape.backward(out)

    worst = 0.0
    for name, t in tensors.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        n = flat.size
        if coords_per_input is None or coords_per_input >= n:
            coords = range(n)
        else:
            coords = (rng or np.random.default_rng(0)).choice(
                n, size=coords_per_input, replace=False
            )
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            hi = fn({k: Tensor(v.data) for k, v in tensors.items()}).item()
            flat[i] = orig - h
            lo = fn({k: Tensor(v.data) for k, v in tensors.items()}).item()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * h)
            worst = max(worst, relative_error(analytic.reshape(-1)[i], fd))
    return worst


def _op_cases(rng: np.random.Generator) -> dict[str, Callable[[dict[str, Tensor]], Tensor]]:
    """One scalar-valued probe per differentiable op.

    Each probe folds the op output through a fixed random weighting so that
    every output element influences the scalar.
    """

    def weighted(out: Tensor, w: np.ndarray) -> Tensor:
        return T.tsum(T.mul(out, Tensor(w)))

    w2 = rng.normal(size=(3, 4))
    w_mat = rng.normal(size=(3, 5))
    w_bmat = rng.normal(size=(2, 3, 5))
    w_cat = rng.normal(size=(5, 4))
    w_row = rng.normal(size=(4,))
    w_gather = rng.normal(size=(5, 4))
    gather_idx = np.array([[0, 2, 2], [1, 0, 2]])
    w_gath_out = rng.normal(size=(2, 3, 4))
    w_soft = rng.normal(size=(3, 4))
    w_max = rng.normal(size=(3,))
    w_ln = rng.normal(size=(3, 4))

    return {
        "add": lambda t: weighted(T.add(t["a"], t["b"]), w2),
        "sub": lambda t: weighted(T.sub(t["a"], t["b"]), w2),
        "mul": lambda t: weighted(T.mul(t["a"], t["b"]), w2),
        "div": lambda t: weighted(T.div(t["a"], t["shifted"]), w2),
        "scalar_mul": lambda t: weighted(T.mul(t["a"], 1.7), w2),
        "matmul": lambda t: weighted(T.matmul(t["a"], t["m45"]), w_mat),
        "batched_matmul": lambda t: weighted(T.matmul(t["b234"], t["b245"]), w_bmat),
        "transpose": lambda t: weighted(T.transpose(t["m43"]), w2),
        "concat": lambda t: weighted(T.concat([t["a"], t["c24"]], axis=0), w_cat),
        "slice": lambda t: weighted(t["a"][1], w_row),
        "gather": lambda t: weighted(T.gather(t["w_gather"], gather_idx), w_gath_out),
        "exp": lambda t: weighted(T.exp(t["a"]), w2),
        "log": lambda t: weighted(T.log(t["positive"]), w2),
        "relu": lambda t: weighted(T.relu(t["a"]), w2),
        "abs": lambda t: weighted(T.abs_(t["a"]), w2),
        "sin": lambda t: weighted(T.sin(t["a"]), w2),
        "cos": lambda t: weighted(T.cos(t["a"]), w2),
        "sigmoid": lambda t: weighted(T.sigmoid(t["a"]), w2),
        "log_sigmoid": lambda t: weighted(T.log_sigmoid(t["a"]), w2),
        "softmax": lambda t: weighted(T.softmax(t["a"], axis=-1), w_soft),
        "logsumexp": lambda t: weighted(T.logsumexp(t["a"], axis=-1), w_max),
        "max_along": lambda t: weighted(T.max_along(t["a"], axis=1), w_max),
        "maximum": lambda t: weighted(T.maximum(t["a"], t["b"]), w2),
        "minimum": lambda t: weighted(T.minimum(t["a"], t["b"]), w2),
        "sum": lambda t: T.tsum(t["a"]),
        "mean": lambda t: weighted(T.tmean(t["a"], axis=0), w_row),
        "layer_norm": lambda t: weighted(T.layer_norm(t["a"], t["gain"], t["bias"]), w_ln),
        "linear": lambda t: weighted(T.linear(t["a"], t["m45"], t["bias5"]), w_mat),
    }


def _op_inputs(rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "a": rng.normal(size=(3, 4)),
        "b": rng.normal(size=(3, 4)),
        "shifted": rng.normal(size=(3, 4)) + np.where(rng.random((3, 4)) < 0.5, -2.0, 2.0),
        "positive": rng.uniform(0.5, 3.0, size=(3, 4)),
        "m45": rng.normal(size=(4, 5)),
        "m43": rng.normal(size=(4, 3)),
        "b234": rng.normal(size=(2, 3, 4)),
        "b245": rng.normal(size=(2, 4, 5)),
        "c24": rng.normal(size=(2, 4)),
        "w_gather": rng.normal(size=(3, 4)),
        "gain": rng.uniform(0.5, 1.5, size=(4,)),
        "bias": rng.normal(size=(4,)),
        "bias5": rng.normal(size=(5,)),
    }


def run_op_suite(
    instances: int = 100,
    h: float = DEFAULT_H,
    tol: float = DEFAULT_TOL,
    seed: int = 20240,
) -> list[tuple[str, float, bool]]:
    """Check every op over ``instances`` seeded random inputs each.

    Returns (op name, max relative error, passed) per op.
    """
    results = []
    case_names = sorted(_op_cases(np.random.default_rng(0)))
    for op_index, name in enumerate(case_names):
        worst = 0.0
        for k in range(instances):
            rng = np.random.default_rng(seed + 1000 * op_index + k)
            fn = _op_cases(rng)[name]
            inputs = _op_inputs(rng)
            worst = max(worst, check_gradients(fn, inputs, h=h))
        results.append((name, worst, worst <= tol))
    return results


def run_composed_suite(
    instances: int = 100,
    h: float = DEFAULT_H,
    tol: float = DEFAULT_TOL,
    seed: int = 77100,
    coords_per_input: int = 2,
) -> list[tuple[str, float, bool]]:
    """Gradient-check the composed encoder layer, decoder layer, and total loss.

    Imports lazily so the op suite stays usable while the model modules are
    under construction. Perturbs ``coords_per_input`` random coordinates of
    every parameter per instance.
    """
    from .composed_checks import composed_targets

    results = []
    for target_index, (name, builder) in enumerate(sorted(composed_targets().items())):
        worst = 0.0
        for k in range(instances):
            rng = np.random.default_rng(seed + 1000 * target_index + k)
            fn, inputs = builder(rng)
            worst = max(
                worst,
                check_gradients(fn, inputs, h=h, coords_per_input=coords_per_input, rng=rng),
            )
        results.append((name, worst, worst <= tol))
    return results
