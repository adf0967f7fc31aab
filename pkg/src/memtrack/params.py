"""Flat parameter dictionaries and the building blocks that use them.

All learnable state lives in one ``dict[str, Tensor]`` keyed by dotted
paths ("encoder.layer0.global.query.weight"). Builders register entries;
apply helpers read them back. Keeping the tree flat makes the optimizer,
EMA copies, and checkpoints one-liners.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

Params = dict[str, Tensor]


def glorot(rng: np.random.Generator, din: int, dout: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (din + dout))
    return rng.uniform(-bound, bound, size=(din, dout))


def add_linear(
    params: Params,
    name: str,
    rng: np.random.Generator,
    din: int,
    dout: int,
    weight_scale: float = 1.0,
) -> None:
    params[f"{name}.weight"] = Tensor(glorot(rng, din, dout) * weight_scale, requires_grad=True)
    params[f"{name}.bias"] = Tensor(np.zeros(dout), requires_grad=True)


def apply_linear(params: Params, name: str, x: Tensor) -> Tensor:
    return T.linear(x, params[f"{name}.weight"], params[f"{name}.bias"])


def add_layer_norm(params: Params, name: str, dim: int) -> None:
    params[f"{name}.gain"] = Tensor(np.ones(dim), requires_grad=True)
    params[f"{name}.bias"] = Tensor(np.zeros(dim), requires_grad=True)


def apply_layer_norm(params: Params, name: str, x: Tensor) -> Tensor:
    return T.layer_norm(x, params[f"{name}.gain"], params[f"{name}.bias"])


def add_mlp(
    params: Params,
    name: str,
    rng: np.random.Generator,
    dims: list[int] | tuple[int, ...],
    final_scale: float = 1.0,
) -> None:
    """Register linear layers ``name.lin{i}`` for consecutive dim pairs."""
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        scale = final_scale if i == len(dims) - 2 else 1.0
        add_linear(params, f"{name}.lin{i}", rng, din, dout, weight_scale=scale)


def apply_mlp(params: Params, name: str, x: Tensor, depth: int) -> Tensor:
    """Run the registered MLP; ReLU between layers, none after the last."""
    for i in range(depth):
        x = apply_linear(params, f"{name}.lin{i}", x)
        if i < depth - 1:
            x = T.relu(x)
    return x


def subset(params: Params, prefixes: tuple[str, ...]) -> Params:
    return {k: v for k, v in params.items() if k.startswith(prefixes)}
