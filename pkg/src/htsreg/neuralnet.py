"""Two-layer feedforward network: dims, parameters, activations, forward pass."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class NetworkDims:
    input_dim: int
    hidden_dim: int
    output_dim: int

    def __post_init__(self) -> None:
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ValueError(f"all dimensions must be positive, got {self}")

    @classmethod
    def for_input(cls, input_dim: int, output_dim: int) -> "NetworkDims":
        """Default sizing: hidden layer twice as wide as the input."""
        return cls(input_dim=input_dim, hidden_dim=2 * input_dim, output_dim=output_dim)


@dataclass
class NetworkParams:
    """Weights and biases; w2/b2 feed the hidden layer, w3/b3 the output."""

    w2: np.ndarray  # hidden x input
    b2: np.ndarray  # hidden
    w3: np.ndarray  # output x hidden
    b3: np.ndarray  # output

    @property
    def dims(self) -> NetworkDims:
        return NetworkDims(self.w2.shape[1], self.w2.shape[0], self.w3.shape[0])

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.w2.copy(), self.b2.copy(), self.w3.copy(), self.b3.copy())


@dataclass(frozen=True)
class ForwardTrace:
    """Intermediate values of one forward pass, kept for backpropagation."""

    z1: np.ndarray  # input
    u2: np.ndarray  # hidden pre-activation
    z2: np.ndarray  # hidden activation
    u3: np.ndarray  # output


def init_params(dims: NetworkDims, seed: int, bias: bool = True) -> NetworkParams:
    """Draw every weight (and bias, unless disabled) i.i.d. standard normal.

    Draw order is w2, b2, w3, b3 from a PCG64 generator seeded with
    ``seed``, so identical seeds give identical parameters. With
    ``bias=False`` the bias vectors are zero and not drawn.
    """
    rng = np.random.default_rng(seed)
    w2 = rng.standard_normal((dims.hidden_dim, dims.input_dim))
    b2 = rng.standard_normal(dims.hidden_dim) if bias else np.zeros(dims.hidden_dim)
    w3 = rng.standard_normal((dims.output_dim, dims.hidden_dim))
    b3 = rng.standard_normal(dims.output_dim) if bias else np.zeros(dims.output_dim)
    return NetworkParams(w2=w2, b2=b2, w3=w3, b3=b3)


def activation(u: np.ndarray | float, kind: str) -> np.ndarray | float:
    """Elementwise sigmoid or rectifier.

    The sigmoid branches on the sign of u so exp never overflows.
    """
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if kind == "sigmoid":
        out = np.empty_like(arr)
        pos = arr >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
        eu = np.exp(arr[~pos])
        out[~pos] = eu / (1.0 + eu)
    elif kind == "relu":
        out = np.maximum(arr, 0.0)
    else:
        raise ValueError(f"unknown activation kind {kind!r}")
    return out.reshape(np.shape(u)) if np.ndim(u) else float(out[0])


def activation_prime(u: np.ndarray | float, kind: str) -> np.ndarray | float:
    """Derivative of :func:`activation`; the rectifier uses f'(0) = 0."""
    if kind == "sigmoid":
        s = activation(u, "sigmoid")
        return s * (1.0 - s)
    if kind == "relu":
        arr = np.asarray(u, dtype=np.float64)
        out = np.where(arr > 0, 1.0, 0.0)
        return out if np.ndim(u) else float(out)
    raise ValueError(f"unknown activation kind {kind!r}")


def forward(params: NetworkParams, x: np.ndarray, kind: str = "sigmoid") -> ForwardTrace:
    """u2 = W2 x + b2;  z2 = f(u2);  u3 = W3 z2 + b3 (linear output)."""
    z1 = np.asarray(x, dtype=np.float64)
    if z1.shape != (params.w2.shape[1],):
        raise ValueError(
            f"input shape {z1.shape} does not match network input dim {params.w2.shape[1]}"
        )
    u2 = params.w2 @ z1 + params.b2
    z2 = activation(u2, kind)
    u3 = params.w3 @ z2 + params.b3
    return ForwardTrace(z1=z1, u2=u2, z2=z2, u3=u3)


def save_checkpoint(params: NetworkParams, path: str | Path, seed: int | None = None) -> None:
    """JSON checkpoint; floats are written with full round-trip precision."""
    d = params.dims
    payload = {
        "dims": {"input_dim": d.input_dim, "hidden_dim": d.hidden_dim, "output_dim": d.output_dim},
        "seed": seed,
        "w2": params.w2.tolist(),
        "b2": params.b2.tolist(),
        "w3": params.w3.tolist(),
        "b3": params.b3.tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path: str | Path) -> NetworkParams:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    params = NetworkParams(
        w2=np.asarray(payload["w2"], dtype=np.float64),
        b2=np.asarray(payload["b2"], dtype=np.float64),
        w3=np.asarray(payload["w3"], dtype=np.float64),
        b3=np.asarray(payload["b3"], dtype=np.float64),
    )
    d = payload["dims"]
    if params.dims != NetworkDims(d["input_dim"], d["hidden_dim"], d["output_dim"]):
        raise ValueError(f"{path}: checkpoint dims do not match stored arrays")
    return params
