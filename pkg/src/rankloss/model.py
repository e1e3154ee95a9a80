"""A small fully-connected embedding network with manual backpropagation:
2-D input, two hidden layers of 30 rectified units, 2-D output normalized
onto the unit circle. Includes an Adam optimizer with decoupled weight
decay and a binary checkpoint format with bit-exact round-trip.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import DegenerateInputError, EPS_NORM, normalize_rows, normalize_rows_backward

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
CHECKPOINT_MAGIC = b"RLMLP001"


@dataclass
class MlpModel:
    """Parameters of the 2 -> 30 -> 30 -> 2 network."""

    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, seed: int = 0, hidden: int = 30, d_in: int = 2, d_out: int = 2):
        """Uniform fan-in initialization."""
        rng = np.random.default_rng(seed)

        def layer(n_out, n_in):
            bound = 1.0 / np.sqrt(n_in)
            return rng.uniform(-bound, bound, size=(n_out, n_in))

        params = {
            "W1": layer(hidden, d_in),
            "b1": np.zeros(hidden),
            "W2": layer(hidden, hidden),
            "b2": np.zeros(hidden),
            "W3": layer(d_out, hidden),
            "b3": np.zeros(d_out),
        }
        return cls(params=params)

    def forward(self, inputs: np.ndarray):
        """Embeddings (unit rows) plus the cache needed for backward."""
        x = np.asarray(inputs, dtype=np.float64)
        p = self.params
        z1 = x @ p["W1"].T + p["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["W2"].T + p["b2"]
        a2 = np.maximum(z2, 0.0)
        z3 = a2 @ p["W3"].T + p["b3"]
        if np.any(np.linalg.norm(z3, axis=1) <= EPS_NORM):
            raise DegenerateInputError("pre-normalization embedding collapsed to zero")
        v = normalize_rows(z3)
        cache = {"x": x, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "z3": z3}
        return v, cache

    def backward(self, cache, grad_embeddings: np.ndarray) -> dict[str, np.ndarray]:
        """Exact reverse-mode gradients for every parameter."""
        p = self.params
        g = np.asarray(grad_embeddings, dtype=np.float64)
        if g.shape != cache["z3"].shape:
            raise ValueError(f"upstream gradient shape {g.shape} != {cache['z3'].shape}")
        dz3 = normalize_rows_backward(cache["z3"], g)
        grads = {
            "W3": dz3.T @ cache["a2"],
            "b3": dz3.sum(axis=0),
        }
        da2 = dz3 @ p["W3"]
        dz2 = da2 * (cache["z2"] > 0)
        grads["W2"] = dz2.T @ cache["a1"]
        grads["b2"] = dz2.sum(axis=0)
        da1 = dz2 @ p["W2"]
        dz1 = da1 * (cache["z1"] > 0)
        grads["W1"] = dz1.T @ cache["x"]
        grads["b1"] = dz1.sum(axis=0)
        return grads

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])

    def set_flat_params(self, flat: np.ndarray) -> None:
        offset = 0
        for k in PARAM_NAMES:
            size = self.params[k].size
            self.params[k] = flat[offset : offset + size].reshape(self.params[k].shape).copy()
            offset += size

    def save(self, path) -> None:
        """Flat binary checkpoint: magic, shapes, row-major doubles."""
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(PARAM_NAMES)))
            for k in PARAM_NAMES:
                arr = np.ascontiguousarray(self.params[k], dtype=np.float64)
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(len(CHECKPOINT_MAGIC))
            if magic != CHECKPOINT_MAGIC:
                raise ValueError(f"bad checkpoint magic {magic!r}")
            (n_params,) = struct.unpack("<I", fh.read(4))
            if n_params != len(PARAM_NAMES):
                raise ValueError(f"expected {len(PARAM_NAMES)} parameters, found {n_params}")
            params = {}
            for k in PARAM_NAMES:
                (ndim,) = struct.unpack("<I", fh.read(4))
                shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
                count = int(np.prod(shape))
                data = np.frombuffer(fh.read(8 * count), dtype=np.float64)
                params[k] = data.reshape(shape).copy()
        return cls(params=params)


@dataclass
class AdamState:
    """Bias-corrected Adam with decoupled weight decay."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """One in-place update; returns the mutated (params, state) pair."""
    state.step_count += 1
    t = state.step_count
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"shape mismatch for {k}: {g.shape} vs {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        state.m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        m_hat = state.m[k] / (1 - state.beta1**t)
        v_hat = state.v[k] / (1 - state.beta2**t)
        p -= state.lr * (m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p)
    return params, state
