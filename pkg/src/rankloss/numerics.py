"""Dense vector/matrix helpers: cosine similarity, unit normalization and
its exact Jacobian-vector product, and pairwise similarity matrices.

Everything here is double precision. The sigmoid relaxation downstream is
stiff (temperature 0.01), and float32 does not survive gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_NORM = 1e-12
UNIT_NORM_TOL = 1e-9


class DegenerateInputError(ValueError):
    """Raised when a vector is too close to zero to normalize."""


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def normalize(z: np.ndarray) -> np.ndarray:
    """Project a vector onto the unit sphere.

    Rejects near-zero input rather than clamping: a silently clamped norm
    hides training divergence.
    """
    z = np.asarray(z, dtype=np.float64)
    n = np.linalg.norm(z)
    if n <= EPS_NORM:
        raise DegenerateInputError(f"norm {n} <= {EPS_NORM}, cannot normalize")
    return z / n


def normalize_backward(z: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``g . normalize(z)`` with respect to z.

    Applies (I - v v^T) / ||z|| with v = z / ||z||; the radial component of
    the upstream gradient is annihilated.
    """
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(upstream, dtype=np.float64)
    if z.shape != g.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {g.shape}")
    n = np.linalg.norm(z)
    if n <= EPS_NORM:
        raise DegenerateInputError(f"norm {n} <= {EPS_NORM}, cannot normalize")
    v = z / n
    return (g - (g @ v) * v) / n


def normalize_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization of a matrix."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms <= EPS_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateInputError(f"row {bad} has norm {norms[bad]} <= {EPS_NORM}")
    return z / norms[:, None]


def normalize_rows_backward(z: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`normalize_backward`."""
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(upstream, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    v = z / norms
    return (g - np.sum(g * v, axis=1, keepdims=True) * v) / norms


@dataclass(frozen=True)
class EmbeddingBatch:
    """Unit-norm embeddings (n x d) with an integer class label per row."""

    embeddings: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        emb = np.ascontiguousarray(self.embeddings, dtype=np.float64)
        lab = np.ascontiguousarray(self.labels, dtype=np.int64)
        if emb.ndim != 2:
            raise ValueError("embeddings must be a 2-D matrix")
        if emb.shape[0] < 2:
            raise ValueError("batch needs at least 2 instances")
        if lab.shape != (emb.shape[0],):
            raise ValueError("labels length must equal number of rows")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings contain non-finite entries")
        norms = np.linalg.norm(emb, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"row {bad} has norm {norms[bad]}, not unit")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "labels", lab)
        self.embeddings.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]


def pairwise_cosine(batch: EmbeddingBatch) -> np.ndarray:
    """Full n x n cosine-similarity matrix of a unit-norm batch."""
    s = batch.embeddings @ batch.embeddings.T
    # Gram matrix of unit rows; clip roundoff outside [-1, 1].
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return s
