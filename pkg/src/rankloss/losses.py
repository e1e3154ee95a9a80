"""Ranking losses over a batch of unit-norm embeddings.

Six smooth variants built from closed-form rank derivatives (O, I_u, I_b,
D_s, D_q, plus the smooth-AP baseline), their exact analytic gradients
back to the embeddings, and an exact-indicator evaluation used as a test
oracle. ``I_u_prime`` is the alternative increasing-unbounded form whose
rank derivative is log(1+R); see losses_math for the table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .losses_math import VARIANT_CODES, loss_terms
from .numerics import EmbeddingBatch

VARIANTS = tuple(VARIANT_CODES)


class NoValidQueriesError(ValueError):
    """No instance in the batch has a same-class peer."""


@dataclass(frozen=True)
class LossSpec:
    """A loss variant plus its hyper-parameters.

    tau is the sigmoid relaxation temperature; b only applies to I_b and
    alpha only to D_q.
    """

    variant: str
    tau: float = 0.01
    b: float = 4.0
    alpha: float = 2.0

    def __post_init__(self):
        if self.variant not in VARIANT_CODES:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.variant == "I_b" and self.b <= 0:
            raise ValueError(f"I_b requires b > 0, got {self.b}")
        if self.variant == "D_q" and self.alpha < 1:
            raise ValueError(f"D_q requires alpha >= 1, got {self.alpha}")

    @property
    def code(self) -> int:
        return VARIANT_CODES[self.variant]

    def label(self) -> str:
        if self.variant == "I_b":
            return f"I_b(b={self.b:g})"
        if self.variant == "D_q":
            return f"D_q(alpha={self.alpha:g})"
        return self.variant


@dataclass(frozen=True)
class LossResult:
    loss: float
    grad: np.ndarray
    queries_used: int


def per_query_loss(spec: LossSpec, r_neg: float, r_pos: float = 0.0) -> float:
    """Loss contribution of a single positive with relaxed ranks r_neg, r_pos."""
    if r_neg < 0 or r_pos < 0:
        raise ValueError("rank values must be non-negative")
    value, _, _ = loss_terms(spec.code, r_neg, r_pos, spec.b, spec.alpha)
    return float(value)


def derivative_wrt_rank(spec: LossSpec, r_neg: float, r_pos: float = 0.0) -> float:
    """d(per_query_loss)/d(r_neg) in closed form."""
    if r_neg < 0 or r_pos < 0:
        raise ValueError("rank values must be non-negative")
    _, d_neg, _ = loss_terms(spec.code, r_neg, r_pos, spec.b, spec.alpha)
    return float(d_neg)


def loss_from_embeddings(
    embeddings: np.ndarray, labels: np.ndarray, spec: LossSpec
) -> tuple[float, np.ndarray, int]:
    """Loss and gradient treating raw embedding entries as free variables.

    Similarity is the plain row dot product (equal to cosine similarity for
    unit rows). Used directly by finite-difference checks, which perturb
    rows off the unit sphere.
    """
    x = np.ascontiguousarray(embeddings, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    sims = x @ x.T
    loss, d_sims, n_queries = kernels.rank_loss_and_grad(
        sims, labels, spec.code, spec.tau, spec.b, spec.alpha
    )
    grad = d_sims @ x + d_sims.T @ x
    return loss, grad, n_queries


def batch_loss(batch: EmbeddingBatch, spec: LossSpec) -> LossResult:
    """Smooth batch loss with exact analytic gradient w.r.t. the embeddings.

    Every instance with at least one same-class peer serves as query
    against the rest of the batch; per-positive losses are averaged over
    each query's positive set, then across queries.
    """
    loss, grad, n_queries = loss_from_embeddings(batch.embeddings, batch.labels, spec)
    if n_queries == 0:
        raise NoValidQueriesError("no instance in the batch has a same-class peer")
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise FloatingPointError(f"non-finite loss/gradient for {spec.label()}")
    return LossResult(loss=loss, grad=grad, queries_used=n_queries)


def hard_batch_loss(batch: EmbeddingBatch, spec: LossSpec) -> float:
    """Exact-indicator batch loss (no gradient); the oracle for the smooth path.

    Ranks are strict counts: ties contribute nothing.
    """
    sims = batch.embeddings @ batch.embeddings.T
    labels = batch.labels
    n = batch.n
    idx = np.arange(n)

    total = 0.0
    n_queries = 0
    per_query = []
    for q in range(n):
        same = labels == labels[q]
        pos = idx[same & (idx != q)]
        if pos.size == 0:
            continue
        n_queries += 1
        neg = idx[~same]
        s = sims[q]
        sp = s[pos]
        r_neg = np.array([np.sum(s[neg] > si) for si in sp], dtype=np.float64)
        if spec.variant == "smooth_ap":
            r_pos = np.array(
                [np.sum(np.delete(sp, i) > sp[i]) for i in range(pos.size)],
                dtype=np.float64,
            )
        else:
            r_pos = np.zeros_like(r_neg)
        values, _, _ = loss_terms(spec.code, r_neg, r_pos, spec.b, spec.alpha)
        per_query.append(float(np.mean(values)))
    if n_queries == 0:
        raise NoValidQueriesError("no instance in the batch has a same-class peer")
    total = sum(per_query) / n_queries
    return total
