"""Rank counting for a single query: the exact indicator count of
candidates scoring above a target positive, and its sigmoid relaxation
with partial derivatives with respect to every similarity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def sigmoid(x: float, tau: float) -> tuple[float, float]:
    """Temperature-scaled logistic function, value and derivative.

    Evaluated with the two-branch form so exp never overflows, even at
    tau = 0.01 where x/tau reaches +-1e4.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    t = x / tau
    if t >= 0:
        v = 1.0 / (1.0 + math.exp(-t))
    else:
        e = math.exp(t)
        v = e / (1.0 + e)
    return v, v * (1.0 - v) / tau


def sigmoid_np(x: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`sigmoid` over an array."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    t = np.asarray(x, dtype=np.float64) / tau
    v = np.empty_like(t)
    pos = t >= 0
    v[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    v[~pos] = e / (1.0 + e)
    return v, v * (1.0 - v) / tau


@dataclass(frozen=True)
class QueryContext:
    """Similarities of one query against its positive and negative sets.

    Each entry is (instance index, similarity); the query itself appears
    in neither list.
    """

    query_index: int
    pos_sims: tuple[tuple[int, float], ...]
    neg_sims: tuple[tuple[int, float], ...]

    def __post_init__(self):
        for idx, _ in self.pos_sims + self.neg_sims:
            if idx == self.query_index:
                raise ValueError("query index must not appear in candidate sets")


@dataclass
class RankComputation:
    """A (smooth) rank value and its partials w.r.t. each similarity."""

    value: float
    d_value_d_sim: dict[int, float] = field(default_factory=dict)


def hard_rank_neg(ctx: QueryContext, target_sim: float) -> int:
    """Count of negatives strictly above a positive's similarity.

    Ties do not count (strict inequality).
    """
    return sum(1 for _, s in ctx.neg_sims if s - target_sim > 0)


def hard_rank(sims: np.ndarray, target_sim: float) -> int:
    """Strict count of entries above target_sim."""
    return int(np.sum(np.asarray(sims, dtype=np.float64) - target_sim > 0))


def smooth_rank(
    ctx: QueryContext,
    target_index: int,
    target_sim: float,
    over: str,
    tau: float,
) -> RankComputation:
    """Sigmoid-relaxed rank of one positive within the chosen candidate set.

    value = sum_j G(s_j - s_i; tau) over negatives or positives (the target
    and the query are excluded). Partials: dR/ds_j = G'(s_j - s_i),
    dR/ds_i = -sum_j G'(s_j - s_i).
    """
    if over == "negatives":
        items = ctx.neg_sims
    elif over == "positives":
        items = tuple((j, s) for j, s in ctx.pos_sims if j != target_index)
    else:
        raise ValueError(f"over must be 'negatives' or 'positives', got {over!r}")

    out = RankComputation(value=0.0)
    if not items:
        return out
    total_dsi = 0.0
    for j, s in items:
        g, gp = sigmoid(s - target_sim, tau)
        out.value += g
        out.d_value_d_sim[j] = out.d_value_d_sim.get(j, 0.0) + gp
        total_dsi += gp
    out.d_value_d_sim[target_index] = -total_dsi
    return out
