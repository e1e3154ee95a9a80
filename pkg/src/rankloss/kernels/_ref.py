"""Pure-numpy backend for the batch ranking-loss kernel.

Same contract as the compiled extension in ``_core.pyx``: given the full
similarity matrix and labels, return the scalar loss, the gradient with
respect to every similarity, and the number of queries that contributed.
Query contributions are accumulated in ascending query order in both
backends.
"""

from __future__ import annotations

import numpy as np

from ..losses_math import VARIANT_CODES, loss_terms

BACKEND_NAME = "python"


def _sigmoid(x: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    t = x / tau
    v = np.empty_like(t)
    pos = t >= 0
    v[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    v[~pos] = e / (1.0 + e)
    return v, v * (1.0 - v) / tau


def rank_loss_and_grad(
    sims: np.ndarray,
    labels: np.ndarray,
    variant: int,
    tau: float,
    b: float,
    alpha: float,
) -> tuple[float, np.ndarray, int]:
    """Loss and d(loss)/d(similarity) over all within-batch queries.

    Every row serves as query against the remaining rows; queries with no
    positive peer are skipped. Per query, the per-positive losses are
    averaged over the positive set, then averaged across queries.
    """
    n = sims.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    smooth_ap = variant == VARIANT_CODES["smooth_ap"]

    has_peer = np.array(
        [np.any((labels == labels[q]) & (np.arange(n) != q)) for q in range(n)]
    )
    n_queries = int(np.sum(has_peer))
    grad = np.zeros_like(sims)
    if n_queries == 0:
        return 0.0, grad, 0

    idx = np.arange(n)
    total = 0.0
    for q in range(n):
        if not has_peer[q]:
            continue
        same = labels == labels[q]
        pos = idx[same & (idx != q)]
        neg = idx[~same]
        s = sims[q]
        sp = s[pos]
        npos = pos.size

        if neg.size:
            g, gp = _sigmoid(s[neg][None, :] - sp[:, None], tau)
            r_neg = g.sum(axis=1)
        else:
            gp = None
            r_neg = np.zeros(npos, dtype=sims.dtype)

        if smooth_ap:
            gpos, gpos_d = _sigmoid(sp[None, :] - sp[:, None], tau)
            np.fill_diagonal(gpos, 0.0)
            np.fill_diagonal(gpos_d, 0.0)
            r_pos = gpos.sum(axis=1)
        else:
            r_pos = None

        values, d_neg, d_pos = loss_terms(variant, r_neg, r_pos, b, alpha)
        total += values.mean() / n_queries

        w = 1.0 / (n_queries * npos)
        if gp is not None:
            grad[q, neg] += w * (d_neg[:, None] * gp).sum(axis=0)
            grad[q, pos] -= w * d_neg * gp.sum(axis=1)
        if smooth_ap:
            grad[q, pos] += w * (d_pos[:, None] * gpos_d).sum(axis=0)
            grad[q, pos] -= w * d_pos * gpos_d.sum(axis=1)

    # the loss keeps the input dtype so callers can evaluate it in extended
    # precision; the compiled backend always works in float64
    return total, grad, n_queries
