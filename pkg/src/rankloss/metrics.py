"""Retrieval evaluation: Recall@k, mean intra/inter-class cosine
distances, and NMI against a seeded k-means clustering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .numerics import EmbeddingBatch


@dataclass(frozen=True)
class RetrievalReport:
    recall_at: dict[int, float]
    dists_intra: float
    dists_inter: float
    nmi: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "recall": {str(k): v for k, v in sorted(self.recall_at.items())},
                "dists_intra": self.dists_intra,
                "dists_inter": self.dists_inter,
                "nmi": self.nmi,
            },
            indent=2,
        )


def _check_no_singletons(labels: np.ndarray) -> None:
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts < 2):
        singles = classes[counts < 2].tolist()
        raise ValueError(f"singleton classes: {singles}")


def recall_at_k(batch: EmbeddingBatch, ks: list[int]) -> dict[int, float]:
    """Fraction of queries with a same-class hit in their top-k neighbors.

    Every instance queries the rest of the batch; ties broken by lower
    index so results are deterministic.
    """
    _check_no_singletons(batch.labels)
    n = batch.n
    if max(ks) > n - 1:
        raise ValueError(f"max k {max(ks)} exceeds n-1 = {n - 1}")
    sims = batch.embeddings @ batch.embeddings.T
    np.fill_diagonal(sims, -np.inf)
    # lexsort: primary key -sim (descending sim), secondary the index itself.
    order = np.lexsort((np.tile(np.arange(n), (n, 1)), -sims), axis=1)
    hits = batch.labels[order] == batch.labels[:, None]
    out = {}
    for k in ks:
        out[int(k)] = float(np.mean(np.any(hits[:, :k], axis=1)))
    return out


def dists(batch: EmbeddingBatch) -> tuple[float, float]:
    """Mean (1 - cosine) over same-class pairs and over cross-class pairs."""
    _check_no_singletons(batch.labels)
    if len(np.unique(batch.labels)) < 2:
        raise ValueError("need at least 2 classes")
    sims = batch.embeddings @ batch.embeddings.T
    same = batch.labels[:, None] == batch.labels[None, :]
    triu = np.triu(np.ones_like(same, dtype=bool), k=1)
    intra = float(np.mean(1.0 - sims[same & triu]))
    inter = float(np.mean(1.0 - sims[~same & triu]))
    return intra, inter


def kmeans(
    points: np.ndarray, k: int, seed: int = 0, max_iters: int = 100
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; deterministic given seed.

    Empty clusters are reseeded to the point farthest from its center.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k {k} exceeds number of points {n}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        dist2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(dist2, axis=1)
        for j in range(k):
            members = new_assign == j
            if np.any(members):
                centers[j] = x[members].mean(axis=0)
            else:
                worst = int(np.argmax(dist2[np.arange(n), new_assign]))
                centers[j] = x[worst]
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign


def nmi(assignment: np.ndarray, labels: np.ndarray) -> float:
    """I(A;L) / sqrt(H(A) H(L)) with natural-log entropies.

    Defined as 1.0 when both partitions are the identical single cluster
    and 0.0 when either entropy is zero but the partitions differ.
    """
    a = np.asarray(assignment)
    l = np.asarray(labels)
    if a.size == 0 or a.shape != l.shape:
        raise ValueError("assignment and labels must be equal-length and non-empty")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, li = np.unique(l, return_inverse=True)
    contingency = np.zeros((ai.max() + 1, li.max() + 1))
    np.add.at(contingency, (ai, li), 1.0)
    pa = contingency.sum(axis=1) / n
    pl = contingency.sum(axis=0) / n
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hl = -np.sum(pl[pl > 0] * np.log(pl[pl > 0]))
    if ha == 0.0 or hl == 0.0:
        same = np.all(ai == ai[0]) and np.all(li == li[0])
        return 1.0 if (ha == 0.0 and hl == 0.0 and same) else 0.0
    pj = contingency / n
    outer = np.outer(pa, pl)
    nz = pj > 0
    mi = np.sum(pj[nz] * np.log(pj[nz] / outer[nz]))
    return float(mi / np.sqrt(ha * hl))


def evaluate(batch: EmbeddingBatch, ks: list[int], seed: int = 0) -> RetrievalReport:
    """Full report; k-means uses k = number of ground-truth classes."""
    recall = recall_at_k(batch, ks)
    intra, inter = dists(batch)
    k = len(np.unique(batch.labels))
    assign = kmeans(batch.embeddings, k, seed=seed)
    return RetrievalReport(
        recall_at=recall,
        dists_intra=intra,
        dists_inter=inter,
        nmi=nmi(assign, batch.labels),
    )
