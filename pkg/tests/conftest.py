"""Shared test helpers: random unit batches and independent oracles.

Oracles here are deliberately naive (loops, sorting, exact counting) and
never call the code paths they verify.
"""

import numpy as np
import pytest

from rankloss.numerics import EmbeddingBatch


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_batch(rng, n, d, n_classes=4):
    x = unit_rows(rng, n, d)
    labels = np.repeat(np.arange(n_classes), -(-n // n_classes))[:n]
    rng.shuffle(labels)
    return EmbeddingBatch(x, labels)


def exact_average_precision(batch):
    """Textbook AP, averaged over every query with a positive peer.

    For each query: sort the other instances by similarity (descending),
    average precision at each positive's rank.
    """
    sims = batch.embeddings @ batch.embeddings.T
    labels = batch.labels
    n = batch.n
    aps = []
    for q in range(n):
        others = [j for j in range(n) if j != q]
        if not any(labels[j] == labels[q] for j in others):
            continue
        order = sorted(others, key=lambda j: -sims[q, j])
        hits = 0
        total = 0.0
        for rank, j in enumerate(order, start=1):
            if labels[j] == labels[q]:
                hits += 1
                total += hits / rank
        aps.append(total / hits)
    return float(np.mean(aps))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
