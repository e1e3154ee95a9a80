"""Synthetic 2-D datasets, class-balanced mini-batch sampling, class
merging for the robustness protocol, and the embedding CSV format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabeledDataset:
    """Points (n x d) with one integer class label per row."""

    points: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        lab = np.ascontiguousarray(self.labels, dtype=np.int64)
        if pts.ndim != 2 or lab.shape != (pts.shape[0],):
            raise ValueError("points must be n x d with one label per row")
        classes, counts = np.unique(lab, return_counts=True)
        if np.any(counts < 2):
            singles = classes[counts < 2].tolist()
            raise ValueError(f"classes with < 2 samples: {singles}")
        if not np.array_equal(classes, np.arange(classes.min(), classes.min() + len(classes))):
            raise ValueError("labels must be contiguous")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_classes(self) -> int:
        return len(np.unique(self.labels))


@dataclass(frozen=True)
class BatchPlan:
    """k distinct classes, a fixed number of samples per class, seeded."""

    k_classes: int
    per_class: int
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 2:
            raise ValueError("per_class must be >= 2")
        if self.k_classes < 2:
            raise ValueError("k_classes must be >= 2")


def make_toy_2d(
    n_per_class: int = 150,
    seed: int = 0,
    n_classes: int = 4,
    radius: float = 1.0,
    sigma_frac: float = 0.1,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Ring-of-Gaussians train/test pair with disjoint classes.

    Train class centers sit at angles 2*pi*c/C on a circle of the given
    radius; test centers are rotated half a slot so the test classes are
    unseen. Blob sigma is sigma_frac * radius, small enough that class
    sectors do not overlap but large enough that blobs touch.
    """
    if n_per_class < 2:
        raise ValueError("n_per_class must be >= 2")
    rng = np.random.default_rng(seed)
    sigma = sigma_frac * radius

    def blobs(angles, label_offset):
        pts = []
        labs = []
        for c, theta in enumerate(angles):
            center = radius * np.array([math.cos(theta), math.sin(theta)])
            pts.append(center + sigma * rng.standard_normal((n_per_class, 2)))
            labs.append(np.full(n_per_class, label_offset + c, dtype=np.int64))
        return np.vstack(pts), np.concatenate(labs)

    step = 2 * math.pi / n_classes
    train_angles = [c * step for c in range(n_classes)]
    test_angles = [(c + 0.5) * step for c in range(n_classes)]
    train_pts, train_labs = blobs(train_angles, 0)
    test_pts, test_labs = blobs(test_angles, n_classes)
    return (
        LabeledDataset(train_pts, train_labs, split="train"),
        LabeledDataset(test_pts, test_labs, split="test"),
    )


def sample_batch(dataset: LabeledDataset, plan: BatchPlan, draw: int = 0) -> np.ndarray:
    """Class-balanced batch indices, deterministic in (seed, draw).

    Samples plan.k_classes distinct classes uniformly, then plan.per_class
    distinct indices from each, all without replacement.
    """
    classes = np.unique(dataset.labels)
    if plan.k_classes > len(classes):
        raise ValueError(f"asked for {plan.k_classes} classes, dataset has {len(classes)}")
    rng = np.random.default_rng((plan.seed, draw))
    chosen = rng.choice(classes, size=plan.k_classes, replace=False)
    out = []
    for c in chosen:
        members = np.flatnonzero(dataset.labels == c)
        if members.size < plan.per_class:
            raise ValueError(f"class {int(c)} has {members.size} < {plan.per_class} samples")
        out.append(rng.choice(members, size=plan.per_class, replace=False))
    return np.concatenate(out)


def merge_classes(dataset: LabeledDataset, group_size: int = 3, seed: int = 0) -> LabeledDataset:
    """Shuffle classes deterministically and merge every group_size into one.

    A remainder smaller than group_size stays together as a final, smaller
    merged class. Points are untouched.
    """
    classes = np.unique(dataset.labels)
    if len(classes) < group_size:
        raise ValueError(f"need >= {group_size} classes, have {len(classes)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(classes)
    mapping = {int(c): i // group_size for i, c in enumerate(order)}
    new_labels = np.array([mapping[int(c)] for c in dataset.labels], dtype=np.int64)
    return LabeledDataset(dataset.points, new_labels, split=dataset.split)


class EmbeddingCsvError(ValueError):
    pass


def save_embeddings_csv(dataset: LabeledDataset, path) -> None:
    """CSV with header ``label,x0,...``; 17 significant digits, LF endings."""
    d = dataset.points.shape[1]
    header = "label," + ",".join(f"x{i}" for i in range(d))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for lab, row in zip(dataset.labels, dataset.points):
            fh.write(str(int(lab)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_embeddings_csv(path, split: str = "test") -> LabeledDataset:
    """Parse the format written by :func:`save_embeddings_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("label,"):
        raise EmbeddingCsvError(f"{path}: line 1: missing 'label,...' header")
    d = len(lines[0].split(",")) - 1
    rows = []
    labels = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != d + 1:
            raise EmbeddingCsvError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(fields)}")
        try:
            labels.append(int(fields[0]))
            rows.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise EmbeddingCsvError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise EmbeddingCsvError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labels, dtype=np.int64), split=split)
