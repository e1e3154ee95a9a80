"""Training loop for the 2-D toy experiment: class-balanced batches,
ranking loss on the network's unit-circle embeddings, Adam updates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import BatchPlan, LabeledDataset, make_toy_2d, sample_batch
from .losses import LossSpec, batch_loss
from .metrics import RetrievalReport, evaluate
from .model import AdamState, MlpModel, adam_step
from .numerics import EmbeddingBatch


class TrainingDivergedError(FloatingPointError):
    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one toy run."""

    loss: str = "D_q"
    tau: float = 0.01
    b: float = 4.0
    alpha: float = 2.0
    steps: int = 2000
    lr: float = 1e-3
    weight_decay: float = 4e-4
    k_classes: int = 4
    per_class: int = 4
    seed: int = 0
    n_classes: int = 4
    n_per_class: int = 150
    sigma_frac: float = 0.15
    eval_ks: tuple[int, ...] = (1, 2, 4)

    def loss_spec(self) -> LossSpec:
        return LossSpec(variant=self.loss, tau=self.tau, b=self.b, alpha=self.alpha)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eval_ks"] = list(self.eval_ks)
        return d


@dataclass
class TrainResult:
    model: MlpModel
    epoch_loss: list[float] = field(default_factory=list)


def embed_dataset(model: MlpModel, dataset: LabeledDataset) -> EmbeddingBatch:
    emb, _ = model.forward(dataset.points)
    return EmbeddingBatch(emb, dataset.labels)


def train(dataset: LabeledDataset, config: ExperimentConfig) -> TrainResult:
    """Run the configured number of optimizer steps on one dataset."""
    spec = config.loss_spec()
    model = MlpModel.init(seed=config.seed)
    state = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    k = min(config.k_classes, dataset.n_classes)
    plan = BatchPlan(k_classes=k, per_class=config.per_class, seed=config.seed)

    batch_size = k * config.per_class
    steps_per_epoch = max(1, dataset.n // batch_size)
    epoch_loss: list[float] = []
    acc: list[float] = []
    for step in range(config.steps):
        idx = sample_batch(dataset, plan, draw=step)
        points = dataset.points[idx]
        labels = dataset.labels[idx]
        emb, cache = model.forward(points)
        result = batch_loss(EmbeddingBatch(emb, labels), spec)
        if not np.isfinite(result.loss):
            raise TrainingDivergedError(step, f"non-finite loss at step {step}")
        grads = model.backward(cache, result.grad)
        adam_step(model.params, grads, state)
        acc.append(result.loss)
        if len(acc) == steps_per_epoch:
            epoch_loss.append(float(np.mean(acc)))
            acc = []
    if acc:
        epoch_loss.append(float(np.mean(acc)))
    return TrainResult(model=model, epoch_loss=epoch_loss)


def run_toy_experiment(config: ExperimentConfig):
    """Build the toy data, train, and evaluate both splits.

    Returns (config echo dict, train result, train report, test report,
    train/test embedding batches).
    """
    train_ds, test_ds = make_toy_2d(
        n_per_class=config.n_per_class,
        seed=config.seed,
        n_classes=config.n_classes,
        sigma_frac=config.sigma_frac,
    )
    result = train(train_ds, config)
    train_emb = embed_dataset(result.model, train_ds)
    test_emb = embed_dataset(result.model, test_ds)
    ks = list(config.eval_ks)
    train_report = evaluate(train_emb, ks, seed=config.seed)
    test_report = evaluate(test_emb, ks, seed=config.seed)
    return result, train_report, test_report, train_emb, test_emb


def report_to_dict(report: RetrievalReport) -> dict:
    return {
        "recall": {str(k): v for k, v in sorted(report.recall_at.items())},
        "dists_intra": report.dists_intra,
        "dists_inter": report.dists_inter,
        "nmi": report.nmi,
    }
