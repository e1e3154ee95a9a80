"""Differentiable ranking losses over unit-norm embeddings, with a toy
training harness and retrieval evaluation."""

from .data import BatchPlan, LabeledDataset, make_toy_2d, merge_classes, sample_batch
from .gradcheck import GradCheckReport, check_loss_gradients, finite_diff
from .kernels import BACKEND_NAME
from .losses import (
    LossResult,
    LossSpec,
    VARIANTS,
    batch_loss,
    derivative_wrt_rank,
    hard_batch_loss,
    per_query_loss,
)
from .metrics import RetrievalReport, dists, evaluate, kmeans, nmi, recall_at_k
from .model import AdamState, MlpModel, adam_step
from .numerics import EmbeddingBatch, cosine_sim, normalize, normalize_backward, pairwise_cosine
from .smooth_rank import QueryContext, RankComputation, hard_rank_neg, sigmoid, smooth_rank

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BACKEND_NAME",
    "BatchPlan",
    "EmbeddingBatch",
    "GradCheckReport",
    "LabeledDataset",
    "LossResult",
    "LossSpec",
    "MlpModel",
    "QueryContext",
    "RankComputation",
    "RetrievalReport",
    "VARIANTS",
    "adam_step",
    "batch_loss",
    "check_loss_gradients",
    "cosine_sim",
    "derivative_wrt_rank",
    "dists",
    "evaluate",
    "finite_diff",
    "hard_batch_loss",
    "hard_rank_neg",
    "kmeans",
    "make_toy_2d",
    "merge_classes",
    "nmi",
    "normalize",
    "normalize_backward",
    "pairwise_cosine",
    "per_query_loss",
    "recall_at_k",
    "sample_batch",
    "sigmoid",
    "smooth_rank",
]
