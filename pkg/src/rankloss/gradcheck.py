"""Central finite-difference checks for every analytic gradient in the
package. Nothing here is differentiated analytically; this module is the
independent side of each gradient's dual-route verification.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .losses import LossSpec, loss_from_embeddings
from .losses_math import loss_terms
from .numerics import normalize_rows

# At tau = 0.01 the sigmoid is stiff: the admissible step window narrows,
# so the step shrinks and the tolerance loosens.
DEFAULT_H = 1e-5
STIFF_H = 1e-7
DEFAULT_TOL = 1e-4
STIFF_TOL = 1e-3


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    max_abs_err: float
    worst_coordinate: tuple[int, int]
    n_evaluated: int

    def passed(self, tol: float) -> bool:
        return self.max_rel_err < tol


def finite_diff(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        xp = x.copy()
        xp[ij] += h
        fp = f(xp)
        xm = x.copy()
        xm[ij] -= h
        fm = f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {ij}")
        grad[ij] = (fp - fm) / (2.0 * h)
    return grad


def _sig_value(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _query_groups(labels: np.ndarray):
    """Per-class (member indices, negative indices) for classes of size >= 2."""
    labels = np.asarray(labels)
    groups = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size >= 2:
            groups.append((members, np.flatnonzero(labels != c)))
    return groups


def batch_loss_highprec(x: np.ndarray, labels: np.ndarray, spec: LossSpec, groups=None):
    """Batch loss evaluated in extended precision (numpy longdouble).

    Differencing the float64 loss at small steps hits the evaluation noise
    floor (~1e-9) before it can resolve gradient coordinates of order 1e-7,
    so the finite-difference side of the check evaluates the loss at
    longdouble precision instead. Only loss values are computed here, by the
    same closed forms; the differencing stays fully independent of the
    analytic gradient path.
    """
    xl = np.asarray(x, dtype=np.longdouble)
    sims = xl @ xl.T
    if groups is None:
        groups = _query_groups(labels)
    n_queries = sum(members.size for members, _ in groups)
    if n_queries == 0:
        return np.longdouble(0.0)
    tau = np.longdouble(spec.tau)
    total = np.longdouble(0.0)
    for members, neg in groups:
        k = members.size
        # sp[q, p]: similarity of query members[q] to class peer members[p]
        sp = sims[np.ix_(members, members)]
        if neg.size:
            sn = sims[np.ix_(members, neg)]
            r_neg = _sig_value((sn[:, None, :] - sp[:, :, None]) / tau).sum(axis=2)
        else:
            r_neg = np.zeros((k, k), dtype=sims.dtype)
        if spec.variant == "smooth_ap":
            g3 = _sig_value((sp[:, None, :] - sp[:, :, None]) / tau)
            g3[:, np.arange(k), np.arange(k)] = 0.0  # exclude the target itself
            g3[np.arange(k), :, np.arange(k)] = 0.0  # exclude the query
            r_pos = g3.sum(axis=2)
        else:
            r_pos = None
        values, _, _ = loss_terms(spec.code, r_neg, r_pos, spec.b, spec.alpha)
        # the diagonal pairs a query with itself and is not a real positive
        values[np.arange(k), np.arange(k)] = 0.0
        total += values.sum() / (k - 1)
    return total / n_queries


def finite_diff_highprec(
    x: np.ndarray, labels: np.ndarray, spec: LossSpec, h: float
) -> np.ndarray:
    """Central differences of the extended-precision batch loss."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=np.longdouble)
    hl = np.longdouble(h)
    groups = _query_groups(labels)
    grad = np.zeros(x.shape, dtype=np.float64)
    it = np.nditer(grad, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        xp = x.copy()
        xp[ij] += hl
        fp = batch_loss_highprec(xp, labels, spec, groups)
        xm = x.copy()
        xm[ij] -= hl
        fm = batch_loss_highprec(xm, labels, spec, groups)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite evaluation at coordinate {ij}")
        grad[ij] = float((fp - fm) / (2.0 * hl))
    return grad


def compare(analytic: np.ndarray, numeric: np.ndarray) -> GradCheckReport:
    """Elementwise comparison with max(|a|, |b|, 1e-8) relative denominators."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    abs_err = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    rel = abs_err / denom
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    if len(worst) == 1:
        worst = (int(worst[0]), 0)
    return GradCheckReport(
        max_rel_err=float(rel.max()),
        max_abs_err=float(abs_err.max()),
        worst_coordinate=(int(worst[0]), int(worst[1])),
        n_evaluated=int(rel.size),
    )


def random_unit_batch(rng: np.random.Generator, n: int, d: int, n_classes: int = 4):
    """Random unit-norm rows with at least two classes, each of size >= 2."""
    x = normalize_rows(rng.standard_normal((n, d)))
    labels = np.repeat(np.arange(n_classes), np.ceil(n / n_classes).astype(int))[:n]
    rng.shuffle(labels)
    return x, labels


def check_loss_gradients(
    spec: LossSpec,
    n: int = 16,
    d: int = 8,
    n_trials: int = 20,
    seed: int = 0,
    h: float | None = None,
    corrupt: float = 0.0,
) -> GradCheckReport:
    """Analytic batch-loss gradient vs finite differences on random batches.

    ``corrupt`` injects an offset into the analytic gradient; it exists so
    the CLI's failure path can be exercised.
    """
    if n < 4 or d < 2:
        raise ValueError("need n >= 4 and d >= 2")
    if h is None:
        h = STIFF_H if spec.tau <= 0.02 else DEFAULT_H
    rng = np.random.default_rng(seed)

    worst = GradCheckReport(0.0, 0.0, (0, 0), 0)
    total_eval = 0
    for _ in range(n_trials):
        x, labels = random_unit_batch(rng, n, d)
        _, analytic, _ = loss_from_embeddings(x, labels, spec)
        if corrupt:
            analytic = analytic + corrupt
        if not np.all(np.isfinite(analytic)):
            raise FloatingPointError(
                f"non-finite analytic gradient for {spec.label()} at seed {seed}"
            )
        numeric = finite_diff_highprec(x, labels, spec, h)
        report = compare(analytic, numeric)
        total_eval += report.n_evaluated
        if report.max_rel_err >= worst.max_rel_err:
            worst = report
    return GradCheckReport(
        max_rel_err=worst.max_rel_err,
        max_abs_err=worst.max_abs_err,
        worst_coordinate=worst.worst_coordinate,
        n_evaluated=total_eval,
    )
