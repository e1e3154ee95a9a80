"""Exit-criteria suite. Each test covers one numbered criterion and prints
a single pass/fail line; tolerances are stated inline and are not loosened
elsewhere. Oracles are independent of the code under test: central finite
differences, hand arithmetic, brute-force sorting, and textbook AP.
"""

import functools
import json
import math
import time

import numpy as np

from rankloss.cli import EXIT_OK, main
from rankloss.data import make_toy_2d, merge_classes
from rankloss.gradcheck import check_loss_gradients, random_unit_batch
from rankloss.losses import (
    LossSpec,
    batch_loss,
    derivative_wrt_rank,
    hard_batch_loss,
    per_query_loss,
)
from rankloss.metrics import dists, nmi, recall_at_k
from rankloss.train import ExperimentConfig, embed_dataset, run_toy_experiment, train
from rankloss.metrics import evaluate

from conftest import exact_average_precision, random_batch

ALL_SPECS = [
    LossSpec("O"),
    LossSpec("I_u"),
    LossSpec("I_u_prime"),
    LossSpec("I_b", b=1.0),
    LossSpec("I_b", b=4.0),
    LossSpec("D_s"),
    LossSpec("D_q", alpha=1.0),
    LossSpec("D_q", alpha=2.0),
    LossSpec("D_q", alpha=4.0),
    LossSpec("smooth_ap"),
]


def criterion(n, label):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"criterion {n} ({label}): FAIL")
                raise
            print(f"criterion {n} ({label}): PASS")

        return wrapper

    return deco


def respec(spec, tau):
    return LossSpec(variant=spec.variant, tau=tau, b=spec.b, alpha=spec.alpha)


@criterion(1, "gradient correctness")
def test_criterion_1_gradient_correctness():
    t0 = time.perf_counter()
    for tau, tol in ((0.05, 1e-4), (0.01, 1e-3)):
        for spec in ALL_SPECS:
            report = check_loss_gradients(
                respec(spec, tau), n=16, d=8, n_trials=20, seed=0
            )
            assert report.max_rel_err < tol, (spec.label(), tau, report.max_rel_err)
    assert time.perf_counter() - t0 < 60.0


@criterion(2, "derivative-function identities")
def test_criterion_2_derivative_identities():
    # Richardson-extrapolated central differences; a single stencil cannot
    # reach 1e-8 uniformly over R in [0.1, 20]
    def fd(spec, r, rp, h):
        return (per_query_loss(spec, r + h, rp) - per_query_loss(spec, r - h, rp)) / (2 * h)

    for spec in ALL_SPECS:
        for r in (0.1, 1.0, 5.0, 20.0):
            rp = 1.0 if spec.variant == "smooth_ap" else 0.0
            h = 0.002 * (1.0 + r)
            numeric = (4 * fd(spec, r, rp, h / 2) - fd(spec, r, rp, h)) / 3
            analytic = derivative_wrt_rank(spec, r, rp)
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            assert rel < 1e-8, (spec.label(), r, rel)

    grid = np.linspace(0.0, 100.0, 1000)
    for spec in ALL_SPECS:
        d = np.array([derivative_wrt_rank(spec, r, 0.0) for r in grid])
        if spec.variant in ("I_u", "I_u_prime", "I_b"):
            assert np.all(np.diff(d) > 0), spec.label()
        elif spec.variant in ("D_s", "D_q"):
            assert np.all(np.diff(d) < 0), spec.label()


@criterion(3, "hard-indicator oracle")
def test_criterion_3_hard_indicator_oracle():
    found = 0
    seed = 0
    while found < 20:
        rng = np.random.default_rng(seed)
        seed += 1
        batch = random_batch(rng, 6, 3, n_classes=2)
        sims = batch.embeddings @ batch.embeddings.T
        gaps = []
        for q in range(6):
            row = np.delete(sims[q], q)
            diffs = np.abs(row[:, None] - row[None, :])[np.triu_indices(5, 1)]
            gaps.append(diffs.min())
        if min(gaps) < 0.05:
            continue
        found += 1
        for spec in ALL_SPECS:
            stiff = respec(spec, 1e-4)
            gap = abs(batch_loss(batch, stiff).loss - hard_batch_loss(batch, stiff))
            assert gap < 1e-3, (spec.label(), gap)

    rng = np.random.default_rng(0)
    for _ in range(20):
        batch = random_batch(rng, 10, 4, n_classes=3)
        lhs = hard_batch_loss(batch, LossSpec("smooth_ap"))
        rhs = 1.0 - exact_average_precision(batch)
        assert abs(lhs - rhs) < 1e-10


@criterion(4, "hand-computed fixtures")
def test_criterion_4_hand_fixtures():
    # query sims: positives {0.8, 0.4}, negative {0.6}; hard rank counts by
    # hand give R_neg = (0, 1) and R_pos = (0, 1)
    pos, neg = [0.8, 0.4], [0.6]

    def query_loss(spec):
        values = []
        for i, si in enumerate(pos):
            r_neg = float(sum(1 for s in neg if s > si))
            r_pos = float(sum(1 for j, s in enumerate(pos) if j != i and s > si))
            values.append(per_query_loss(spec, r_neg, r_pos))
        return float(np.mean(values))

    expected = [
        (LossSpec("O"), 0.5),
        (LossSpec("D_s"), 0.3466),
        (LossSpec("D_q", alpha=2.0), 0.375),
        (LossSpec("smooth_ap"), 1 / 6),
    ]
    for spec, want in expected:
        got = query_loss(spec)
        assert abs(got - want) < 1e-3, (spec.label(), got, want)


@criterion(5, "toy replication: D_q vs I_b")
def test_criterion_5_toy_replication():
    t0 = time.perf_counter()
    reports = {}
    for variant in ("D_q", "I_b"):
        config = ExperimentConfig(loss=variant, alpha=2.0, seed=0, steps=2000)
        _, _, test_report, _, _ = run_toy_experiment(config)
        reports[variant] = test_report
    d_q, i_b = reports["D_q"], reports["I_b"]
    assert d_q.recall_at[1] > i_b.recall_at[1], (d_q.recall_at, i_b.recall_at)
    assert d_q.dists_intra > i_b.dists_intra, (d_q.dists_intra, i_b.dists_intra)
    assert d_q.dists_inter > i_b.dists_inter, (d_q.dists_inter, i_b.dists_inter)
    assert time.perf_counter() - t0 < 120.0


@criterion(6, "robustness to class merging")
def test_criterion_6_robustness():
    t0 = time.perf_counter()
    base = ExperimentConfig(seed=0, n_classes=6, steps=2000)
    train_ds, test_ds = make_toy_2d(
        n_per_class=base.n_per_class, seed=base.seed,
        n_classes=base.n_classes, sigma_frac=base.sigma_frac,
    )
    merged_ds = merge_classes(train_ds, group_size=3, seed=base.seed)
    degradation = {}
    for variant in ("I_b", "D_q"):
        config = ExperimentConfig(**{**base.to_dict(), "loss": variant,
                                     "eval_ks": base.eval_ks})
        r_at_1 = {}
        for tag, ds in (("original", train_ds), ("merged", merged_ds)):
            result = train(ds, config)
            report = evaluate(embed_dataset(result.model, test_ds),
                              list(config.eval_ks), seed=config.seed)
            r_at_1[tag] = report.recall_at[1]
        degradation[variant] = r_at_1["original"] - r_at_1["merged"]
    assert degradation["D_q"] < degradation["I_b"], degradation
    assert time.perf_counter() - t0 < 300.0


@criterion(7, "derivative crossover at R = 1")
def test_criterion_7_crossover():
    d_q = LossSpec("D_q", alpha=2.0)
    ap = LossSpec("smooth_ap")
    assert derivative_wrt_rank(d_q, 0.5) > derivative_wrt_rank(ap, 0.5, 0.0)
    assert derivative_wrt_rank(d_q, 1.0) == derivative_wrt_rank(ap, 1.0, 0.0)
    assert derivative_wrt_rank(d_q, 2.0) < derivative_wrt_rank(ap, 2.0, 0.0)


@criterion(8, "metric oracles")
def test_criterion_8_metric_oracles():
    rng = np.random.default_rng(0)
    for _ in range(50):
        batch = random_batch(rng, 10, 4, n_classes=3)
        got = recall_at_k(batch, [1, 3])
        sims = batch.embeddings @ batch.embeddings.T
        for k in (1, 3):
            hits = 0
            for q in range(batch.n):
                others = sorted(
                    (i for i in range(batch.n) if i != q),
                    key=lambda i: (-sims[q, i], i),
                )
                hits += any(batch.labels[i] == batch.labels[q] for i in others[:k])
            assert got[k] == hits / batch.n

        intra, inter = dists(batch)
        intra_pairs, inter_pairs = [], []
        for i in range(batch.n):
            for j in range(i + 1, batch.n):
                d = 1.0 - float(batch.embeddings[i] @ batch.embeddings[j])
                side = intra_pairs if batch.labels[i] == batch.labels[j] else inter_pairs
                side.append(d)
        assert abs(intra - np.mean(intra_pairs)) < 1e-12
        assert abs(inter - np.mean(inter_pairs)) < 1e-12

    assert nmi(np.array([0, 0, 1, 1, 2, 2]), np.array([0, 0, 1, 1, 2, 2])) == 1.0
    assert nmi(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])) == 0.0


@criterion(9, "CLI determinism")
def test_criterion_9_cli_determinism(tmp_path, capsys):
    def run_json(path):
        record = json.loads((path / "run.json").read_text())
        record.pop("wall_clock_s")
        return json.dumps(record)

    fast = ["--steps", "50", "--n-per-class", "20"]

    a, b = tmp_path / "t_a", tmp_path / "t_b"
    for out in (a, b):
        assert main(["train-toy", *fast, "--out", str(out)]) == EXIT_OK
    assert run_json(a) == run_json(b)
    for name in ("train_embeddings.csv", "test_embeddings.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()

    a, b = tmp_path / "c_a", tmp_path / "c_b"
    for out in (a, b):
        assert main(["curves", "--out", str(out)]) == EXIT_OK
    assert (a / "curves.csv").read_bytes() == (b / "curves.csv").read_bytes()

    a, b = tmp_path / "s_a", tmp_path / "s_b"
    for out in (a, b):
        code = main(["sweep", *fast, "--axis", "per_class", "--values", "2,3",
                     "--out", str(out)])
        assert code == EXIT_OK
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    for value in ("2", "3"):
        assert run_json(a / f"per_class_{value}") == run_json(b / f"per_class_{value}")

    a, b = tmp_path / "r_a", tmp_path / "r_b"
    for out in (a, b):
        code = main(["robustness", "--steps", "30", "--n-per-class", "12",
                     "--n-classes", "6", "--out", str(out)])
        assert code == EXIT_OK
    assert (a / "robustness.json").read_bytes() == (b / "robustness.json").read_bytes()

    capsys.readouterr()  # drain output from the commands above
    outputs = []
    for _ in range(2):
        assert main(["grad-check", "--variants", "O,D_s", "--trials", "1"]) == EXIT_OK
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]

    csv = tmp_path / "emb.csv"
    rng = np.random.default_rng(0)
    x, labels = random_unit_batch(rng, 8, 3)
    lines = ["label,x0,x1,x2"]
    for lab, row in zip(labels, x):
        lines.append(str(int(lab)) + "," + ",".join(repr(float(v)) for v in row))
    csv.write_text("\n".join(lines) + "\n")
    outputs = []
    for _ in range(2):
        assert main(["eval", "--embeddings", str(csv)]) == EXIT_OK
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
