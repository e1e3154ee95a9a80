"""Experiment command line: toy training, loss/derivative curve dumps,
hyper-parameter sweeps, the class-merging robustness protocol, gradient
checks, and retrieval evaluation of embedding CSV files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .data import LabeledDataset, load_embeddings_csv, make_toy_2d, merge_classes, save_embeddings_csv
from .gradcheck import DEFAULT_TOL, STIFF_TOL, check_loss_gradients
from .losses import LossSpec, derivative_wrt_rank, per_query_loss
from .losses_math import VARIANT_CODES
from .metrics import evaluate
from .model import MlpModel
from .numerics import EmbeddingBatch, normalize_rows
from .train import (
    ExperimentConfig,
    TrainingDivergedError,
    embed_dataset,
    report_to_dict,
    run_toy_experiment,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _load_config_file(path: str) -> dict[str, str]:
    """Flat key=value config; an INI section header is optional."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    merged: dict[str, str] = {}
    for section in parser.sections():
        merged.update(parser[section])
    return merged


_CONFIG_FIELDS = {
    "loss": str,
    "tau": float,
    "b": float,
    "alpha": float,
    "steps": int,
    "lr": float,
    "weight_decay": float,
    "k_classes": int,
    "per_class": int,
    "seed": int,
    "n_classes": int,
    "n_per_class": int,
    "sigma_frac": float,
}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """File values first, command-line flags win."""
    values: dict = {}
    if getattr(args, "config", None):
        raw = _load_config_file(args.config)
        for key, value in raw.items():
            if key not in _CONFIG_FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _CONFIG_FIELDS[key](value)
    for key, cast in _CONFIG_FIELDS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = cast(flag)
    try:
        config = ExperimentConfig(**values)
        config.loss_spec()  # validate variant domain early
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def _write_run(out: Path, config: ExperimentConfig, result, train_report, test_report,
               train_emb, test_emb, wall_clock: float) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "config": config.to_dict(),
        "backend": kernels.BACKEND_NAME,
        "epoch_loss": result.epoch_loss,
        "train_report": report_to_dict(train_report),
        "test_report": report_to_dict(test_report),
        "wall_clock_s": wall_clock,
    }
    (out / "run.json").write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    save_embeddings_csv(
        LabeledDataset(train_emb.embeddings, train_emb.labels, split="train"),
        out / "train_embeddings.csv",
    )
    save_embeddings_csv(
        LabeledDataset(test_emb.embeddings, test_emb.labels, split="test"),
        out / "test_embeddings.csv",
    )
    return record


def cmd_train_toy(args) -> int:
    config = build_config(args)
    t0 = time.perf_counter()
    try:
        result, train_report, test_report, train_emb, test_emb = run_toy_experiment(config)
    except TrainingDivergedError as exc:
        print(f"numerical failure at step {exc.step}: {exc}", file=sys.stderr)
        print(json.dumps({"config": config.to_dict()}), file=sys.stderr)
        return EXIT_NUMERICAL
    record = _write_run(
        Path(args.out), config, result, train_report, test_report,
        train_emb, test_emb, time.perf_counter() - t0,
    )
    print(json.dumps({"test_report": record["test_report"]}, indent=2))
    return EXIT_OK


def _curve_rows(variants: list[str], grid: np.ndarray, r_pos_list: list[float]):
    rows = []
    for name in variants:
        if name == "smooth_ap":
            for rp in r_pos_list:
                spec = LossSpec(variant="smooth_ap")
                for r in grid:
                    rows.append((
                        f"AP(R_pos={rp:g})",
                        float(r),
                        per_query_loss(spec, float(r), rp),
                        derivative_wrt_rank(spec, float(r), rp),
                    ))
        else:
            spec = LossSpec(variant=name)
            for r in grid:
                rows.append((
                    spec.label(),
                    float(r),
                    per_query_loss(spec, float(r)),
                    derivative_wrt_rank(spec, float(r)),
                ))
    return rows


def cmd_curves(args) -> int:
    variants = [v.strip() for v in args.variants.split(",")]
    for v in variants:
        if v not in VARIANT_CODES:
            raise ConfigError(f"unknown variant {v!r}")
    r_pos_list = [float(v) for v in args.r_pos.split(",")]
    grid = np.linspace(0.0, args.r_max, args.n_points)
    rows = _curve_rows(variants, grid, r_pos_list)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "curves.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant,R,loss,dLdR\n")
        for variant, r, loss, dldr in rows:
            fh.write(f"{variant},{r!r},{loss!r},{dldr!r}\n")
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = build_config(args)
    values = [v.strip() for v in args.values.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for raw in values:
        if args.axis == "alpha":
            config = ExperimentConfig(**{**base.to_dict(), "alpha": float(raw),
                                         "eval_ks": base.eval_ks})
        elif args.axis == "b":
            config = ExperimentConfig(**{**base.to_dict(), "b": float(raw),
                                         "eval_ks": base.eval_ks})
        else:
            config = ExperimentConfig(**{**base.to_dict(), "per_class": int(raw),
                                         "eval_ks": base.eval_ks})
        try:
            config.loss_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        t0 = time.perf_counter()
        result, train_report, test_report, train_emb, test_emb = run_toy_experiment(config)
        _write_run(out / f"{args.axis}_{raw}", config, result, train_report,
                   test_report, train_emb, test_emb, time.perf_counter() - t0)
        rows.append((raw, test_report.recall_at[1], test_report.dists_intra,
                     test_report.dists_inter, test_report.nmi))
    path = out / "sweep.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value,test_r_at_1,dists_intra,dists_inter,nmi\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    print(f"wrote {len(rows)} runs to {path}")
    return EXIT_OK


ROBUSTNESS_LOSSES = ("I_b", "D_q", "smooth_ap")


def cmd_robustness(args) -> int:
    base = build_config(args)
    if base.n_classes < 6:
        base = ExperimentConfig(**{**base.to_dict(), "n_classes": 6, "eval_ks": base.eval_ks})
    train_ds, test_ds = make_toy_2d(
        n_per_class=base.n_per_class, seed=base.seed,
        n_classes=base.n_classes, sigma_frac=base.sigma_frac,
    )
    merged_ds = merge_classes(train_ds, group_size=3, seed=base.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = {"config": base.to_dict(), "merged_train_classes": merged_ds.n_classes,
              "original_train_classes": train_ds.n_classes, "losses": {}}
    for loss_name in ROBUSTNESS_LOSSES:
        config = ExperimentConfig(**{**base.to_dict(), "loss": loss_name,
                                     "eval_ks": base.eval_ks})
        entries = {}
        for tag, ds in (("original", train_ds), ("merged", merged_ds)):
            result = train(ds, config)
            test_emb = embed_dataset(result.model, test_ds)
            rep = evaluate(test_emb, list(config.eval_ks), seed=config.seed)
            entries[tag] = report_to_dict(rep)
        delta = entries["original"]["recall"]["1"] - entries["merged"]["recall"]["1"]
        report["losses"][loss_name] = {**entries, "r_at_1_degradation": delta}
    (out / "robustness.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    summary = {k: v["r_at_1_degradation"] for k, v in report["losses"].items()}
    print(json.dumps({"r_at_1_degradation": summary}, indent=2))
    return EXIT_OK


def cmd_grad_check(args) -> int:
    variants = [v.strip() for v in args.variants.split(",")]
    failures = 0
    for name in variants:
        if name not in VARIANT_CODES:
            raise ConfigError(f"unknown variant {name!r}")
        spec = LossSpec(variant=name, tau=args.tau, b=args.b, alpha=args.alpha)
        tol = STIFF_TOL if args.tau <= 0.02 else DEFAULT_TOL
        report = check_loss_gradients(
            spec, n=args.n, d=args.d, n_trials=args.trials, seed=args.seed,
            corrupt=args.corrupt_gradient,
        )
        ok = report.passed(tol)
        failures += 0 if ok else 1
        print(f"{spec.label():>16s}  max_rel_err={report.max_rel_err:.3e}  "
              f"tol={tol:g}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def cmd_eval(args) -> int:
    dataset = load_embeddings_csv(args.embeddings)
    batch = EmbeddingBatch(normalize_rows(dataset.points), dataset.labels)
    ks = [int(v) for v in args.ks.split(",")]
    report = evaluate(batch, ks, seed=args.seed)
    payload = report.to_json() + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(payload, encoding="utf-8")
    sys.stdout.write(payload)
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags win")
    p.add_argument("--loss", choices=sorted(VARIANT_CODES))
    p.add_argument("--tau", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--k-classes", dest="k_classes", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-classes", dest="n_classes", type=int)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    p.add_argument("--sigma-frac", dest="sigma_frac", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankloss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-toy", help="train the 2-D toy network and evaluate")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("curves", help="emit loss/derivative curves as CSV")
    p.add_argument("--variants", default="O,I_u,I_b,D_s,D_q,smooth_ap")
    p.add_argument("--r-max", dest="r_max", type=float, default=10.0)
    p.add_argument("--n-points", dest="n_points", type=int, default=101)
    p.add_argument("--r-pos", dest="r_pos", default="0,1,2,3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("sweep", help="toy-scale hyper-parameter sweep")
    _add_config_flags(p)
    p.add_argument("--axis", choices=("alpha", "b", "per_class"), required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness", help="class-merging robustness protocol")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--variants", default="O,I_u,I_u_prime,I_b,D_s,D_q,smooth_ap")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--b", type=float, default=4.0)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--corrupt-gradient", dest="corrupt_gradient", type=float,
                   default=0.0, help=argparse.SUPPRESS)  # test hook
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("eval", help="evaluate an embeddings CSV file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--ks", default="1,2,4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"numerical failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
