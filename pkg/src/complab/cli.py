"""Command line front end.

Exit codes: 0 success, 1 a verification suite or training run failed its
numerical checks, 2 bad usage, bad configuration, or an I/O problem.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import harness
from .datakit import corrupt, load_comp_csv, save_csv
from .errors import ComplabError, DivergenceError, UsageError
from .harness import ExperimentSpec, RegimeSpec
from .transition import (
    check_invertible,
    load_singular_fixture,
    make_uniform,
    make_with_zero,
    make_without_zero,
)
from .transition import load as load_matrix
from .transition import save as save_matrix

GEN_REGIMES = ("uniform", "without0", "with0", "manual", "fixture")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _load_spec(args, required: bool = True) -> ExperimentSpec:
    if args.config is None:
        if required:
            raise UsageError("this subcommand needs --config")
        spec = ExperimentSpec()
    else:
        spec = ExperimentSpec.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if getattr(args, "out", None) is not None:
        spec = dataclasses.replace(spec, out=args.out)
    if getattr(args, "mode", None) is not None:
        spec = dataclasses.replace(spec, mode=args.mode)
    return spec


def cmd_gen_q(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.regime == "manual":
        if args.file is None:
            raise UsageError("--regime manual needs --file")
        q = load_matrix(args.file)
    elif args.regime == "fixture":
        if args.c not in (None, 10):
            raise UsageError("the singular fixture is 10-class; drop --c or pass 10")
        q = load_singular_fixture()
    else:
        if args.c is None:
            raise UsageError(f"--regime {args.regime} needs --c")
        if args.regime == "uniform":
            q = make_uniform(args.c)
        elif args.regime == "without0":
            q = make_without_zero(args.c, seed=seed)
        else:
            if args.k is None:
                raise UsageError("--regime with0 needs --k")
            q = make_with_zero(args.c, k=args.k, seed=seed)
    inv = check_invertible(q)
    print(harness.format_matrix(q.entries, title=f"{args.regime} (c={q.c})"))
    print(
        f"invertible={inv.invertible} abs_det={inv.abs_det:.3e} "
        f"cond={inv.cond:.3e} rank={inv.rank} zero_columns={inv.zero_columns}"
    )
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_matrix(q, out / "q_true.txt")
        report = {
            "command": "gen-q",
            "regime": args.regime,
            "c": q.c,
            "k": args.k,
            "seed": seed,
            "file": args.file,
            "entries": q.entries.tolist(),
            "invertibility": {
                "invertible": inv.invertible,
                "abs_det": inv.abs_det,
                "cond": inv.cond,
                "rank": inv.rank,
                "zero_columns": inv.zero_columns,
            },
            "outputs": {"q_true": str(out / "q_true.txt")},
        }
        harness.dump_json(report, out / "report.json")
        print(f"wrote {out / 'q_true.txt'}")
    return 0


def cmd_flip(args) -> int:
    spec = _load_spec(args)
    clean_train, _ = spec.data.load(spec.seed)
    if args.q_file is not None:
        regime = RegimeSpec(kind="manual", path=args.q_file)
    elif spec.regime is not None:
        regime = spec.regime
    else:
        raise UsageError("flip needs --q-file or a regime section in the config")
    q = regime.build(clean_train.c, spec.seed)
    comp = corrupt(clean_train, q, seed=spec.seed)
    freq = harness.flip_frequencies(comp)
    max_dev = float(np.abs(freq - q.entries).max())
    print(harness.format_matrices([("matrix", q.entries), ("sampled", freq)]))
    print(f"n={comp.n} max_frequency_deviation={max_dev:.4f}")
    if spec.out is not None:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        save_csv(comp, out / "comp.csv")
        save_matrix(q, out / "q_true.txt")
        report = {
            "command": "flip",
            "seed": spec.seed,
            "config": spec.resolved(),
            "n": comp.n,
            "c": comp.c,
            "entries": q.entries.tolist(),
            "sampled_frequencies": freq.tolist(),
            "max_frequency_deviation": max_dev,
            "outputs": {
                "comp": str(out / "comp.csv"),
                "q_true": str(out / "q_true.txt"),
            },
        }
        harness.dump_json(report, out / "report.json")
        print(f"wrote {out / 'comp.csv'}")
    return 0


def _print_train_summary(report: dict) -> None:
    header = (
        f"{report['name']}: mode={report['mode']} c={report['c']} d={report['d']} "
        f"n_train={report['n_train']} seed={report['seed']}"
    )
    print(header)
    line = f"best epoch {report['best_epoch']}, val acc {report['best_val_acc']:.4f}"
    if report.get("test_acc") is not None:
        line += f", test acc {report['test_acc']:.4f}"
    print(line)
    blocks = []
    if "q_true" in report:
        blocks.append(("true", np.array(report["q_true"]["entries"])))
    if "q_est" in report:
        blocks.append(("estimated", np.array(report["q_est"]["projected"])))
    if blocks:
        print(harness.format_matrices(blocks))
    if "q_est" in report:
        err = report["q_est"]["error_vs_true"]
        print(f"estimate error vs true: max {err['max_abs']:.4f}, mean {err['mean_abs']:.4f}")
        fallback = report["q_est"]["diagnostics"].get("uniform_fallback_rows") or []
        if fallback:
            print(f"note: rows {fallback} fell back to uniform after projection")
    for label, path in (report.get("outputs") or {}).items():
        print(f"wrote {label}: {path}")


def cmd_train(args) -> int:
    spec = _load_spec(args)
    report = harness.run_experiment(spec)
    _print_train_summary(report)
    return 0


def cmd_estimate_q(args) -> int:
    spec = _load_spec(args, required=args.comp is None)
    comp = None
    q_true = None
    if args.comp is not None:
        comp = load_comp_csv(args.comp, c=args.c)
    if args.q_file is not None:
        q_true = load_matrix(args.q_file)
    if args.anchors is not None:
        spec = dataclasses.replace(
            spec, anchors=dataclasses.replace(spec.anchors, path=args.anchors)
        )
    report, estimate, q_true = harness.run_estimation(spec, comp=comp, q_true=q_true)
    blocks = []
    if q_true is not None:
        blocks.append(("true", q_true.entries))
    blocks.append(("estimated", estimate.projected.entries))
    print(harness.format_matrices(blocks))
    if "error_vs_true" in report:
        err = report["error_vs_true"]
        print(f"estimate error vs true: max {err['max_abs']:.4f}, mean {err['mean_abs']:.4f}")
    fallback = estimate.diagnostics.get("uniform_fallback_rows") or []
    if fallback:
        print(f"note: rows {fallback} fell back to uniform after projection")
    if spec.out is not None:
        paths = harness.write_estimation_outputs(spec.out, report, estimate, q_true)
        for label, path in paths.items():
            print(f"wrote {label}: {path}")
    return 0


def cmd_verify(args) -> int:
    names = args.suites or list(harness.VERIFY_SUITES)
    results = harness.run_verify(names, seed=0 if args.seed is None else args.seed)
    for result in results:
        print(result.line())
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = {
            "command": "verify",
            "seed": 0 if args.seed is None else args.seed,
            "suites": {
                r.suite: {"passed": r.passed, "seconds": r.seconds, **r.details}
                for r in results
            },
            "passed": all(r.passed for r in results),
        }
        harness.dump_json(report, out / "report.json")
    return 0 if all(r.passed for r in results) else 1


def cmd_learning_curve(args) -> int:
    spec = _load_spec(args)
    seeds = tuple(args.seeds) if args.seeds else (0, 1, 2)
    curve = harness.run_learning_curve(spec, args.sizes, seeds=seeds)
    print(harness.format_curve_table(curve))
    if spec.out is not None:
        paths = harness.write_learning_curve_outputs(spec.out, curve)
        for label, path in paths.items():
            print(f"wrote {label}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complab",
        description="Train classifiers from labels naming a class each example is not.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (stable filenames)")

    p = sub.add_parser("gen-q", help="build a transition matrix and write it")
    p.add_argument("--regime", required=True, choices=GEN_REGIMES)
    p.add_argument("--c", type=int, help="number of classes")
    p.add_argument("--k", type=int, help="nonzero entries per row (with0)")
    p.add_argument("--seed", type=int, help="generation seed (default 0)")
    p.add_argument("--file", help="matrix file to load (manual)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_gen_q)

    p = sub.add_parser("flip", help="draw complementary labels for a dataset")
    common(p)
    p.add_argument("--q-file", help="matrix file; overrides the config regime")
    p.set_defaults(func=cmd_flip)

    p = sub.add_parser("train", help="run one experiment spec")
    common(p)
    p.add_argument("--mode", choices=harness.MODES, help="override the config mode")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate-q", help="estimate the matrix from complementary data")
    common(p)
    p.add_argument("--comp", help="complementary-label CSV (skips synthetic corruption)")
    p.add_argument("--c", type=int, help="class count for --comp (default: max label)")
    p.add_argument("--anchors", help="anchor CSV file or directory")
    p.add_argument("--q-file", help="true matrix for the error report")
    p.set_defaults(func=cmd_estimate_q)

    p = sub.add_parser("verify", help="run fixed-seed verification suites")
    p.add_argument("suites", nargs="*", metavar="suite",
                   help=f"any of: {', '.join(harness.VERIFY_SUITES)} (default: all)")
    p.add_argument("--seed", type=int, help="suite seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("learning-curve", help="accuracy vs training-set size")
    common(p)
    p.add_argument("--sizes", required=True, type=_int_list,
                   help="comma-separated training-set sizes")
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default 0,1,2)")
    p.set_defaults(func=cmd_learning_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ComplabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
