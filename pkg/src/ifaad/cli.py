"""Command-line entry points: build, rank, loop, experiment, serve."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .aad import AadConfig, run_feedback_loop, save_session
from .data import CsvSchema, LabeledDataset, load_csv, make_synthetic_2d
from .forest import baseline_rank, build_forest, serialize_forest
from .harness import ARMS, ARM_BASELINE, ARM_IF_AAD, ExperimentConfig, export_results, run_experiment


def load_dataset(spec: str, seed: int) -> LabeledDataset:
    """Resolve a --dataset value: a canonical CSV path or a synthetic spec.

    ``synthetic`` gives the default 500 nominal + 15 anomaly 2-D set;
    ``synthetic:N,A`` picks the counts. Generation is seeded by --seed.
    """
    if spec == "synthetic" or spec.startswith("synthetic:"):
        if ":" in spec:
            try:
                n_str, a_str = spec.split(":", 1)[1].split(",")
                num_nominal, num_anomaly = int(n_str), int(a_str)
            except ValueError:
                raise ValueError(
                    f"bad synthetic spec {spec!r}, expected synthetic:<nominal>,<anomaly>"
                ) from None
        else:
            num_nominal, num_anomaly = 500, 15
        return make_synthetic_2d(num_nominal, num_anomaly, seed=seed)
    return load_csv(Path(spec), CsvSchema())


def add_common_flags(p: argparse.ArgumentParser, *, arm_default: str | None = None) -> None:
    p.add_argument("--dataset", required=True, help="canonical CSV path, or synthetic[:N,A]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100, help="number of trees")
    p.add_argument("--subsample", type=int, default=256, help="subsample size per tree")
    if arm_default is not None:
        p.add_argument("--arm", choices=ARMS, default=arm_default)


def add_aad_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=0.03, help="quantile anchor parameter")
    p.add_argument("--ca", type=float, default=100.0, help="anomaly hinge weight")
    p.add_argument("--cxi", type=float, default=0.001, help="soft constraint weight")
    p.add_argument("--budget", type=int, default=60, help="number of analyst queries")


def make_aad_config(args) -> AadConfig:
    cfg = AadConfig(tau=args.tau, c_a=args.ca, c_xi=args.cxi, budget=args.budget)
    cfg.validate()
    return cfg


def cmd_build(args) -> int:
    ds = load_dataset(args.dataset, args.seed)
    forest = build_forest(
        ds.X,
        subsample_size=args.subsample,
        num_trees=args.trees,
        scheme=args.scheme,
        seed=args.seed,
    )
    blob = serialize_forest(forest)
    Path(args.out).write_bytes(blob)
    print(
        f"built forest: trees={forest.num_trees} nodes={forest.m} "
        f"scheme={forest.scheme} -> {args.out} ({len(blob)} bytes)"
    )
    return 0


def cmd_rank(args) -> int:
    ds = load_dataset(args.dataset, args.seed)
    forest = build_forest(
        ds.X, subsample_size=args.subsample, num_trees=args.trees, seed=args.seed
    )
    order = baseline_rank(forest, ds.X)
    rows = [
        (rank + 1, int(i), "anomaly" if ds.truth[i] else "nominal")
        for rank, i in enumerate(order)
    ]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "instance_id", "truth"])
            writer.writerows(rows)
        print(f"wrote ranking of {len(rows)} instances to {args.out}")
    else:
        for rank, i, truth in rows[: args.top]:
            print(f"{rank:>5}  {i:>7}  {truth}")
    return 0


def cmd_loop(args) -> int:
    ds = load_dataset(args.dataset, args.seed)
    cfg = make_aad_config(args)
    scheme = "if-leaf" if args.arm == "if-aad-leaf" else "if"
    if args.arm == ARM_BASELINE:
        raise ValueError("the loop command drives feedback arms; use rank for the baseline")
    forest = build_forest(
        ds.X,
        subsample_size=args.subsample,
        num_trees=args.trees,
        scheme=scheme,
        seed=args.seed,
    )
    state = run_feedback_loop(forest, ds.X, ds.oracle(), cfg)
    found = 0
    for t, (i, label) in enumerate(state.query_history, start=1):
        found += label == "anomaly"
        print(f"iter={t} instance={i} label={label} found={found}")
    if args.out:
        save_session(
            args.out,
            state,
            cfg,
            seed=args.seed,
            dataset_ref=args.dataset,
            forest_params={
                "num_trees": args.trees,
                "subsample_size": args.subsample,
                "scheme": scheme,
            },
        )
        print(f"session saved to {args.out}")
    return 0


def cmd_experiment(args) -> int:
    ds = load_dataset(args.dataset, args.seed)
    cfg = ExperimentConfig(
        dataset=ds,
        arm=args.arm,
        budget=args.budget,
        num_runs=args.runs,
        base_seed=args.seed,
        num_trees=args.trees,
        subsample_size=args.subsample,
        aad=make_aad_config(args),
    )
    curve = run_experiment(cfg)
    out = export_results(curve, args.out)
    final = curve.mean[-1] if curve.budget else 0.0
    print(
        f"arm={args.arm} runs={args.runs} budget={args.budget} "
        f"mean_final={final:.2f} -> {out}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir=args.data_dir, session_dir=args.session_dir, ui_dir=args.ui_dir
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifaad",
        description="Isolation-forest anomaly detection with analyst feedback",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a forest from a dataset and serialize it")
    add_common_flags(p)
    p.add_argument("--scheme", choices=("if", "if-leaf"), default="if")
    p.add_argument("--out", required=True, help="output path for the serialized forest")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("rank", help="rank instances with the uniform-weight baseline")
    add_common_flags(p)
    p.add_argument("--out", default=None, help="write the full ranking CSV here")
    p.add_argument("--top", type=int, default=20, help="rows to print when no --out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("loop", help="run one simulated-analyst feedback session")
    add_common_flags(p, arm_default=ARM_IF_AAD)
    add_aad_flags(p)
    p.add_argument("--out", default=None, help="write the session file here")
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("experiment", help="multi-run discovery-curve experiment")
    add_common_flags(p, arm_default=ARM_IF_AAD)
    add_aad_flags(p)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", required=True, help="output CSV for the curve")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", help="start the labeling service")
    p.add_argument("--host", default=os.environ.get("IFAAD_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("IFAAD_PORT", "8765")))
    p.add_argument("--data-dir", default=os.environ.get("IFAAD_DATA_DIR"))
    p.add_argument("--session-dir", default=os.environ.get("IFAAD_SESSION_DIR"))
    p.add_argument("--ui-dir", default=os.environ.get("IFAAD_UI_DIR"))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(
            json.dumps({"code": type(e).__name__, "message": str(e)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
