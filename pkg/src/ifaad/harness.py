"""Simulated-analyst experiments: discovery curves over multiple seeded runs.

Each run builds a fresh forest from its own seed, drives the chosen arm
for a fixed query budget against the ground-truth oracle, and records the
cumulative count of true anomalies shown. Runs aggregate into a mean curve
with a normal-approximation 95% confidence band.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .aad import AadConfig, run_feedback_loop
from .data import LabeledDataset
from .forest import SCHEME_IF, SCHEME_IF_LEAF, baseline_rank, build_forest

ARM_IF_AAD = "if-aad"
ARM_IF_AAD_LEAF = "if-aad-leaf"
ARM_BASELINE = "if-baseline"
ARMS = (ARM_IF_AAD, ARM_IF_AAD_LEAF, ARM_BASELINE)

_ARM_SCHEME = {
    ARM_IF_AAD: SCHEME_IF,
    ARM_IF_AAD_LEAF: SCHEME_IF_LEAF,
    ARM_BASELINE: SCHEME_IF,
}

CI_Z = 1.96


@dataclass
class ExperimentConfig:
    dataset: LabeledDataset
    arm: str = ARM_IF_AAD
    budget: int = 60
    num_runs: int = 10
    base_seed: int = 0
    num_trees: int = 100
    subsample_size: int = 256
    aad: AadConfig = field(default_factory=AadConfig)

    def validate(self) -> None:
        if self.arm not in ARMS:
            raise ValueError(f"unknown arm {self.arm!r}, expected one of {ARMS}")
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")
        if self.budget > self.dataset.n:
            raise ValueError(
                f"budget {self.budget} exceeds dataset size {self.dataset.n}"
            )
        if self.num_runs < 1:
            raise ValueError(f"num_runs must be >= 1, got {self.num_runs}")


@dataclass
class DiscoveryCurve:
    """Cumulative true anomalies seen per query, per run, plus aggregates.

    ``counts`` is (num_runs, budget); ``queries[r]`` lists the run's
    (instance id, was it a true anomaly) pairs in query order.
    """

    arm: str
    counts: np.ndarray
    queries: list[list[tuple[int, bool]]]

    @property
    def budget(self) -> int:
        return self.counts.shape[1]

    @property
    def num_runs(self) -> int:
        return self.counts.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.counts.mean(axis=0)

    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        """Normal-approximation 95% band: mean +- 1.96 * standard error."""
        if self.num_runs < 2:
            return self.mean.copy(), self.mean.copy()
        se = self.counts.std(axis=0, ddof=1) / np.sqrt(self.num_runs)
        return self.mean - CI_Z * se, self.mean + CI_Z * se


def run_experiment(cfg: ExperimentConfig) -> DiscoveryCurve:
    """Run one arm for ``cfg.num_runs`` seeded runs and aggregate.

    Run ``r`` builds its forest with seed ``base_seed + r``. The baseline
    arm ranks once with uniform weights and ignores feedback entirely; the
    feedback arms drive the full query loop with the ground-truth oracle.
    """
    cfg.validate()
    ds = cfg.dataset
    counts = np.zeros((cfg.num_runs, cfg.budget), dtype=np.int64)
    queries: list[list[tuple[int, bool]]] = []

    for r in range(cfg.num_runs):
        seed = cfg.base_seed + r
        forest = build_forest(
            ds.X,
            subsample_size=cfg.subsample_size,
            num_trees=cfg.num_trees,
            scheme=_ARM_SCHEME[cfg.arm],
            seed=seed,
        )
        if cfg.arm == ARM_BASELINE:
            queried = baseline_rank(forest, ds.X)[: cfg.budget]
        else:
            aad_cfg = replace(cfg.aad, budget=cfg.budget)
            if cfg.budget == 0:
                queried = np.empty(0, dtype=np.int64)
            else:
                state = run_feedback_loop(forest, ds.X, ds.oracle(), aad_cfg)
                queried = np.asarray([i for i, _ in state.query_history], dtype=np.int64)
        hits = ds.truth[queried]
        counts[r] = np.cumsum(hits)
        queries.append([(int(i), bool(h)) for i, h in zip(queried, hits)])

    return DiscoveryCurve(arm=cfg.arm, counts=counts, queries=queries)


def export_results(curve: DiscoveryCurve, path, fmt: str = "csv") -> Path:
    """Write the curve as CSV, plus a raw per-query sidecar.

    The main file has one row per iteration with the mean, the confidence
    band, and every run's cumulative count. The sidecar
    ``<path>.queries.csv`` lists (run, iteration, instance id, truth,
    cumulative) for every query, enough for external plotting or
    embedding tools. Floats are written at full precision so a re-load
    reproduces them exactly.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported export format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lo, hi = curve.ci()
    mean = curve.mean
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "mean", "ci_low", "ci_high"]
            + [f"run_{r}" for r in range(curve.num_runs)]
        )
        for i in range(curve.budget):
            writer.writerow(
                [i + 1, repr(float(mean[i])), repr(float(lo[i])), repr(float(hi[i]))]
                + [int(v) for v in curve.counts[:, i]]
            )
    sidecar = path.with_suffix(path.suffix + ".queries.csv")
    with open(sidecar, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "iteration", "instance_id", "truth", "cumulative"])
        for r, run_queries in enumerate(curve.queries):
            cum = 0
            for i, (instance_id, hit) in enumerate(run_queries, start=1):
                cum += int(hit)
                writer.writerow([r, i, instance_id, "anomaly" if hit else "nominal", cum])
    return path


def load_results(path) -> dict[str, np.ndarray]:
    """Re-load an exported curve CSV into arrays keyed by column name."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    cols = {name: np.asarray([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return cols


@dataclass
class ArmComparison:
    """Per-iteration contrast of several same-budget curves."""

    arms: list[str]
    means: np.ndarray
    final_mean: np.ndarray
    final_ci_low: np.ndarray
    final_ci_high: np.ndarray
    deltas: np.ndarray
    ci_overlap: np.ndarray

    def to_text(self) -> str:
        lines = ["arm              final_mean  ci_low  ci_high  overlap_with_first"]
        for i, arm in enumerate(self.arms):
            lines.append(
                f"{arm:<16} {self.final_mean[i]:>10.2f} "
                f"{self.final_ci_low[i]:>7.2f} {self.final_ci_high[i]:>8.2f}  "
                f"{'yes' if self.ci_overlap[i] else 'no'}"
            )
        return "\n".join(lines)


def compare_arms(curves: list[DiscoveryCurve]) -> ArmComparison:
    """Contrast curves against the first one: per-iteration mean deltas,
    final counts, and whether each arm's final CI overlaps the first's."""
    if not curves:
        raise ValueError("need at least one curve")
    budgets = {c.budget for c in curves}
    if len(budgets) != 1:
        raise ValueError(f"mismatched budgets across arms: {sorted(budgets)}")
    means = np.vstack([c.mean for c in curves])
    finals = np.array([c.mean[-1] if c.budget else 0.0 for c in curves])
    ci_pairs = [c.ci() for c in curves]
    lo = np.array([p[0][-1] if c.budget else 0.0 for p, c in zip(ci_pairs, curves)])
    hi = np.array([p[1][-1] if c.budget else 0.0 for p, c in zip(ci_pairs, curves)])
    overlap = (lo <= hi[0]) & (lo[0] <= hi)
    return ArmComparison(
        arms=[c.arm for c in curves],
        means=means,
        final_mean=finals,
        final_ci_low=lo,
        final_ci_high=hi,
        deltas=means - means[0],
        ci_overlap=overlap,
    )
