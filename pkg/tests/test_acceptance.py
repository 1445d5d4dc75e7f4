"""Acceptance suite: one test per release criterion.

Each test prints a ``[criterion NN] name: PASS`` line (run with ``-s`` to
see them). Criteria cover exact oracle equivalences, loop invariants,
qualitative curve reproduction, runtime envelopes, and determinism.
"""

import functools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from ifaad.aad import (
    AadConfig,
    FeedbackState,
    LabeledSet,
    compute_quantile_anchor,
    objective,
    objective_gradient,
    run_feedback_loop,
    update_weights,
)
from ifaad.data import make_synthetic_2d, prepare_abalone, prepare_ann_thyroid
from ifaad.forest import (
    SCHEME_IF,
    SparseNodeVector,
    baseline_rank,
    build_forest,
    feature_matrix,
    serialize_forest,
    uniform_weights,
)
from ifaad.harness import (
    ARM_BASELINE,
    ARM_IF_AAD,
    ARM_IF_AAD_LEAF,
    ExperimentConfig,
    export_results,
    run_experiment,
)

RAW_DIR = os.environ.get("IFAAD_RAW_DATA", "")


def criterion(num, name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except pytest.skip.Exception as e:
                print(f"\n[criterion {num:02d}] {name}: SKIP ({e})")
                raise
            except BaseException:
                print(f"\n[criterion {num:02d}] {name}: FAIL")
                raise
            print(f"\n[criterion {num:02d}] {name}: PASS")
            return result

        return wrapper

    return decorate


# --- shared heavy artifacts ---------------------------------------------------


@pytest.fixture(scope="module")
def synth515():
    """The benchmark synthetic set: 500 nominals, 15 clumped anomalies."""
    return make_synthetic_2d(500, 15, seed=1)


@pytest.fixture(scope="module")
def curves_b60(synth515):
    """Baseline, feedback, and leaf-scheme curves at budget 60, 10 runs."""

    def run(arm):
        return run_experiment(
            ExperimentConfig(
                dataset=synth515, arm=arm, budget=60, num_runs=10, base_seed=0
            )
        )

    return {arm: run(arm) for arm in (ARM_BASELINE, ARM_IF_AAD, ARM_IF_AAD_LEAF)}


def labeled_set_from(Z, ids, truth):
    labeled = LabeledSet()
    for i in ids:
        labeled.add(
            int(i),
            SparseNodeVector.from_csr_row(Z, int(i)),
            "anomaly" if truth[i] else "nominal",
        )
    return labeled


# --- criteria -----------------------------------------------------------------


@criterion(1, "uniform-weight baseline equals depth-count oracle")
def test_criterion_01_baseline_equivalence():
    ds = make_synthetic_2d(485, 15, seed=1)
    assert ds.n == 500
    start = time.monotonic()
    forest = build_forest(ds.X, subsample_size=256, num_trees=100, scheme=SCHEME_IF, seed=0)
    got = baseline_rank(forest, ds.X)

    # independent oracle: walk the stored split arrays, counting path nodes
    def path_count(x):
        total = 0
        for tree in forest.trees:
            node, c = 0, 1
            while tree.feature[node] >= 0:
                f = tree.feature[node]
                node = int(tree.left[node]) if x[f] <= tree.threshold[node] else int(tree.right[node])
                c += 1
            total += c
        return total

    neg_avg = np.array([-path_count(x) / forest.num_trees for x in ds.X])
    want = np.lexsort((np.arange(ds.n), -neg_avg))
    elapsed = time.monotonic() - start
    assert np.array_equal(got, want), "uniform-weight ranking differs from depth oracle"
    assert elapsed < 5.0, f"took {elapsed:.2f}s, budget is 5s"


@criterion(2, "objective matches straight-line evaluator to 1e-12")
def test_criterion_02_objective_oracle():
    ds = make_synthetic_2d(55, 5, seed=3)
    forest = build_forest(ds.X, 24, 3, seed=3)
    Z = feature_matrix(forest, ds.X)
    cfg = AadConfig()
    rng = np.random.default_rng(21)

    def evaluate_by_hand(w, anomalies, nominals, q_fixed, anchor_entries):
        def dot(entries):
            return sum(float(w[i]) * float(v) for i, v in entries)

        def hinge(q, s, is_anomaly):
            if s >= q and is_anomaly:
                return 0.0
            if s < q and not is_anomaly:
                return 0.0
            if s < q and is_anomaly:
                return q - s
            return s - q

        q_moving = dot(anchor_entries)
        total = 0.0
        if anomalies:
            total += (cfg.c_a / len(anomalies)) * sum(
                hinge(q_fixed, dot(z), True) for z in anomalies
            )
            total += (cfg.c_xi / len(anomalies)) * sum(
                hinge(q_moving, dot(z), True) for z in anomalies
            )
        if nominals:
            total += (1.0 / len(nominals)) * sum(
                hinge(q_fixed, dot(z), False) for z in nominals
            )
            total += (cfg.c_xi / len(nominals)) * sum(
                hinge(q_moving, dot(z), False) for z in nominals
            )
        prior = 1.0 / math.sqrt(len(w))
        total += sum((float(wi) - prior) ** 2 for wi in w)
        return total

    for _ in range(100):
        w = rng.normal(size=forest.m)
        w /= np.linalg.norm(w)
        n_anom = int(rng.integers(0, 4))
        n_nom = int(rng.integers(1, 5))
        ids = rng.choice(Z.shape[0], size=n_anom + n_nom, replace=False)
        labeled = LabeledSet()
        for i in ids[:n_anom]:
            labeled.add(int(i), SparseNodeVector.from_csr_row(Z, int(i)), "anomaly")
        for i in ids[n_anom:]:
            labeled.add(int(i), SparseNodeVector.from_csr_row(Z, int(i)), "nominal")
        anchor = compute_quantile_anchor(Z, w, float(rng.uniform(0.02, 0.3)))
        got = objective(w, labeled, anchor, cfg)
        want = evaluate_by_hand(
            w,
            [list(zip(z.indices, z.values)) for z in labeled.anomalies.values()],
            [list(zip(z.indices, z.values)) for z in labeled.nominals.values()],
            anchor.score,
            list(zip(anchor.vector.indices, anchor.vector.values)),
        )
        assert got == pytest.approx(want, rel=1e-12)


@criterion(3, "analytic subgradient matches central differences")
def test_criterion_03_gradient_check():
    ds = make_synthetic_2d(35, 5, seed=5)
    forest = build_forest(ds.X, 16, 2, seed=5)
    Z = feature_matrix(forest, ds.X)
    m = forest.m
    cfg = AadConfig()
    rng = np.random.default_rng(7)
    h = 1e-6
    checked = 0
    while checked < 100:
        w = rng.normal(size=m)
        w /= np.linalg.norm(w)
        ids = rng.choice(Z.shape[0], size=4, replace=False)
        labeled = labeled_set_from(Z, ids[:2], np.ones(Z.shape[0], bool))
        for i in ids[2:]:
            labeled.add(int(i), SparseNodeVector.from_csr_row(Z, int(i)), "nominal")
        anchor = compute_quantile_anchor(Z, w, 0.1)
        # non-kink: every labeled score at least 1e-4 from both thresholds
        svals = [
            z.dot(w)
            for z in list(labeled.anomalies.values()) + list(labeled.nominals.values())
        ]
        q_moving = anchor.vector.dot(w)
        margin = min(
            [abs(s - anchor.score) for s in svals] + [abs(s - q_moving) for s in svals]
        )
        if margin < 1e-4:
            continue
        g = objective_gradient(w, labeled, anchor, cfg)
        for j in range(m):
            wp = w.copy()
            wp[j] += h
            wm = w.copy()
            wm[j] -= h
            fd = (objective(wp, labeled, anchor, cfg) - objective(wm, labeled, anchor, cfg)) / (2 * h)
            # relative error with a unit floor: the objective is piecewise
            # linear plus a quadratic, so any discrepancy beyond float
            # roundoff indicates a wrong gradient term
            assert abs(fd - g[j]) <= 1e-5 * max(1.0, abs(g[j]))
        checked += 1


@criterion(4, "loop invariants over a budget-60 session")
def test_criterion_04_loop_invariants(synth515):
    ds = synth515
    forest = build_forest(ds.X, subsample_size=256, num_trees=100, seed=0)
    cfg = AadConfig(budget=60)
    norms = []
    state = run_feedback_loop(
        forest,
        ds.X,
        ds.oracle(),
        cfg,
        collect_traces=True,
        on_iteration=lambda t, i, label, w: norms.append(float(np.linalg.norm(w))),
    )
    ids = [i for i, _ in state.query_history]
    assert len(ids) == 60
    assert len(set(ids)) == 60, "duplicate queries"
    assert len(norms) == 60
    for norm in norms:
        assert abs(norm - 1.0) <= 1e-9
    assert state.objective_traces is not None
    for trace in state.objective_traces:
        assert all(b <= a for a, b in zip(trace, trace[1:])), "objective increased"
    curve = np.cumsum([label == "anomaly" for _, label in state.query_history])
    assert (np.diff(curve) >= 0).all()
    assert (curve <= np.arange(1, 61)).all()
    assert curve[-1] <= ds.anomaly_count


@criterion(5, "feedback dominates the no-feedback baseline")
def test_criterion_05_feedback_benefit(synth515):
    start = time.monotonic()
    base = run_experiment(
        ExperimentConfig(dataset=synth515, arm=ARM_BASELINE, budget=35, num_runs=10, base_seed=0)
    )
    aad = run_experiment(
        ExperimentConfig(dataset=synth515, arm=ARM_IF_AAD, budget=35, num_runs=10, base_seed=0)
    )
    elapsed = time.monotonic() - start
    delta = aad.mean - base.mean
    assert aad.mean[-1] >= base.mean[-1]
    assert (delta >= 0.0).all(), f"negative delta at iterations {np.flatnonzero(delta < 0) + 1}"
    assert elapsed < 120.0, f"took {elapsed:.1f}s, budget is 120s"


@criterion(6, "feedback never hurts the baseline final count")
def test_criterion_06_never_hurts(curves_b60):
    base = curves_b60[ARM_BASELINE]
    aad = curves_b60[ARM_IF_AAD]
    assert aad.mean[-1] >= base.mean[-1] - 1.0
    # prepared real benchmarks join in whenever their raw files are present
    available = []
    if RAW_DIR:
        raw = Path(RAW_DIR)
        if (raw / "abalone.data").exists():
            available.append(prepare_abalone(raw / "abalone.data"))
        if (raw / "ann-test.data").exists():
            available.append(prepare_ann_thyroid(raw / "ann-test.data"))
    for ds in available:
        b = run_experiment(
            ExperimentConfig(dataset=ds, arm=ARM_BASELINE, budget=60, num_runs=10, base_seed=0)
        )
        a = run_experiment(
            ExperimentConfig(dataset=ds, arm=ARM_IF_AAD, budget=60, num_runs=10, base_seed=0)
        )
        assert a.mean[-1] >= b.mean[-1] - 1.0, f"feedback hurt on {ds.name}"


@criterion(7, "leaf-only weighting completes and beats the baseline")
def test_criterion_07_leaf_ablation(curves_b60):
    base = curves_b60[ARM_BASELINE]
    leaf = curves_b60[ARM_IF_AAD_LEAF]
    assert leaf.budget == 60
    assert leaf.num_runs == 10
    assert (np.diff(leaf.counts, axis=1) >= 0).all()
    assert leaf.mean[-1] >= base.mean[-1]


@criterion(8, "single weight update with 100 labels stays under 60s")
def test_criterion_08_runtime_envelope():
    ds = make_synthetic_2d(2900, 100, seed=2)
    forest = build_forest(ds.X, subsample_size=256, num_trees=100, seed=0)
    Z = feature_matrix(forest, ds.X)
    w = uniform_weights(forest.m)
    top100 = baseline_rank(forest, ds.X)[:100]
    labeled = labeled_set_from(Z, top100, ds.truth)
    assert len(labeled) == 100
    state = FeedbackState(
        weights=w,
        labeled=labeled,
        iteration=100,
        query_history=[(int(i), "anomaly" if ds.truth[i] else "nominal") for i in top100],
    )
    anchor = compute_quantile_anchor(Z, w, 0.03)
    start = time.monotonic()
    w_new = update_weights(state, anchor, AadConfig())
    elapsed = time.monotonic() - start
    assert abs(np.linalg.norm(w_new) - 1.0) <= 1e-9
    assert elapsed <= 60.0, f"update took {elapsed:.1f}s, budget is 60s"


@criterion(9, "benchmark preparation reproduces the published counts")
def test_criterion_09_table_regression(tmp_path):
    # the prep machinery always runs against structurally faithful
    # fixtures; the published-count assertions run on any raw UCI file
    # that is present locally
    import csv as csv_mod

    rng = np.random.default_rng(0)
    fake = tmp_path / "abalone.data"
    with open(fake, "w", newline="") as fh:
        writer = csv_mod.writer(fh)
        for rings, count in [("8", 12), ("9", 10), ("10", 8), ("3", 2), ("21", 1), ("7", 9)]:
            for _ in range(count):
                writer.writerow(
                    [rng.choice(["M", "F", "I"])]
                    + [f"{v:.3f}" for v in rng.uniform(0.05, 1.2, size=7)]
                    + [rings]
                )
    ds = prepare_abalone(fake)
    assert (ds.n, ds.dim, ds.anomaly_count) == (33, 9, 3)

    verified = []
    if RAW_DIR:
        raw = Path(RAW_DIR)
        if (raw / "abalone.data").exists():
            real = prepare_abalone(raw / "abalone.data")
            assert (real.n, real.dim, real.anomaly_count) == (1920, 9, 29)
            verified.append("abalone")
        if (raw / "ann-test.data").exists():
            real = prepare_ann_thyroid(raw / "ann-test.data")
            assert (real.n, real.dim, real.anomaly_count) == (3251, 21, 73)
            verified.append("ann-thyroid-1v3")
    print(
        f"\n  verified against raw UCI files: {', '.join(verified) if verified else 'none present (fixture schema only)'}"
    )


@criterion(10, "identical seeds reproduce bytes, queries, and exports")
def test_criterion_10_determinism(synth515, tmp_path):
    ds = synth515
    blob_a = serialize_forest(build_forest(ds.X, 256, 100, SCHEME_IF, seed=5))
    blob_b = serialize_forest(build_forest(ds.X, 256, 100, SCHEME_IF, seed=5))
    assert blob_a == blob_b

    forest = build_forest(ds.X, 128, 30, seed=5)
    cfg = AadConfig(budget=15)
    run_a = run_feedback_loop(forest, ds.X, ds.oracle(), cfg)
    run_b = run_feedback_loop(forest, ds.X, ds.oracle(), cfg)
    assert run_a.query_history == run_b.query_history
    assert (run_a.weights == run_b.weights).all()

    exp = ExperimentConfig(
        dataset=ds, arm=ARM_IF_AAD, budget=8, num_runs=3, base_seed=2, num_trees=30, subsample_size=128
    )
    out_a = export_results(run_experiment(exp), tmp_path / "a.csv")
    out_b = export_results(run_experiment(exp), tmp_path / "b.csv")
    assert out_a.read_bytes() == out_b.read_bytes()
    assert (tmp_path / "a.csv.queries.csv").read_bytes() == (tmp_path / "b.csv.queries.csv").read_bytes()
