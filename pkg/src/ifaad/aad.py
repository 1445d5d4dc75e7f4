"""Learning node weights from analyst labels.

The detector is a linear model over forest-node features, so feedback
becomes a convex-ish ranking problem: labeled anomalies should score above
the score of the top-tau-quantile instance, labeled nominals below it, and
the weights should stay close to the uniform prior that reproduces the
unsupervised detector. Both requirements are hinge losses; the optimizer
is plain subgradient descent with a halving line search, renormalizing the
weights to unit length after every feedback round.

The query loop alternates: rank everything with the current weights, show
the analyst the top unlabeled instance, fold in the answer, re-learn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .forest import Forest, SparseNodeVector, feature_matrix, score_all, uniform_weights

ANOMALY = "anomaly"
NOMINAL = "nominal"
LABELS = (ANOMALY, NOMINAL)

SESSION_FORMAT = "ifaad-session"
SESSION_FORMAT_VERSION = 1


class SessionFormatError(ValueError):
    """Raised when a session file is malformed or unsupported."""


@dataclass
class AadConfig:
    """Hyperparameters of the feedback loop.

    ``c_a`` up-weights labeled-anomaly hinge terms relative to nominals;
    ``c_xi`` weights the soft terms anchored at the moving quantile score.
    The optimizer settings (``learning_rate``, ``max_steps``,
    ``convergence_tol``) control the inner descent of each round.
    """

    tau: float = 0.03
    c_a: float = 100.0
    c_xi: float = 0.001
    learning_rate: float = 0.01
    max_steps: int = 1000
    convergence_tol: float = 1e-6
    budget: int = 60

    def validate(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.c_a < 1.0:
            raise ValueError(f"c_a must be >= 1, got {self.c_a}")
        if self.c_xi < 0.0:
            raise ValueError(f"c_xi must be >= 0, got {self.c_xi}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.convergence_tol <= 0.0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "c_a": self.c_a,
            "c_xi": self.c_xi,
            "learning_rate": self.learning_rate,
            "max_steps": self.max_steps,
            "convergence_tol": self.convergence_tol,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AadConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class LabeledSet:
    """Analyst-labeled instances, keyed by instance id, with disjoint sides."""

    anomalies: dict[int, SparseNodeVector] = field(default_factory=dict)
    nominals: dict[int, SparseNodeVector] = field(default_factory=dict)

    def add(self, instance_id: int, z: SparseNodeVector, label: str) -> None:
        if label not in LABELS:
            raise ValueError(f"invalid label {label!r}, expected one of {LABELS}")
        if instance_id in self.anomalies or instance_id in self.nominals:
            raise ValueError(f"instance {instance_id} already labeled")
        if label == ANOMALY:
            self.anomalies[instance_id] = z
        else:
            self.nominals[instance_id] = z

    def ids(self) -> set[int]:
        return set(self.anomalies) | set(self.nominals)

    def __len__(self) -> int:
        return len(self.anomalies) + len(self.nominals)


@dataclass(frozen=True)
class QuantileAnchor:
    """The instance at descending-score rank ceil(tau * n) under the
    previous round's weights, together with that score."""

    tau: float
    instance_id: int
    vector: SparseNodeVector
    score: float


@dataclass
class FeedbackState:
    """Everything the loop accumulates: weights, labels, query history.

    ``objective_traces``, when collected, holds one list per feedback
    round with the objective value after each accepted descent step.
    """

    weights: np.ndarray
    labeled: LabeledSet
    iteration: int
    query_history: list[tuple[int, str]]
    objective_traces: list[list[float]] | None = None

    def anomalies_found(self) -> int:
        return len(self.labeled.anomalies)


def hinge_loss(q: float, weights: np.ndarray, z: SparseNodeVector, label: str) -> float:
    """One-sided ranking loss around the threshold ``q``.

    A labeled anomaly pays ``q - w.z`` when it scores below ``q``; a
    labeled nominal pays ``w.z - q`` when it scores at or above ``q``;
    otherwise the loss is zero. Always >= 0 and continuous at ``w.z == q``.
    """
    if not math.isfinite(q):
        raise ValueError(f"threshold must be finite, got {q}")
    s = z.dot(np.asarray(weights, dtype=np.float64))
    if label == ANOMALY:
        return max(0.0, q - s)
    if label == NOMINAL:
        return max(0.0, s - q)
    raise ValueError(f"invalid label {label!r}, expected one of {LABELS}")


def _stack_vectors(vectors: list[SparseNodeVector], m: int) -> sparse.csr_matrix:
    if not vectors:
        return sparse.csr_matrix((0, m))
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([v.nnz for v in vectors])
    indices = np.concatenate([v.indices for v in vectors])
    data = np.concatenate([v.values for v in vectors])
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), m))


@dataclass
class _Prepared:
    """Labeled data in matrix form, fixed for one optimization round."""

    za: sparse.csr_matrix
    zn: sparse.csr_matrix
    anchor_score: float
    anchor_dense: np.ndarray
    w_prior: np.ndarray
    c_a: float
    c_xi: float


def _prepare(labeled: LabeledSet, anchor: QuantileAnchor, m: int, cfg: AadConfig) -> _Prepared:
    if len(labeled) == 0:
        raise ValueError("no feedback yet")
    anchor_dense = np.zeros(m)
    anchor_dense[anchor.vector.indices] = anchor.vector.values
    return _Prepared(
        za=_stack_vectors(list(labeled.anomalies.values()), m),
        zn=_stack_vectors(list(labeled.nominals.values()), m),
        anchor_score=anchor.score,
        anchor_dense=anchor_dense,
        w_prior=uniform_weights(m),
        c_a=cfg.c_a,
        c_xi=cfg.c_xi,
    )


def _objective_prepared(w: np.ndarray, prep: _Prepared) -> float:
    na = prep.za.shape[0]
    nn = prep.zn.shape[0]
    q = prep.anchor_score
    q_moving = float(prep.anchor_dense @ w)
    total = 0.0
    if na:
        sa = prep.za @ w
        total += prep.c_a * np.maximum(0.0, q - sa).mean()
        total += prep.c_xi * np.maximum(0.0, q_moving - sa).mean()
    if nn:
        sn = prep.zn @ w
        total += np.maximum(0.0, sn - q).mean()
        total += prep.c_xi * np.maximum(0.0, sn - q_moving).mean()
    diff = w - prep.w_prior
    total += float(diff @ diff)
    return float(total)


def _gradient_prepared(w: np.ndarray, prep: _Prepared) -> np.ndarray:
    na = prep.za.shape[0]
    nn = prep.zn.shape[0]
    q = prep.anchor_score
    q_moving = float(prep.anchor_dense @ w)
    g = 2.0 * (w - prep.w_prior)
    # at a kink (score exactly at the threshold) the loss is zero and the
    # zero-side subgradient is used, hence the strict inequalities
    if na:
        sa = prep.za @ w
        active = (sa < q).astype(np.float64)
        if active.any():
            g -= (prep.c_a / na) * (prep.za.T @ active)
        active_soft = (sa < q_moving).astype(np.float64)
        k = active_soft.sum()
        if k:
            g += (prep.c_xi / na) * (k * prep.anchor_dense - prep.za.T @ active_soft)
    if nn:
        sn = prep.zn @ w
        active = (sn > q).astype(np.float64)
        if active.any():
            g += (1.0 / nn) * (prep.zn.T @ active)
        active_soft = (sn > q_moving).astype(np.float64)
        k = active_soft.sum()
        if k:
            g += (prep.c_xi / nn) * (prep.zn.T @ active_soft - k * prep.anchor_dense)
    return g


def objective(
    w: np.ndarray, labeled: LabeledSet, anchor: QuantileAnchor, cfg: AadConfig
) -> float:
    """Value of the feedback objective at ``w``.

    Five terms: anomaly hinges around the fixed anchor score (weighted
    ``c_a``, averaged over labeled anomalies), nominal hinges around the
    same score (averaged over labeled nominals), the same two hinge sums
    around the moving threshold ``anchor.vector . w`` (weighted ``c_xi``),
    and the squared distance to the uniform prior. Terms over an empty
    labeled side contribute zero.
    """
    w = np.asarray(w, dtype=np.float64)
    return _objective_prepared(w, _prepare(labeled, anchor, len(w), cfg))


def objective_gradient(
    w: np.ndarray, labeled: LabeledSet, anchor: QuantileAnchor, cfg: AadConfig
) -> np.ndarray:
    """Subgradient of the feedback objective at ``w``.

    Active hinges contribute their (scaled) node vectors; the moving
    threshold ``anchor.vector . w`` is differentiated through, so those
    terms contribute the difference between the anchor vector and the
    instance vector. At kinks the zero-side subgradient is chosen.
    """
    w = np.asarray(w, dtype=np.float64)
    return _gradient_prepared(w, _prepare(labeled, anchor, len(w), cfg))


def update_weights(
    state: FeedbackState,
    anchor: QuantileAnchor,
    cfg: AadConfig,
    objective_trace: list[float] | None = None,
) -> np.ndarray:
    """Descend the objective from the current weights and renormalize.

    Runs subgradient descent with backtracking step halving: a step is
    accepted only if it does not increase the objective, so the objective
    sequence over accepted steps is non-increasing. Stops at
    ``cfg.max_steps``, on relative objective change below
    ``cfg.convergence_tol``, or when no step length makes progress. The
    result has unit L2 norm.

    If ``objective_trace`` is a list, the objective value at the start and
    after every accepted step is appended to it.
    """
    cfg.validate()
    w = np.asarray(state.weights, dtype=np.float64).copy()
    prep = _prepare(state.labeled, anchor, len(w), cfg)

    f = _objective_prepared(w, prep)
    if not math.isfinite(f):
        raise ArithmeticError(
            f"non-finite objective at start of weight update (|w|={np.linalg.norm(w):.3g})"
        )
    if objective_trace is not None:
        objective_trace.append(f)

    for step_index in range(cfg.max_steps):
        g = _gradient_prepared(w, prep)
        if not np.isfinite(g).all():
            raise ArithmeticError(
                f"non-finite gradient during weight update "
                f"(step {step_index}, |w|={np.linalg.norm(w):.3g})"
            )
        if not g.any():
            break
        step = cfg.learning_rate
        w_new = None
        f_new = f
        while step > 1e-14:
            cand = w - step * g
            f_cand = _objective_prepared(cand, prep)
            if not math.isfinite(f_cand):
                raise ArithmeticError(
                    f"non-finite objective during weight update "
                    f"(step {step_index}, step size {step:.3g})"
                )
            if f_cand <= f:
                w_new, f_new = cand, f_cand
                break
            step *= 0.5
        if w_new is None:
            break
        w = w_new
        if objective_trace is not None:
            objective_trace.append(f_new)
        rel_change = abs(f - f_new) / max(abs(f), 1e-12)
        f = f_new
        if rel_change < cfg.convergence_tol:
            break

    norm = float(np.linalg.norm(w))
    if norm <= 0.0 or not math.isfinite(norm):
        raise ArithmeticError(f"degenerate weight norm {norm} after descent")
    return w / norm


def _quantile_rank(tau: float, n: int) -> int:
    # round before ceil so that e.g. tau=0.03, n=100 lands on rank 3
    # despite 0.03 * 100 being slightly above 3 in binary floating point
    return max(1, math.ceil(round(tau * n, 9)))


def compute_quantile_anchor(
    Z: sparse.csr_matrix,
    w: np.ndarray,
    tau: float,
    scores: np.ndarray | None = None,
) -> QuantileAnchor:
    """Pick the instance at descending-score rank max(1, ceil(tau * n)).

    Ties break by ascending instance id. ``scores`` may carry precomputed
    ``Z @ w`` to avoid a second pass.
    """
    n = Z.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    if scores is None:
        scores = score_all(Z, w)
    order = np.lexsort((np.arange(n), -scores))
    idx = int(order[_quantile_rank(tau, n) - 1])
    return QuantileAnchor(
        tau=tau,
        instance_id=idx,
        vector=SparseNodeVector.from_csr_row(Z, idx),
        score=float(scores[idx]),
    )


def next_query(
    Z: sparse.csr_matrix,
    w: np.ndarray,
    already_labeled: set[int],
    scores: np.ndarray | None = None,
) -> int:
    """Id of the highest-scoring unlabeled instance, ties to the lowest id."""
    n = Z.shape[0]
    if scores is None:
        scores = score_all(Z, w)
    unlabeled = np.setdiff1d(np.arange(n), np.fromiter(already_labeled, dtype=np.int64, count=len(already_labeled)))
    if len(unlabeled) == 0:
        raise ValueError("budget exhausted: every instance is already labeled")
    cand = scores[unlabeled]
    return int(unlabeled[cand == cand.max()].min())


def run_feedback_loop(
    forest: Forest,
    data,
    labels_oracle,
    cfg: AadConfig,
    Z: sparse.csr_matrix | None = None,
    collect_traces: bool = False,
    on_iteration=None,
) -> FeedbackState:
    """Drive the full query-label-relearn loop for ``cfg.budget`` rounds.

    Each round ranks with the previous round's weights, queries the top
    unlabeled instance, asks ``labels_oracle(instance_id)`` for
    ``"anomaly"`` or ``"nominal"``, and updates the weights with the
    quantile anchor taken from the pre-update ranking. Deterministic given
    the forest and the oracle.

    ``on_iteration(t, instance_id, label, weights)``, when given, is called
    after each round with the freshly normalized weights.
    """
    cfg.validate()
    if Z is None:
        Z = feature_matrix(forest, data)
    n = Z.shape[0]
    if cfg.budget > n:
        raise ValueError(f"budget {cfg.budget} exceeds dataset size {n}")

    w = uniform_weights(forest.m)
    labeled = LabeledSet()
    history: list[tuple[int, str]] = []
    traces: list[list[float]] | None = [] if collect_traces else None

    for t in range(1, cfg.budget + 1):
        scores = score_all(Z, w)
        anchor = compute_quantile_anchor(Z, w, cfg.tau, scores=scores)
        qid = next_query(Z, w, labeled.ids(), scores=scores)
        label = labels_oracle(qid)
        if label not in LABELS:
            raise ValueError(
                f"oracle returned invalid label {label!r} for instance {qid}"
            )
        labeled.add(qid, SparseNodeVector.from_csr_row(Z, qid), label)
        history.append((qid, label))
        trace: list[float] | None = [] if collect_traces else None
        state = FeedbackState(weights=w, labeled=labeled, iteration=t, query_history=history)
        w = update_weights(state, anchor, cfg, objective_trace=trace)
        if traces is not None:
            traces.append(trace)
        if on_iteration is not None:
            on_iteration(t, qid, label, w)

    return FeedbackState(
        weights=w,
        labeled=labeled,
        iteration=len(history),
        query_history=history,
        objective_traces=traces,
    )


def session_to_dict(
    state: FeedbackState,
    cfg: AadConfig,
    seed: int,
    dataset_ref: str,
    forest_params: dict | None = None,
) -> dict:
    """Snapshot a session as a JSON-ready dict (weights at full precision)."""
    doc = {
        "format": SESSION_FORMAT,
        "version": SESSION_FORMAT_VERSION,
        "dataset": dataset_ref,
        "seed": seed,
        "config": cfg.to_dict(),
        "iteration": state.iteration,
        "query_history": [[int(i), label] for i, label in state.query_history],
        "weights": [float(v) for v in state.weights],
    }
    if forest_params is not None:
        doc["forest"] = forest_params
    return doc


@dataclass
class SessionSnapshot:
    """A parsed session file: enough to resume the loop deterministically."""

    dataset_ref: str
    seed: int
    config: AadConfig
    iteration: int
    query_history: list[tuple[int, str]]
    weights: np.ndarray
    forest_params: dict | None = None


def session_from_dict(doc: dict) -> SessionSnapshot:
    if not isinstance(doc, dict) or doc.get("format") != SESSION_FORMAT:
        raise SessionFormatError("not a session document (missing format tag)")
    if doc.get("version") != SESSION_FORMAT_VERSION:
        raise SessionFormatError(
            f"unsupported session format version {doc.get('version')!r}"
        )
    try:
        history = [(int(i), str(label)) for i, label in doc["query_history"]]
        for _, label in history:
            if label not in LABELS:
                raise SessionFormatError(f"invalid label {label!r} in query history")
        snapshot = SessionSnapshot(
            dataset_ref=str(doc["dataset"]),
            seed=int(doc["seed"]),
            config=AadConfig.from_dict(doc["config"]),
            iteration=int(doc["iteration"]),
            query_history=history,
            weights=np.asarray(doc["weights"], dtype=np.float64),
            forest_params=doc.get("forest"),
        )
    except SessionFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise SessionFormatError(f"malformed session document: {e}") from e
    if snapshot.iteration != len(snapshot.query_history):
        raise SessionFormatError("iteration does not match query history length")
    return snapshot


def save_session(
    path,
    state: FeedbackState,
    cfg: AadConfig,
    seed: int,
    dataset_ref: str,
    forest_params: dict | None = None,
) -> None:
    doc = session_to_dict(state, cfg, seed, dataset_ref, forest_params)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_session(path) -> SessionSnapshot:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise SessionFormatError(f"malformed session file: {e}") from e
    return session_from_dict(doc)


def rebuild_state(snapshot: SessionSnapshot, Z: sparse.csr_matrix) -> FeedbackState:
    """Reconstruct a FeedbackState from a snapshot and the node matrix."""
    labeled = LabeledSet()
    for instance_id, label in snapshot.query_history:
        labeled.add(instance_id, SparseNodeVector.from_csr_row(Z, instance_id), label)
    return FeedbackState(
        weights=snapshot.weights.copy(),
        labeled=labeled,
        iteration=snapshot.iteration,
        query_history=list(snapshot.query_history),
    )
