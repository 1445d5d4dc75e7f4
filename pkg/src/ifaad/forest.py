"""Randomized isolation trees as a linear model over tree-node features.

A forest is grown by recursive uniform-random splits: pick a feature at
random, pick a threshold uniformly between the feature's min and max over
the instances at the node, recurse until every instance sits alone in a
leaf. Every node gets a global index and a fixed detector score, and an
instance is represented by a sparse vector that is nonzero exactly at the
nodes it traverses, carrying those scores. Anomaly scores are dot products
of these vectors with a per-node weight vector; under uniform weights the
ranking is identical to ranking by negative average isolation depth, i.e.
the classic isolation-forest ordering.

Two node-score schemes ship:

- ``"if"``: every node scores -1, so a traversal sums to minus the path
  node count.
- ``"if-leaf"``: internal nodes score 0 and a depth-d leaf scores -(d+1),
  so only leaves carry signal but a leaf's magnitude equals the full path
  node count of the ``"if"`` scheme.

A built forest is immutable; traversal and scoring are safe to call from
many threads. Trees consume independent seed-derived RNG streams, so a
parallel builder would produce the same forest as this sequential one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

SCHEME_IF = "if"
SCHEME_IF_LEAF = "if-leaf"
SCHEMES = (SCHEME_IF, SCHEME_IF_LEAF)

FOREST_FORMAT = "ifaad-forest"
FOREST_FORMAT_VERSION = 1


class ForestFormatError(ValueError):
    """Raised when serialized forest data is malformed or unsupported."""


def _as_data_matrix(X, *, allow_empty: bool = False) -> np.ndarray:
    """Coerce input to a finite 2-D float64 matrix, validating invariants."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D data matrix, got shape {X.shape}")
    if X.shape[0] == 0 and not allow_empty:
        raise ValueError("empty dataset")
    if X.shape[1] < 1:
        raise ValueError("instances need at least one feature")
    if not np.isfinite(X).all():
        raise ValueError("non-finite input")
    return X


@dataclass
class Tree:
    """One randomized tree, stored as parallel arrays in preorder.

    Node ``i`` is internal iff ``feature[i] >= 0``; leaves have
    ``feature[i] == -1`` and child slots of -1. ``left``/``right`` are
    preorder positions within this tree. ``train_indices`` holds the
    subsample rows the tree was grown from; it is builder metadata and is
    not part of the wire format (deserialized trees carry ``None``).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    train_count: np.ndarray
    node_score: np.ndarray
    train_indices: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_mask(self) -> np.ndarray:
        return self.feature < 0


@dataclass
class Forest:
    """An ordered set of trees with a global node index space.

    Global node indices are preorder within each tree, trees concatenated
    in build order: node ``i`` of ``trees[k]`` has global index
    ``offsets[k] + i``, and the indices are a bijection onto ``[0, m)``.
    """

    trees: list[Tree]
    offsets: np.ndarray
    m: int
    n_features: int
    subsample_size: int
    scheme: str
    seed: int

    @property
    def num_trees(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class SparseNodeVector:
    """Per-instance node-feature vector, nonzero at traversed nodes.

    ``indices`` are strictly increasing global node indices in ``[0, m)``;
    ``values`` are the node scores of the traversed nodes. Zero-valued
    entries are omitted, so under the leaf-only scheme there is exactly one
    entry per tree.
    """

    indices: np.ndarray
    values: np.ndarray
    m: int

    def dot(self, weights: np.ndarray) -> float:
        """Sparse dot product with a dense length-``m`` weight vector."""
        if len(weights) != self.m:
            raise ValueError(
                f"dimension mismatch: vector has m={self.m}, weights have {len(weights)}"
            )
        return float(np.dot(weights[self.indices], self.values))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @classmethod
    def from_csr_row(cls, Z: sparse.csr_matrix, row: int) -> "SparseNodeVector":
        """Extract one row of a node-feature matrix as a vector."""
        start, end = Z.indptr[row], Z.indptr[row + 1]
        return cls(
            indices=Z.indices[start:end].astype(np.int64),
            values=Z.data[start:end].copy(),
            m=Z.shape[1],
        )


def _grow_tree(X: np.ndarray, sub_idx: np.ndarray, rng: np.random.Generator) -> Tree:
    """Grow one tree over the subsample rows ``sub_idx`` of ``X``.

    Splits recurse until a node holds a single instance. If the sampled
    feature is constant across the node (or the sampled threshold fails to
    separate anything), another feature is drawn, up to one attempt per
    dimension, after which the node becomes a multi-instance leaf. The
    preorder walk uses an explicit stack so degenerate deep trees cannot
    blow the recursion limit.
    """
    n_features = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    depth: list[int] = []
    count: list[int] = []

    # stack entries: (instance rows, depth, parent position, is-left-child)
    stack: list[tuple[np.ndarray, int, int, bool]] = [(sub_idx, 0, -1, False)]
    while stack:
        rows, d, parent, is_left = stack.pop()
        pos = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = pos
            else:
                right[parent] = pos
        depth.append(d)
        count.append(len(rows))

        split = None
        if len(rows) > 1:
            for _ in range(n_features):
                f = int(rng.integers(n_features))
                vals = X[rows, f]
                f_min = vals.min()
                f_max = vals.max()
                if f_min == f_max:
                    continue
                p = float(rng.uniform(f_min, f_max))
                go_left = vals <= p
                if go_left.all():
                    # threshold rounded up to f_max; the split separates nothing
                    continue
                split = (f, p, rows[go_left], rows[~go_left])
                break

        if split is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
        else:
            f, p, rows_left, rows_right = split
            feature.append(f)
            threshold.append(p)
            left.append(-1)
            right.append(-1)
            # push right first so the left subtree is emitted next (preorder)
            stack.append((rows_right, d + 1, pos, False))
            stack.append((rows_left, d + 1, pos, True))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        depth=np.asarray(depth, dtype=np.int32),
        train_count=np.asarray(count, dtype=np.int32),
        node_score=np.zeros(len(feature), dtype=np.float64),
        train_indices=np.asarray(sub_idx, dtype=np.int64),
    )


def _assign_scores(tree: Tree, scheme: str) -> None:
    is_leaf = tree.leaf_mask()
    if scheme == SCHEME_IF:
        tree.node_score[:] = -1.0
    elif scheme == SCHEME_IF_LEAF:
        tree.node_score[:] = 0.0
        tree.node_score[is_leaf] = -(tree.depth[is_leaf] + 1.0)
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")


def build_forest(
    data,
    subsample_size: int = 256,
    num_trees: int = 100,
    scheme: str = SCHEME_IF,
    seed: int = 0,
) -> Forest:
    """Build a forest of randomized isolation trees.

    Args:
        data: (n_instances, n_features) matrix; all values finite.
        subsample_size: instances drawn (without replacement) per tree,
            capped at the dataset size.
        num_trees: trees to grow.
        scheme: node-score scheme, one of ``SCHEMES``.
        seed: non-negative RNG seed; identical inputs and seed produce a
            bit-identical forest.

    Returns:
        An immutable Forest with global preorder node indexing.
    """
    X = _as_data_matrix(data)
    if subsample_size < 1:
        raise ValueError(f"subsample_size must be >= 1, got {subsample_size}")
    if num_trees < 1:
        raise ValueError(f"num_trees must be >= 1, got {num_trees}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown weight scheme {scheme!r}, expected one of {SCHEMES}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")

    n = X.shape[0]
    effective_subsample = min(subsample_size, n)
    streams = np.random.SeedSequence(seed).spawn(num_trees)

    trees: list[Tree] = []
    for s in streams:
        rng = np.random.default_rng(s)
        sub_idx = rng.choice(n, size=effective_subsample, replace=False)
        tree = _grow_tree(X, sub_idx, rng)
        _assign_scores(tree, scheme)
        trees.append(tree)

    sizes = np.array([t.n_nodes for t in trees], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return Forest(
        trees=trees,
        offsets=offsets,
        m=int(sizes.sum()),
        n_features=X.shape[1],
        subsample_size=effective_subsample,
        scheme=scheme,
        seed=seed,
    )


def _check_instance(forest: Forest, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if len(x) != forest.n_features:
        raise ValueError(
            f"dimensionality mismatch: instance has {len(x)} features, "
            f"forest expects {forest.n_features}"
        )
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    return x


def traverse(forest: Forest, x) -> SparseNodeVector:
    """Route one instance through every tree and collect its node vector.

    Routing goes left when the feature value is <= the split threshold.
    Entries appear in global index order (preorder positions only grow
    along a root-to-leaf path). Zero-score nodes are omitted.
    """
    x = _check_instance(forest, x)
    idx_parts: list[int] = []
    val_parts: list[float] = []
    for tree, offset in zip(forest.trees, forest.offsets):
        node = 0
        while True:
            s = tree.node_score[node]
            if s != 0.0:
                idx_parts.append(int(offset) + node)
                val_parts.append(float(s))
            f = tree.feature[node]
            if f < 0:
                break
            node = int(tree.left[node] if x[f] <= tree.threshold[node] else tree.right[node])
    return SparseNodeVector(
        indices=np.asarray(idx_parts, dtype=np.int64),
        values=np.asarray(val_parts, dtype=np.float64),
        m=forest.m,
    )


def feature_matrix(forest: Forest, data) -> sparse.csr_matrix:
    """Traverse every instance at once, producing the (n, m) node matrix.

    Row ``i`` equals ``traverse(forest, data[i])``. Instances are routed
    down each tree in batches, so cost is proportional to the total path
    length rather than to n * m.
    """
    X = _as_data_matrix(data)
    if X.shape[1] != forest.n_features:
        raise ValueError(
            f"dimensionality mismatch: data has {X.shape[1]} features, "
            f"forest expects {forest.n_features}"
        )
    n = X.shape[0]
    rows_parts: list[np.ndarray] = []
    cols_parts: list[np.ndarray] = []
    vals_parts: list[np.ndarray] = []
    for tree, offset in zip(forest.trees, forest.offsets):
        stack: list[tuple[np.ndarray, int]] = [(np.arange(n, dtype=np.int64), 0)]
        while stack:
            rows, node = stack.pop()
            if len(rows) == 0:
                continue
            s = tree.node_score[node]
            if s != 0.0:
                rows_parts.append(rows)
                cols_parts.append(np.full(len(rows), offset + node, dtype=np.int64))
                vals_parts.append(np.full(len(rows), s, dtype=np.float64))
            f = tree.feature[node]
            if f >= 0:
                go_left = X[rows, f] <= tree.threshold[node]
                stack.append((rows[go_left], int(tree.left[node])))
                stack.append((rows[~go_left], int(tree.right[node])))
    if rows_parts:
        coo = sparse.coo_matrix(
            (np.concatenate(vals_parts), (np.concatenate(rows_parts), np.concatenate(cols_parts))),
            shape=(n, forest.m),
        )
    else:
        coo = sparse.coo_matrix((n, forest.m))
    Z = coo.tocsr()
    Z.sort_indices()
    return Z


def score(z: SparseNodeVector, weights: np.ndarray) -> float:
    """Anomaly score of one instance: the sparse dot product z . w.

    Higher means more anomalous.
    """
    return z.dot(np.asarray(weights, dtype=np.float64))


def score_all(Z: sparse.csr_matrix, weights: np.ndarray) -> np.ndarray:
    """Anomaly scores for every row of a node-feature matrix."""
    weights = np.asarray(weights, dtype=np.float64)
    if Z.shape[1] != len(weights):
        raise ValueError(
            f"dimension mismatch: matrix has m={Z.shape[1]}, weights have {len(weights)}"
        )
    return Z @ weights


def uniform_weights(m: int) -> np.ndarray:
    """The detector's native weighting: every node at 1/sqrt(m), unit norm."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return np.full(m, 1.0 / math.sqrt(m))


def rank_descending(scores: np.ndarray) -> np.ndarray:
    """Instance ids ordered by descending score, ties broken by ascending id."""
    n = len(scores)
    return np.lexsort((np.arange(n), -scores))


def baseline_rank(forest: Forest, data) -> np.ndarray:
    """Rank instances by the uniform-weight score, most anomalous first.

    Under the ``"if"`` scheme this is exactly the isolation-forest
    baseline ordering (shortest average path first). Deterministic:
    equal scores break by ascending instance id.
    """
    Z = feature_matrix(forest, data)
    return rank_descending(score_all(Z, uniform_weights(forest.m)))


def serialize_forest(forest: Forest) -> bytes:
    """Encode a forest as versioned, canonical JSON bytes.

    The encoding is deterministic (sorted keys, no whitespace) and floats
    round-trip exactly, so two builds from the same seed serialize to
    identical bytes.
    """
    trees_doc = []
    for tree, offset in zip(forest.trees, forest.offsets):
        n = tree.n_nodes
        trees_doc.append(
            {
                "global_index": [int(offset) + i for i in range(n)],
                "kind": ["leaf" if f < 0 else "internal" for f in tree.feature],
                "split_feature": tree.feature.tolist(),
                "split_threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "depth": tree.depth.tolist(),
                "train_count": tree.train_count.tolist(),
                "node_score": tree.node_score.tolist(),
            }
        )
    doc = {
        "format": FOREST_FORMAT,
        "version": FOREST_FORMAT_VERSION,
        "scheme": forest.scheme,
        "seed": forest.seed,
        "subsample_size": forest.subsample_size,
        "num_trees": forest.num_trees,
        "n_features": forest.n_features,
        "m": forest.m,
        "trees": trees_doc,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def deserialize_forest(data: bytes) -> Forest:
    """Decode bytes produced by serialize_forest, validating the format.

    Raises ForestFormatError on truncated or malformed input, on an
    unrecognized format tag, or on a version this build cannot read.
    """
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ForestFormatError(f"malformed forest data: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != FOREST_FORMAT:
        raise ForestFormatError("not a forest document (missing format tag)")
    if doc.get("version") != FOREST_FORMAT_VERSION:
        raise ForestFormatError(
            f"unsupported forest format version {doc.get('version')!r}, "
            f"expected {FOREST_FORMAT_VERSION}"
        )
    try:
        trees = []
        offsets = []
        next_index = 0
        for tdoc in doc["trees"]:
            gidx = tdoc["global_index"]
            n = len(gidx)
            if gidx != list(range(next_index, next_index + n)):
                raise ForestFormatError("global node indices are not contiguous preorder")
            offsets.append(next_index)
            next_index += n
            tree = Tree(
                feature=np.asarray(tdoc["split_feature"], dtype=np.int32),
                threshold=np.asarray(tdoc["split_threshold"], dtype=np.float64),
                left=np.asarray(tdoc["left"], dtype=np.int32),
                right=np.asarray(tdoc["right"], dtype=np.int32),
                depth=np.asarray(tdoc["depth"], dtype=np.int32),
                train_count=np.asarray(tdoc["train_count"], dtype=np.int32),
                node_score=np.asarray(tdoc["node_score"], dtype=np.float64),
                train_indices=None,
            )
            if not (
                len(tree.threshold) == n
                and len(tree.left) == n
                and len(tree.right) == n
                and len(tree.depth) == n
                and len(tree.train_count) == n
                and len(tree.node_score) == n
                and len(tdoc["kind"]) == n
            ):
                raise ForestFormatError("inconsistent node array lengths")
            trees.append(tree)
        if next_index != doc["m"]:
            raise ForestFormatError(
                f"node count mismatch: header says m={doc['m']}, trees hold {next_index}"
            )
        forest = Forest(
            trees=trees,
            offsets=np.asarray(offsets, dtype=np.int64),
            m=int(doc["m"]),
            n_features=int(doc["n_features"]),
            subsample_size=int(doc["subsample_size"]),
            scheme=str(doc["scheme"]),
            seed=int(doc["seed"]),
        )
    except ForestFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ForestFormatError(f"malformed forest document: {e}") from e
    if forest.scheme not in SCHEMES:
        raise ForestFormatError(f"unknown weight scheme {forest.scheme!r}")
    return forest
