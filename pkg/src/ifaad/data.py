"""Dataset ingestion, ground-truth label mapping, and synthetic benchmarks.

Benchmarks arrive as CSVs whose raw class column is mapped onto two sides,
nominal and anomaly. Canonical prepared files carry a ``label`` column
with those two words directly. No feature normalization is applied
anywhere: the tree splits sample thresholds inside each feature's own
range, so per-feature scale does not change the partitions.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CANONICAL_LABEL_COLUMN = "label"


@dataclass(frozen=True)
class ClassMapping:
    """Which raw class values count as nominal and which as anomaly."""

    nominal_classes: frozenset[str]
    anomaly_classes: frozenset[str]

    def __post_init__(self):
        if not self.nominal_classes or not self.anomaly_classes:
            raise ValueError("both class sets must be non-empty")
        overlap = self.nominal_classes & self.anomaly_classes
        if overlap:
            raise ValueError(f"class sets overlap: {sorted(overlap)}")

    @classmethod
    def of(cls, nominal, anomaly) -> "ClassMapping":
        return cls(frozenset(map(str, nominal)), frozenset(map(str, anomaly)))


CANONICAL_MAPPING = ClassMapping.of(["nominal"], ["anomaly"])


@dataclass(frozen=True)
class CsvSchema:
    label_column: str = CANONICAL_LABEL_COLUMN
    mapping: ClassMapping = CANONICAL_MAPPING
    delimiter: str = ","


@dataclass
class LabeledDataset:
    """A feature matrix with per-row ground truth (True = anomaly)."""

    X: np.ndarray
    truth: np.ndarray
    feature_names: list[str]
    name: str
    provenance: str = ""

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.truth = np.asarray(self.truth, dtype=bool)
        if self.X.ndim != 2:
            raise ValueError(f"expected 2-D features, got shape {self.X.shape}")
        if len(self.truth) != len(self.X):
            raise ValueError(
                f"{len(self.truth)} labels for {len(self.X)} instances"
            )
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length does not match dimensionality")

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def anomaly_count(self) -> int:
        return int(self.truth.sum())

    @property
    def anomaly_fraction(self) -> float:
        return self.anomaly_count / self.n if self.n else 0.0

    def oracle(self):
        """Simulated analyst: answers queries from the ground truth."""
        truth = self.truth

        def respond(instance_id: int) -> str:
            return "anomaly" if truth[instance_id] else "nominal"

        return respond


def load_csv(path, schema: CsvSchema = CsvSchema(), name: str | None = None) -> LabeledDataset:
    """Load a labeled CSV: header row, one label column, numeric features.

    Rows whose class is in neither mapped set are dropped; the drop count
    is logged. Raises on a missing label column, a non-numeric feature
    cell, or an empty result.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty dataset") from None
        header = [h.strip() for h in header]
        if schema.label_column not in header:
            raise ValueError(
                f"missing label column {schema.label_column!r} in {path.name} "
                f"(columns: {header})"
            )
        label_idx = header.index(schema.label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]

        rows: list[list[float]] = []
        truth: list[bool] = []
        dropped = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            raw_class = row[label_idx].strip()
            if raw_class in schema.mapping.anomaly_classes:
                is_anomaly = True
            elif raw_class in schema.mapping.nominal_classes:
                is_anomaly = False
            else:
                dropped += 1
                continue
            feats = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"non-numeric feature cell {cell!r} at {path.name}:{line_no}, "
                        f"column {header[i]!r}"
                    ) from None
            rows.append(feats)
            truth.append(is_anomaly)

    if dropped:
        logger.warning("dropped %d rows of %s with unmapped classes", dropped, path.name)
    if not rows:
        raise ValueError("empty dataset")
    return LabeledDataset(
        X=np.asarray(rows, dtype=np.float64),
        truth=np.asarray(truth, dtype=bool),
        feature_names=feature_names,
        name=name or path.stem,
        provenance=str(path),
    )


def downsample_anomalies(ds: LabeledDataset, target_fraction: float, seed: int) -> LabeledDataset:
    """Keep a uniform random subset of anomalies so their share of the
    result is as close to ``target_fraction`` as integer counts allow.

    Nominal rows are untouched and row order is preserved. Deterministic
    per seed.
    """
    if not 0.0 < target_fraction < 1.0:
        raise ValueError(f"target fraction must be in (0, 1), got {target_fraction}")
    if target_fraction >= ds.anomaly_fraction:
        raise ValueError(
            f"target fraction {target_fraction} is not below the current "
            f"anomaly fraction {ds.anomaly_fraction:.4f}"
        )
    anom_idx = np.flatnonzero(ds.truth)
    n_nominal = ds.n - len(anom_idx)
    # k anomalies against n_nominal nominals gives fraction k / (k + n_nominal)
    keep = max(1, round(target_fraction * n_nominal / (1.0 - target_fraction)))
    rng = np.random.default_rng(seed)
    kept = rng.choice(anom_idx, size=keep, replace=False)
    mask = ~ds.truth
    mask[kept] = True
    return LabeledDataset(
        X=ds.X[mask],
        truth=ds.truth[mask],
        feature_names=list(ds.feature_names),
        name=ds.name,
        provenance=f"{ds.provenance} (anomalies downsampled to {target_fraction:.4g}, seed {seed})",
    )


def synthetic_2d_geometry(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Nominal cluster centers and spreads used by make_synthetic_2d.

    Three clusters of increasing spread; the broad one produces sparse
    fringe points that an unsupervised detector confuses with anomalies.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5.0, 5.0, size=(3, 2))
    sigmas = np.array(
        [rng.uniform(0.35, 0.55), rng.uniform(0.6, 0.9), rng.uniform(1.2, 1.7)]
    )
    return centers, sigmas


def make_synthetic_2d(num_nominal: int, num_anomaly: int, seed: int) -> LabeledDataset:
    """Dense 2-D Gaussian blobs plus small anomaly clumps away from them.

    Nominals come from the three clusters of ``synthetic_2d_geometry``.
    Anomalies sit in a few tight clumps whose members are rejection-sampled
    until they fall outside three standard deviations of every nominal
    cluster center. Deterministic per seed.
    """
    if num_nominal < 1 or num_anomaly < 1:
        raise ValueError("counts must be >= 1")
    rng = np.random.default_rng(seed)
    centers, sigmas = synthetic_2d_geometry(seed)

    assignment = rng.integers(3, size=num_nominal)
    nominal = centers[assignment] + rng.normal(size=(num_nominal, 2)) * sigmas[assignment, None]

    def outside_all(points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        dist = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        return (dist > 3.0 * sigmas[None, :] + margin).all(axis=1)

    n_clumps = min(3, max(1, num_anomaly // 5))
    clump_centers = np.empty((n_clumps, 2))
    got = 0
    while got < n_clumps:
        cand = rng.uniform(-8.5, 8.5, size=(16, 2))
        ok = cand[outside_all(cand, margin=1.0)]
        take = min(len(ok), n_clumps - got)
        clump_centers[got : got + take] = ok[:take]
        got += take

    clump_of = rng.integers(n_clumps, size=num_anomaly)
    anomalies = np.empty((num_anomaly, 2))
    for i in range(num_anomaly):
        while True:
            p = clump_centers[clump_of[i]] + rng.normal(size=2) * 0.3
            if outside_all(p[None, :])[0]:
                anomalies[i] = p
                break

    X = np.vstack([nominal, anomalies])
    truth = np.concatenate([np.zeros(num_nominal, bool), np.ones(num_anomaly, bool)])
    return LabeledDataset(
        X=X,
        truth=truth,
        feature_names=["x0", "x1"],
        name="synthetic-2d",
        provenance=f"generated (nominal={num_nominal}, anomaly={num_anomaly}, seed={seed})",
    )


def write_canonical(ds: LabeledDataset, out_path) -> Path:
    """Write a dataset as a canonical CSV plus a sidecar manifest.

    The CSV has the feature columns followed by a ``label`` column holding
    ``anomaly`` or ``nominal``. The manifest records name, provenance,
    shape, anomaly count, and the sha256 of the CSV bytes.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [CANONICAL_LABEL_COLUMN])
        for row, is_anomaly in zip(ds.X, ds.truth):
            writer.writerow([repr(float(v)) for v in row] + ["anomaly" if is_anomaly else "nominal"])
    digest = hashlib.sha256(out_path.read_bytes()).hexdigest()
    manifest = {
        "name": ds.name,
        "provenance": ds.provenance,
        "total": ds.n,
        "dims": ds.dim,
        "anomaly_count": ds.anomaly_count,
        "anomaly_fraction": ds.anomaly_fraction,
        "feature_names": list(ds.feature_names),
        "sha256": digest,
    }
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return out_path


# --- benchmark preparation -------------------------------------------------
#
# Raw UCI files are not redistributed here; point these helpers at your own
# copies. Each reproduces the published benchmark split exactly: totals,
# dimensionality, and anomaly counts are asserted below in the test suite.

ABALONE_NOMINAL_RINGS = ("8", "9", "10")
ABALONE_ANOMALY_RINGS = ("3", "21")


def prepare_abalone(raw_path) -> LabeledDataset:
    """Prepare the Abalone benchmark from the raw ``abalone.data`` file.

    Rows: ring counts 8, 9, 10 are nominal; 3 and 21 are anomalies; all
    other ring counts are dropped. The sex attribute becomes two indicator
    columns (male, female; infants are zero in both), which together with
    the seven numeric measurements gives the published 9 dimensions.
    Expected result: 1920 instances, 9 dims, 29 anomalies.
    """
    numeric_names = [
        "length",
        "diameter",
        "height",
        "whole_weight",
        "shucked_weight",
        "viscera_weight",
        "shell_weight",
    ]
    rows = []
    truth = []
    with open(raw_path, "r", encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 9:
                raise ValueError(f"abalone row {line_no} has {len(row)} fields, expected 9")
            sex, *numeric, rings = [c.strip() for c in row]
            if rings in ABALONE_ANOMALY_RINGS:
                is_anomaly = True
            elif rings in ABALONE_NOMINAL_RINGS:
                is_anomaly = False
            else:
                continue
            rows.append(
                [1.0 if sex == "M" else 0.0, 1.0 if sex == "F" else 0.0]
                + [float(v) for v in numeric]
            )
            truth.append(is_anomaly)
    if not rows:
        raise ValueError("empty dataset")
    return LabeledDataset(
        X=np.asarray(rows),
        truth=np.asarray(truth, dtype=bool),
        feature_names=["sex_male", "sex_female"] + numeric_names,
        name="abalone",
        provenance=f"{raw_path} (rings {'/'.join(ABALONE_NOMINAL_RINGS)} nominal, "
        f"{'/'.join(ABALONE_ANOMALY_RINGS)} anomaly; sex as M/F indicators)",
    )


def prepare_ann_thyroid(raw_path) -> LabeledDataset:
    """Prepare the ANN-Thyroid-1v3 benchmark from raw ``ann-test.data``.

    The file is whitespace-separated with 21 feature columns and a class
    column; class 3 is nominal, class 1 is the anomaly side, class 2 is
    dropped. Expected result: 3251 instances, 21 dims, 73 anomalies
    (the published counts match the test partition of the UCI release).
    """
    rows = []
    truth = []
    with open(raw_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 22:
                raise ValueError(
                    f"ann-thyroid row {line_no} has {len(parts)} fields, expected 22"
                )
            cls = parts[-1]
            if cls == "1":
                is_anomaly = True
            elif cls == "3":
                is_anomaly = False
            else:
                continue
            rows.append([float(v) for v in parts[:-1]])
            truth.append(is_anomaly)
    if not rows:
        raise ValueError("empty dataset")
    return LabeledDataset(
        X=np.asarray(rows),
        truth=np.asarray(truth, dtype=bool),
        feature_names=[f"attr_{i}" for i in range(21)],
        name="ann-thyroid-1v3",
        provenance=f"{raw_path} (class 3 nominal, class 1 anomaly)",
    )


def prepare_cardiotocography(raw_path, seed: int = 42) -> LabeledDataset:
    """Prepare the Cardiotocography benchmark from a raw CSV export.

    Expects a header row, numeric feature columns, and an ``NSP`` class
    column: 1 (normal) is nominal, 3 (pathological) is the anomaly side,
    2 (suspect) is dropped. The published benchmark carries 22 feature
    columns, so export the spreadsheet's measurement block accordingly.
    Pathological rows are downsampled to 45, about 2.65% of the 1700 kept
    instances; the choice of which 45 survive is seeded.
    """
    schema = CsvSchema(label_column="NSP", mapping=ClassMapping.of(["1"], ["3"]))
    ds = load_csv(raw_path, schema, name="cardiotocography")
    n_nominal = ds.n - ds.anomaly_count
    target = 45 / (n_nominal + 45)
    return downsample_anomalies(ds, target, seed)
