"""Domain containers, CSV ingestion, clustering-based multi-domain
construction, synthetic Gaussian tasks, and target splitting."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .predicates import DegenerateSourceWarning

KMEANS_SHIFT_TOL = 1e-8
KMEANS_MAX_ITER = 300


class CsvFormatError(ValueError):
    """A CSV file violates the expected tabular schema."""


@dataclass
class DomainDataset:
    """One domain: an n x d feature matrix with optional binary labels."""

    name: str
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a nonempty 2-D matrix for {self.name!r}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"non-finite features in {self.name!r}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[0],):
                raise ValueError(f"label count mismatch in {self.name!r}")
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise ValueError(f"labels must be 0/1 in {self.name!r}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray, name_suffix: str = "#sel") -> "DomainDataset":
        labels = None if self.labels is None else self.labels[indices]
        return DomainDataset(
            name=self.name + name_suffix,
            features=self.features[indices],
            labels=labels,
        )


@dataclass
class TransferTask:
    """N labeled sources plus labeled target train and held-out test sets."""

    sources: list[DomainDataset]
    target_train: DomainDataset
    target_test: DomainDataset

    def __post_init__(self):
        d = self.target_train.d
        members = list(self.sources) + [self.target_train, self.target_test]
        for m in members:
            if m.d != d:
                raise ValueError(f"domain {m.name!r} has d={m.d}, expected {d}")
        if self.target_train.n < 2:
            raise ValueError("target training set needs q >= 2")
        if self.target_train.labels is None or np.unique(
            self.target_train.labels
        ).size < 2:
            raise ValueError("target training set must contain both classes")


@dataclass(frozen=True)
class CsvSchema:
    """Column selection for load_csv_dataset.

    feature_columns left as None means every non-label column.  With no
    label_map, the two distinct label tokens are ordered (numerically
    when possible) and mapped to 0 and 1.
    """

    label_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    label_map: dict | None = None


def load_csv_dataset(path, schema: CsvSchema, name: str | None = None) -> DomainDataset:
    """Parse one UTF-8, comma-separated, headered CSV into a domain.

    Rejects missing cells and non-numeric features naming the offending
    row and column, and label columns with more than two distinct values.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, header row required")
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]

    if schema.label_column is not None and schema.label_column not in header:
        raise CsvFormatError(f"{path}: label column {schema.label_column!r} not found")
    if schema.feature_columns is not None:
        missing = [c for c in schema.feature_columns if c not in header]
        if missing:
            raise CsvFormatError(f"{path}: feature columns not found: {missing}")
        feature_names = list(schema.feature_columns)
    else:
        feature_names = [c for c in header if c != schema.label_column]
    if not feature_names:
        raise CsvFormatError(f"{path}: no feature columns selected")

    col_index = {c: header.index(c) for c in header}
    features = np.empty((len(rows), len(feature_names)))
    label_tokens: list[str] = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}"
            )
        for j, cname in enumerate(feature_names):
            cell = row[col_index[cname]].strip()
            if not cell:
                raise CsvFormatError(f"{path}: empty cell at row {r + 2}, column {cname!r}")
            try:
                features[r, j] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: non-numeric value {cell!r} at row {r + 2}, column {cname!r}"
                )
        if schema.label_column is not None:
            cell = row[col_index[schema.label_column]].strip()
            if not cell:
                raise CsvFormatError(
                    f"{path}: empty cell at row {r + 2}, column {schema.label_column!r}"
                )
            label_tokens.append(cell)

    if len(rows) == 0:
        raise CsvFormatError(f"{path}: no data rows")
    labels = None
    if schema.label_column is not None:
        labels = _coerce_labels(label_tokens, schema.label_map, path)
    return DomainDataset(name=name or path.stem, features=features, labels=labels)


def _coerce_labels(tokens: list[str], label_map: dict | None, path) -> np.ndarray:
    distinct = sorted(set(tokens))
    if label_map is not None:
        unknown = [t for t in distinct if t not in label_map]
        if unknown:
            raise CsvFormatError(f"{path}: label values not in label_map: {unknown}")
        return np.array([label_map[t] for t in tokens], dtype=np.int64)
    if len(distinct) > 2:
        raise CsvFormatError(
            f"{path}: label column must be binary, found values {distinct}"
        )
    if len(distinct) == 1:
        try:
            value = float(distinct[0])
        except ValueError:
            value = None
        if value not in (0.0, 1.0):
            raise CsvFormatError(
                f"{path}: cannot map single label value {distinct[0]!r} to 0/1"
            )
        return np.full(len(tokens), int(value), dtype=np.int64)
    try:
        ordered = sorted(distinct, key=float)
    except ValueError:
        ordered = distinct
    mapping = {ordered[0]: 0, ordered[1]: 1}
    return np.array([mapping[t] for t in tokens], dtype=np.int64)


def kmeans_cluster(
    data: DomainDataset, feature_subset: list[int], k: int, seed: int
) -> np.ndarray:
    """Lloyd iterations on the selected columns with plus-plus seeding.

    Deterministic for a fixed seed; stops when the largest centroid shift
    drops below KMEANS_SHIFT_TOL or after KMEANS_MAX_ITER rounds.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > data.n:
        raise ValueError(f"k={k} exceeds sample count {data.n}")
    for idx in feature_subset:
        if not 0 <= idx < data.d:
            raise ValueError(f"feature index {idx} out of range for d={data.d}")
    points = data.features[:, list(feature_subset)]
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    centroids = _kmeanspp_init(points, k, rng)
    assignment = np.zeros(data.n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        dists = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
        assignment = np.argmin(dists, axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = points[assignment == j]
            if members.size:
                new_centroids[j] = members.mean(axis=0)
            else:
                new_centroids[j] = points[rng.integers(0, len(points))]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < KMEANS_SHIFT_TOL:
            break
    dists = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
    return np.argmin(dists, axis=1)


def _kmeanspp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(points)
    first = int(rng.integers(0, n))
    centroids = [points[first]]
    closest = np.linalg.norm(points - centroids[0], axis=1) ** 2
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            pick = int(rng.integers(0, n))
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids.append(points[pick])
        closest = np.minimum(
            closest, np.linalg.norm(points - centroids[-1], axis=1) ** 2
        )
    return np.asarray(centroids)


def make_transfer_task(
    data: DomainDataset,
    assignment: np.ndarray,
    target_cluster: int | None = None,
) -> tuple[list[DomainDataset], DomainDataset]:
    """Split one labeled dataset into source domains and a target domain.

    Clusters are ordered by descending size; by default the smallest
    becomes the target, and an explicit target_cluster id overrides
    this.  Single-class source clusters stay in, with a warning; a
    single-class target is an error.  Returns (sources, target), the
    precursor to a TransferTask (split the target separately).
    """
    assignment = np.asarray(assignment)
    if assignment.shape != (data.n,):
        raise ValueError("assignment length must match the dataset")
    if data.labels is None:
        raise ValueError("multi-domain construction needs labels")
    ids, sizes = np.unique(assignment, return_counts=True)
    if ids.size < 2:
        raise ValueError("need at least 2 clusters to form sources and a target")
    order = ids[np.lexsort((ids, -sizes))]
    if target_cluster is None:
        target_id = order[-1]
    else:
        if target_cluster not in ids:
            raise ValueError(f"target cluster {target_cluster} not present")
        target_id = target_cluster

    target = data.take(np.flatnonzero(assignment == target_id), name_suffix="")
    target.name = f"{data.name}/T"
    if np.unique(target.labels).size < 2:
        raise ValueError("target cluster contains a single class")

    sources = []
    rank = 1
    for cid in order:
        if cid == target_id:
            continue
        src = data.take(np.flatnonzero(assignment == cid), name_suffix="")
        src.name = f"{data.name}/S{rank}"
        if np.unique(src.labels).size < 2:
            warnings.warn(
                f"source cluster {cid} of {data.name!r} has a single class",
                DegenerateSourceWarning,
            )
        sources.append(src)
        rank += 1
    return sources, target


@dataclass(frozen=True)
class SyntheticSpec:
    """Family of rotated two-Gaussian domains in the plane.

    Each domain places its two class means a fixed offset apart, rotates
    the pair about the domain center by its angle, and scales the
    isotropic class spread by its compactness factor (sample covariance
    grows with compactness squared).
    """

    n_domains: int
    rotation_angles: tuple[float, ...]
    centers: tuple[tuple[float, float], ...]
    compactness: tuple[float, ...]
    n_per_domain: int = 200
    seed: int = 0
    class_offset: float = 2.0
    base_std: float = 0.6

    def __post_init__(self):
        if self.n_domains < 1:
            raise ValueError("n_domains must be >= 1")
        for group, label in (
            (self.rotation_angles, "rotation_angles"),
            (self.centers, "centers"),
            (self.compactness, "compactness"),
        ):
            if len(group) != self.n_domains:
                raise ValueError(f"{label} must list one value per domain")
        if any(not c > 0 for c in self.compactness):
            raise ValueError("compactness values must be positive")


def gen_synthetic_domains(spec: SyntheticSpec) -> list[DomainDataset]:
    """Generate the labeled 2-D Gaussian domains described by spec."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    domains = []
    half = np.array([spec.class_offset / 2.0, 0.0])
    for m in range(spec.n_domains):
        angle = spec.rotation_angles[m]
        center = np.asarray(spec.centers[m], dtype=np.float64)
        scale = spec.compactness[m] * spec.base_std
        rot = np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        )
        mean0 = center - rot @ half
        mean1 = center + rot @ half
        n0 = spec.n_per_domain // 2
        n1 = spec.n_per_domain - n0
        x0 = mean0 + scale * rng.standard_normal((n0, 2))
        x1 = mean1 + scale * rng.standard_normal((n1, 2))
        features = np.vstack([x0, x1])
        labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
        domains.append(
            DomainDataset(name=f"synthetic_{m:02d}", features=features, labels=labels)
        )
    return domains


def twelve_domain_spec(
    n_per_domain: int = 200,
    seed: int = 0,
    class_offset: float = 2.0,
    base_std: float = 0.6,
) -> SyntheticSpec:
    """Canonical 12-domain grid: 4 rotation angles x 3 center positions."""
    angles = (0.0, math.pi / 6, math.pi / 3, math.pi / 2)
    centers = ((0.0, 0.0), (2.0, 1.0), (-1.5, 2.0))
    grid_angles = []
    grid_centers = []
    grid_compact = []
    for a in angles:
        for c in centers:
            grid_angles.append(a)
            grid_centers.append(c)
            grid_compact.append(1.0)
    return SyntheticSpec(
        n_domains=12,
        rotation_angles=tuple(grid_angles),
        centers=tuple(grid_centers),
        compactness=tuple(grid_compact),
        n_per_domain=n_per_domain,
        seed=seed,
        class_offset=class_offset,
        base_std=base_std,
    )


def split_labeled_target(
    target: DomainDataset, fraction: float, seed: int
) -> tuple[DomainDataset, DomainDataset]:
    """Class-stratified train/test split of the labeled target domain.

    Each class contributes round(fraction * class_count) training
    samples; both sides must keep at least 2 samples per class.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if target.labels is None:
        raise ValueError("split requires labels")
    classes = np.unique(target.labels)
    if classes.size < 2:
        raise ValueError("target must contain both classes")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    train_idx, test_idx = [], []
    for c in classes:
        members = np.flatnonzero(target.labels == c)
        k = int(math.floor(fraction * members.size + 0.5))
        if k < 2 or members.size - k < 2:
            raise ValueError(
                f"fraction {fraction} leaves fewer than 2 class-{c} samples "
                "on one side of the split"
            )
        perm = rng.permutation(members)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    train = target.take(np.concatenate(train_idx), name_suffix="#train")
    test = target.take(np.concatenate(test_idx), name_suffix="#test")
    return train, test


def minmax_scale_task(task: TransferTask) -> TransferTask:
    """Min-max scale all features to [0, 1], fitted on the target train set.

    Constant columns map to 0.  Brings coordinates onto the common scale
    the dominance fractions and RBF distances assume.
    """
    lo = task.target_train.features.min(axis=0)
    hi = task.target_train.features.max(axis=0)
    span = hi - lo
    span[span <= 0] = 1.0

    def rescale(ds: DomainDataset) -> DomainDataset:
        return DomainDataset(
            name=ds.name,
            features=(ds.features - lo) / span,
            labels=None if ds.labels is None else ds.labels.copy(),
        )

    return TransferTask(
        sources=[rescale(s) for s in task.sources],
        target_train=rescale(task.target_train),
        target_test=rescale(task.target_test),
    )
