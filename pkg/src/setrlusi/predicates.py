"""Predicate pool construction and evaluation.

A predicate maps a sample to a scalar piece of side knowledge: a source
classifier's decision value or sign, an informative feature or feature
product picked by that classifier, a kernel similarity to source
samples, or target-side feature moments.  A pool enumerates, per source
domain, the five source families plus (once) the five target families;
the training loop draws uniformly from it and refits source-backed
entries on each iteration's source subsample.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace

import numpy as np


class DegenerateSourceWarning(UserWarning):
    """A single-class source domain cannot back margin-classifier predicates."""


class PredicateKind(enum.Enum):
    SOURCE_DECISION = "source_decision"
    SOURCE_SIGN = "source_sign"
    SOURCE_TOP_FEATURE = "source_top_feature"
    SOURCE_FEATURE_PAIR = "source_feature_pair"
    SOURCE_KERNEL_SUM = "source_kernel_sum"
    TARGET_MEAN = "target_mean"
    TARGET_FEATURE = "target_feature"
    TARGET_MEAN_SQUARE = "target_mean_square"
    TARGET_FEATURE_PAIR = "target_feature_pair"
    ONES = "ones"


SOURCE_KINDS = frozenset(
    {
        PredicateKind.SOURCE_DECISION,
        PredicateKind.SOURCE_SIGN,
        PredicateKind.SOURCE_TOP_FEATURE,
        PredicateKind.SOURCE_FEATURE_PAIR,
        PredicateKind.SOURCE_KERNEL_SUM,
    }
)

MARGIN_BACKED_KINDS = frozenset(
    {
        PredicateKind.SOURCE_DECISION,
        PredicateKind.SOURCE_SIGN,
        PredicateKind.SOURCE_TOP_FEATURE,
        PredicateKind.SOURCE_FEATURE_PAIR,
    }
)

# 2^-8, 2^-6, ..., 2^8
DEFAULT_REG_GRID = tuple(2.0**p for p in range(-8, 9, 2))
DEFAULT_KERNEL_SIGMA_GRID = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class MarginClassifier:
    """Linear large-margin classifier f(x) = w^T x + b on -1/+1 labels."""

    w: np.ndarray
    b: float
    reg_param: float
    converged: bool = True
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class PredicateSpec:
    """One entry of the predicate pool.

    Field usage by kind:
      SOURCE_DECISION / SOURCE_SIGN     weights, intercept, reg_param
      SOURCE_TOP_FEATURE                feature_indices (1), weights,
                                        intercept, reg_param
      SOURCE_FEATURE_PAIR               feature_indices (2), weights,
                                        intercept, reg_param
      SOURCE_KERNEL_SUM                 centers, sigma
      TARGET_FEATURE                    feature_indices (1)
      TARGET_FEATURE_PAIR               feature_indices (2)
      TARGET_MEAN / TARGET_MEAN_SQUARE / ONES   no parameters
    Source kinds additionally carry source_index.
    """

    kind: PredicateKind
    source_index: int | None = None
    weights: np.ndarray | None = None
    intercept: float | None = None
    feature_indices: tuple[int, ...] | None = None
    centers: np.ndarray | None = None
    sigma: float | None = None
    reg_param: float | None = None

    def __post_init__(self):
        if self.kind in SOURCE_KINDS and self.source_index is None:
            raise ValueError(f"{self.kind} requires source_index")
        if self.kind not in SOURCE_KINDS and self.source_index is not None:
            raise ValueError(f"{self.kind} must not carry source_index")
        n_idx = {
            PredicateKind.SOURCE_TOP_FEATURE: 1,
            PredicateKind.TARGET_FEATURE: 1,
            PredicateKind.SOURCE_FEATURE_PAIR: 2,
            PredicateKind.TARGET_FEATURE_PAIR: 2,
        }.get(self.kind)
        if n_idx is not None:
            if self.feature_indices is None or len(self.feature_indices) != n_idx:
                raise ValueError(f"{self.kind} requires {n_idx} feature indices")
        if self.kind in (PredicateKind.SOURCE_DECISION, PredicateKind.SOURCE_SIGN):
            if self.weights is None or self.intercept is None:
                raise ValueError(f"{self.kind} requires weights and intercept")
        if self.kind is PredicateKind.SOURCE_KERNEL_SUM:
            if self.centers is None or self.sigma is None or not self.sigma > 0:
                raise ValueError("kernel-sum predicate requires centers and sigma > 0")


@dataclass(frozen=True)
class PoolConfig:
    """Grids controlling pool multiplicity.

    The margin-classifier regularization grids give the SOURCE_DECISION
    and SOURCE_SIGN entry counts; the sigma grid gives the kernel-sum
    count.  A uniform draw over the pool then realizes the random
    parameter selection.
    """

    fs_reg_grid: tuple[float, ...] = DEFAULT_REG_GRID
    gs_reg_grid: tuple[float, ...] = DEFAULT_REG_GRID
    kernel_sigma_grid: tuple[float, ...] = DEFAULT_KERNEL_SIGMA_GRID
    svm_max_epochs: int = 200


def pool_size(d: int, n_sources: int, config: PoolConfig) -> int:
    """Expected pool entry count for non-degenerate sources."""
    per_source = (
        len(config.fs_reg_grid)
        + len(config.gs_reg_grid)
        + d
        + d * (d + 1) // 2
        + len(config.kernel_sigma_grid)
    )
    target_side = 1 + d + 1 + d * (d + 1) // 2 + 1
    return n_sources * per_source + target_side


def train_linear_margin_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    reg_param: float,
    max_epochs: int = 200,
) -> MarginClassifier:
    """Full-batch subgradient descent on the hinge + L2 objective.

    Labels in {0, 1} are mapped to {-1, +1}.  Steps shrink as
    1 / (reg_param * epoch); the best iterate seen is returned and the
    tracked objective trace is its running minimum, so it is
    non-increasing.  A fit that is still improving at max_epochs is
    returned with converged=False.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    n, d = features.shape
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("margin classifier needs both classes present")
    if not reg_param > 0:
        raise ValueError("reg_param must be positive")
    y = np.where(labels == 1, 1.0, -1.0)

    def objective(w, b):
        margins = y * (features @ w + b)
        hinge = np.maximum(0.0, 1.0 - margins)
        return 0.5 * reg_param * float(w @ w) + float(hinge.mean())

    w = np.zeros(d)
    b = 0.0
    best_w, best_b = w, b
    best_obj = objective(w, b)
    trace = [best_obj]
    prev_best = best_obj
    for epoch in range(1, max_epochs + 1):
        margins = y * (features @ w + b)
        active = margins < 1.0
        grad_w = reg_param * w - (y[active] @ features[active]) / n
        grad_b = -float(y[active].sum()) / n
        step = 1.0 / (reg_param * epoch)
        w = w - step * grad_w
        b = b - step * grad_b
        obj = objective(w, b)
        if obj < best_obj:
            best_obj, best_w, best_b = obj, w.copy(), b
        prev_best = trace[-1]
        trace.append(best_obj)
    converged = best_obj >= prev_best - 1e-9 * (1.0 + abs(prev_best))
    return MarginClassifier(
        w=best_w,
        b=float(best_b),
        reg_param=reg_param,
        converged=converged,
        objective_trace=np.asarray(trace),
    )


def _top_feature(w: np.ndarray) -> int:
    return int(np.argmax(np.abs(w)))


def _top_feature_pair(w: np.ndarray) -> tuple[int, int]:
    # two largest |w|, ties broken by lower index; (s, s) only when d == 1
    order = np.lexsort((np.arange(len(w)), -np.abs(w)))
    if len(w) == 1:
        return (0, 0)
    s1, s2 = int(order[0]), int(order[1])
    return (min(s1, s2), max(s1, s2))


def build_predicate_pool(task, config: PoolConfig, seed: int = 0) -> list[PredicateSpec]:
    """Enumerate the full predicate pool for a transfer task.

    Per usable source: one SOURCE_DECISION entry per fs grid value, one
    SOURCE_SIGN per gs grid value, d SOURCE_TOP_FEATURE and d(d+1)/2
    SOURCE_FEATURE_PAIR entries (each trained with a grid value drawn at
    build time), and one SOURCE_KERNEL_SUM per sigma value.  Target-side
    entries appear once.  Single-class sources lose their
    margin-classifier families with a DegenerateSourceWarning.
    """
    d = task.target_train.d
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    pool: list[PredicateSpec] = []
    n_pairs = d * (d + 1) // 2
    for i, source in enumerate(task.sources):
        degenerate = source.labels is None or np.unique(source.labels).size < 2
        if degenerate:
            warnings.warn(
                f"source domain {source.name!r} has a single class; "
                "margin-classifier predicates omitted",
                DegenerateSourceWarning,
            )
        else:
            for reg in config.fs_reg_grid:
                clf = train_linear_margin_classifier(
                    source.features, source.labels, reg, config.svm_max_epochs
                )
                pool.append(
                    PredicateSpec(
                        kind=PredicateKind.SOURCE_DECISION,
                        source_index=i,
                        weights=clf.w,
                        intercept=clf.b,
                        reg_param=reg,
                    )
                )
            for reg in config.gs_reg_grid:
                clf = train_linear_margin_classifier(
                    source.features, source.labels, reg, config.svm_max_epochs
                )
                pool.append(
                    PredicateSpec(
                        kind=PredicateKind.SOURCE_SIGN,
                        source_index=i,
                        weights=clf.w,
                        intercept=clf.b,
                        reg_param=reg,
                    )
                )
            for _ in range(d):
                reg = float(rng.choice(config.fs_reg_grid))
                clf = train_linear_margin_classifier(
                    source.features, source.labels, reg, config.svm_max_epochs
                )
                pool.append(
                    PredicateSpec(
                        kind=PredicateKind.SOURCE_TOP_FEATURE,
                        source_index=i,
                        weights=clf.w,
                        intercept=clf.b,
                        feature_indices=(_top_feature(clf.w),),
                        reg_param=reg,
                    )
                )
            for _ in range(n_pairs):
                reg = float(rng.choice(config.fs_reg_grid))
                clf = train_linear_margin_classifier(
                    source.features, source.labels, reg, config.svm_max_epochs
                )
                pool.append(
                    PredicateSpec(
                        kind=PredicateKind.SOURCE_FEATURE_PAIR,
                        source_index=i,
                        weights=clf.w,
                        intercept=clf.b,
                        feature_indices=_top_feature_pair(clf.w),
                        reg_param=reg,
                    )
                )
        for sigma in config.kernel_sigma_grid:
            pool.append(
                PredicateSpec(
                    kind=PredicateKind.SOURCE_KERNEL_SUM,
                    source_index=i,
                    centers=source.features,
                    sigma=float(sigma),
                )
            )

    pool.append(PredicateSpec(kind=PredicateKind.TARGET_MEAN))
    for s in range(d):
        pool.append(
            PredicateSpec(kind=PredicateKind.TARGET_FEATURE, feature_indices=(s,))
        )
    pool.append(PredicateSpec(kind=PredicateKind.TARGET_MEAN_SQUARE))
    for s1 in range(d):
        for s2 in range(s1, d):
            pool.append(
                PredicateSpec(
                    kind=PredicateKind.TARGET_FEATURE_PAIR, feature_indices=(s1, s2)
                )
            )
    pool.append(PredicateSpec(kind=PredicateKind.ONES))
    return pool


def refit_predicate(
    spec: PredicateSpec, source, max_epochs: int = 200
) -> PredicateSpec:
    """Re-derive a source-backed predicate from a fresh source subsample.

    Margin-backed kinds retrain with the spec's stored regularization
    value; kernel sums swap in the subsample as centers.  Target-side
    kinds are returned unchanged.
    """
    if spec.kind not in SOURCE_KINDS:
        return spec
    if spec.kind is PredicateKind.SOURCE_KERNEL_SUM:
        return replace(spec, centers=source.features)
    clf = train_linear_margin_classifier(
        source.features, source.labels, spec.reg_param, max_epochs
    )
    if spec.kind is PredicateKind.SOURCE_TOP_FEATURE:
        return replace(
            spec, weights=clf.w, intercept=clf.b, feature_indices=(_top_feature(clf.w),)
        )
    if spec.kind is PredicateKind.SOURCE_FEATURE_PAIR:
        return replace(
            spec,
            weights=clf.w,
            intercept=clf.b,
            feature_indices=_top_feature_pair(clf.w),
        )
    return replace(spec, weights=clf.w, intercept=clf.b)


def evaluate_predicate(spec: PredicateSpec, samples: np.ndarray) -> np.ndarray:
    """Evaluate one predicate on each row of a q x d sample matrix."""
    samples = np.asarray(samples, dtype=np.float64)
    q, d = samples.shape
    if spec.feature_indices is not None:
        for idx in spec.feature_indices:
            if not 0 <= idx < d:
                raise ValueError(f"feature index {idx} out of range for d={d}")

    kind = spec.kind
    if kind is PredicateKind.ONES:
        return np.ones(q)
    if kind is PredicateKind.TARGET_MEAN:
        return samples.mean(axis=1)
    if kind is PredicateKind.TARGET_MEAN_SQUARE:
        return samples.mean(axis=1) ** 2
    if kind in (PredicateKind.TARGET_FEATURE, PredicateKind.SOURCE_TOP_FEATURE):
        return samples[:, spec.feature_indices[0]].copy()
    if kind in (PredicateKind.TARGET_FEATURE_PAIR, PredicateKind.SOURCE_FEATURE_PAIR):
        s1, s2 = spec.feature_indices
        return samples[:, s1] * samples[:, s2]
    if kind is PredicateKind.SOURCE_DECISION:
        return samples @ spec.weights + spec.intercept
    if kind is PredicateKind.SOURCE_SIGN:
        return (samples @ spec.weights + spec.intercept > 0).astype(np.float64)
    if kind is PredicateKind.SOURCE_KERNEL_SUM:
        centers = np.asarray(spec.centers, dtype=np.float64)
        if centers.shape[1] != d:
            raise ValueError("kernel-sum centers dimension mismatch")
        sq = (
            np.sum(samples * samples, axis=1)[:, None]
            + np.sum(centers * centers, axis=1)[None, :]
            - 2.0 * samples @ centers.T
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * spec.sigma**2)).sum(axis=1)
    raise ValueError(f"unhandled predicate kind: {kind}")
