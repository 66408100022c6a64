"""Kernel matrices, the dominance-fraction V matrix, and a guarded solve.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend

RESIDUAL_RTOL = 1e-8
JITTER_LADDER = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a linear system stays unsolvable after jitter escalation."""


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice for Gram matrices.

    kind        'rbf' or 'linear'
    sigma       RBF bandwidth; ignored for 'linear'
    sigma_rule  'fixed' uses sigma as given; 'median_heuristic' re-derives
                it from the fitting samples at fit time
    """

    kind: str = "rbf"
    sigma: float = 1.0
    sigma_rule: str = "median_heuristic"

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        if self.sigma_rule not in ("fixed", "median_heuristic"):
            raise ValueError(f"unknown sigma rule: {self.sigma_rule!r}")
        if self.kind == "rbf" and self.sigma_rule == "fixed" and not self.sigma > 0:
            raise ValueError("rbf kernel with fixed rule needs sigma > 0")


@dataclass(frozen=True)
class VMatrix:
    """Symmetric matrix of pairwise dominance fractions with entries in [0, 1]."""

    entries: np.ndarray
    q: int


def _check_matrix(name: str, arr: np.ndarray, d: int | None = None) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def median_heuristic_sigma(samples: np.ndarray) -> float:
    """Median of pairwise Euclidean distances; 1.0 when degenerate."""
    samples = _check_matrix("samples", samples)
    q = samples.shape[0]
    if q < 2:
        return 1.0
    sq = (
        np.sum(samples * samples, axis=1)[:, None]
        + np.sum(samples * samples, axis=1)[None, :]
        - 2.0 * samples @ samples.T
    )
    np.maximum(sq, 0.0, out=sq)
    dists = np.sqrt(sq[np.triu_indices(q, k=1)])
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def resolve_kernel(config: KernelConfig, fit_samples: np.ndarray) -> KernelConfig:
    """Pin a concrete sigma for configs using the median heuristic."""
    if config.kind == "rbf" and config.sigma_rule == "median_heuristic":
        sigma = median_heuristic_sigma(fit_samples)
        return KernelConfig(kind="rbf", sigma=sigma, sigma_rule="fixed")
    return config


def rbf_kernel_matrix(
    rows: np.ndarray, centers: np.ndarray, config: KernelConfig
) -> np.ndarray:
    """Kernel matrix between rows and centers under config.

    For kind='rbf' entry (i, k) is exp(-||x_i - c_k||^2 / (2 sigma^2));
    for kind='linear' it is the inner product.  The sigma rule must be
    resolved (fixed) before calling; see resolve_kernel.
    """
    rows = _check_matrix("rows", rows)
    centers = _check_matrix("centers", centers, d=rows.shape[1])
    if config.kind == "linear":
        return rows @ centers.T
    if config.sigma_rule != "fixed":
        raise ValueError("sigma_rule must be resolved to 'fixed' before evaluation")
    return _backend.rbf_kernel(rows, centers, config.sigma)


def compute_v_matrix(samples: np.ndarray) -> VMatrix:
    """Dominance-fraction matrix over a q x d sample set.

    Entry (i, j) multiplies, over coordinates c, the fraction of the q
    samples whose c-th coordinate is >= max of the pair's c-th
    coordinates (ties count as dominated).
    """
    samples = _check_matrix("samples", samples)
    q = samples.shape[0]
    if q == 0:
        raise ValueError("empty sample set")
    return VMatrix(entries=_backend.v_matrix(samples), q=q)


def solve_symmetric_system(
    M: np.ndarray, rhs: np.ndarray, jitter: float = 0.0
) -> np.ndarray:
    """Solve (M + jitter*I) x = rhs with jitter escalation on failure.

    Accepts a vector or a matrix of right-hand sides.  If the factorization
    fails or the residual exceeds RESIDUAL_RTOL * (1 + ||rhs||_inf), the
    jitter is raised through JITTER_LADDER before giving up.
    """
    M = _check_matrix("M", M)
    q = M.shape[0]
    if M.shape[1] != q:
        raise ValueError(f"M must be square, got {M.shape}")
    rhs = np.asarray(rhs, dtype=np.float64)
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs contains non-finite values")
    if rhs.shape[0] != q:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {q}")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")

    rhs_scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    tol = RESIDUAL_RTOL * (1.0 + rhs_scale)
    eye = np.eye(q)
    levels = [jitter] + [lv for lv in JITTER_LADDER if lv > jitter]
    for level in levels:
        try:
            x = np.linalg.solve(M + level * eye, rhs)
        except np.linalg.LinAlgError:
            continue
        residual = (M + level * eye) @ x - rhs
        if np.all(np.isfinite(x)) and np.max(np.abs(residual)) <= tol:
            return x
    raise SingularSystemError(
        f"system of size {q} unsolvable within residual tolerance "
        f"after jitter escalation to {levels[-1]:g}"
    )
