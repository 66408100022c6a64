"""Closed-form fit of one kernel conditional-probability weak learner.

The fit minimizes a quadratic that blends a dominance-weighted squared
residual with a single rank-one constraint term built from a predicate
vector, plus a kernel-norm regularizer.  Predictions are clamped to
[0, 1] so the output reads as P(y=1 | x).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import (
    KernelConfig,
    compute_v_matrix,
    rbf_kernel_matrix,
    resolve_kernel,
    solve_symmetric_system,
)

B_DENOMINATOR_FLOOR = 1e-12


class FitError(RuntimeError):
    """A weak-learner fit could not be completed (degenerate inputs or solve)."""


@dataclass(frozen=True)
class HyperParams:
    """Weak-learner fit hyperparameters.

    tau               weight of the constraint term against the residual
                      term; tau = 0 disables the constraint entirely
                      (ablation mode)
    lam               kernel-norm regularization strength
    kernel            Gram-matrix kernel for the fit
    regularizer_mode  'identity' regularizes with lam*I (consistent with
                      the objective's gradient); 'vmatrix' uses lam*V
    """

    tau: float
    lam: float
    kernel: KernelConfig = KernelConfig()
    regularizer_mode: str = "identity"

    def __post_init__(self):
        if not 0.0 <= self.tau < 1.0:
            raise ValueError("tau must lie in [0, 1)")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.regularizer_mode not in ("identity", "vmatrix"):
            raise ValueError(f"unknown regularizer_mode: {self.regularizer_mode!r}")


@dataclass(frozen=True)
class WeakLearner:
    """One fitted conditional-probability estimator f(x) = K(x)^T A + b.

    epsilon and beta stay None until the ensemble loop scores the learner
    on the full labeled target training set.
    """

    centers: np.ndarray
    A: np.ndarray
    b: float
    kernel: KernelConfig
    epsilon: float | None = None
    beta: float | None = None

    def with_error(self, epsilon: float, beta: float) -> "WeakLearner":
        return replace(self, epsilon=epsilon, beta=beta)


def _validate_fit_inputs(samples, labels, predicate_values):
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    predicate_values = np.asarray(predicate_values, dtype=np.float64)
    q = samples.shape[0]
    if q < 2:
        raise FitError(f"need at least 2 fitting samples, got {q}")
    if labels.shape != (q,):
        raise ValueError(f"labels shape {labels.shape} does not match q={q}")
    if predicate_values.shape != (q,):
        raise ValueError(
            f"predicate_values shape {predicate_values.shape} does not match q={q}"
        )
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples contain non-finite values")
    if not np.all(np.isfinite(predicate_values)):
        raise ValueError("predicate values contain non-finite values")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0/1")
    return samples, labels, predicate_values


def _assemble(samples, labels, predicate_values, params: HyperParams):
    """Common fit/objective assembly: Gram K, V, and the blended P-hat."""
    samples, labels, predicate_values = _validate_fit_inputs(
        samples, labels, predicate_values
    )
    q = samples.shape[0]
    kernel = resolve_kernel(params.kernel, samples)
    K = rbf_kernel_matrix(samples, samples, kernel)
    V = compute_v_matrix(samples).entries
    if params.tau == 0.0:
        p_hat = V
    else:
        norm_sq = float(predicate_values @ predicate_values)
        if norm_sq == 0.0:
            raise FitError("predicate evaluates to the zero vector")
        # rescale so ||psi||^2 = q, keeping tau's trade-off on a stable scale
        psi = predicate_values * np.sqrt(q / norm_sq)
        p_hat = (1.0 - params.tau) * V + params.tau * np.outer(psi, psi)
    return samples, labels, q, kernel, K, V, p_hat


def fit_weak_learner(
    samples: np.ndarray,
    labels: np.ndarray,
    predicate_values: np.ndarray,
    params: HyperParams,
) -> WeakLearner:
    """Fit (A, b) by the stationarity equations of the blended quadratic.

    Solves (P_hat K + lam R) against the right-hand sides P_hat Y and
    P_hat 1, derives the intercept from the condition
    1^T P_hat (F - Y) = 0, and combines.  Raises FitError on a zero
    predicate, an unsolvable system, or a vanishing intercept denominator.
    """
    samples, labels, q, kernel, K, V, p_hat = _assemble(
        samples, labels, predicate_values, params
    )
    reg = np.eye(q) if params.regularizer_mode == "identity" else V
    lhs = p_hat @ K + params.lam * reg
    rhs = p_hat @ np.column_stack([labels, np.ones(q)])
    sol = solve_symmetric_system(lhs, rhs, jitter=0.0)
    a1, a2 = sol[:, 0], sol[:, 1]

    row_weights = p_hat.sum(axis=0)  # 1^T P_hat
    denominator = float(row_weights @ (np.ones(q) - K @ a2))
    if abs(denominator) < B_DENOMINATOR_FLOOR:
        raise FitError("degenerate intercept denominator")
    b = float(row_weights @ (labels - K @ a1)) / denominator
    A = a1 - b * a2
    return WeakLearner(centers=samples.copy(), A=A, b=b, kernel=kernel)


def predict_proba(learner: WeakLearner, inputs: np.ndarray) -> np.ndarray:
    """Conditional probabilities K(x)^T A + b clamped to [0, 1]."""
    gram = rbf_kernel_matrix(inputs, learner.centers, learner.kernel)
    return np.clip(gram @ learner.A + learner.b, 0.0, 1.0)


def objective_value(
    samples: np.ndarray,
    labels: np.ndarray,
    predicate_values: np.ndarray,
    params: HyperParams,
    A: np.ndarray,
    b: float,
) -> float:
    """Exact quadratic objective (F - Y)^T P_hat (F - Y) + lam A^T K A."""
    samples, labels, q, _, K, _, p_hat = _assemble(
        samples, labels, predicate_values, params
    )
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (q,):
        raise ValueError(f"A shape {A.shape} does not match q={q}")
    residual = K @ A + b - labels
    return float(residual @ (p_hat @ residual) + params.lam * (A @ (K @ A)))
