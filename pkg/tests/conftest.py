"""Shared fixtures and independent oracle implementations.

The oracles deliberately take different computational routes from the
library code: the dominance matrix is enumerated from literal indicator
products, objectives are expanded in scalar loops, and the optimality
check extracts quadratic coefficients purely from objective evaluations.
"""

import numpy as np
import pytest

from setrlusi.weak_learner import HyperParams
from setrlusi.linalg import KernelConfig


def v_matrix_oracle(samples: np.ndarray) -> np.ndarray:
    """Direct enumeration of pairwise dominance fractions.

    Counts, for every pair (i, j), the samples whose coordinates
    dominate both, via explicit indicator products, then multiplies the
    per-coordinate fractions in ascending coordinate order.
    """
    samples = np.asarray(samples, dtype=np.float64)
    q, d = samples.shape
    # theta[i, k, c] = 1 if sample k dominates sample i in coordinate c
    theta = (samples[None, :, :] >= samples[:, None, :]).astype(np.float64)
    counts = np.einsum("ikc,jkc->ijc", theta, theta)
    out = np.ones((q, q))
    for c in range(d):
        out *= counts[:, :, c] / q
    return out


def brute_objective(samples, labels, predicate_values, params, A, b) -> float:
    """Scalar-loop expansion of the fit objective, term by term."""
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    psi = np.asarray(predicate_values, dtype=np.float64)
    q = samples.shape[0]

    def kernel(x, z):
        if params.kernel.kind == "linear":
            return float(x @ z)
        s = params.kernel.sigma
        return float(np.exp(-np.sum((x - z) ** 2) / (2 * s * s)))

    v = v_matrix_oracle(samples)
    if params.tau == 0.0:
        p_hat = v
    else:
        psi = psi * np.sqrt(q / (psi @ psi))
        p_hat = (1 - params.tau) * v + params.tau * np.outer(psi, psi)

    f = np.empty(q)
    for i in range(q):
        acc = 0.0
        for j in range(q):
            acc += kernel(samples[i], samples[j]) * A[j]
        f[i] = acc + b

    total = 0.0
    for i in range(q):
        for j in range(q):
            total += (f[i] - labels[i]) * p_hat[i, j] * (f[j] - labels[j])
    reg = 0.0
    for i in range(q):
        for j in range(q):
            reg += A[i] * kernel(samples[i], samples[j]) * A[j]
    return total + params.lam * reg


def extract_quadratic(obj, dim: int):
    """Recover (const, gradient, hessian) of a quadratic from evaluations."""
    e = np.eye(dim)
    q0 = obj(np.zeros(dim))
    hess = np.empty((dim, dim))
    plus = np.array([obj(e[i]) for i in range(dim)])
    minus = np.array([obj(-e[i]) for i in range(dim)])
    grad = (plus - minus) / 2.0
    for i in range(dim):
        hess[i, i] = plus[i] + minus[i] - 2.0 * q0
        for j in range(i + 1, dim):
            hess[i, j] = hess[j, i] = obj(e[i] + e[j]) - plus[i] - plus[j] + q0
    return q0, grad, hess


def coordinate_descent_best(obj, dim: int, restarts: int, sweeps: int, seed: int):
    """Best objective over random-restart exact coordinate descent.

    Works on the quadratic recovered from obj by evaluation, so the
    search never touches the closed-form solution path; the winning
    iterate is scored through obj itself.
    """
    q0, grad, hess = extract_quadratic(obj, dim)
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=2.0, size=(restarts, dim))
    for _ in range(sweeps):
        for i in range(dim):
            # exact minimizer of the i-th coordinate given the others
            z[:, i] -= (grad[i] + z @ hess[:, i]) / hess[i, i]
    values = q0 + z @ grad + 0.5 * np.einsum("ri,ij,rj->r", z, hess, z)
    return obj(z[int(np.argmin(values))])


def random_fit_instance(rng, q=None, d=None, allow_constant=False):
    """Random (samples, labels, predicate) triple for solver tests."""
    q = q or int(rng.integers(4, 12))
    d = d or int(rng.integers(1, 4))
    samples = rng.normal(size=(q, d))
    labels = rng.integers(0, 2, size=q)
    if not allow_constant and len(np.unique(labels)) < 2:
        labels[0] = 1 - labels[0]
    psi = rng.normal(size=q)
    return samples, labels.astype(np.int64), psi


@pytest.fixture
def fixed_kernel():
    return KernelConfig(kind="rbf", sigma=1.0, sigma_rule="fixed")


@pytest.fixture
def default_params(fixed_kernel):
    return HyperParams(tau=0.5, lam=0.01, kernel=fixed_kernel)
