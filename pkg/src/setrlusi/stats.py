"""Rank statistics for comparing methods across datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateRanksError(ValueError):
    """The Friedman F statistic is undefined (perfect rank agreement)."""


# Studentized-range quantiles divided by sqrt(2), for 2..10 methods.
Q_ALPHA = {
    0.05: {
        2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
        7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
    },
    0.10: {
        2: 1.645, 3: 2.052, 4: 2.291, 5: 2.459, 6: 2.589,
        7: 2.693, 8: 2.780, 9: 2.855, 10: 2.920,
    },
}


@dataclass(frozen=True)
class FriedmanResult:
    chi_square_f: float
    f_f: float
    average_ranks: np.ndarray


def rank_row(values: np.ndarray) -> np.ndarray:
    """Ranks with 1 = largest value; ties share the average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values))
    pos = 0
    while pos < len(values):
        end = pos
        while end + 1 < len(values) and values[order[end + 1]] == values[order[pos]]:
            end += 1
        avg = (pos + end) / 2.0 + 1.0
        ranks[order[pos : end + 1]] = avg
        pos = end + 1
    return ranks


def friedman_statistic(accuracy_table: np.ndarray) -> FriedmanResult:
    """Friedman chi-square and its F-distributed refinement.

    Rows are datasets, columns are methods; higher accuracy ranks
    better.  Raises DegenerateRanksError when the F denominator
    vanishes (every dataset produces the same ranking and the
    chi-square reaches its maximum).
    """
    table = np.asarray(accuracy_table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 2:
        raise ValueError("need an n_datasets x n_methods table, both >= 2")
    n_d, n_me = table.shape
    ranks = np.vstack([rank_row(row) for row in table])
    avg = ranks.mean(axis=0)
    chi = (12.0 * n_d / (n_me * (n_me + 1))) * (
        float(avg @ avg) - n_me * (n_me + 1) ** 2 / 4.0
    )
    denominator = n_d * (n_me - 1) - chi
    if abs(denominator) < 1e-12:
        raise DegenerateRanksError(
            "perfect rank agreement across datasets; F statistic undefined"
        )
    f_f = (n_d - 1) * chi / denominator
    return FriedmanResult(chi_square_f=chi, f_f=f_f, average_ranks=avg)


def nemenyi_cd(n_me: int, n_d: int, alpha: float = 0.10) -> float:
    """Critical difference in average rank for the post-hoc Nemenyi test."""
    if alpha not in Q_ALPHA:
        raise ValueError(f"alpha must be one of {sorted(Q_ALPHA)}, got {alpha}")
    if n_me not in Q_ALPHA[alpha]:
        raise ValueError(f"n_me must lie in 2..10, got {n_me}")
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    return Q_ALPHA[alpha][n_me] * np.sqrt(n_me * (n_me + 1) / (6.0 * n_d))
