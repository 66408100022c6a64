"""Pure-NumPy implementations of the hot numeric kernels.

These are the fallback versions of the routines in ``_vkernels`` (the
optional compiled extension).  The dominance-count matrix must produce
bit-identical results in both backends, so the per-coordinate fractions
are multiplied in ascending coordinate order here and there.
"""

import numpy as np


def v_matrix(samples: np.ndarray) -> np.ndarray:
    """Pairwise dominance-fraction matrix of a sample set.

    Entry (i, j) is the product over coordinates c of the fraction of
    samples whose c-th coordinate is >= max(x_i^c, x_j^c).  Exploits
    that the per-pair count equals the smaller of the two per-sample
    dominance counts.
    """
    q, d = samples.shape
    out = np.ones((q, q))
    for c in range(d):
        col = samples[:, c]
        ordered = np.sort(col)
        # count of samples with coordinate >= col[i]
        cnt = q - np.searchsorted(ordered, col, side="left")
        out *= np.minimum.outer(cnt, cnt) / q
    return out


def rbf_kernel(rows: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian kernel matrix exp(-||x - c||^2 / (2 sigma^2))."""
    sq = (
        np.sum(rows * rows, axis=1)[:, None]
        + np.sum(centers * centers, axis=1)[None, :]
        - 2.0 * rows @ centers.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))
