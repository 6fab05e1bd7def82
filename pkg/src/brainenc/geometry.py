"""Intrinsic dimensionality of embedding clouds via the two-NN estimator.

Distances are exact: a k-d tree answers the first/second-neighbor queries and
must agree bit-for-bit with a brute-force scan (the tree accelerates, never
approximates). The estimate is the maximum-likelihood form
d = N / sum(log(r2/r1)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.neighbors import KDTree

from . import rng

DUPLICATE_EPS = 1e-12
DEFAULT_MAX_N = 8000


class GeometryError(ValueError):
    pass


def l2_normalize_rows(points: np.ndarray) -> tuple[np.ndarray, int]:
    """Project rows onto the unit sphere; all-zero rows are dropped.

    Returns (normalized points, number of dropped rows).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise GeometryError("points must be a 2-D array")
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 0
    dropped = int((~keep).sum())
    return pts[keep] / norms[keep, None], dropped


@dataclass
class NeighborRatios:
    r1: np.ndarray
    r2: np.ndarray
    mu: np.ndarray           # r2 / r1
    n_retained: int
    duplicates_removed: int


def _nn12(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact first/second neighbor distances (self excluded).

    A k-d tree answers low-dimensional queries; above 30 dimensions, where
    tree pruning stops paying off, a chunked exhaustive scan with the same
    distance kernel is used instead. Both are exact.
    """
    if points.shape[1] <= 30:
        tree = KDTree(points)
        dist, _ = tree.query(points, k=3)
        return dist[:, 1], dist[:, 2]
    n = points.shape[0]
    r1 = np.empty(n)
    r2 = np.empty(n)
    step = max(1, int(2e7) // max(n, 1))
    for start in range(0, n, step):
        block = cdist(points[start:start + step], points)
        for i in range(block.shape[0]):
            block[i, start + i] = np.inf
        part = np.partition(block, 1, axis=1)[:, :2]
        part.sort(axis=1)
        r1[start:start + step] = part[:, 0]
        r2[start:start + step] = part[:, 1]
    return r1, r2


def two_nn_ratios(points: np.ndarray) -> NeighborRatios:
    """First/second nearest-neighbor distance ratios with exact search.

    Points whose nearest neighbor is closer than 1e-12 (duplicates) are
    removed before the final ratio computation; the removal count is
    reported.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise GeometryError(f"need >= 3 points, got {pts.shape}")
    r1, _ = _nn12(pts)
    keep = r1 >= DUPLICATE_EPS
    removed = int((~keep).sum())
    pts = pts[keep]
    if pts.shape[0] < 3:
        raise GeometryError(
            f"fewer than 3 distinct points after removing {removed} duplicates")
    r1, r2 = _nn12(pts)
    if np.any(r1 < DUPLICATE_EPS):
        raise GeometryError("duplicate points survived deduplication")
    return NeighborRatios(r1=r1, r2=r2, mu=r2 / r1, n_retained=pts.shape[0],
                          duplicates_removed=removed)


def brute_force_ratios(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """O(N^2) all-pairs oracle for the first two neighbor distances.

    Squared distances accumulate dimension by dimension, matching the
    sequential summation of the distance kernels in the accelerated paths,
    so agreement is bit-exact rather than approximate.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    d2 = np.zeros((n, n))
    for k in range(pts.shape[1]):
        diff = pts[:, k, None] - pts[None, :, k]
        d2 += diff * diff
    np.fill_diagonal(d2, np.inf)
    part = np.partition(d2, 1, axis=1)[:, :2]
    part.sort(axis=1)
    return np.sqrt(part[:, 0]), np.sqrt(part[:, 1])


@dataclass
class IdEstimate:
    id: float
    n_used: int
    duplicates_removed: int
    flagged: bool            # True when the estimate exceeds 2x ambient dim


def two_nn_id(points: np.ndarray, max_n: int = DEFAULT_MAX_N, seed: int = 0) -> IdEstimate:
    """Two-NN maximum-likelihood intrinsic dimension: N / sum(log mu).

    Subsamples to at most `max_n` points without replacement (Philox stream
    keyed by the seed) before estimating.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise GeometryError(f"need >= 3 points, got {pts.shape}")
    if pts.shape[0] > max_n:
        gen = rng.stream(seed, rng.SUBSAMPLE)
        idx = np.sort(gen.choice(pts.shape[0], size=max_n, replace=False))
        pts = pts[idx]
    ratios = two_nn_ratios(pts)
    log_mu_sum = float(np.log(ratios.mu).sum())
    if log_mu_sum == 0:
        raise GeometryError("all neighbor ratios are 1; intrinsic dimension undefined")
    d = ratios.n_retained / log_mu_sum
    flagged = not (0 < d <= 2 * pts.shape[1]) or not np.isfinite(d)
    return IdEstimate(id=float(d), n_used=ratios.n_retained,
                      duplicates_removed=ratios.duplicates_removed, flagged=flagged)


def id_per_run(points: np.ndarray, run_ids, max_n: int = DEFAULT_MAX_N,
               seed: int = 0) -> dict[str, IdEstimate]:
    """Two-NN estimate per run group, in sorted run-id order."""
    run_ids = np.asarray(run_ids)
    if run_ids.shape[0] != points.shape[0]:
        raise GeometryError("one run id per point required")
    out = {}
    for run in sorted(set(run_ids.tolist())):
        out[str(run)] = two_nn_id(points[run_ids == run], max_n=max_n, seed=seed)
    return out
