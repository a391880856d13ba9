"""
Capacity-bounded clustering of isolated nodes (adaptive k-means) and the
AUV position refinement that follows it.

Clustering works in the horizontal (x, y) plane only.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

import config
from errors import InsufficientCapacity

logger = logging.getLogger(__name__)


@dataclass
class AkmcResult:
    labels: np.ndarray  # cluster index per point
    centroids: np.ndarray  # (k, 2) horizontal centroids
    k: int
    history: List[float] = field(default_factory=list)  # Lloyd objective per iteration, last run
    restarts: int = 0  # number of k increments

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def farthest_point_seeds(xy: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """
    k starting centroids: a random first point, then repeatedly the point
    farthest from every chosen seed (lowest index on ties).
    """
    chosen = [int(rng.integers(len(xy)))]
    nearest = cdist(xy, xy[chosen])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, cdist(xy, xy[[nxt]])[:, 0])
    return xy[chosen].astype(float)


def lloyd_objective(xy: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared horizontal distances to the assigned centroids."""
    return float(np.sum((xy - centroids[labels]) ** 2))


def lloyd(xy: np.ndarray, centroids: np.ndarray,
          max_iter: int = config.LLOYD_MAX_ITER) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    Assign -> recompute until the assignment is stable.

    Empty clusters keep their previous centroid.

    Returns:
        (labels, centroids, objective after each assignment step)
    """
    centroids = centroids.copy()
    labels = None
    history: List[float] = []
    for _ in range(max_iter):
        new_labels = np.argmin(cdist(xy, centroids, "sqeuclidean"), axis=1)
        history.append(lloyd_objective(xy, new_labels, centroids))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(len(centroids)):
            mask = labels == c
            if mask.any():
                centroids[c] = xy[mask].mean(axis=0)
    return labels, centroids, history


def _split_oversized(labels: np.ndarray, centroids: np.ndarray, xy: np.ndarray,
                     n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cut clusters above capacity into index-ordered chunks of n_max."""
    labels = labels.copy()
    cents = [c for c in centroids]
    for c in range(len(centroids)):
        idx = np.flatnonzero(labels == c)
        for start in range(n_max, len(idx), n_max):
            chunk = idx[start:start + n_max]
            labels[chunk] = len(cents)
            cents.append(xy[chunk].mean(axis=0))
    return labels, np.array(cents)


def akmc(points: np.ndarray, x1_init: int, n_max: int,
         rng: np.random.Generator, max_iter: int = config.LLOYD_MAX_ITER) -> AkmcResult:
    """
    Adaptive k-means: Lloyd from farthest-point seeds; while some cluster holds
    more than n_max points, k grows by one and clustering restarts.

    Args:
        points: (n, 2) or (n, 3) positions; only x, y are used
        x1_init: starting cluster count
        n_max: capacity per cluster
        rng: stream for the first seed

    Raises:
        InsufficientCapacity: x1_init exceeds the number of points
    """
    xy = np.asarray(points, dtype=float)[:, :2]
    n = len(xy)
    if n == 0:
        raise ValueError("no points to cluster")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if x1_init < 1:
        raise ValueError(f"x1_init must be >= 1, got {x1_init}")
    if x1_init > n:
        raise InsufficientCapacity(f"x1={x1_init} exceeds the {n} points to cluster")

    distinct = len(np.unique(xy, axis=0))
    k = min(x1_init, distinct)
    restarts = 0
    while True:
        seeds = farthest_point_seeds(xy, k, rng)
        labels, centroids, history = lloyd(xy, seeds, max_iter)
        if np.bincount(labels, minlength=k).max() <= n_max:
            break
        if k >= distinct:
            logger.warning("akmc: %d coincident points exceed capacity %d, splitting",
                           int(np.bincount(labels).max()), n_max)
            labels, centroids = _split_oversized(labels, centroids, xy, n_max)
            k = len(centroids)
            break
        k += 1
        restarts += 1

    logger.debug("akmc: k=%d after %d restarts (x1_init=%d, n=%d)", k, restarts, x1_init, n)
    return AkmcResult(labels=labels, centroids=centroids, k=k, history=history, restarts=restarts)


def refine_position(member_xy: np.ndarray, usv_xy: Sequence[float], start: Sequence[float],
                    max_iter: int = config.WEISZFELD_MAX_ITER,
                    tol: float = config.WEISZFELD_TOL) -> np.ndarray:
    """
    Weiszfeld iterations for the point minimizing the summed distance to the
    members and the USV (collection legs plus the return leg).
    """
    anchors = np.vstack([np.asarray(member_xy, dtype=float), np.asarray(usv_xy, dtype=float)])
    c = np.asarray(start, dtype=float).copy()
    for _ in range(max_iter):
        d = np.linalg.norm(anchors - c, axis=1)
        if np.any(d < 1e-12):
            break
        w = 1.0 / d
        nxt = (anchors * w[:, None]).sum(axis=0) / w.sum()
        if np.linalg.norm(nxt - c) < tol:
            c = nxt
            break
        c = nxt
    return c


def weber_cost(member_xy: np.ndarray, usv_xy: Sequence[float], c: Sequence[float]) -> float:
    anchors = np.vstack([np.asarray(member_xy, dtype=float), np.asarray(usv_xy, dtype=float)])
    return float(np.linalg.norm(anchors - np.asarray(c, dtype=float), axis=1).sum())
