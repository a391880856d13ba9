"""
Utility functions for geometry, dB conversions and seeded random streams
"""
import math
import zlib
from typing import List, Sequence, Tuple

import numpy as np
from pymoo.util.nds.non_dominated_sorting import NonDominatedSorting


def distance(a, b) -> float:
    """
    Euclidean distance between two 3-D points.

    Args:
        a, b: objects with x, y, z attributes (meters)

    Returns:
        Distance in meters
    """
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def horizontal_distance(a, b) -> float:
    """Distance in the (x, y) plane."""
    return math.hypot(a.x - b.x, a.y - b.y)


def elevation_cosine(a, b) -> float:
    """
    Cosine of the elevation angle of the segment a-b.

    Returns 1 for horizontally aligned points and 0 for a vertical segment.
    """
    d = distance(a, b)
    if d == 0.0:
        return 1.0
    return horizontal_distance(a, b) / d


def get_angle_to_point(from_x: float, from_y: float, to_x: float, to_y: float) -> float:
    """Bearing in radians from one point to another, in (-pi, pi]."""
    return math.atan2(to_y - from_y, to_x - from_x)


def angle_difference(angle1: float, angle2: float) -> float:
    """
    Smallest signed difference angle2 - angle1.

    Returns:
        Difference in radians (-pi to pi]
    """
    diff = math.fmod(angle2 - angle1, 2.0 * math.pi)
    if diff > math.pi:
        diff -= 2.0 * math.pi
    elif diff <= -math.pi:
        diff += 2.0 * math.pi
    return diff


def linear_to_db(x: float) -> float:
    """10*log10(x); -inf for zero."""
    if x <= 0.0:
        return -math.inf
    return 10.0 * math.log10(x)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return db_to_linear(x_dbm - 30.0)


def watts_to_dbm(x_w: float) -> float:
    return linear_to_db(x_w) + 30.0


def make_rng(seed: int, tag: str, *keys: int) -> np.random.Generator:
    """
    Independent PCG64 stream keyed by (seed, module tag, extra keys).

    Args:
        seed: scenario/run seed (non-negative)
        tag: module tag, e.g. "akmc", "qlearning"
        keys: extra non-negative integers (node id, x1, ...)
    """
    entropy = [int(seed), zlib.crc32(tag.encode("utf-8"))] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Minimization dominance: a is no worse everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated_indices(points: Sequence[Tuple[float, float]]) -> List[int]:
    """Ascending indices of points not dominated by any other point (duplicates all kept)."""
    if len(points) == 0:
        return []
    F = np.asarray(points, dtype=float).reshape(len(points), -1)
    front = NonDominatedSorting().do(F, only_non_dominated_front=True)
    return sorted(int(i) for i in front)
