"""Density-based clustering of motion points.

Points live in a 4-d feature space (x, y, magnitude, angle).  Distance
is a weighted Euclidean metric in which the angle coordinate is
measured along the circle, so directions 0 and 2*pi coincide.  Only
the number of clusters is exposed: noise points belong to no cluster
and never bridge two of them.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .flow import TWO_PI

# rows above this count get their neighbourhoods computed in chunks
_CHUNK_ROWS = 4096


def circular_difference(a, b) -> np.ndarray:
    """Shortest angular distance between ``a`` and ``b`` (radians)."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    d = np.mod(d, TWO_PI)
    return np.minimum(d, TWO_PI - d)


def feature_distance(p, q, weights) -> float:
    """Weighted Euclidean distance between two (x, y, mag, angle) points."""
    wx, wy, wm, wa = weights
    dx = (p[0] - q[0]) * wx
    dy = (p[1] - q[1]) * wy
    dm = (p[2] - q[2]) * wm
    da = float(circular_difference(p[3], q[3])) * wa
    return float(np.sqrt(dx * dx + dy * dy + dm * dm + da * da))


def _neighbour_matrix(points: np.ndarray, weights, radius: float) -> np.ndarray:
    scaled = points[:, :3] * np.asarray(weights[:3], dtype=np.float64)
    norms = np.einsum("ij,ij->i", scaled, scaled)
    angles = np.mod(points[:, 3], TWO_PI) * weights[3]
    half_turn = np.pi * weights[3]
    n = len(points)
    out = np.empty((n, n), dtype=bool)
    r2 = radius * radius
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        d2 = (
            norms[start:stop, None]
            + norms[None, :]
            - 2.0 * (scaled[start:stop] @ scaled.T)
        )
        da = np.abs(angles[start:stop, None] - angles[None, :])
        np.minimum(da, 2.0 * half_turn - da, out=da)
        d2 += da * da
        out[start:stop] = d2 <= r2
    return out


def dbscan_cluster_count(points, config) -> int:
    """Number of density-based clusters among motion points.

    A point is a core point when at least ``config.min_points`` points
    (itself included) lie within ``config.cluster_radius`` of it; each
    cluster is a maximal set of core points chained through their
    neighbourhoods, plus any border points they reach.  Border points
    are counted with the first cluster that reaches them and never
    merge clusters.

    Parameters
    ----------
    points : (n, 4) array
        Rows of (x, y, magnitude, angle); the order of rows does not
        affect the result.
    config : CounterConfig
        Supplies the radius, the core-point minimum and the per-feature
        weights.

    Returns
    -------
    int
        Cluster count; 0 for an empty input.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return 0
    if pts.ndim != 2 or pts.shape[1] != 4:
        raise ValueError("points must be an (n, 4) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    neighbours = _neighbour_matrix(
        pts, config.feature_weights, config.cluster_radius
    )
    core = neighbours.sum(axis=1) >= config.min_points
    assigned = np.zeros(len(pts), dtype=bool)
    clusters = 0
    for seed in range(len(pts)):
        if assigned[seed] or not core[seed]:
            continue
        clusters += 1
        assigned[seed] = True
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in np.flatnonzero(neighbours[p]):
                if not assigned[q]:
                    assigned[q] = True
                    queue.append(q)
    return clusters
