"""Grayscale image primitives used by the blob counter.

Everything operates on plain numpy arrays: float64 for filtered
intensities, bool for binary masks.  Morphology uses small structuring
elements ('cross' = city-block ball, 'square' = chessboard ball) and
connected components are 4-connected.
"""

from __future__ import annotations

import numpy as np

from .validation import require


def gaussian_kernel(radius: int, sigma: float | None = None) -> np.ndarray:
    """Normalised 1-d Gaussian kernel of length ``2*radius + 1``."""
    require(radius >= 1, "blur radius must be >= 1")
    if sigma is None:
        # OpenCV's default sigma for a given kernel size
        sigma = 0.3 * (radius - 1) + 0.8
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(
    image, radius: int, sigma: float | None = None
) -> np.ndarray:
    """Separable Gaussian blur with edge replication at the borders."""
    k = gaussian_kernel(radius, sigma)
    arr = np.asarray(image, dtype=np.float64)
    padded = np.pad(arr, radius, mode="edge")
    rows = np.zeros_like(arr)
    for i, w in enumerate(k):
        rows += w * padded[i : i + arr.shape[0], radius:-radius]
    padded = np.pad(rows, radius, mode="edge")
    out = np.zeros_like(arr)
    for j, w in enumerate(k):
        out += w * padded[radius:-radius, j : j + arr.shape[1]]
    return out


def structuring_offsets(radius: int, shape: str = "cross"):
    """(dy, dx) offsets of the structuring element, centre included."""
    require(radius >= 1, "structuring radius must be >= 1")
    offsets = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if shape == "cross":
                if abs(dy) + abs(dx) <= radius:
                    offsets.append((dy, dx))
            elif shape == "square":
                offsets.append((dy, dx))
            else:
                raise ValueError(f"unknown structuring shape: {shape!r}")
    return offsets


def _shift(mask: np.ndarray, dy: int, dx: int, fill: bool) -> np.ndarray:
    out = np.full_like(mask, fill)
    h, w = mask.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ys_src = slice(max(-dy, 0), h + min(-dy, 0))
    xs_src = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = mask[ys_src, xs_src]
    return out


def binary_dilate(mask, offsets) -> np.ndarray:
    """Dilation: union of the mask shifted by every element offset."""
    mask = np.asarray(mask, dtype=bool)
    out = np.zeros_like(mask)
    for dy, dx in offsets:
        out |= _shift(mask, dy, dx, False)
    return out


def binary_erode(mask, offsets) -> np.ndarray:
    """Erosion: intersection of the mask shifted by every offset.

    Pixels whose element extends past the border are treated as if the
    outside were background, matching the dilation convention.
    """
    mask = np.asarray(mask, dtype=bool)
    out = np.ones_like(mask)
    for dy, dx in offsets:
        out &= _shift(mask, dy, dx, False)
    return out


def binary_open(mask, offsets) -> np.ndarray:
    """Opening: erosion followed by dilation with the same element."""
    return binary_dilate(binary_erode(mask, offsets), offsets)


def component_areas(mask) -> np.ndarray:
    """Pixel areas of the 4-connected components of a binary mask.

    Uses run-length union-find: horizontal runs are extracted per row,
    then runs in consecutive rows are merged when their column spans
    overlap.
    """
    mask = np.asarray(mask, dtype=bool)
    parent: list[int] = []
    size: list[int] = []

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]

    prev_runs: list[tuple[int, int, int]] = []  # (start, end, run id)
    for row in mask:
        padded = np.concatenate([[False], row, [False]])
        edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
        starts, ends = edges[::2], edges[1::2]
        runs = []
        for s, e in zip(starts.tolist(), ends.tolist()):
            rid = len(parent)
            parent.append(rid)
            size.append(e - s)
            runs.append((s, e, rid))
        # merge with runs of the previous row that share a column
        j = 0
        for s, e, rid in runs:
            while j < len(prev_runs) and prev_runs[j][1] <= s:
                j += 1
            k = j
            while k < len(prev_runs) and prev_runs[k][0] < e:
                union(rid, prev_runs[k][2])
                k += 1
            if k > j:
                k -= 1  # the last overlapping run may also touch the next run
            j = k
        prev_runs = runs
    areas = {}
    for rid in range(len(parent)):
        root = find(rid)
        if root == rid:
            areas[root] = size[root]
    return np.array(sorted(areas.values()), dtype=np.int64)


def count_components(mask, min_area: int = 1) -> int:
    """Number of 4-connected components with at least ``min_area`` pixels."""
    areas = component_areas(mask)
    return int(np.count_nonzero(areas >= min_area))
