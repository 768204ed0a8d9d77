"""Dense optical flow between grayscale frames.

Classic Horn-Schunck: the displacement field minimises the
brightness-constancy residual plus a smoothness penalty, solved by
Jacobi iteration with the standard weighted neighbour average.  A
coarse-to-fine pyramid with inter-level warping keeps the
linearisation valid for displacements of a few pixels.  Everything is
deterministic for fixed inputs and configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# 4-connected neighbour average for the smoothness term
_AVG_OFFSETS = (
    (-1, 0, 0.25), (1, 0, 0.25), (0, -1, 0.25), (0, 1, 0.25),
)


@dataclass(frozen=True)
class FlowField:
    """Displacement field sampled on a regular pixel grid.

    Element ``(i, j)`` describes the motion of the source pixel at
    ``(origin_x + j*cell_size, origin_y + i*cell_size)``; ``cell_size``
    is 1 for per-pixel fields and grows when the field is block-reduced.
    """

    dx: np.ndarray
    dy: np.ndarray
    cell_size: float = 1.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2:
            raise ValueError("dx and dy must be matching 2-d arrays")

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.dx, self.dy)

    @property
    def angle(self) -> np.ndarray:
        """Flow direction in [0, 2*pi)."""
        return np.mod(np.arctan2(self.dy, self.dx), TWO_PI)

    def grid_x(self) -> np.ndarray:
        """Source x coordinate of every field element."""
        w = self.dx.shape[1]
        xs = self.origin_x + self.cell_size * np.arange(w)
        return np.broadcast_to(xs, self.dx.shape)

    def grid_y(self) -> np.ndarray:
        """Source y coordinate of every field element."""
        h = self.dx.shape[0]
        ys = self.origin_y + self.cell_size * np.arange(h)
        return np.broadcast_to(ys[:, None], self.dx.shape)

    def block_reduce(self, block: int) -> "FlowField":
        """Average the field over non-overlapping ``block x block`` tiles."""
        if block <= 1:
            return self
        h, w = self.dx.shape
        bh, bw = h // block, w // block
        if bh == 0 or bw == 0:
            raise ValueError("block larger than the field")

        def reduce(a):
            a = a[: bh * block, : bw * block]
            return a.reshape(bh, block, bw, block).mean(axis=(1, 3))

        return FlowField(
            dx=reduce(self.dx),
            dy=reduce(self.dy),
            cell_size=self.cell_size * block,
            origin_x=self.origin_x + self.cell_size * (block - 1) / 2,
            origin_y=self.origin_y + self.cell_size * (block - 1) / 2,
        )


def _neighbour_average(a: np.ndarray) -> np.ndarray:
    padded = np.pad(a, 1, mode="edge")
    h, w = a.shape
    acc = None
    for dy, dx, _ in _AVG_OFFSETS:
        view = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        acc = view.copy() if acc is None else acc + view
    return acc * a.dtype.type(1.0 / len(_AVG_OFFSETS))


def _downsample(a: np.ndarray) -> np.ndarray:
    h, w = (a.shape[0] // 2) * 2, (a.shape[1] // 2) * 2
    a = a[:h, :w]
    quarter = a.dtype.type(0.25)
    return quarter * (
        a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2]
    )


def _upsample_flow(a: np.ndarray, shape) -> np.ndarray:
    up = np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)
    out = np.zeros(shape, dtype=a.dtype)
    h = min(shape[0], up.shape[0])
    w = min(shape[1], up.shape[1])
    out[:h, :w] = up[:h, :w]
    if h < shape[0]:
        out[h:, :] = out[h - 1 : h, :]
    if w < shape[1]:
        out[:, w:] = out[:, w - 1 : w]
    return 2.0 * out


def _warp_bilinear(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    ys, xs = np.meshgrid(
        np.arange(h, dtype=img.dtype),
        np.arange(w, dtype=img.dtype),
        indexing="ij",
    )
    fx = np.clip(xs + u, 0, w - 1)
    fy = np.clip(ys + v, 0, h - 1)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = fx - x0
    wy = fy - y0
    top = (1 - wx) * img[y0, x0] + wx * img[y0, x1]
    bottom = (1 - wx) * img[y1, x0] + wx * img[y1, x1]
    return (1 - wy) * top + wy * bottom


def _solve_level(prev, nxt, u, v, smoothness, iterations, tolerance):
    """Horn-Schunck refinement of (u, v) at one pyramid level."""
    warped = _warp_bilinear(nxt, u, v)
    avg = prev.dtype.type(0.5) * (prev + warped)
    iy, ix = np.gradient(avg)
    it = warped - prev
    den = prev.dtype.type(smoothness) ** 2 + ix**2 + iy**2
    du = np.zeros_like(u)
    dv = np.zeros_like(v)
    for _ in range(iterations):
        du_bar = _neighbour_average(du)
        dv_bar = _neighbour_average(dv)
        t = (ix * du_bar + iy * dv_bar + it) / den
        du_next = du_bar - ix * t
        dv_next = dv_bar - iy * t
        delta = max(
            np.max(np.abs(du_next - du)), np.max(np.abs(dv_next - dv))
        )
        du, dv = du_next, dv_next
        if delta < tolerance:
            break
    return u + du, v + dv


def dense_optical_flow(prev, nxt, config) -> FlowField:
    """Displacement field carrying ``prev`` onto ``nxt``.

    Parameters
    ----------
    prev, nxt : 2-d uint8 arrays or Frame
        Grayscale frames of identical dimensions.
    config : CounterConfig
        Supplies the smoothness weight, iteration budget, convergence
        tolerance, pyramid depth and warp refinements per level.

    Returns
    -------
    FlowField
        Per-pixel (dx, dy) in pixels per frame step: content at source
        pixel (x, y) appears near (x + dx, y + dy) in ``nxt``.
    """
    a = _frame_pixels(prev).astype(np.float32) / np.float32(255.0)
    b = _frame_pixels(nxt).astype(np.float32) / np.float32(255.0)
    if a.shape != b.shape:
        raise ValueError(
            f"frame dimensions differ: {a.shape} vs {b.shape}"
        )
    pyramid = [(a, b)]
    for _ in range(config.flow_levels - 1):
        a, b = pyramid[-1]
        if min(a.shape) < 32:
            break
        pyramid.append((_downsample(a), _downsample(b)))
    u = np.zeros(pyramid[-1][0].shape, dtype=np.float32)
    v = np.zeros_like(u)
    # full iteration budget at the cheap coarse level, halved per
    # refinement: fine levels only polish sub-pixel residuals
    iterations = config.flow_iterations
    for level, (pa, pb) in enumerate(reversed(pyramid)):
        if level > 0:
            u = _upsample_flow(u, pa.shape)
            v = _upsample_flow(v, pa.shape)
            iterations = max(16, iterations // 2)
        for _ in range(config.flow_warps):
            u, v = _solve_level(
                pa,
                pb,
                u,
                v,
                config.flow_smoothness,
                iterations,
                config.flow_tolerance,
            )
    return FlowField(dx=u.astype(np.float64), dy=v.astype(np.float64))


def _frame_pixels(frame) -> np.ndarray:
    pixels = getattr(frame, "pixels", frame)
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError("frames must be 2-d grayscale arrays")
    return arr
