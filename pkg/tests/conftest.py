import numpy as np

from tritwatch.imaging import gaussian_blur


def textured_image(height, width, seed, pad=8):
    """Smooth seeded random texture, padded for exact-shift extraction."""
    rng = np.random.default_rng(seed)
    big = rng.uniform(0, 255, size=(height + 2 * pad, width + 2 * pad))
    big = gaussian_blur(big, 3)
    big = (big - big.min()) / (big.max() - big.min()) * 255
    return big, pad


def shifted_pair(height, width, seed, dx, dy):
    """Frame pair whose content moves exactly by (dx, dy) pixels.

    Both frames are windows into one larger texture, so there are no
    wrap-around artefacts; fractional shifts use bilinear sampling.
    """
    big, pad = textured_image(height, width, seed)
    first = big[pad : pad + height, pad : pad + width]
    ys = np.arange(height) + pad - dy
    xs = np.arange(width) + pad - dx
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    second = (
        (1 - wy) * (1 - wx) * big[np.ix_(y0, x0)]
        + (1 - wy) * wx * big[np.ix_(y0, x0 + 1)]
        + wy * (1 - wx) * big[np.ix_(y0 + 1, x0)]
        + wy * wx * big[np.ix_(y0 + 1, x0 + 1)]
    )
    return first.astype(np.uint8), second.astype(np.uint8)
