"""Group counters: frames in, group counts out.

Two front ends share the :class:`CounterConfig` knobs.  The optical
flow counter ("cof") clusters thresholded motion points of consecutive
selected frames; the blob counter ("bd") subtracts a background model,
binarises, cleans the mask with dilation and opening, and counts the
surviving components.  Counts are a trend signal: the consumer cares
about abrupt changes, not absolute accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import imaging
from .clustering import dbscan_cluster_count
from .descriptor import CountSeries, DescriptorParams, InsufficientDataError, select_frames
from .flow import FlowField, dense_optical_flow
from .validation import as_grayscale, require

COUNTER_NAMES = ("cof", "bd")


@dataclass(frozen=True)
class Frame:
    """One grayscale frame: (height, width) uint8 pixels plus its index."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pixels", as_grayscale(self.pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class CounterConfig:
    """Knobs for both counting front ends.

    Optical-flow side: ``motion_floor`` drops near-static points,
    ``flow_block`` averages the per-pixel field over blocks before
    clustering, ``cluster_radius``/``min_points``/``feature_weights``
    parameterise the density clustering over (x, y, magnitude, angle);
    the defaults were tuned on the synthetic blob scenes shipped with
    the test suite.  Blob side: background is blurred and thresholded,
    then cleaned with a dilation and an opening using a cross or square
    structuring element before 4-connected components of at least
    ``min_blob_area`` pixels are counted.
    """

    # optical-flow counter
    motion_floor: float = 0.5
    flow_block: int = 8
    cluster_radius: float = 24.0
    min_points: int = 4
    feature_weights: tuple = (1.0, 1.0, 4.0, 16.0)
    flow_smoothness: float = 0.1
    flow_iterations: int = 96
    flow_levels: int = 3
    flow_warps: int = 2
    flow_tolerance: float = 1e-3
    # blob counter
    bg_learning_rate: float = 0.05
    blur_radius: int = 2
    binarize_threshold: int = 25
    morph_radius: int = 1
    morph_shape: str = "cross"
    min_blob_area: int = 9

    def __post_init__(self):
        require(self.motion_floor >= 0, "motion_floor must be >= 0")
        require(self.flow_block >= 1, "flow_block must be >= 1")
        require(self.cluster_radius > 0, "cluster_radius must be positive")
        require(self.min_points >= 1, "min_points must be >= 1")
        require(
            len(self.feature_weights) == 4
            and all(w >= 0 for w in self.feature_weights),
            "feature_weights must be 4 non-negative values",
        )
        require(self.flow_smoothness > 0, "flow_smoothness must be positive")
        require(self.flow_iterations >= 1, "flow_iterations must be >= 1")
        require(self.flow_levels >= 1, "flow_levels must be >= 1")
        require(self.flow_warps >= 1, "flow_warps must be >= 1")
        require(self.flow_tolerance >= 0, "flow_tolerance must be >= 0")
        require(
            0 < self.bg_learning_rate <= 1,
            "bg_learning_rate must be in (0, 1]",
        )
        require(self.blur_radius >= 1, "blur_radius must be >= 1")
        require(
            0 <= self.binarize_threshold <= 255,
            "binarize_threshold must be in [0, 255]",
        )
        require(self.morph_radius >= 1, "morph_radius must be >= 1")
        require(
            self.morph_shape in ("cross", "square"),
            "morph_shape must be 'cross' or 'square'",
        )
        require(self.min_blob_area >= 1, "min_blob_area must be >= 1")


def flow_to_points(field: FlowField, config: CounterConfig) -> np.ndarray:
    """Motion points of a flow field, one row per moving element.

    Keeps the elements whose magnitude exceeds ``config.motion_floor``
    and returns their (x, y, magnitude, angle) rows; x and y are source
    pixel coordinates even for block-reduced fields.
    """
    mag = field.magnitude
    keep = mag > config.motion_floor
    return np.column_stack(
        [
            field.grid_x()[keep],
            field.grid_y()[keep],
            mag[keep],
            field.angle[keep],
        ]
    )


def count_groups_cof(prev, nxt, config: CounterConfig) -> int:
    """Group count from clustered optical flow between two frames."""
    field = dense_optical_flow(prev, nxt, config)
    if config.flow_block > 1:
        field = field.block_reduce(config.flow_block)
    return dbscan_cluster_count(flow_to_points(field, config), config)


def count_groups_blob(frame, background, config: CounterConfig) -> int:
    """Group count from background-subtracted blob components.

    Pipeline: absolute difference against the background, Gaussian
    blur, binarisation at ``binarize_threshold``, dilation, opening,
    then the number of 4-connected components with at least
    ``min_blob_area`` pixels.  Invariant to a uniform intensity offset
    applied to both inputs.
    """
    img = _pixels(frame).astype(np.int16)
    bg = _pixels(background).astype(np.int16)
    if img.shape != bg.shape:
        raise ValueError(
            f"frame {img.shape} does not match background {bg.shape}"
        )
    diff = np.abs(img - bg).astype(np.float64)
    blurred = imaging.gaussian_blur(diff, config.blur_radius)
    mask = blurred > config.binarize_threshold
    offsets = imaging.structuring_offsets(
        config.morph_radius, config.morph_shape
    )
    mask = imaging.binary_dilate(mask, offsets)
    mask = imaging.binary_open(mask, offsets)
    return imaging.count_components(mask, config.min_blob_area)


def estimate_background(frames, config: CounterConfig) -> Frame:
    """Per-pixel temporal median of a batch of frames.

    A static background survives transient foreground exactly as long
    as each pixel is covered less than half the time.  For streaming
    use :class:`RunningBackground` instead.
    """
    stack = [_pixels(f) for f in frames]
    if not stack:
        raise ValueError("cannot estimate a background from zero frames")
    shape = stack[0].shape
    for i, arr in enumerate(stack):
        if arr.shape != shape:
            raise ValueError(f"frame {i} has shape {arr.shape}, expected {shape}")
    median = np.median(np.stack(stack), axis=0)
    return Frame(pixels=np.floor(median + 0.5).astype(np.uint8), index=-1)


class RunningBackground:
    """Exponential running average background for streaming pipelines.

    Owns mutable state; confine each instance to a single worker.
    """

    def __init__(self, config: CounterConfig):
        self.learning_rate = config.bg_learning_rate
        self._state: np.ndarray | None = None

    def update(self, frame) -> Frame:
        """Blend one frame into the model and return the new background."""
        pixels = _pixels(frame).astype(np.float64)
        if self._state is None:
            self._state = pixels
        else:
            if pixels.shape != self._state.shape:
                raise ValueError("frame dimensions changed mid-stream")
            a = self.learning_rate
            self._state = (1 - a) * self._state + a * pixels
        return self.background

    @property
    def background(self) -> Frame:
        if self._state is None:
            raise ValueError("no frames seen yet")
        return Frame(
            pixels=np.floor(self._state + 0.5).astype(np.uint8), index=-1
        )


class BlobGroupCounter(BaseEstimator):
    """Background-difference blob counter with a fit/predict surface.

    ``fit`` estimates the background (median of the supplied frames);
    ``predict`` maps frames to group counts.
    """

    def __init__(self, config: CounterConfig | None = None):
        self.config = config

    def _config(self) -> CounterConfig:
        return self.config if self.config is not None else CounterConfig()

    def fit(self, frames, y=None):
        self.background_ = estimate_background(frames, self._config())
        return self

    def predict(self, frames) -> np.ndarray:
        cfg = self._config()
        return np.array(
            [count_groups_blob(f, self.background_, cfg) for f in frames],
            dtype=np.int64,
        )


class OpticalFlowGroupCounter(BaseEstimator):
    """Flow-clustering counter: one count per consecutive frame pair."""

    def __init__(self, config: CounterConfig | None = None):
        self.config = config

    def _config(self) -> CounterConfig:
        return self.config if self.config is not None else CounterConfig()

    def fit(self, frames=None, y=None):
        return self

    def predict(self, frames) -> np.ndarray:
        frames = list(frames)
        if len(frames) < 2:
            raise InsufficientDataError(
                "optical-flow counting needs at least 2 frames"
            )
        cfg = self._config()
        return np.array(
            [
                count_groups_cof(a, b, cfg)
                for a, b in zip(frames[:-1], frames[1:])
            ],
            dtype=np.int64,
        )


def build_count_series(
    frames,
    counter: str,
    params: DescriptorParams,
    config: CounterConfig | None = None,
) -> CountSeries:
    """Count series over the frames selected every ``params.skip``.

    The blob counter yields one count per selected frame against a
    median background of the selected frames; the optical-flow counter
    pairs each selected frame with the next selected one, so its series
    is one sample shorter.

    Raises
    ------
    InsufficientDataError
        For the optical-flow counter with fewer than two selected
        frames.
    """
    if counter not in COUNTER_NAMES:
        raise ValueError(f"counter must be one of {COUNTER_NAMES}")
    if config is None:
        config = CounterConfig()
    frames = list(frames)
    require(len(frames) >= 1, "no frames provided")
    selected = [frames[i] for i in select_frames(len(frames), params)]
    if counter == "bd":
        counts = BlobGroupCounter(config).fit(selected).predict(selected)
    else:
        if len(selected) < 2:
            raise InsufficientDataError(
                "optical-flow counting needs at least 2 selected frames"
            )
        counts = OpticalFlowGroupCounter(config).fit().predict(selected)
    return CountSeries(
        counts=counts,
        first_frame=0,
        stride=params.skip,
        frame_rate=params.frame_rate,
    )


def _pixels(frame) -> np.ndarray:
    arr = getattr(frame, "pixels", frame)
    return as_grayscale(arr)
