"""Trinary temporal descriptor for group-count series.

A count series is scanned with two nested sliding windows.  The inner
window (size ``2*half_width + 1``) compares every neighbour against its
central sample and yields one trinary digit ("trit") per neighbour:
0 when the neighbour exceeds the centre by more than ``count_threshold``,
1 when they agree within the threshold, 2 when the centre exceeds the
neighbour.  The trits form a base-3 pattern code; the outer window (size
``window``) collects the codes of all its inner windows into a histogram.
A crowd at rest keeps every code at the all-ones "quiet" value, so the
fraction of histogram mass in the quiet bin characterises normality and
a downward crossing of ``bin_threshold`` raises an alarm.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator

from .validation import as_count_array, require


class InsufficientDataError(ValueError):
    """Raised when a series is too short for the requested analysis."""


@dataclass(frozen=True)
class DescriptorParams:
    """Configuration of the trit descriptor.

    Parameters
    ----------
    frame_rate : float
        Source video frame rate in frames per second.
    skip : int
        Number of frames between two consecutive count samples (one
        frame is analysed out of every ``skip``).
    half_width : int
        Half width of the inner comparison window; the window spans
        ``2*half_width + 1`` samples and emits ``2*half_width`` trits.
    window : int
        Size of the outer histogram window, in count samples.  Must
        exceed ``2*half_width``.
    count_threshold : int
        Maximum count difference still considered "unchanged" when a
        neighbour is compared against the window centre.
    bin_threshold : float
        Quiet-bin fraction below which a window is anomalous.  The
        comparison is strict, so ``1.0`` means "any deviation alarms".
    """

    frame_rate: float = 30.0
    skip: int = 20
    half_width: int = 2
    window: int = 15
    count_threshold: int = 3
    bin_threshold: float = 0.85

    def __post_init__(self):
        require(self.frame_rate > 0, "frame_rate must be positive")
        require(self.skip >= 1, "skip must be >= 1")
        require(self.half_width >= 1, "half_width must be >= 1")
        # 3**(2*half_width) must stay inside int64 pattern codes
        require(self.half_width <= 19, "half_width must be <= 19")
        require(
            self.window > 2 * self.half_width,
            "window must exceed 2*half_width",
        )
        require(self.count_threshold >= 0, "count_threshold must be >= 0")
        require(
            0.0 < self.bin_threshold <= 1.0,
            "bin_threshold must be in (0, 1]",
        )

    @property
    def inner_window(self) -> int:
        """Size of the inner comparison window (always odd)."""
        return 2 * self.half_width + 1

    @property
    def codes_per_window(self) -> int:
        """Number of pattern codes produced by one outer window."""
        return self.window - 2 * self.half_width


@dataclass(frozen=True)
class CountSeries:
    """Group counts sampled at a fixed frame stride.

    Sample ``i`` corresponds to source frame ``first_frame + i*stride``.
    Counts are non-negative integers; ``rounded`` records whether the
    values were rounded from fractional input on import.
    """

    counts: np.ndarray
    first_frame: int = 0
    stride: int = 20
    frame_rate: float = 30.0
    rounded: bool = False

    def __post_init__(self):
        arr = as_count_array(self.counts)
        object.__setattr__(self, "counts", arr)
        require(self.first_frame >= 0, "first_frame must be >= 0")
        require(self.stride >= 1, "stride must be >= 1")
        require(self.frame_rate > 0, "frame_rate must be positive")

    def __len__(self) -> int:
        return len(self.counts)

    def frame_of(self, index: int) -> int:
        """Source frame index of sample ``index``."""
        return self.first_frame + index * self.stride


@dataclass(frozen=True)
class PatternHistogram:
    """Distribution of pattern codes over one outer window."""

    bins: dict
    total: int
    window_index: int
    center_frame: int
    quiet_code: int

    @property
    def quiet_fraction(self) -> float:
        """Share of the window's codes sitting in the quiet bin."""
        return self.bins.get(self.quiet_code, 0) / self.total


@dataclass(frozen=True)
class AlarmEvent:
    """A detected anomaly onset, in source-frame units."""

    frame: int
    quiet_fraction: float


def select_frames(n_total: int, params: DescriptorParams) -> np.ndarray:
    """Indices of the frames retained for counting: 0, skip, 2*skip, ...

    The result has ``ceil(n_total / skip)`` entries, all below
    ``n_total``.
    """
    require(n_total >= 1, "n_total must be >= 1")
    return np.arange(0, n_total, params.skip, dtype=np.int64)


def encode_trits(window, threshold: int) -> np.ndarray:
    """Encode one inner window of counts as ``2*half_width`` trits.

    Each non-central element ``c_j`` is compared with the centre ``c``:
    0 if ``c_j - c > threshold``, 1 if ``|c - c_j| <= threshold``,
    2 if ``c - c_j > threshold``.  The centre contributes no digit;
    digits are ordered left to right over the window.

    Parameters
    ----------
    window : sequence of int
        Odd-length window of counts (``2*half_width + 1`` samples).
    threshold : int
        Count difference tolerated as "unchanged".

    Returns
    -------
    ndarray of int
        Trit digits in {0, 1, 2}, length ``len(window) - 1``.
    """
    arr = np.asarray(window, dtype=np.int64)
    if arr.ndim != 1 or len(arr) < 3 or len(arr) % 2 == 0:
        raise ValueError("window length must be odd and >= 3")
    center = arr[len(arr) // 2]
    diff = np.delete(arr, len(arr) // 2) - center
    trits = np.ones(len(diff), dtype=np.int64)
    trits[diff > threshold] = 0
    trits[diff < -threshold] = 2
    return trits


def trits_to_decimal(trits) -> int:
    """Base-3 value of a trit string, least-position digit first."""
    arr = np.asarray(trits, dtype=np.int64)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("trit code must be a non-empty 1-d sequence")
    if np.any((arr < 0) | (arr > 2)):
        raise ValueError("trit digits must be in {0, 1, 2}")
    weights = 3 ** np.arange(len(arr), dtype=np.int64)
    return int(arr @ weights)


def decimal_to_trits(value: int, half_width: int) -> np.ndarray:
    """Inverse of :func:`trits_to_decimal` for codes of 2*half_width digits."""
    n_digits = 2 * half_width
    require(0 <= value < 3**n_digits, "pattern code out of range")
    digits = np.empty(n_digits, dtype=np.int64)
    for j in range(n_digits):
        digits[j] = value % 3
        value //= 3
    return digits


def quiet_code(half_width: int) -> int:
    """Pattern code of the all-ones trit string: (3**(2W) - 1) / 2."""
    return (3 ** (2 * half_width) - 1) // 2


def pattern_codes(counts, half_width: int, threshold: int) -> np.ndarray:
    """Pattern codes of every inner window of a count array.

    Code ``i`` encodes the window centred on sample ``i + half_width``;
    the result has ``len(counts) - 2*half_width`` entries.
    """
    arr = as_count_array(counts)
    span = 2 * half_width + 1
    if len(arr) < span:
        raise InsufficientDataError(
            f"need at least {span} samples, got {len(arr)}"
        )
    windows = sliding_window_view(arr, span)
    diff = windows - windows[:, half_width][:, None]
    neigh = np.delete(diff, half_width, axis=1)
    trits = np.ones_like(neigh)
    trits[neigh > threshold] = 0
    trits[neigh < -threshold] = 2
    weights = 3 ** np.arange(2 * half_width, dtype=np.int64)
    return trits @ weights


def center_sample(window_index: int, params: DescriptorParams) -> int:
    """Sample index of the central element of outer window ``window_index``."""
    return window_index + (params.window - 1) // 2


def window_histogram(
    array,
    params: DescriptorParams,
    window_index: int = 0,
    first_frame: int = 0,
    stride: int | None = None,
) -> PatternHistogram:
    """Histogram of the pattern codes inside one outer window.

    ``array`` must hold exactly ``params.window`` counts; the inner
    window slides one sample at a time, so the histogram always holds
    ``window - 2*half_width`` codes.
    """
    arr = as_count_array(array)
    if len(arr) != params.window:
        raise ValueError(
            f"expected exactly {params.window} counts, got {len(arr)}"
        )
    codes = pattern_codes(arr, params.half_width, params.count_threshold)
    if stride is None:
        stride = params.skip
    center = first_frame + center_sample(window_index, params) * stride
    return PatternHistogram(
        bins=dict(Counter(codes.tolist())),
        total=params.codes_per_window,
        window_index=window_index,
        center_frame=center,
        quiet_code=quiet_code(params.half_width),
    )


def histogram_stream(
    series: CountSeries, params: DescriptorParams
) -> list[PatternHistogram]:
    """Histograms of every outer-window position over a count series.

    The outer window advances one sample per step, producing exactly
    ``len(series) - window + 1`` histograms.  Each histogram records
    the source-frame index of its window's central sample.

    Raises
    ------
    InsufficientDataError
        If the series is shorter than ``params.window``.
    """
    counts = series.counts
    if len(counts) < params.window:
        raise InsufficientDataError(
            f"series has {len(counts)} samples but window={params.window}"
        )
    codes = pattern_codes(
        counts, params.half_width, params.count_threshold
    ).tolist()
    span = params.codes_per_window
    qc = quiet_code(params.half_width)
    bins = Counter(codes[:span])
    out = []
    for k in range(len(counts) - params.window + 1):
        if k > 0:
            old, new = codes[k - 1], codes[k + span - 1]
            bins[old] -= 1
            if bins[old] == 0:
                del bins[old]
            bins[new] += 1
        out.append(
            PatternHistogram(
                bins=dict(bins),
                total=span,
                window_index=k,
                center_frame=series.frame_of(center_sample(k, params)),
                quiet_code=qc,
            )
        )
    return out


def detect_alarms(
    histograms, params: DescriptorParams
) -> list[AlarmEvent]:
    """Alarms at every downward crossing of the quiet-bin threshold.

    A window triggers when its quiet fraction drops strictly below
    ``params.bin_threshold`` while the previous window was at or above
    it (the detector starts armed, so a first window already below the
    threshold alarms immediately).  Consecutive sub-threshold windows
    produce a single alarm until the fraction recovers.
    """
    alarms = []
    armed = True
    for hist in histograms:
        qf = hist.quiet_fraction
        if qf < params.bin_threshold:
            if armed:
                alarms.append(
                    AlarmEvent(frame=hist.center_frame, quiet_fraction=qf)
                )
            armed = False
        else:
            armed = True
    return alarms


def quiet_fraction_series(counts, params: DescriptorParams) -> np.ndarray:
    """Quiet-bin fraction of every outer window, as one vectorised pass.

    Equivalent to ``[h.quiet_fraction for h in histogram_stream(...)]``
    but without materialising histograms; used by the grid-search
    tuner.
    """
    arr = as_count_array(counts)
    if len(arr) < params.window:
        raise InsufficientDataError(
            f"series has {len(arr)} samples but window={params.window}"
        )
    span = 2 * params.half_width + 1
    windows = sliding_window_view(arr, span)
    diff = windows - windows[:, params.half_width][:, None]
    neigh = np.delete(diff, params.half_width, axis=1)
    is_quiet = np.all(np.abs(neigh) <= params.count_threshold, axis=1)
    cs = np.concatenate([[0], np.cumsum(is_quiet.astype(np.int64))])
    width = params.codes_per_window
    quiet_counts = cs[width:] - cs[:-width]
    return quiet_counts / width


def alarm_flags(fractions, bin_threshold: float) -> np.ndarray:
    """Boolean alarm flag per window from a quiet-fraction array."""
    below = np.asarray(fractions, dtype=np.float64) < bin_threshold
    prev = np.concatenate([[False], below[:-1]])
    return below & ~prev


def alarm_frames(series: CountSeries, params: DescriptorParams) -> np.ndarray:
    """Source-frame indices of the alarms raised over a count series."""
    fractions = quiet_fraction_series(series.counts, params)
    flags = alarm_flags(fractions, params.bin_threshold)
    centers = np.flatnonzero(flags) + (params.window - 1) // 2
    return series.first_frame + centers * series.stride


class StreamingDetector:
    """Incremental descriptor: one histogram and trigger check per sample.

    Counts are pushed one at a time; after ``window`` samples of
    warm-up every push yields one :class:`PatternHistogram`, updating
    the quiet-bin count in O(half_width) work.  State is confined to
    the instance, so distinct series can run on distinct instances
    concurrently.
    """

    def __init__(
        self,
        params: DescriptorParams,
        first_frame: int = 0,
        stride: int | None = None,
    ):
        self.params = params
        self.first_frame = first_frame
        self.stride = params.skip if stride is None else stride
        self._quiet = quiet_code(params.half_width)
        self._weights = [3**j for j in range(2 * params.half_width)]
        self._counts = deque(maxlen=params.window)
        self._codes = deque(maxlen=params.codes_per_window)
        self._bins = Counter()
        self._n_seen = 0
        self._window_index = -1
        self._armed = True
        self.last_alarm: AlarmEvent | None = None

    def push(self, count: int) -> PatternHistogram | None:
        """Feed one count; return the new histogram once warmed up.

        Sets :attr:`last_alarm` when the histogram crosses the alarm
        threshold downward, and clears it otherwise.
        """
        if count < 0:
            raise ValueError("counts must be non-negative")
        self._counts.append(int(count))
        self._n_seen += 1
        p = self.params
        if self._n_seen >= p.inner_window:
            self._append_code()
        self.last_alarm = None
        if self._n_seen < p.window:
            return None
        self._window_index += 1
        hist = PatternHistogram(
            bins=dict(self._bins),
            total=p.codes_per_window,
            window_index=self._window_index,
            center_frame=self.first_frame
            + center_sample(self._window_index, p) * self.stride,
            quiet_code=self._quiet,
        )
        qf = hist.quiet_fraction
        if qf < p.bin_threshold:
            if self._armed:
                self.last_alarm = AlarmEvent(
                    frame=hist.center_frame, quiet_fraction=qf
                )
            self._armed = False
        else:
            self._armed = True
        return hist

    def _append_code(self):
        p = self.params
        inner = list(self._counts)[-p.inner_window :]
        center = inner[p.half_width]
        code = 0
        j = 0
        t = p.count_threshold
        for i, c in enumerate(inner):
            if i == p.half_width:
                continue
            d = c - center
            code += (0 if d > t else (2 if d < -t else 1)) * self._weights[j]
            j += 1
        if len(self._codes) == self._codes.maxlen:
            old = self._codes[0]
            self._bins[old] -= 1
            if self._bins[old] == 0:
                del self._bins[old]
        self._codes.append(code)
        self._bins[code] += 1


class TritAnomalyDetector(BaseEstimator):
    """Scikit-learn style facade over the trit descriptor.

    The detector is stateless: ``fit`` only validates the parameters.
    ``transform`` maps a 1-d count array to the per-window quiet
    fractions, ``predict`` to binary alarm flags (one per outer
    window), and ``detect`` to frame-stamped alarm events.

    Examples
    --------
    >>> det = TritAnomalyDetector(count_threshold=2, bin_threshold=0.9)
    >>> det.fit(None).predict([4] * 20).sum()
    0
    """

    def __init__(
        self,
        frame_rate=30.0,
        skip=20,
        half_width=2,
        window=15,
        count_threshold=3,
        bin_threshold=0.85,
    ):
        self.frame_rate = frame_rate
        self.skip = skip
        self.half_width = half_width
        self.window = window
        self.count_threshold = count_threshold
        self.bin_threshold = bin_threshold

    def _params(self) -> DescriptorParams:
        return DescriptorParams(
            frame_rate=self.frame_rate,
            skip=self.skip,
            half_width=self.half_width,
            window=self.window,
            count_threshold=self.count_threshold,
            bin_threshold=self.bin_threshold,
        )

    def fit(self, X=None, y=None):
        """Validate parameters; the descriptor learns nothing from data."""
        self._params()
        return self

    def transform(self, X) -> np.ndarray:
        """Quiet-bin fraction of every outer window of count array ``X``."""
        return quiet_fraction_series(X, self._params())

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def predict(self, X) -> np.ndarray:
        """0/1 alarm flag per outer window of count array ``X``."""
        p = self._params()
        flags = alarm_flags(self.transform(X), p.bin_threshold)
        return flags.astype(np.int64)

    def detect(self, series) -> list[AlarmEvent]:
        """Frame-stamped alarm events for a :class:`CountSeries`."""
        if not isinstance(series, CountSeries):
            series = CountSeries(
                counts=series, stride=self.skip, frame_rate=self.frame_rate
            )
        p = self._params()
        return detect_alarms(histogram_stream(series, p), p)
