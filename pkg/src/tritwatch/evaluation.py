"""Alarm-vs-label evaluation and parameter tuning.

A label opens a time window around its frame; an alarm landing inside
exactly one window makes that label a true positive, extra alarms in
the same window are absorbed, alarms outside every window are false
positives and unmatched labels are misses.  Precision, recall and F1
follow the usual definitions, with undefined ratios reported as 0 and
flagged.  Tuning sweeps (count_threshold, window, bin_threshold)
triples over a grid, pooling raw counts across videos.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .descriptor import CountSeries, DescriptorParams, alarm_frames
from .validation import require


@dataclass(frozen=True)
class LabelEvent:
    """A manually labelled anomaly onset, in source-frame units."""

    frame: int

    def __post_init__(self):
        require(self.frame >= 0, "label frame must be >= 0")


@dataclass(frozen=True)
class MatchConfig:
    """Alarm-matching window.

    By default the window is symmetric: ``window_seconds`` total,
    centred on the label.  ``pre_seconds``/``post_seconds`` override
    the two sides independently.
    """

    window_seconds: float = 27.0
    frame_rate: float = 30.0
    pre_seconds: float | None = None
    post_seconds: float | None = None

    def __post_init__(self):
        require(self.window_seconds > 0, "window_seconds must be positive")
        require(self.frame_rate > 0, "frame_rate must be positive")
        for v in (self.pre_seconds, self.post_seconds):
            require(v is None or v >= 0, "window sides must be >= 0")

    @property
    def pre_frames(self) -> float:
        side = (
            self.window_seconds / 2
            if self.pre_seconds is None
            else self.pre_seconds
        )
        return side * self.frame_rate

    @property
    def post_frames(self) -> float:
        side = (
            self.window_seconds / 2
            if self.post_seconds is None
            else self.post_seconds
        )
        return side * self.frame_rate


@dataclass(frozen=True)
class EvalReport:
    """Counts and scores of one evaluation run.

    ``precision_defined``/``recall_defined`` flag the degenerate cases
    (no predictions / no labels) where the corresponding ratio was
    reported as 0 by convention.
    """

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


@dataclass(frozen=True)
class GridSpec:
    """Candidate values swept by the tuner, in lexicographic order."""

    count_thresholds: tuple = (2, 3, 4, 5, 6)
    windows: tuple = (10, 15, 20, 25, 30)
    bin_thresholds: tuple = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

    def __post_init__(self):
        require(len(self.count_thresholds) > 0, "empty count_thresholds")
        require(len(self.windows) > 0, "empty windows")
        require(len(self.bin_thresholds) > 0, "empty bin_thresholds")

    def combinations(self):
        return itertools.product(
            self.count_thresholds, self.windows, self.bin_thresholds
        )

    @property
    def size(self) -> int:
        return (
            len(self.count_thresholds)
            * len(self.windows)
            * len(self.bin_thresholds)
        )


def _event_frames(events) -> list[int]:
    return [int(getattr(e, "frame", e)) for e in events]


def match_alarms(alarms, labels, config: MatchConfig) -> tuple[int, int, int]:
    """Match alarms against labels; returns (tp, fp, fn).

    Each alarm is assigned to the nearest label whose window contains
    it (earlier label on ties), in time order; an alarm inside no
    window is a false positive.  A label with at least one assigned
    alarm counts exactly one true positive no matter how many alarms
    its window absorbed.  Window boundaries are inclusive.

    Both inputs must be sorted by frame (items may be events with a
    ``frame`` attribute or plain frame numbers).
    """
    alarm_frames_ = _event_frames(alarms)
    label_frames = _event_frames(labels)
    for name, seq in (("alarms", alarm_frames_), ("labels", label_frames)):
        if any(b < a for a, b in zip(seq, seq[1:])):
            raise ValueError(f"{name} must be sorted by frame")
    pre = config.pre_frames
    post = config.post_frames
    matched = [False] * len(label_frames)
    fp = 0
    for a in alarm_frames_:
        candidates = [
            i
            for i, f in enumerate(label_frames)
            if f - pre <= a <= f + post
        ]
        if not candidates:
            fp += 1
            continue
        nearest = min(candidates, key=lambda i: (abs(label_frames[i] - a), i))
        matched[nearest] = True
    tp = sum(matched)
    return tp, fp, len(label_frames) - tp


def compute_metrics(tp: int, fp: int, fn: int) -> EvalReport:
    """Precision, recall and F1 from raw counts.

    precision = TP/(TP+FP) and recall = TP/(TP+FN); an empty
    denominator is flagged and scored 0 so sweep totals stay ordered.
    F1 is the harmonic mean, 0 whenever either component is 0.
    """
    for name, v in (("tp", tp), ("fp", fp), ("fn", fn)):
        require(v >= 0, f"{name} must be >= 0")
    precision_defined = tp + fp > 0
    recall_defined = tp + fn > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if recall_defined else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


def evaluate_params(
    series: CountSeries,
    labels,
    params: DescriptorParams,
    match: MatchConfig,
) -> tuple[int, int, int]:
    """Run the descriptor over one series and match its alarms."""
    alarms = alarm_frames(series, params)
    return match_alarms(alarms.tolist(), labels, match)


@dataclass(frozen=True)
class ComboResult:
    """Pooled outcome of one grid combination."""

    count_threshold: int
    window: int
    bin_threshold: float
    report: EvalReport


@dataclass(frozen=True)
class GridSearchResult:
    best_params: DescriptorParams
    best_report: EvalReport
    results: tuple
    n_combinations: int


@dataclass(frozen=True)
class FoldResult:
    """One leave-one-out fold: params tuned without the held-out video."""

    held_out: int
    params: DescriptorParams
    report: EvalReport


@dataclass(frozen=True)
class LeaveOneOutResult:
    folds: tuple
    pooled_report: EvalReport
    parameter_mean: dict
    parameter_std: dict


def _pooled_combo(args) -> ComboResult:
    combo, videos, fixed, match = args
    t, window, t_star = combo
    params = replace(
        fixed, count_threshold=t, window=window, bin_threshold=t_star
    )
    tp = fp = fn = 0
    for series, labels in videos:
        a, b, c = evaluate_params(series, labels, params, match)
        tp, fp, fn = tp + a, fp + b, fn + c
    return ComboResult(
        count_threshold=t,
        window=window,
        bin_threshold=t_star,
        report=compute_metrics(tp, fp, fn),
    )


def grid_search_supervised(
    videos,
    grid: GridSpec | None = None,
    fixed: DescriptorParams | None = None,
    match: MatchConfig | None = None,
    n_jobs: int = 1,
) -> GridSearchResult:
    """Sweep the grid, pooling TP/FP/FN over all videos per combination.

    Returns the combination maximising pooled F1; ties break to the
    lexicographically smallest (count_threshold, window,
    bin_threshold).  Combination evaluations are independent, and the
    reduction is done in grid order, so serial and parallel runs agree
    bit for bit.

    Parameters
    ----------
    videos : sequence of (CountSeries, labels)
        Labels are frame numbers or ``LabelEvent``s, sorted by frame.
    n_jobs : int
        Worker processes for the sweep; 1 runs inline.
    """
    videos = list(videos)
    require(len(videos) >= 1, "need at least one video")
    grid = grid if grid is not None else GridSpec()
    fixed = fixed if fixed is not None else DescriptorParams()
    match = match if match is not None else MatchConfig()
    tasks = [
        (combo, videos, fixed, match) for combo in grid.combinations()
    ]
    if n_jobs <= 1:
        results = [_pooled_combo(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * n_jobs))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_pooled_combo, tasks, chunksize=chunk))
    best = max(results, key=lambda r: r.report.f1)
    best_params = replace(
        fixed,
        count_threshold=best.count_threshold,
        window=best.window,
        bin_threshold=best.bin_threshold,
    )
    return GridSearchResult(
        best_params=best_params,
        best_report=best.report,
        results=tuple(results),
        n_combinations=len(results),
    )


def leave_one_out(
    videos,
    grid: GridSpec | None = None,
    fixed: DescriptorParams | None = None,
    match: MatchConfig | None = None,
    n_jobs: int = 1,
) -> LeaveOneOutResult:
    """Tune on every video but one, test on the one left out.

    Pools TP/FP/FN over the held-out folds and reports the mean and
    population standard deviation of each tuned parameter across
    folds.
    """
    videos = list(videos)
    require(len(videos) >= 2, "leave-one-out needs at least 2 videos")
    grid = grid if grid is not None else GridSpec()
    fixed = fixed if fixed is not None else DescriptorParams()
    match = match if match is not None else MatchConfig()
    folds = []
    tp = fp = fn = 0
    for i in range(len(videos)):
        rest = videos[:i] + videos[i + 1 :]
        tuned = grid_search_supervised(
            rest, grid=grid, fixed=fixed, match=match, n_jobs=n_jobs
        )
        series, labels = videos[i]
        a, b, c = evaluate_params(series, labels, tuned.best_params, match)
        tp, fp, fn = tp + a, fp + b, fn + c
        folds.append(
            FoldResult(
                held_out=i,
                params=tuned.best_params,
                report=compute_metrics(a, b, c),
            )
        )
    names = ("count_threshold", "window", "bin_threshold")
    values = {
        n: np.array([getattr(f.params, n) for f in folds], dtype=np.float64)
        for n in names
    }
    return LeaveOneOutResult(
        folds=tuple(folds),
        pooled_report=compute_metrics(tp, fp, fn),
        parameter_mean={n: float(v.mean()) for n, v in values.items()},
        parameter_std={n: float(v.std()) for n, v in values.items()},
    )


class GridSearchTuner(BaseEstimator):
    """Estimator facade over the supervised grid search.

    ``fit`` takes a list of (CountSeries, labels) pairs and exposes
    ``best_params_``, ``best_report_`` and the per-combination
    ``results_``.
    """

    def __init__(self, grid=None, base_params=None, match=None, n_jobs=1):
        self.grid = grid
        self.base_params = base_params
        self.match = match
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        result = grid_search_supervised(
            X,
            grid=self.grid,
            fixed=self.base_params,
            match=self.match,
            n_jobs=self.n_jobs,
        )
        self.best_params_ = result.best_params
        self.best_report_ = result.best_report
        self.results_ = result.results
        self.n_combinations_ = result.n_combinations
        return self

    def predict(self, series: CountSeries) -> np.ndarray:
        """Alarm frames of a series under the tuned parameters."""
        return alarm_frames(series, self.best_params_)


class LeaveOneOutTuner(BaseEstimator):
    """Estimator facade over leave-one-out tuning."""

    def __init__(self, grid=None, base_params=None, match=None, n_jobs=1):
        self.grid = grid
        self.base_params = base_params
        self.match = match
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        result = leave_one_out(
            X,
            grid=self.grid,
            fixed=self.base_params,
            match=self.match,
            n_jobs=self.n_jobs,
        )
        self.folds_ = result.folds
        self.pooled_report_ = result.pooled_report
        self.parameter_mean_ = result.parameter_mean
        self.parameter_std_ = result.parameter_std
        return self
