import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from tritwatch import (
    CountSeries,
    DescriptorParams,
    InsufficientDataError,
    PatternHistogram,
    StreamingDetector,
    TritAnomalyDetector,
    detect_alarms,
    encode_trits,
    histogram_stream,
    pattern_codes,
    quiet_code,
    select_frames,
    trits_to_decimal,
    window_histogram,
)
from tritwatch.descriptor import (
    alarm_flags,
    alarm_frames,
    decimal_to_trits,
    quiet_fraction_series,
)


def oracle_trits(window, threshold):
    """Independent digit-by-digit encoding of one inner window."""
    center = window[len(window) // 2]
    digits = []
    for i, c_j in enumerate(window):
        if i == len(window) // 2:
            continue
        if c_j - center > threshold:
            digits.append(0)
        elif abs(center - c_j) <= threshold:
            digits.append(1)
        else:
            digits.append(2)
    return digits


def oracle_code(window, threshold):
    digits = oracle_trits(window, threshold)
    return sum(t * 3**j for j, t in enumerate(digits))


def make_hist(quiet_fraction_num, total, index=0, frame=0, w=2):
    qc = quiet_code(w)
    bins = {qc: quiet_fraction_num}
    if total - quiet_fraction_num:
        bins[0] = total - quiet_fraction_num
    return PatternHistogram(
        bins=bins,
        total=total,
        window_index=index,
        center_frame=frame,
        quiet_code=qc,
    )


class TestSelectFrames:
    def test_600_frames_skip_20(self):
        idx = select_frames(600, DescriptorParams(skip=20))
        assert len(idx) == 30
        assert idx.tolist() == list(range(0, 600, 20))

    def test_single_frame(self):
        assert select_frames(1, DescriptorParams(skip=20)).tolist() == [0]

    def test_601_frames(self):
        assert len(select_frames(601, DescriptorParams(skip=20))) == 31

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 2000))
            skip = int(rng.integers(1, 60))
            expected = [i for i in range(n) if i % skip == 0]
            got = select_frames(n, DescriptorParams(skip=skip))
            assert got.tolist() == expected
            assert len(got) == -(-n // skip)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_frames(0, DescriptorParams())


class TestEncodeTrits:
    def test_constant_window(self):
        assert encode_trits([4, 4, 4, 4, 4], 2).tolist() == [1, 1, 1, 1]

    def test_center_spike(self):
        assert encode_trits([2, 3, 10, 3, 2], 3).tolist() == [2, 2, 2, 2]

    def test_center_dip(self):
        assert encode_trits([9, 8, 1, 8, 9], 3).tolist() == [0, 0, 0, 0]

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            encode_trits([1, 2, 3, 4], 1)
        with pytest.raises(ValueError):
            encode_trits([1], 1)

    def test_matches_hand_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            w = int(rng.integers(1, 4))
            window = rng.integers(0, 30, size=2 * w + 1).tolist()
            t = int(rng.integers(0, 6))
            assert encode_trits(window, t).tolist() == oracle_trits(window, t)

    @given(
        st.lists(st.integers(0, 50), min_size=5, max_size=5),
        st.integers(0, 8),
    )
    def test_time_reversal_reverses_digits(self, window, t):
        forward = encode_trits(window, t).tolist()
        backward = encode_trits(window[::-1], t).tolist()
        assert backward == forward[::-1]


class TestPatternCodes:
    def test_zero_code(self):
        assert trits_to_decimal([0, 0, 0, 0]) == 0

    def test_quiet_code_is_geometric_series(self):
        # all-ones code = sum of 3**j = (3**4 - 1) / 2
        assert trits_to_decimal([1, 1, 1, 1]) == sum(3**j for j in range(4))
        assert trits_to_decimal([1, 1, 1, 1]) == 40

    def test_mixed_code(self):
        assert trits_to_decimal([2, 1, 0, 1]) == 2 * 1 + 1 * 3 + 0 * 9 + 1 * 27
        assert trits_to_decimal([2, 1, 0, 1]) == 32

    def test_invalid_digits(self):
        with pytest.raises(ValueError):
            trits_to_decimal([0, 3])
        with pytest.raises(ValueError):
            trits_to_decimal([])

    def test_quiet_code_formula(self):
        for w in (1, 2, 3):
            assert quiet_code(w) == (3 ** (2 * w) - 1) // 2
            assert quiet_code(w) == trits_to_decimal([1] * (2 * w))

    def test_exhaustive_bijection_two_w_four(self):
        seen = set()
        for d0 in range(3):
            for d1 in range(3):
                for d2 in range(3):
                    for d3 in range(3):
                        code = trits_to_decimal([d0, d1, d2, d3])
                        assert decimal_to_trits(code, 2).tolist() == [
                            d0,
                            d1,
                            d2,
                            d3,
                        ]
                        seen.add(code)
        assert seen == set(range(81))

    def test_pattern_codes_match_per_window_encoding(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            w = int(rng.integers(1, 4))
            t = int(rng.integers(0, 5))
            counts = rng.integers(0, 20, size=int(rng.integers(2 * w + 1, 60)))
            codes = pattern_codes(counts, w, t)
            expected = [
                oracle_code(counts[i : i + 2 * w + 1].tolist(), t)
                for i in range(len(counts) - 2 * w)
            ]
            assert codes.tolist() == expected


class TestWindowHistogram:
    def test_constant_window_is_quiet(self):
        params = DescriptorParams(window=15, half_width=2, count_threshold=2)
        hist = window_histogram([4] * 15, params)
        assert hist.bins == {40: 11}
        assert hist.quiet_fraction == 1.0

    def test_produces_l_minus_2w_codes(self):
        params = DescriptorParams(window=15, half_width=2)
        hist = window_histogram(list(range(15)), params)
        assert hist.total == 11
        assert sum(hist.bins.values()) == 11

    def test_step_window_not_quiet(self):
        array = [4, 4, 4, 4, 12, 12, 12, 12, 12, 12, 12, 4, 4, 4, 4]
        params = DescriptorParams(window=15, half_width=2, count_threshold=2)
        hist = window_histogram(array, params)
        expected = [oracle_code(array[i : i + 5], 2) for i in range(11)]
        quiet = sum(1 for c in expected if c == 40)
        assert hist.quiet_fraction == quiet / 11
        assert hist.quiet_fraction < 1.0

    def test_wrong_length_rejected(self):
        params = DescriptorParams(window=15)
        with pytest.raises(ValueError):
            window_histogram([1] * 14, params)

    def test_small_window_rejected_by_params(self):
        with pytest.raises(ValueError):
            DescriptorParams(window=4, half_width=2)


class TestHistogramStream:
    def test_window_count(self):
        params = DescriptorParams(window=15)
        series = CountSeries(counts=[3] * 30)
        assert len(histogram_stream(series, params)) == 16

    def test_boundary_single_window(self):
        params = DescriptorParams(window=15)
        series = CountSeries(counts=[3] * 15)
        assert len(histogram_stream(series, params)) == 1

    def test_too_short(self):
        params = DescriptorParams(window=15)
        with pytest.raises(InsufficientDataError):
            histogram_stream(CountSeries(counts=[3] * 14), params)

    def test_window_count_law_random(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            w = int(rng.integers(1, 4))
            l = int(rng.integers(2 * w + 1, 40))
            m = int(rng.integers(l, l + 100))
            params = DescriptorParams(window=l, half_width=w)
            series = CountSeries(counts=rng.integers(0, 9, size=m))
            hists = histogram_stream(series, params)
            # naive double-loop oracle over explicit outer windows
            naive = 0
            for start in range(m):
                if start + l <= m:
                    naive += 1
            assert len(hists) == naive == m - l + 1
            assert all(sum(h.bins.values()) == l - 2 * w for h in hists)

    def test_histograms_match_naive_per_window_build(self):
        rng = np.random.default_rng(4)
        params = DescriptorParams(
            window=12, half_width=2, count_threshold=1
        )
        counts = rng.integers(0, 8, size=40)
        series = CountSeries(counts=counts, first_frame=100, stride=5)
        hists = histogram_stream(series, params)
        for k, hist in enumerate(hists):
            window = counts[k : k + 12]
            expected = {}
            for i in range(12 - 4):
                code = oracle_code(window[i : i + 5].tolist(), 1)
                expected[code] = expected.get(code, 0) + 1
            assert hist.bins == expected
            assert hist.window_index == k
            assert hist.center_frame == 100 + (k + 5) * 5


class TestDetectAlarms:
    def test_all_quiet_no_alarms(self):
        params = DescriptorParams(bin_threshold=0.85)
        hists = [make_hist(11, 11, i) for i in range(3)]
        assert detect_alarms(hists, params) == []

    def test_crossing_and_rearm(self):
        params = DescriptorParams(bin_threshold=0.85)
        fractions = [(10, 10), (6, 10), (5, 10), (9, 10), (7, 10)]
        hists = [
            make_hist(n, d, i, frame=i * 20)
            for i, (n, d) in enumerate(fractions)
        ]
        alarms = detect_alarms(hists, params)
        assert [a.frame for a in alarms] == [20, 80]

    def test_starts_armed(self):
        params = DescriptorParams(bin_threshold=0.85)
        hists = [make_hist(6, 10, 0, frame=0), make_hist(5, 10, 1, frame=20)]
        alarms = detect_alarms(hists, params)
        assert len(alarms) == 1 and alarms[0].frame == 0

    def test_equality_is_quiet(self):
        params = DescriptorParams(bin_threshold=0.5)
        hists = [make_hist(5, 10, 0)]
        assert detect_alarms(hists, params) == []

    def test_alarm_records_fraction(self):
        params = DescriptorParams(bin_threshold=0.85)
        alarms = detect_alarms([make_hist(3, 10, 0)], params)
        assert alarms[0].quiet_fraction == 0.3


class TestInvariants:
    @given(
        st.lists(st.integers(0, 3), min_size=20, max_size=60),
        st.integers(3, 8),
    )
    @settings(max_examples=60, deadline=None)
    def test_quiet_invariance(self, counts, t):
        # values within a band of width <= t: every pairwise deviation <= t
        params = DescriptorParams(
            window=15, half_width=2, count_threshold=t, bin_threshold=0.95
        )
        series = CountSeries(counts=counts)
        hists = histogram_stream(series, params)
        assert all(h.quiet_fraction == 1.0 for h in hists)
        assert detect_alarms(hists, params) == []

    @given(
        st.lists(st.integers(0, 20), min_size=15, max_size=60),
        st.integers(0, 1000),
    )
    @settings(max_examples=60, deadline=None)
    def test_shift_invariance(self, counts, k):
        params = DescriptorParams(window=15, bin_threshold=0.9)
        base = CountSeries(counts=counts)
        shifted = CountSeries(counts=[c + k for c in counts])
        a = detect_alarms(histogram_stream(base, params), params)
        b = detect_alarms(histogram_stream(shifted, params), params)
        assert a == b

    def test_gradualism_tolerance(self):
        for w in (1, 2, 3):
            params = DescriptorParams(
                window=3 * 2 * w,
                half_width=w,
                count_threshold=2 * w,
                bin_threshold=1.0,
            )
            series = CountSeries(counts=list(range(60)))
            hists = histogram_stream(series, params)
            assert all(h.quiet_fraction == 1.0 for h in hists)
            assert detect_alarms(hists, params) == []

    @given(st.lists(st.integers(0, 30), min_size=15, max_size=50))
    @settings(max_examples=40, deadline=None)
    def test_histogram_mass(self, counts):
        params = DescriptorParams(window=15)
        hists = histogram_stream(CountSeries(counts=counts), params)
        for h in hists:
            assert sum(h.bins.values()) == params.codes_per_window
            assert 0.0 <= h.quiet_fraction <= 1.0


class TestFastPaths:
    def test_quiet_fraction_series_matches_histograms(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            w = int(rng.integers(1, 4))
            l = int(rng.integers(2 * w + 1, 31))
            t = int(rng.integers(0, 5))
            counts = rng.integers(0, 12, size=int(rng.integers(l, l + 80)))
            params = DescriptorParams(
                window=l, half_width=w, count_threshold=t
            )
            series = CountSeries(counts=counts)
            hists = histogram_stream(series, params)
            fast = quiet_fraction_series(counts, params)
            assert fast.tolist() == [h.quiet_fraction for h in hists]

    def test_alarm_frames_matches_detect_alarms(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            counts = rng.integers(0, 15, size=80)
            params = DescriptorParams(
                window=15, count_threshold=2, bin_threshold=0.85
            )
            series = CountSeries(counts=counts, first_frame=40, stride=10)
            expected = [
                a.frame
                for a in detect_alarms(histogram_stream(series, params), params)
            ]
            assert alarm_frames(series, params).tolist() == expected

    def test_alarm_flags_initial_state(self):
        flags = alarm_flags([0.6, 0.5, 0.9, 0.7], 0.85)
        assert flags.tolist() == [True, False, False, True]


class TestStreaming:
    def test_matches_batch(self):
        rng = np.random.default_rng(7)
        counts = rng.integers(0, 10, size=120)
        params = DescriptorParams(
            window=15, count_threshold=1, bin_threshold=0.85
        )
        series = CountSeries(counts=counts, first_frame=0, stride=20)
        batch_hists = histogram_stream(series, params)
        batch_alarms = detect_alarms(batch_hists, params)
        det = StreamingDetector(params)
        hists = []
        alarms = []
        for c in counts:
            hist = det.push(int(c))
            if hist is not None:
                hists.append(hist)
            if det.last_alarm is not None:
                alarms.append(det.last_alarm)
        assert [h.bins for h in hists] == [h.bins for h in batch_hists]
        assert [h.center_frame for h in hists] == [
            h.center_frame for h in batch_hists
        ]
        assert alarms == batch_alarms

    def test_warmup_yields_nothing(self):
        det = StreamingDetector(DescriptorParams(window=15))
        for i in range(14):
            assert det.push(3) is None

    def test_rejects_negative(self):
        det = StreamingDetector(DescriptorParams())
        with pytest.raises(ValueError):
            det.push(-1)


class TestEstimatorFacade:
    def test_sklearn_clone_roundtrip(self):
        det = TritAnomalyDetector(count_threshold=4, window=20)
        other = clone(det)
        assert other.get_params() == det.get_params()

    def test_predict_shape_and_values(self):
        det = TritAnomalyDetector(
            count_threshold=2, window=15, bin_threshold=0.9
        )
        counts = [4] * 20 + [12] * 20
        flags = det.fit(counts).predict(counts)
        assert flags.shape == (len(counts) - 15 + 1,)
        assert flags.sum() == 1

    def test_transform_is_quiet_fraction(self):
        det = TritAnomalyDetector(count_threshold=2, window=15)
        fractions = det.transform([5] * 30)
        assert np.all(fractions == 1.0)

    def test_detect_returns_events(self):
        det = TritAnomalyDetector(
            count_threshold=2, window=15, bin_threshold=0.9, skip=20
        )
        series = CountSeries(counts=[4] * 20 + [12] * 20, stride=20)
        alarms = det.detect(series)
        assert len(alarms) == 1
        assert alarms[0].frame % 20 == 0

    def test_invalid_params_fail_fit(self):
        with pytest.raises(ValueError):
            TritAnomalyDetector(window=4, half_width=2).fit([1] * 10)


class TestCountSeries:
    def test_frame_mapping(self):
        series = CountSeries(counts=[1, 2, 3], first_frame=10, stride=20)
        assert [series.frame_of(i) for i in range(3)] == [10, 30, 50]

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            CountSeries(counts=[1, -1])

    def test_fractional_counts_rejected(self):
        with pytest.raises(ValueError):
            CountSeries(counts=[1.5, 2.0])
