import numpy as np
import pytest

from tritwatch.counting import Frame
from tritwatch.descriptor import CountSeries
from tritwatch.evaluation import compute_metrics
from tritwatch.io import (
    CsvFormatError,
    read_alarms_csv,
    read_config,
    read_counts_csv,
    read_frames,
    read_keyvalues,
    read_labels_csv,
    read_manifest_csv,
    read_pgm,
    report_row,
    write_alarms_csv,
    write_config,
    write_counts_csv,
    write_frames_dir,
    write_labels_csv,
    write_pgm,
    write_raw_frames,
)


class TestCountsCsv:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,3\n20,3\n40,5\n")
        series = read_counts_csv(path)
        assert series.counts.tolist() == [3, 3, 5]
        assert series.stride == 20
        assert series.first_frame == 0
        assert not series.rounded

    def test_round_trip(self, tmp_path):
        series = CountSeries(
            counts=[1, 4, 2, 8], first_frame=60, stride=30
        )
        path = tmp_path / "counts.csv"
        write_counts_csv(path, series)
        back = read_counts_csv(path)
        assert back.counts.tolist() == series.counts.tolist()
        assert back.first_frame == 60
        assert back.stride == 30

    def test_stride_jump_names_line(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,1\n20,1\n50,1\n")
        with pytest.raises(CsvFormatError) as err:
            read_counts_csv(path)
        assert err.value.line == 4
        assert "stride" in str(err.value)

    def test_negative_count_names_line(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,1\n20,-1\n")
        with pytest.raises(CsvFormatError) as err:
            read_counts_csv(path)
        assert err.value.line == 3

    def test_non_monotone_frames(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,1\n0,1\n")
        with pytest.raises(CsvFormatError, match="increasing"):
            read_counts_csv(path)

    def test_fractional_count_rounds_half_up(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,1.5\n20,2.4\n")
        series = read_counts_csv(path)
        assert series.counts.tolist() == [2, 2]
        assert series.rounded

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("t,n\n0,1\n")
        with pytest.raises(CsvFormatError) as err:
            read_counts_csv(path)
        assert err.value.line == 1

    def test_garbage_value(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n0,x\n")
        with pytest.raises(CsvFormatError) as err:
            read_counts_csv(path)
        assert err.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n")
        with pytest.raises(CsvFormatError, match="no data"):
            read_counts_csv(path)

    def test_single_row(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("frame,count\n40,7\n")
        series = read_counts_csv(path)
        assert series.counts.tolist() == [7]
        assert series.first_frame == 40


class TestLabelsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "labels.csv"
        write_labels_csv(path, [100, 2000, 35000])
        assert read_labels_csv(path) == [100, 2000, 35000]

    def test_unsorted_rejected(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("frame\n500\n100\n")
        with pytest.raises(CsvFormatError, match="sorted"):
            read_labels_csv(path)

    def test_empty_labels_ok(self, tmp_path):
        path = tmp_path / "labels.csv"
        write_labels_csv(path, [])
        assert read_labels_csv(path) == []


class TestAlarmsCsv:
    def test_round_trip(self, tmp_path):
        from tritwatch.descriptor import AlarmEvent

        alarms = [AlarmEvent(frame=140, quiet_fraction=0.625)]
        path = tmp_path / "alarms.csv"
        write_alarms_csv(path, alarms)
        back = read_alarms_csv(path)
        assert back == [(140, 0.625)]


class TestManifest:
    def test_parse(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "video_id,counts_path,labels_path\nv1,a.csv,b.csv\nv2,c.csv,d.csv\n"
        )
        assert read_manifest_csv(path) == [
            ("v1", "a.csv", "b.csv"),
            ("v2", "c.csv", "d.csv"),
        ]


class TestReportRow:
    def test_with_params(self):
        from tritwatch.descriptor import DescriptorParams

        row = report_row("v1", DescriptorParams(), compute_metrics(1, 0, 0))
        assert row[0] == "v1"
        assert row[1] == 3 and row[2] == 15
        assert row[4:7] == [1, 0, 0]

    def test_pooled_without_params(self):
        row = report_row("pooled", None, compute_metrics(0, 0, 0))
        assert row[1:4] == ["-", "-", "-"]


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        pixels = rng.integers(0, 255, size=(24, 31)).astype(np.uint8)
        path = tmp_path / "frame.pgm"
        write_pgm(path, pixels)
        assert np.array_equal(read_pgm(path), pixels)

    def test_comment_skipped(self, tmp_path):
        path = tmp_path / "c.pgm"
        body = bytes(range(16))
        path.write_bytes(b"P5\n# a comment\n4 4\n255\n" + body)
        img = read_pgm(path)
        assert img.shape == (4, 4)
        assert img.flatten().tolist() == list(range(16))

    def test_rejects_p6(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        with pytest.raises(ValueError, match="P5"):
            read_pgm(path)

    def test_rejects_16bit(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(ValueError, match="16-bit"):
            read_pgm(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
        with pytest.raises(ValueError, match="truncated"):
            read_pgm(path)


class TestFrameIngestion:
    def test_pgm_dir_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        frames = [
            Frame(pixels=rng.integers(0, 255, size=(16, 20)).astype(np.uint8), index=i)
            for i in range(5)
        ]
        write_frames_dir(tmp_path / "frames", frames)
        back = read_frames(tmp_path / "frames")
        assert len(back) == 5
        assert all(
            np.array_equal(a.pixels, b.pixels) for a, b in zip(frames, back)
        )
        assert [f.index for f in back] == list(range(5))

    def test_empty_dir(self, tmp_path):
        (tmp_path / "frames").mkdir()
        with pytest.raises(ValueError, match="no frames"):
            read_frames(tmp_path / "frames")

    def test_dimension_drift_names_file(self, tmp_path):
        d = tmp_path / "frames"
        d.mkdir()
        write_pgm(d / "000000.pgm", np.zeros((16, 16), dtype=np.uint8))
        write_pgm(d / "000001.pgm", np.zeros((16, 18), dtype=np.uint8))
        with pytest.raises(ValueError, match="000001.pgm"):
            read_frames(d)

    def test_raw_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        frames = [
            Frame(pixels=rng.integers(0, 255, size=(12, 10)).astype(np.uint8), index=i)
            for i in range(3)
        ]
        path = tmp_path / "frames.raw"
        write_raw_frames(path, frames)
        back = read_frames(path)
        assert len(back) == 3
        assert all(
            np.array_equal(a.pixels, b.pixels) for a, b in zip(frames, back)
        )

    def test_raw_missing_sidecar(self, tmp_path):
        path = tmp_path / "frames.raw"
        path.write_bytes(bytes(100))
        with pytest.raises(ValueError, match="sidecar"):
            read_frames(path)

    def test_raw_size_mismatch(self, tmp_path):
        path = tmp_path / "frames.raw"
        path.write_bytes(bytes(100))
        (tmp_path / "frames.raw.hdr").write_text(
            "width=10\nheight=12\ncount=3\n"
        )
        with pytest.raises(ValueError, match="expected 360 bytes"):
            read_frames(path)


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        write_config(path, {"F": 20, "t_star": 0.85, "counter": "bd"})
        assert read_config(path) == {
            "F": "20",
            "t_star": "0.85",
            "counter": "bd",
        }

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\n\nF = 20\n  T=3  \n")
        assert read_config(path) == {"F": "20", "T": "3"}

    def test_repeated_keys_preserved_in_order(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("event=1\nevent=2\n")
        assert read_keyvalues(path) == [("event", "1"), ("event", "2")]

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("justaword\n")
        with pytest.raises(ValueError, match="line 1"):
            read_config(path)
