"""File formats: count/label/alarm CSVs, PGM frames, flat config files.

All CSV errors carry the 1-based line number of the offending row.
Frames travel either as a directory of binary PGM (P5) images named by
zero-padded frame index, or as one raw file of concatenated 8-bit
planes with a ``<file>.hdr`` sidecar holding width/height/count.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .counting import Frame
from .descriptor import CountSeries
from .evaluation import EvalReport
from .validation import round_half_up


class CsvFormatError(ValueError):
    """A malformed CSV row; ``line`` is the 1-based offending line."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}: line {line}: {message}")


def _parse_number(text: str, path, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CsvFormatError(
            path, line, f"{column} value {text!r} is not a number"
        ) from None


def read_counts_csv(path, frame_rate: float = 30.0) -> CountSeries:
    """Parse a ``frame,count`` CSV into a validated count series.

    Frames must be strictly increasing with a constant stride; counts
    must be non-negative.  Fractional counts are rounded half-up and
    the result is flagged as ``rounded``.
    """
    rows = _read_rows(path, ("frame", "count"))
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    frames = []
    counts = []
    rounded = False
    for line, row in rows:
        frame = _parse_number(row[0], path, line, "frame")
        if frame != int(frame) or frame < 0:
            raise CsvFormatError(
                path, line, f"frame {row[0]!r} must be a non-negative integer"
            )
        count = _parse_number(row[1], path, line, "count")
        if count < 0:
            raise CsvFormatError(path, line, f"count {row[1]!r} is negative")
        if count != int(count):
            rounded = True
            count = float(round_half_up(count))
        if frames and frame <= frames[-1]:
            raise CsvFormatError(
                path, line, "frames must be strictly increasing"
            )
        frames.append(int(frame))
        counts.append(int(count))
    if len(frames) == 1:
        stride = 1
    else:
        stride = frames[1] - frames[0]
        for i in range(1, len(frames) - 1):
            if frames[i + 1] - frames[i] != stride:
                raise CsvFormatError(
                    path,
                    rows[i + 1][0],
                    f"stride changed from {stride} to "
                    f"{frames[i + 1] - frames[i]}",
                )
    return CountSeries(
        counts=np.array(counts, dtype=np.int64),
        first_frame=frames[0],
        stride=stride,
        frame_rate=frame_rate,
        rounded=rounded,
    )


def write_counts_csv(path, series: CountSeries):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "count"])
        for i, count in enumerate(series.counts.tolist()):
            writer.writerow([series.frame_of(i), count])


def read_labels_csv(path) -> list[int]:
    """Parse a ``frame`` CSV into sorted label frames."""
    rows = _read_rows(path, ("frame",))
    labels = []
    for line, row in rows:
        frame = _parse_number(row[0], path, line, "frame")
        if frame != int(frame) or frame < 0:
            raise CsvFormatError(
                path, line, f"frame {row[0]!r} must be a non-negative integer"
            )
        labels.append(int(frame))
    if labels != sorted(labels):
        raise CsvFormatError(path, 1, "label frames must be sorted")
    return labels


def write_labels_csv(path, labels):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame"])
        for frame in labels:
            writer.writerow([int(frame)])


def read_alarms_csv(path) -> list[tuple[int, float]]:
    """Parse a ``frame,quiet_fraction`` CSV into (frame, fraction) rows."""
    rows = _read_rows(path, ("frame", "quiet_fraction"))
    alarms = []
    for line, row in rows:
        frame = _parse_number(row[0], path, line, "frame")
        fraction = _parse_number(row[1], path, line, "quiet_fraction")
        alarms.append((int(frame), fraction))
    return alarms


def write_alarms_csv(path, alarms):
    """Write alarm events (anything with frame/quiet_fraction) as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "quiet_fraction"])
        for alarm in alarms:
            writer.writerow(
                [int(alarm.frame), repr(float(alarm.quiet_fraction))]
            )


def write_descriptor_csv(path, histograms, flags):
    """Per-window timeline: window_index,center_frame,quiet_fraction,alarm."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["window_index", "center_frame", "quiet_fraction", "alarm"]
        )
        for hist, flag in zip(histograms, flags):
            writer.writerow(
                [
                    hist.window_index,
                    hist.center_frame,
                    repr(hist.quiet_fraction),
                    int(flag),
                ]
            )


REPORT_COLUMNS = (
    "video",
    "T",
    "L",
    "t_star",
    "tp",
    "fp",
    "fn",
    "precision",
    "recall",
    "f1",
)


def write_report_csv(path, rows):
    """Write per-video report rows (sequences matching REPORT_COLUMNS)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(list(row))


def report_row(video, params, report: EvalReport) -> list:
    """One report CSV row; ``params=None`` blanks the parameter columns
    (used for pooled rows whose folds were tuned separately)."""
    if params is None:
        t, window, t_star = "-", "-", "-"
    else:
        t = params.count_threshold
        window = params.window
        t_star = repr(float(params.bin_threshold))
    return [
        video,
        t,
        window,
        t_star,
        report.tp,
        report.fp,
        report.fn,
        repr(report.precision),
        repr(report.recall),
        repr(report.f1),
    ]


def read_manifest_csv(path) -> list[tuple[str, str, str]]:
    """Parse a dataset manifest: video_id,counts_path,labels_path."""
    rows = _read_rows(path, ("video_id", "counts_path", "labels_path"))
    return [(r[0], r[1], r[2]) for _, r in rows]


def _read_rows(path, header: tuple) -> list[tuple[int, list]]:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file") from None
        if [c.strip().lower() for c in first] != list(header):
            raise CsvFormatError(
                path,
                1,
                f"expected header {','.join(header)!r}, got "
                f"{','.join(first)!r}",
            )
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    path, line, f"expected {len(header)} columns, got {len(row)}"
                )
            rows.append((line, [c.strip() for c in row]))
    return rows


# ---------------------------------------------------------------------------
# frames

def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        if data[pos : pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    pos += 1  # single whitespace after maxval
    if len(data) - pos < width * height:
        raise ValueError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(
        data, dtype=np.uint8, count=width * height, offset=pos
    )
    return pixels.reshape(height, width).copy()


def write_pgm(path, pixels: np.ndarray):
    pixels = np.asarray(pixels, dtype=np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pixels.tobytes())


def write_frames_dir(path, frames):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for frame in frames:
        write_pgm(path / f"{frame.index:06d}.pgm", frame.pixels)


def read_frames(path) -> list[Frame]:
    """Load frames from a PGM directory or a raw file with sidecar.

    Directory entries are ordered by the integer in their file name;
    dimension drift aborts with the offending file named.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(
            (p for p in path.iterdir() if p.suffix.lower() == ".pgm"),
            key=_frame_sort_key,
        )
        if not files:
            raise ValueError(f"no frames found in {path}")
        frames = []
        shape = None
        for i, file in enumerate(files):
            pixels = read_pgm(file)
            if shape is None:
                shape = pixels.shape
            elif pixels.shape != shape:
                raise ValueError(
                    f"{file}: frame size {pixels.shape} differs from "
                    f"{shape}"
                )
            frames.append(Frame(pixels=pixels, index=i))
        return frames
    return _read_raw_frames(path)


def _frame_sort_key(path: Path):
    match = re.search(r"(\d+)", path.stem)
    return (int(match.group(1)) if match else 0, path.name)


def _read_raw_frames(path: Path) -> list[Frame]:
    sidecar = Path(str(path) + ".hdr")
    if not sidecar.exists():
        raise ValueError(f"missing sidecar header {sidecar}")
    header = read_config(sidecar)
    try:
        width = int(header["width"])
        height = int(header["height"])
        count = int(header["count"])
    except KeyError as missing:
        raise ValueError(f"{sidecar}: missing key {missing}") from None
    data = np.fromfile(path, dtype=np.uint8)
    expected = width * height * count
    if data.size != expected:
        raise ValueError(
            f"{path}: expected {expected} bytes for {count} frames of "
            f"{width}x{height}, found {data.size}"
        )
    planes = data.reshape(count, height, width)
    return [Frame(pixels=planes[i], index=i) for i in range(count)]


def write_raw_frames(path, frames):
    frames = list(frames)
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(np.asarray(frame.pixels, dtype=np.uint8).tobytes())
    first = frames[0]
    write_config(
        Path(str(path) + ".hdr"),
        {"width": first.width, "height": first.height, "count": len(frames)},
    )


# ---------------------------------------------------------------------------
# flat key=value config files

def read_keyvalues(path) -> list[tuple[str, str]]:
    """All key=value pairs of a flat config file, in file order.

    Blank lines and '#' comments are skipped; keys may repeat.
    """
    pairs = []
    for line_no, raw in enumerate(
        Path(path).read_text().splitlines(), start=1
    ):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(
                f"{path}: line {line_no}: expected key=value, got {raw!r}"
            )
        key, _, value = line.partition("=")
        pairs.append((key.strip(), value.strip()))
    return pairs


def read_config(path) -> dict:
    """Flat key=value file as a dict (last occurrence wins)."""
    return dict(read_keyvalues(path))


def write_config(path, values: dict):
    lines = [f"{key}={values[key]}" for key in values]
    Path(path).write_text("\n".join(lines) + "\n")
