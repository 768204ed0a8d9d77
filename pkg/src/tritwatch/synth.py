"""Synthetic inputs with known ground truth.

Two generators: count series with injected group-dynamics events
(fast events carry an anomaly label, slow ramps do not), and grayscale
frame sequences of moving blobs with a per-frame true group count.
Both are bit-identical for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .counting import Frame
from .descriptor import CountSeries, DescriptorParams, select_frames
from .validation import require, round_half_up

EVENT_KINDS = (
    "fast_formation",
    "fast_breakup",
    "slow_formation",
    "slow_breakup",
)


@dataclass(frozen=True)
class CountEvent:
    """One group-dynamics event in a count scenario.

    ``delta`` is applied linearly over ``ramp`` frames starting at
    ``frame`` (ramp 1 means a hard step).  Fast kinds mark an anomaly
    at the event frame; slow kinds change the count without one.
    """

    frame: int
    kind: str
    delta: int
    ramp: int = 1

    def __post_init__(self):
        require(self.frame >= 0, "event frame must be >= 0")
        require(self.kind in EVENT_KINDS, f"unknown event kind: {self.kind!r}")
        require(self.ramp >= 1, "event ramp must be >= 1")

    @property
    def is_fast(self) -> bool:
        return self.kind.startswith("fast_")


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for a synthetic count series."""

    duration: int
    base_groups: int
    events: tuple = ()
    noise: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        require(self.duration >= 1, "duration must be >= 1")
        require(self.base_groups >= 0, "base_groups must be >= 0")
        require(self.noise >= 0, "noise must be >= 0")
        frames = [e.frame for e in self.events]
        require(frames == sorted(frames), "events must be sorted by frame")
        require(
            all(e.frame < self.duration for e in self.events),
            "event frames must lie inside the scenario duration",
        )


def generate_count_series(
    spec: ScenarioSpec, params: DescriptorParams
) -> tuple[CountSeries, list[int]]:
    """Sample a scenario every ``params.skip`` frames.

    Returns the count series together with the label frames of its
    fast events.  Jitter is uniform in [-noise, +noise]; counts are
    clamped at zero after jitter.
    """
    frames = select_frames(spec.duration, params)
    values = np.full(len(frames), float(spec.base_groups))
    for event in spec.events:
        progress = np.clip((frames - event.frame + 1) / event.ramp, 0.0, 1.0)
        values += event.delta * progress
    counts = round_half_up(values)
    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        counts = counts + rng.integers(
            -spec.noise, spec.noise + 1, size=len(counts)
        )
    counts = np.maximum(counts, 0)
    series = CountSeries(
        counts=counts,
        first_frame=0,
        stride=params.skip,
        frame_rate=params.frame_rate,
    )
    labels = [e.frame for e in spec.events if e.is_fast]
    return series, labels


@dataclass(frozen=True)
class BlobSpec:
    """One blob: linear trajectory, radius, intensity, lifetime."""

    x0: float
    y0: float
    x1: float
    y1: float
    radius: float
    intensity: int
    appear: int = 0
    vanish: int | None = None  # exclusive; None = whole scene

    def __post_init__(self):
        require(self.radius >= 1, "blob radius must be >= 1")
        require(0 <= self.intensity <= 255, "intensity must be in [0, 255]")
        require(self.appear >= 0, "appear frame must be >= 0")

    def center(self, frame: int, n_frames: int) -> tuple[float, float]:
        span = max(n_frames - 1, 1)
        t = frame / span
        return (
            self.x0 + (self.x1 - self.x0) * t,
            self.y0 + (self.y1 - self.y0) * t,
        )

    def active(self, frame: int, n_frames: int) -> bool:
        end = n_frames if self.vanish is None else self.vanish
        return self.appear <= frame < end


@dataclass(frozen=True)
class BlobSceneSpec:
    """Recipe for a rendered blob scene."""

    width: int
    height: int
    n_frames: int
    blobs: tuple = ()
    background: int = 20
    noise: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "blobs", tuple(self.blobs))
        require(self.width >= 8 and self.height >= 8, "scene must be >= 8x8")
        require(self.n_frames >= 1, "n_frames must be >= 1")
        require(0 <= self.background <= 255, "background must be in [0, 255]")
        require(self.noise >= 0, "noise must be >= 0")
        for i, blob in enumerate(self.blobs):
            for x, y in ((blob.x0, blob.y0), (blob.x1, blob.y1)):
                inside = (
                    blob.radius <= x <= self.width - 1 - blob.radius
                    and blob.radius <= y <= self.height - 1 - blob.radius
                )
                require(inside, f"blob {i} trajectory leaves the frame")


def true_group_count(spec: BlobSceneSpec, frame: int) -> int:
    """Scheduled group count: overlapping active blobs merge into one."""
    active = [
        (b.center(frame, spec.n_frames), b.radius)
        for b in spec.blobs
        if b.active(frame, spec.n_frames)
    ]
    n = len(active)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        (xi, yi), ri = active[i]
        for j in range(i + 1, n):
            (xj, yj), rj = active[j]
            if np.hypot(xi - xj, yi - yj) <= ri + rj:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})


def parse_scenario_file(path):
    """Parse a flat key=value scenario file.

    The ``type`` key selects the recipe: ``counts`` (ScenarioSpec with
    repeated ``event=frame,kind,delta,ramp`` lines) or ``blobs``
    (BlobSceneSpec with repeated
    ``blob=x0,y0,x1,y1,radius,intensity[,appear,vanish]`` lines).
    """
    from .io import read_keyvalues

    pairs = read_keyvalues(path)
    values = {k: v for k, v in pairs if k not in ("event", "blob")}
    kind = values.get("type")
    try:
        if kind == "counts":
            events = [
                _parse_event(v) for k, v in pairs if k == "event"
            ]
            return ScenarioSpec(
                duration=int(values["duration"]),
                base_groups=int(values["base_groups"]),
                events=tuple(events),
                noise=int(values.get("noise", 0)),
                seed=int(values.get("seed", 0)),
            )
        if kind == "blobs":
            blobs = [_parse_blob(v) for k, v in pairs if k == "blob"]
            return BlobSceneSpec(
                width=int(values["width"]),
                height=int(values["height"]),
                n_frames=int(values["frames"]),
                blobs=tuple(blobs),
                background=int(values.get("background", 20)),
                noise=int(values.get("noise", 0)),
                seed=int(values.get("seed", 0)),
            )
    except KeyError as missing:
        raise ValueError(f"{path}: missing key {missing}") from None
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    raise ValueError(
        f"{path}: key 'type' must be 'counts' or 'blobs', got {kind!r}"
    )


def _parse_event(text: str) -> CountEvent:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError(
            f"event needs frame,kind,delta,ramp, got {text!r}"
        )
    return CountEvent(
        frame=int(parts[0]),
        kind=parts[1],
        delta=int(parts[2]),
        ramp=int(parts[3]),
    )


def _parse_blob(text: str) -> BlobSpec:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (6, 8):
        raise ValueError(
            f"blob needs x0,y0,x1,y1,radius,intensity[,appear,vanish], "
            f"got {text!r}"
        )
    blob = BlobSpec(
        x0=float(parts[0]),
        y0=float(parts[1]),
        x1=float(parts[2]),
        y1=float(parts[3]),
        radius=float(parts[4]),
        intensity=int(parts[5]),
    )
    if len(parts) == 8:
        blob = replace(blob, appear=int(parts[6]), vanish=int(parts[7]))
    return blob


def write_scenario_file(path, spec):
    """Serialise a scenario back to its flat key=value form."""
    lines = []
    if isinstance(spec, ScenarioSpec):
        lines += [
            "type=counts",
            f"duration={spec.duration}",
            f"base_groups={spec.base_groups}",
            f"noise={spec.noise}",
            f"seed={spec.seed}",
        ]
        lines += [
            f"event={e.frame},{e.kind},{e.delta},{e.ramp}"
            for e in spec.events
        ]
    elif isinstance(spec, BlobSceneSpec):
        lines += [
            "type=blobs",
            f"width={spec.width}",
            f"height={spec.height}",
            f"frames={spec.n_frames}",
            f"background={spec.background}",
            f"noise={spec.noise}",
            f"seed={spec.seed}",
        ]
        for b in spec.blobs:
            tail = "" if b.vanish is None and b.appear == 0 else (
                f",{b.appear},{b.vanish if b.vanish is not None else spec.n_frames}"
            )
            lines.append(
                f"blob={b.x0},{b.y0},{b.x1},{b.y1},{b.radius},"
                f"{b.intensity}{tail}"
            )
    else:
        raise TypeError(f"not a scenario spec: {type(spec)!r}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n")


def generate_blob_frames(
    spec: BlobSceneSpec,
) -> tuple[list[Frame], np.ndarray]:
    """Render a blob scene; returns (frames, per-frame true counts).

    Blobs are anti-aliased discs over a uniform background (one pixel
    of edge feathering); two blobs whose discs touch count as a single
    group.
    """
    rng = np.random.default_rng(spec.seed)
    ys, xs = np.meshgrid(
        np.arange(spec.height, dtype=np.float64),
        np.arange(spec.width, dtype=np.float64),
        indexing="ij",
    )
    frames = []
    counts = np.zeros(spec.n_frames, dtype=np.int64)
    for f in range(spec.n_frames):
        img = np.full(
            (spec.height, spec.width), float(spec.background)
        )
        for blob in spec.blobs:
            if not blob.active(f, spec.n_frames):
                continue
            cx, cy = blob.center(f, spec.n_frames)
            dist = np.hypot(xs - cx, ys - cy)
            coverage = np.clip(blob.radius + 0.5 - dist, 0.0, 1.0)
            img = np.maximum(
                img, spec.background + (blob.intensity - spec.background) * coverage
            )
        if spec.noise > 0:
            img = img + rng.integers(
                -spec.noise, spec.noise + 1, size=img.shape
            )
        pixels = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
        frames.append(Frame(pixels=pixels, index=f))
        counts[f] = true_group_count(spec, f)
    return frames, counts
