"""Command-line pipeline: ingest, count, detect, evaluate, tune, synth.

Stage outputs are plain CSV so any stage can be swapped for an
external tool (counts produced elsewhere enter at ``detect``).  Every
run writes ``run_manifest.cfg`` echoing the fully resolved
configuration.  Exit codes: 0 success, 1 usage error, 2 data error,
3 insufficient data.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .counting import (
    COUNTER_NAMES,
    BlobGroupCounter,
    CounterConfig,
    count_groups_blob,
    count_groups_cof,
)
from .descriptor import (
    CountSeries,
    DescriptorParams,
    InsufficientDataError,
    alarm_flags,
    detect_alarms,
    histogram_stream,
    select_frames,
)
from .evaluation import (
    GridSpec,
    MatchConfig,
    compute_metrics,
    evaluate_params,
    grid_search_supervised,
    leave_one_out,
    match_alarms,
)
from .svg import render_timeline
from .synth import (
    BlobSceneSpec,
    ScenarioSpec,
    generate_blob_frames,
    generate_count_series,
    parse_scenario_file,
)

log = logging.getLogger("tritwatch")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INSUFFICIENT = 3

# flag/config keys resolved into DescriptorParams
_PARAM_KEYS = {
    "F": ("skip", int),
    "W": ("half_width", int),
    "L": ("window", int),
    "T": ("count_threshold", int),
    "t_star": ("bin_threshold", float),
    "frame_rate": ("frame_rate", float),
}
_COUNTER_FIELDS = {f.name: f for f in dataclasses.fields(CounterConfig)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common_flags(parser):
    parser.add_argument("--F", type=int, help="frames skipped between counts")
    parser.add_argument("--W", type=int, help="inner half width")
    parser.add_argument("--L", type=int, help="outer window size in samples")
    parser.add_argument("--T", type=int, help="count change tolerance")
    parser.add_argument(
        "--t-star", dest="t_star", type=float, help="quiet-bin alarm threshold"
    )
    parser.add_argument("--frame-rate", dest="frame_rate", type=float)
    parser.add_argument(
        "--window-seconds",
        dest="window_seconds",
        type=float,
        help="total alarm-matching window",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="tritwatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_count = sub.add_parser("count", help="frames -> counts CSV")
    p_count.add_argument("frames", help="PGM directory or raw frame file")
    p_count.add_argument("--counter", choices=COUNTER_NAMES)
    _add_common_flags(p_count)

    p_detect = sub.add_parser("detect", help="counts CSV -> alarms")
    p_detect.add_argument("counts")
    p_detect.add_argument("--labels", help="labels CSV (SVG shading only)")
    p_detect.add_argument(
        "--svg", action="store_true", help="also write timeline.svg"
    )
    _add_common_flags(p_detect)

    p_eval = sub.add_parser("eval", help="alarms + labels -> report CSV")
    p_eval.add_argument("alarms")
    p_eval.add_argument("labels")
    p_eval.add_argument("--video", default="run", help="video id in the report")
    _add_common_flags(p_eval)

    p_tune = sub.add_parser("tune", help="grid search over a dataset")
    p_tune.add_argument(
        "manifest", help="CSV: video_id,counts_path,labels_path"
    )
    p_tune.add_argument("--mode", choices=("supervised", "loo"))
    p_tune.add_argument("--grid", help="grid file: T=..., L=..., t_star=...")
    p_tune.add_argument("--workers", type=int)
    _add_common_flags(p_tune)

    p_synth = sub.add_parser("synth", help="materialise a scenario spec")
    p_synth.add_argument("spec")
    _add_common_flags(p_synth)

    p_run = sub.add_parser(
        "run", help="count + detect + eval in one invocation"
    )
    p_run.add_argument("input", help="frames path or counts CSV")
    p_run.add_argument("labels")
    p_run.add_argument("--counter", choices=COUNTER_NAMES)
    p_run.add_argument("--svg", action="store_true")
    _add_common_flags(p_run)

    return parser


# ---------------------------------------------------------------------------
# configuration resolution

def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return io.read_config(args.config)
    return {}

def _resolve(args, config: dict, key: str, cast, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return cast(config[key])
    return default


def _resolve_params(args, config: dict) -> DescriptorParams:
    defaults = DescriptorParams()
    kwargs = {}
    for key, (field, cast) in _PARAM_KEYS.items():
        kwargs[field] = _resolve(
            args, config, key, cast, getattr(defaults, field)
        )
    return DescriptorParams(**kwargs)


def _resolve_counter_config(config: dict) -> CounterConfig:
    kwargs = {}
    for name, field in _COUNTER_FIELDS.items():
        if name not in config:
            continue
        raw = config[name]
        if name == "feature_weights":
            kwargs[name] = tuple(float(v) for v in raw.split(","))
        elif name == "morph_shape":
            kwargs[name] = raw
        elif isinstance(field.default, float):
            kwargs[name] = float(raw)
        else:
            kwargs[name] = int(raw)
    return CounterConfig(**kwargs)


def _resolve_match(args, config: dict, params: DescriptorParams) -> MatchConfig:
    window_seconds = _resolve(args, config, "window_seconds", float, 27.0)
    pre = config.get("pre_seconds")
    post = config.get("post_seconds")
    return MatchConfig(
        window_seconds=window_seconds,
        frame_rate=params.frame_rate,
        pre_seconds=float(pre) if pre is not None else None,
        post_seconds=float(post) if post is not None else None,
    )


def _resolve_grid(args, config: dict) -> GridSpec:
    path = _resolve(args, config, "grid", str, None)
    if path is None:
        return GridSpec()
    raw = io.read_config(path)
    spec = {}
    for key, field, cast in (
        ("T", "count_thresholds", int),
        ("L", "windows", int),
        ("t_star", "bin_thresholds", float),
    ):
        if key in raw:
            spec[field] = tuple(cast(v) for v in raw[key].split(","))
    return GridSpec(**spec)


def _write_manifest(out: Path, entries: dict):
    ordered = {"command": entries.pop("command")}
    ordered.update({k: entries[k] for k in sorted(entries)})
    io.write_config(out / "run_manifest.cfg", ordered)


def _manifest_entries(args, params, match=None, counter_config=None) -> dict:
    entries = {
        "command": args.command,
        "F": params.skip,
        "W": params.half_width,
        "L": params.window,
        "T": params.count_threshold,
        "t_star": repr(float(params.bin_threshold)),
        "frame_rate": repr(float(params.frame_rate)),
    }
    if match is not None:
        entries["window_seconds"] = repr(float(match.window_seconds))
        if match.pre_seconds is not None:
            entries["pre_seconds"] = repr(float(match.pre_seconds))
        if match.post_seconds is not None:
            entries["post_seconds"] = repr(float(match.post_seconds))
    if counter_config is not None:
        for name in _COUNTER_FIELDS:
            value = getattr(counter_config, name)
            if name == "feature_weights":
                value = ",".join(repr(float(v)) for v in value)
            entries[name] = value
    return entries


# ---------------------------------------------------------------------------
# stages (shared between the staged subcommands and `run`)

def _stage_count(frames_path, counter, params, counter_config, out: Path):
    frames = io.read_frames(frames_path)
    indices = select_frames(len(frames), params).tolist()
    selected = [frames[i] for i in indices]
    log.info(
        "counting %d of %d frames with %s", len(selected), len(frames), counter
    )
    counts = []
    times = []
    if counter == "bd":
        background = BlobGroupCounter(counter_config).fit(selected).background_
        for idx, frame in zip(indices, selected):
            t0 = time.perf_counter()
            count = count_groups_blob(frame, background, counter_config)
            times.append(time.perf_counter() - t0)
            log.info(
                "frame %d: count=%d (%.2f ms)", idx, count, 1000 * times[-1]
            )
            counts.append(count)
    else:
        if len(selected) < 2:
            raise InsufficientDataError(
                "optical-flow counting needs at least 2 selected frames"
            )
        for idx, prev, nxt in zip(indices, selected[:-1], selected[1:]):
            t0 = time.perf_counter()
            count = count_groups_cof(prev, nxt, counter_config)
            times.append(time.perf_counter() - t0)
            log.info(
                "frame %d: count=%d (%.2f ms)", idx, count, 1000 * times[-1]
            )
            counts.append(count)
    log.info("per-frame mean: %.2f ms", 1000 * sum(times) / len(times))
    series = CountSeries(
        counts=counts,
        first_frame=0,
        stride=params.skip,
        frame_rate=params.frame_rate,
    )
    counts_path = out / "counts.csv"
    io.write_counts_csv(counts_path, series)
    return counts_path


def _stage_detect(
    counts_path, params, out: Path, labels_path=None, svg=False
):
    series = io.read_counts_csv(counts_path, frame_rate=params.frame_rate)
    histograms = histogram_stream(series, params)
    alarms = detect_alarms(histograms, params)
    fractions = np.array([h.quiet_fraction for h in histograms])
    flags = alarm_flags(fractions, params.bin_threshold)
    io.write_descriptor_csv(out / "descriptor.csv", histograms, flags)
    alarms_path = out / "alarms.csv"
    io.write_alarms_csv(alarms_path, alarms)
    log.info("%d windows, %d alarms", len(histograms), len(alarms))
    if svg:
        labels = io.read_labels_csv(labels_path) if labels_path else []
        match = MatchConfig(frame_rate=params.frame_rate)
        text = render_timeline(series, histograms, alarms, labels, match)
        (out / "timeline.svg").write_text(text)
    return alarms_path


def _stage_eval(
    alarms_path, labels_path, params, match, out: Path, video="run"
):
    alarms = [frame for frame, _ in io.read_alarms_csv(alarms_path)]
    labels = io.read_labels_csv(labels_path)
    report = compute_metrics(*match_alarms(alarms, labels, match))
    rows = [
        io.report_row(video, params, report),
        io.report_row("pooled", params, report),
    ]
    report_path = out / "report.csv"
    io.write_report_csv(report_path, rows)
    log.info(
        "tp=%d fp=%d fn=%d precision=%.4f recall=%.4f f1=%.4f",
        report.tp,
        report.fp,
        report.fn,
        report.precision,
        report.recall,
        report.f1,
    )
    return report_path


# ---------------------------------------------------------------------------
# subcommands

def _cmd_count(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    counter = _resolve(args, config, "counter", str, "bd")
    if counter not in COUNTER_NAMES:
        raise ValueError(f"counter must be one of {COUNTER_NAMES}")
    counter_config = _resolve_counter_config(config)
    out = _ensure_out(args.out)
    entries = _manifest_entries(args, params, counter_config=counter_config)
    entries.update({"input": args.frames, "counter": counter, "out": str(out)})
    _write_manifest(out, entries)
    _stage_count(args.frames, counter, params, counter_config, out)
    return EXIT_OK


def _cmd_detect(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    out = _ensure_out(args.out)
    entries = _manifest_entries(args, params)
    entries.update({"input": args.counts, "out": str(out), "svg": int(args.svg)})
    if args.labels:
        entries["labels"] = args.labels
    _write_manifest(out, entries)
    _stage_detect(args.counts, params, out, args.labels, args.svg)
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    match = _resolve_match(args, config, params)
    out = _ensure_out(args.out)
    entries = _manifest_entries(args, params, match=match)
    entries.update(
        {
            "input": args.alarms,
            "labels": args.labels,
            "out": str(out),
            "video": args.video,
        }
    )
    _write_manifest(out, entries)
    _stage_eval(args.alarms, args.labels, params, match, out, args.video)
    return EXIT_OK


def _cmd_tune(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    match = _resolve_match(args, config, params)
    grid = _resolve_grid(args, config)
    mode = _resolve(args, config, "mode", str, "supervised")
    if mode not in ("supervised", "loo"):
        raise ValueError("mode must be 'supervised' or 'loo'")
    workers = _resolve(args, config, "workers", int, 1)
    out = _ensure_out(args.out)
    ids, videos = _load_dataset(args.manifest, params.frame_rate)
    entries = _manifest_entries(args, params, match=match)
    entries.update(
        {
            "input": args.manifest,
            "out": str(out),
            "mode": mode,
            "workers": workers,
            "grid_T": ",".join(str(v) for v in grid.count_thresholds),
            "grid_L": ",".join(str(v) for v in grid.windows),
            "grid_t_star": ",".join(repr(v) for v in grid.bin_thresholds),
        }
    )
    _write_manifest(out, entries)

    if mode == "supervised":
        result = grid_search_supervised(
            videos, grid=grid, fixed=params, match=match, n_jobs=workers
        )
        log.info(
            "evaluated %d combinations; best f1=%.4f",
            result.n_combinations,
            result.best_report.f1,
        )
        best = result.best_params
        io.write_config(
            out / "best_params.cfg",
            {
                "T": best.count_threshold,
                "L": best.window,
                "t_star": repr(float(best.bin_threshold)),
                "F": best.skip,
                "W": best.half_width,
                "frame_rate": repr(float(best.frame_rate)),
            },
        )
        rows = []
        for video_id, (series, labels) in zip(ids, videos):
            tp, fp, fn = evaluate_params(series, labels, best, match)
            rows.append(
                io.report_row(video_id, best, compute_metrics(tp, fp, fn))
            )
        rows.append(io.report_row("pooled", best, result.best_report))
        io.write_report_csv(out / "report.csv", rows)
    else:
        result = leave_one_out(
            videos, grid=grid, fixed=params, match=match, n_jobs=workers
        )
        log.info(
            "%d folds of %d combinations; pooled f1=%.4f",
            len(result.folds),
            grid.size,
            result.pooled_report.f1,
        )
        rows = [
            io.report_row(ids[fold.held_out], fold.params, fold.report)
            for fold in result.folds
        ]
        rows.append(io.report_row("pooled", None, result.pooled_report))
        io.write_report_csv(out / "report.csv", rows)
        with open(out / "param_stats.csv", "w", newline="") as fh:
            fh.write("parameter,mean,std\n")
            for name in ("count_threshold", "window", "bin_threshold"):
                fh.write(
                    f"{name},{repr(result.parameter_mean[name])},"
                    f"{repr(result.parameter_std[name])}\n"
                )
    return EXIT_OK


def _cmd_synth(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    out = _ensure_out(args.out)
    spec = parse_scenario_file(args.spec)
    entries = _manifest_entries(args, params)
    entries.update({"input": args.spec, "out": str(out)})
    _write_manifest(out, entries)
    if isinstance(spec, ScenarioSpec):
        series, labels = generate_count_series(spec, params)
        io.write_counts_csv(out / "counts.csv", series)
        io.write_labels_csv(out / "labels.csv", labels)
        log.info(
            "wrote %d samples, %d labels", len(series), len(labels)
        )
    else:
        frames, true_counts = generate_blob_frames(spec)
        io.write_frames_dir(out / "frames", frames)
        with open(out / "true_counts.csv", "w", newline="") as fh:
            fh.write("frame,count\n")
            for i, count in enumerate(true_counts.tolist()):
                fh.write(f"{i},{count}\n")
        log.info("wrote %d frames", len(frames))
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _load_config(args)
    params = _resolve_params(args, config)
    match = _resolve_match(args, config, params)
    counter = _resolve(args, config, "counter", str, "bd")
    counter_config = _resolve_counter_config(config)
    out = _ensure_out(args.out)
    entries = _manifest_entries(
        args, params, match=match, counter_config=counter_config
    )
    entries.update(
        {
            "input": args.input,
            "labels": args.labels,
            "counter": counter,
            "out": str(out),
        }
    )
    _write_manifest(out, entries)
    input_path = Path(args.input)
    if input_path.is_dir() or input_path.suffix != ".csv":
        counts_path = _stage_count(
            args.input, counter, params, counter_config, out
        )
    else:
        counts_path = input_path
    alarms_path = _stage_detect(
        counts_path, params, out, args.labels, args.svg
    )
    _stage_eval(alarms_path, args.labels, params, match, out)
    return EXIT_OK


def _load_dataset(manifest_path, frame_rate):
    rows = io.read_manifest_csv(manifest_path)
    base = Path(manifest_path).parent
    resolved = [
        (video_id, _resolve_path(base, c), _resolve_path(base, l))
        for video_id, c, l in rows
    ]
    missing = [
        str(p)
        for _, counts_file, labels_file in resolved
        for p in (counts_file, labels_file)
        if not p.exists()
    ]
    if missing:
        raise ValueError(
            "manifest references missing files: " + ", ".join(missing)
        )
    ids = []
    videos = []
    for video_id, counts_file, labels_file in resolved:
        series = io.read_counts_csv(counts_file, frame_rate=frame_rate)
        labels = io.read_labels_csv(labels_file)
        ids.append(video_id)
        videos.append((series, labels))
    return ids, videos


def _resolve_path(base: Path, p: str) -> Path:
    candidate = base / p
    return candidate if candidate.exists() else Path(p)


def _ensure_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


_COMMANDS = {
    "count": _cmd_count,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "tune": _cmd_tune,
    "synth": _cmd_synth,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(message)s", stream=sys.stderr
    )
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InsufficientDataError as exc:
        log.error("insufficient data: %s", exc)
        return EXIT_INSUFFICIENT
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
