"""Cosmetic SVG timeline: count trace, quiet-fraction trace, alarm and
label verticals with the matching band shaded.  Plain text generation,
no plotting dependency; the CSV timelines stay canonical.
"""

from __future__ import annotations

WIDTH = 960
PANEL_HEIGHT = 150
MARGIN = 45
GAP = 30


def render_timeline(
    series,
    histograms,
    alarms,
    labels=(),
    match=None,
) -> str:
    """SVG document for one detection run.

    Top panel: group counts over source frames.  Bottom panel: per
    window quiet fraction.  Alarms are red verticals, labels green,
    and with a match config each label's window is shaded.
    """
    last_frame = series.frame_of(len(series) - 1)
    span = max(last_frame - series.first_frame, 1)

    def x_of(frame):
        return MARGIN + (frame - series.first_frame) / span * (
            WIDTH - 2 * MARGIN
        )

    total_h = 2 * PANEL_HEIGHT + GAP + 2 * MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{total_h}" viewBox="0 0 {WIDTH} {total_h}">',
        f'<rect width="{WIDTH}" height="{total_h}" fill="white"/>',
    ]
    top = MARGIN
    bottom_top = MARGIN + PANEL_HEIGHT + GAP

    if match is not None:
        for label in labels:
            x0 = x_of(max(label - match.pre_frames, series.first_frame))
            x1 = x_of(min(label + match.post_frames, last_frame))
            parts.append(
                f'<rect x="{x0:.1f}" y="{top}" width="{max(x1 - x0, 1):.1f}"'
                f' height="{2 * PANEL_HEIGHT + GAP}" fill="#d8f5d8"/>'
            )

    counts = series.counts
    peak = max(int(counts.max()), 1)
    pts = " ".join(
        f"{x_of(series.frame_of(i)):.1f},"
        f"{top + PANEL_HEIGHT - counts[i] / peak * (PANEL_HEIGHT - 10):.1f}"
        for i in range(len(counts))
    )
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" '
        'stroke-width="1.5"/>'
    )
    fr_pts = " ".join(
        f"{x_of(h.center_frame):.1f},"
        f"{bottom_top + PANEL_HEIGHT - h.quiet_fraction * (PANEL_HEIGHT - 10):.1f}"
        for h in histograms
    )
    parts.append(
        f'<polyline points="{fr_pts}" fill="none" stroke="#9467bd" '
        'stroke-width="1.5"/>'
    )
    for label in labels:
        x = x_of(label)
        parts.append(
            f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" '
            f'y2="{bottom_top + PANEL_HEIGHT}" stroke="green" '
            'stroke-width="1.5"/>'
        )
    for alarm in alarms:
        x = x_of(alarm.frame)
        parts.append(
            f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" '
            f'y2="{bottom_top + PANEL_HEIGHT}" stroke="red" '
            'stroke-width="1.5"/>'
        )
    for y, text in (
        (top - 8, "group count"),
        (bottom_top - 8, "quiet fraction"),
    ):
        parts.append(
            f'<text x="{MARGIN}" y="{y}" font-family="sans-serif" '
            f'font-size="12">{text}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
