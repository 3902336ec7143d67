"""Self-contained SVG regret charts.

One figure per environment setting: for each policy a solid median line
and two dashed quartile lines in that policy's color. The writer is a
pure function of its input, emits no timestamps or random ids, and uses
only <path> elements for data series (axes, ticks and legend swatches are
<line>/<text>), so documents can be compared byte for byte and the data
paths counted directly.
"""

from __future__ import annotations

from pathlib import Path

from .harness import AggregateBand

WIDTH = 720
HEIGHT = 480
MARGIN_LEFT = 72
MARGIN_RIGHT = 24
MARGIN_TOP = 42
MARGIN_BOTTOM = 56

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
]


def policy_colors(policies: list[str]) -> dict[str, str]:
    """A stable color per policy: sorted names walk the palette."""
    return {
        name: PALETTE[i % len(PALETTE)] for i, name in enumerate(sorted(set(policies)))
    }


def _coord(x: float) -> str:
    return f"{x:.2f}"


def _path(xs, ys, color: str, width: float, dashed: bool) -> str:
    points = " L".join(f"{_coord(x)},{_coord(y)}" for x, y in zip(xs, ys))
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    return (
        f'<path d="M{points}" fill="none" stroke="{color}" '
        f'stroke-width="{width:g}"{dash}/>'
    )


def render_setting_svg(setting: str, bands: list[AggregateBand]) -> str:
    """The SVG document for one setting's bands."""
    if not bands:
        raise ValueError("no bands to render")
    bands = sorted(bands, key=lambda b: b.policy)
    colors = policy_colors([b.policy for b in bands])

    x_max = max(float(b.steps[-1]) for b in bands)
    x_min = min(float(b.steps[0]) for b in bands)
    y_max = max(float(b.q3.max()) for b in bands)
    if y_max <= 0.0:
        y_max = 1.0
    y_max *= 1.02

    px0, px1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    py0, py1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP  # y axis points up

    def sx(t: float) -> float:
        return px0 + (t - x_min) / (x_max - x_min or 1.0) * (px1 - px0)

    def sy(v: float) -> float:
        return py0 + (v / y_max) * (py1 - py0)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:g}" y="24" text-anchor="middle" font-size="15">'
        f"cumulative regret, setting {setting}</text>",
        # axes
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
        f'<text x="{(px0 + px1) / 2:g}" y="{HEIGHT - 14}" text-anchor="middle">t</text>',
        f'<text x="18" y="{(py0 + py1) / 2:g}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(py0 + py1) / 2:g})">cumulative regret</text>',
    ]

    for i in range(5):
        t = x_min + (x_max - x_min) * i / 4
        x = sx(t)
        parts.append(
            f'<line x1="{_coord(x)}" y1="{py0}" x2="{_coord(x)}" y2="{py0 + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_coord(x)}" y="{py0 + 20}" text-anchor="middle">{t:g}</text>'
        )
        v = y_max * i / 4
        y = sy(v)
        parts.append(
            f'<line x1="{px0 - 5}" y1="{_coord(y)}" x2="{px0}" y2="{_coord(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px0 - 9}" y="{_coord(y + 4)}" text-anchor="end">{v:.4g}</text>'
        )

    for band in bands:
        color = colors[band.policy]
        xs = [sx(float(t)) for t in band.steps]
        parts.append(_path(xs, [sy(float(v)) for v in band.q1], color, 1.0, dashed=True))
        parts.append(_path(xs, [sy(float(v)) for v in band.q3], color, 1.0, dashed=True))
        parts.append(_path(xs, [sy(float(v)) for v in band.median], color, 2.0, dashed=False))

    legend_x = px0 + 12
    legend_y = py1 + 10
    for i, band in enumerate(bands):
        color = colors[band.policy]
        y = legend_y + 18 * i
        parts.append(
            f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 26}" y2="{y}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{legend_x + 32}" y="{y + 4}">{band.policy}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_figures(bands: list[AggregateBand], out_dir) -> dict[str, Path]:
    """One regret_<setting>.svg per setting present in the bands."""
    if not bands:
        raise ValueError("no bands to render")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_setting: dict[str, list[AggregateBand]] = {}
    for band in bands:
        by_setting.setdefault(band.setting, []).append(band)
    written = {}
    for setting in sorted(by_setting):
        path = out / f"regret_{setting}.svg"
        path.write_text(render_setting_svg(setting, by_setting[setting]))
        written[setting] = path
    return written
