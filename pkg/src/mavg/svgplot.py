"""Static SVG line charts from trace/race/aggregate CSVs.

Pure text-to-text: no display server, no plotting library.  Axis ranges are
exactly the min/max of the plotted columns and are embedded both as readable
tick labels and as ``data-*`` attributes on the root element so downstream
tooling can recover them losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .core import TRACE_HEADER

WIDTH, HEIGHT = 720, 480
PLOT = (70.0, 40.0, 540.0, 430.0)  # x0, y0, x1, y1
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
)

RACE_SERIES_HEADER = "mu,n,f_value"


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or not self.xs:
            raise ValueError("series needs equally many xs and ys, at least one")


def _read_csv_columns(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}:1: empty file")
    header = lines[0].split(",")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != len(header):
            raise ValueError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        rows.append(parts)
    if not rows:
        raise ValueError(f"{path}:2: no data rows")
    return header, rows


def _column(header, rows, name, path) -> tuple[float, ...]:
    try:
        idx = header.index(name)
    except ValueError:
        raise ValueError(f"{path}:1: no column {name!r} in {header}") from None
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            out.append(float(row[idx]))
        except ValueError:
            raise ValueError(
                f"{path}:{lineno}: non-numeric value {row[idx]!r} in column {name!r}"
            ) from None
    return tuple(out)


def series_from_csv(
    path, x: str | None = None, y: str | None = None, label: str | None = None
) -> list[Series]:
    """Build plot series from one CSV, dispatching on its header.

    Trace CSVs plot ``f_value`` (or ``y``) against ``n``.  Race series CSVs
    yield one series per momentum value, labelled with the value as written.
    Any other schema needs explicit ``x`` and ``y`` column names.
    """
    path = Path(path)
    header, rows = _read_csv_columns(path)
    header_line = ",".join(header)
    if header_line == TRACE_HEADER:
        ycol = y or "f_value"
        return [Series(
            label=label or path.stem,
            xs=_column(header, rows, x or "n", path),
            ys=_column(header, rows, ycol, path),
        )]
    if header_line == RACE_SERIES_HEADER:
        mu_idx = header.index("mu")
        groups: dict[str, list[list[str]]] = {}
        for row in rows:
            groups.setdefault(row[mu_idx], []).append(row)
        return [
            Series(
                label=mu_text,
                xs=_column(header, grp, "n", path),
                ys=_column(header, grp, "f_value", path),
            )
            for mu_text, grp in groups.items()
        ]
    if x is None or y is None:
        raise ValueError(
            f"{path}:1: unrecognized schema {header_line!r}; pass x and y column names"
        )
    return [Series(
        label=label or y,
        xs=_column(header, rows, x, path),
        ys=_column(header, rows, y, path),
    )]


def _scale(lo: float, hi: float, v: float, p_lo: float, p_hi: float) -> float:
    if hi == lo:
        return (p_lo + p_hi) / 2.0
    return p_lo + (v - lo) / (hi - lo) * (p_hi - p_lo)


def render_svg(
    series: list[Series], x_label: str = "n", y_label: str = "value", title: str = ""
) -> str:
    """Render series as polylines inside a fixed-size chart."""
    if not series:
        raise ValueError("nothing to plot")
    x_min = min(min(s.xs) for s in series)
    x_max = max(max(s.xs) for s in series)
    y_min = min(min(s.ys) for s in series)
    y_max = max(max(s.ys) for s in series)
    x0, y0, x1, y1 = PLOT

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{x_min!r}" data-x-max="{x_max!r}" '
        f'data-y-min="{y_min!r}" data-y-max="{y_max!r}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{(x0 + x1) / 2}" y="24" text-anchor="middle" '
            f'font-size="16">{escape(title)}</text>'
        )
    # axis extreme labels
    parts.extend([
        f'<text class="x-tick" x="{x0}" y="{y1 + 18}" text-anchor="middle" '
        f'font-size="11">{x_min:.6g}</text>',
        f'<text class="x-tick" x="{x1}" y="{y1 + 18}" text-anchor="middle" '
        f'font-size="11">{x_max:.6g}</text>',
        f'<text class="y-tick" x="{x0 - 6}" y="{y1 + 4}" text-anchor="end" '
        f'font-size="11">{y_min:.6g}</text>',
        f'<text class="y-tick" x="{x0 - 6}" y="{y0 + 4}" text-anchor="end" '
        f'font-size="11">{y_max:.6g}</text>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{escape(x_label)}</text>',
        f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(y_label)}</text>',
    ])
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(
            f"{_scale(x_min, x_max, x, x0, x1):.3f},"
            f"{_scale(y_min, y_max, y, y1, y0):.3f}"
            for x, y in zip(s.xs, s.ys)
        )
        parts.append(
            f'<polyline class="series" fill="none" stroke="{color}" '
            f'stroke-width="1.5" points="{points}"/>'
        )
        ly = y0 + 14 + 18 * i
        parts.append(
            f'<rect x="{x1 + 12}" y="{ly - 9}" width="12" height="12" fill="{color}"/>'
        )
        parts.append(
            f'<text class="legend" x="{x1 + 30}" y="{ly + 2}" font-size="12">'
            f"{escape(s.label)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_files(
    paths: list, out_path, x: str | None = None, y: str | None = None,
    labels: list[str] | None = None, title: str = "",
) -> None:
    """Read one or more CSVs and write a single SVG chart."""
    series: list[Series] = []
    for i, path in enumerate(paths):
        label = labels[i] if labels and i < len(labels) else None
        series.extend(series_from_csv(path, x=x, y=y, label=label))
    x_label = x or "n"
    y_label = y or "f_value"
    Path(out_path).write_text(render_svg(series, x_label, y_label, title))
