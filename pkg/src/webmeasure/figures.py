"""Grouped bar charts as self-contained SVG with a CSV sidecar of the plotted numbers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping
from xml.sax.saxutils import escape

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f")


class FigureError(ValueError):
    pass


class MismatchedSeriesError(FigureError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    series: Mapping[str, Mapping[str, float]]
    output: str | Path
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    kind: str = "grouped-bar"
    categories: tuple[str, ...] = field(default=())

    def resolved_categories(self) -> tuple[str, ...]:
        if not self.series:
            raise FigureError("figure has no series")
        names = list(self.series)
        first = tuple(self.series[names[0]])
        for name in names[1:]:
            if set(self.series[name]) != set(first):
                raise MismatchedSeriesError(
                    f"series {name!r} categories {sorted(self.series[name])} differ from "
                    f"{names[0]!r} categories {sorted(first)}"
                )
        if self.categories:
            if set(self.categories) != set(first):
                raise MismatchedSeriesError("explicit category order does not match the series keys")
            return tuple(self.categories)
        return first


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    exp = 10 ** math.floor(math.log10(v))
    for m in (1, 2, 2.5, 5, 10):
        if v <= m * exp:
            return m * exp
    return 10 * exp


def _num(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(spec: FigureSpec) -> str:
    if spec.kind != "grouped-bar":
        raise FigureError(f"unsupported figure kind {spec.kind!r}")
    cats = spec.resolved_categories()
    names = list(spec.series)
    values = [[float(spec.series[n][c]) for n in names] for c in cats]
    for row in values:
        for v in row:
            if not math.isfinite(v) or v < 0:
                raise FigureError(f"bar values must be finite and non-negative, got {v}")

    bar_w, gap = 16.0, 14.0
    group_w = bar_w * len(names) + gap
    left, right, top, bottom = 60.0, 20.0, 40.0, 70.0
    legend_h = 18.0 * len(names)
    plot_h = 240.0
    width = left + right + group_w * len(cats)
    width = max(width, 320.0)
    height = top + plot_h + bottom + legend_h
    ymax = _nice_max(max(max(r) for r in values))
    base_y = top + plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{_num(width)}" height="{_num(height)}" fill="#ffffff"/>',
    ]
    if spec.title:
        out.append(f'<text x="{_num(width / 2)}" y="20" text-anchor="middle" font-size="13">{escape(spec.title)}</text>')
    for i in range(5):
        tick = ymax * i / 4
        y = base_y - plot_h * i / 4
        out.append(f'<line x1="{_num(left)}" y1="{_num(y)}" x2="{_num(width - right)}" y2="{_num(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{_num(left - 6)}" y="{_num(y + 4)}" text-anchor="end">{_num(tick)}</text>')
    out.append(f'<line x1="{_num(left)}" y1="{_num(top)}" x2="{_num(left)}" y2="{_num(base_y)}" stroke="#333333"/>')
    out.append(f'<line x1="{_num(left)}" y1="{_num(base_y)}" x2="{_num(width - right)}" y2="{_num(base_y)}" stroke="#333333"/>')

    for gi, cat in enumerate(cats):
        gx = left + gap / 2 + gi * group_w
        for si, name in enumerate(names):
            v = values[gi][si]
            h = plot_h * v / ymax
            out.append(
                f'<rect class="bar" x="{_num(gx + si * bar_w)}" y="{_num(base_y - h)}" width="{_num(bar_w)}" '
                f'height="{_num(h)}" fill="{PALETTE[si % len(PALETTE)]}">'
                f"<title>{escape(cat)} / {escape(name)}: {_num(v)}</title></rect>"
            )
        cx = gx + bar_w * len(names) / 2
        out.append(
            f'<text x="{_num(cx)}" y="{_num(base_y + 14)}" text-anchor="middle">{escape(cat)}</text>'
        )
    if spec.x_label:
        out.append(f'<text x="{_num((left + width - right) / 2)}" y="{_num(base_y + 36)}" text-anchor="middle">{escape(spec.x_label)}</text>')
    if spec.y_label:
        cy = top + plot_h / 2
        out.append(f'<text x="14" y="{_num(cy)}" text-anchor="middle" transform="rotate(-90 14 {_num(cy)})">{escape(spec.y_label)}</text>')

    out.append('<g class="legend">')
    for si, name in enumerate(names):
        y = base_y + 50 + 18 * si
        out.append(f'<rect class="legend-swatch" x="{_num(left)}" y="{_num(y)}" width="12" height="12" fill="{PALETTE[si % len(PALETTE)]}"/>')
        out.append(f'<text x="{_num(left + 18)}" y="{_num(y + 10)}">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sidecar_csv(spec: FigureSpec) -> str:
    cats = spec.resolved_categories()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category", "series", "value"])
    for c in cats:
        for name in spec.series:
            w.writerow([c, name, repr(float(spec.series[name][c]))])
    return buf.getvalue()


def emit_grouped_bar(spec: FigureSpec) -> tuple[Path, Path]:
    """Write ``<output>.svg`` and ``<output>.csv`` and return both paths."""
    svg = render_svg(spec)
    data = sidecar_csv(spec)
    out = Path(spec.output)
    svg_path = out if out.suffix == ".svg" else out.with_suffix(".svg")
    csv_path = svg_path.with_suffix(".csv")
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(svg, encoding="utf-8")
    csv_path.write_text(data, encoding="utf-8")
    return svg_path, csv_path


def figure_from_csv(path: str | Path, output: str | Path | None = None, **labels) -> FigureSpec:
    """Rebuild a FigureSpec from a sidecar; category and series order follow the file."""
    series: dict[str, dict[str, float]] = {}
    cats: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["category", "series", "value"]:
            raise FigureError(f"{path}: expected header category,series,value")
        for row in reader:
            if row["category"] not in cats:
                cats.append(row["category"])
            try:
                series.setdefault(row["series"], {})[row["category"]] = float(row["value"])
            except ValueError:
                raise FigureError(f"{path}: bad value {row['value']!r}") from None
    if output is None:
        output = Path(path).with_suffix(".svg")
    return FigureSpec(series=series, output=output, categories=tuple(cats), **labels)
