"""
Artifact writers: CSV scan tables, JSON reports and a small SVG log-log plot.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

SCAN_COLUMNS = ["epsilon", "count_lo", "count_hi", "leading", "rem_lo", "rem_hi", "method", "wall_time_ms"]
COUNT_COLUMNS = ["parameter", "certain", "boundary_hits", "method", "wall_time_ms"]
SPECTRUM_COLUMNS = ["lambda", "epsilon", "N_lo", "N_hi", "leading", "rem_lo", "rem_hi"]

SVG_WIDTH = 640
SVG_HEIGHT = 420
SVG_MARGIN = 56


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(column, "")) for column in columns])
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, 'r', newline='') as f:
        return list(csv.DictReader(f))


def write_json(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def _ticks(lo: float, hi: float) -> List[float]:
    start, stop = math.floor(lo), math.ceil(hi)
    step = max(1, (stop - start) // 6)
    return [float(v) for v in range(start, stop + 1, step)]


def loglog_svg(points: Sequence[Tuple[float, float]], title: str = "",
               reference: Optional[Tuple[float, float]] = None) -> str:
    """
    Polyline of log10(1/eps) against log10|R| with integer-decade axes.

    reference is an optional (slope, intercept) line in the same log10 coordinates.
    """
    data = [(math.log10(x), math.log10(y)) for x, y in points if x > 0 and y > 0]
    if not data:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}">'
                f'<text x="{SVG_MARGIN}" y="{SVG_MARGIN}">no positive data</text></svg>\n')
    xs, ys = [p[0] for p in data], [p[1] for p in data]
    x_lo, x_hi = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
    y_lo, y_hi = min(ys), max(ys) if max(ys) > min(ys) else min(ys) + 1
    x_lo, x_hi, y_lo, y_hi = math.floor(x_lo), math.ceil(x_hi), math.floor(y_lo), math.ceil(y_hi)
    plot_w = SVG_WIDTH - 2 * SVG_MARGIN
    plot_h = SVG_HEIGHT - 2 * SVG_MARGIN

    def sx(v):
        return SVG_MARGIN + (v - x_lo) / max(x_hi - x_lo, 1e-12) * plot_w

    def sy(v):
        return SVG_HEIGHT - SVG_MARGIN - (v - y_lo) / max(y_hi - y_lo, 1e-12) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_HEIGHT - SVG_MARGIN}" x2="{SVG_WIDTH - SVG_MARGIN}" y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_MARGIN}" x2="{SVG_MARGIN}" y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        parts.append(f'<text x="{sx(t):.1f}" y="{SVG_HEIGHT - SVG_MARGIN + 18}" text-anchor="middle">1e{int(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        parts.append(f'<text x="{SVG_MARGIN - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">1e{int(t)}</text>')
    polyline = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(data))
    parts.append(f'<polyline points="{polyline}" fill="none" stroke="#1f5fa8" stroke-width="2"/>')
    for x, y in data:
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#1f5fa8"/>')
    if reference is not None:
        slope, intercept = reference
        parts.append(
            f'<line x1="{sx(x_lo):.2f}" y1="{sy(slope * x_lo + intercept):.2f}" '
            f'x2="{sx(x_hi):.2f}" y2="{sy(slope * x_hi + intercept):.2f}" stroke="#c0392b" stroke-dasharray="6,4"/>'
        )
    parts.append(f'<text x="{SVG_WIDTH / 2:.0f}" y="{SVG_MARGIN / 2:.0f}" text-anchor="middle">{title}</text>')
    parts.append(f'<text x="{SVG_WIDTH / 2:.0f}" y="{SVG_HEIGHT - 12}" text-anchor="middle">1/eps</text>')
    parts.append(f'<text x="14" y="{SVG_HEIGHT / 2:.0f}" transform="rotate(-90 14 {SVG_HEIGHT / 2:.0f})" text-anchor="middle">|R|</text>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def write_svg(path: Path, content: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)
    logger.info(f"Wrote {path}")
    return path
