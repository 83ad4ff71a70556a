import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Tuple

from .exceptions import PreconditionError

SIG_DIGITS = 16


def format_number(value: float) -> str:
    """Fixed 16-significant-digit rendering used in every artifact."""
    return f"{value:.{SIG_DIGITS}g}"


def round_floats(obj: Any) -> Any:
    """Recursively round floats to 16 significant digits for JSON output."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(format_number(obj))
    if isinstance(obj, dict):
        return {key: round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value) for value in obj]
    return obj


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comment: Optional[str] = None,
) -> Path:
    """Header row, then one row per record; floats at 16 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_number(v) if isinstance(v, float) else v for v in row]
            )
        if comment:
            fh.write(f"# {comment}\n")
    return path


# Chart geometry
_WIDTH, _HEIGHT = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 20, 30, 60


def _axis(values, log: bool, name: str):
    if log:
        if any(v <= 0 for v in values):
            raise PreconditionError(f"log scale on {name} needs positive values")
        values = [math.log10(v) for v in values]
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    return values, lo, hi


def emit_svg(
    series: Sequence[Tuple[float, float]],
    x_label: str,
    y_label: str,
    path: Path,
    log_x: bool = False,
    log_y: bool = False,
    title: str = "",
) -> Path:
    """Static SVG 1.1 line chart with a single polyline; identical input gives identical bytes."""
    points = [(float(x), float(y)) for x, y in series]
    if not points:
        raise PreconditionError("cannot draw an empty series")
    if not all(math.isfinite(x) and math.isfinite(y) for x, y in points):
        raise PreconditionError("series holds non-finite values")

    xs, x_lo, x_hi = _axis([p[0] for p in points], log_x, "x")
    ys, y_lo, y_hi = _axis([p[1] for p in points], log_y, "y")
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def px(x):
        return _LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return _TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    coords = " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in zip(xs, ys))

    def tick(value, log):
        return format_number(10**value if log else value)[:10]

    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
        f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{coords}"/>',
        f'<text x="{_LEFT}" y="{_HEIGHT - _BOTTOM + 18}" font-size="11" '
        f'text-anchor="start">{tick(x_lo, log_x)}</text>',
        f'<text x="{_WIDTH - _RIGHT}" y="{_HEIGHT - _BOTTOM + 18}" font-size="11" '
        f'text-anchor="end">{tick(x_hi, log_x)}</text>',
        f'<text x="{_LEFT - 6}" y="{_HEIGHT - _BOTTOM}" font-size="11" '
        f'text-anchor="end">{tick(y_lo, log_y)}</text>',
        f'<text x="{_LEFT - 6}" y="{_TOP + 10}" font-size="11" '
        f'text-anchor="end">{tick(y_hi, log_y)}</text>',
        f'<text x="{_LEFT + plot_w / 2:.1f}" y="{_HEIGHT - 15}" font-size="13" '
        f'text-anchor="middle">{_escape(x_label)}{" (log)" if log_x else ""}</text>',
        f'<text x="20" y="{_TOP + plot_h / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 20 {_TOP + plot_h / 2:.1f})">'
        f'{_escape(y_label)}{" (log)" if log_y else ""}</text>',
    ]
    if title:
        lines.append(
            f'<text x="{_WIDTH / 2:.1f}" y="18" font-size="14" '
            f'text-anchor="middle">{_escape(title)}</text>'
        )
    lines.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
