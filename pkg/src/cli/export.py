# fsforge/src/cli/export.py
import io
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot  # noqa: E402
import numpy as np  # noqa: E402

from core.io import write_atomic  # noqa: E402
from landscape.geometry import convex_hull  # noqa: E402

logger = logging.getLogger(__name__)

VIEWBOX = 1000.0
MARGIN = 60.0


class _Frame:
    """Affine map from the complex plane to SVG coordinates (y flipped)."""

    def __init__(self, points: Sequence[complex]):
        pts = np.asarray(list(points), dtype=complex)
        lo_x, hi_x = float(pts.real.min()), float(pts.real.max())
        lo_y, hi_y = float(pts.imag.min()), float(pts.imag.max())
        span = max(hi_x - lo_x, hi_y - lo_y, 1e-9)
        self.scale = (VIEWBOX - 2 * MARGIN) / span
        self.cx, self.cy = 0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)

    def __call__(self, z: complex) -> Tuple[float, float]:
        x = VIEWBOX / 2 + (z.real - self.cx) * self.scale
        y = VIEWBOX / 2 - (z.imag - self.cy) * self.scale
        return round(x, 3), round(y, 3)


def flows_svg(
    values: Sequence[complex],
    segments: Sequence[Tuple[int, int]],
    images: Sequence[np.ndarray],
    labels: Optional[Sequence[str]] = None,
) -> str:
    """
    Diagram of the critical values: filled circles, their convex hull,
    the segments of the computed pairs and the F-images of flowlines.
    """
    values = [complex(v) for v in values]
    every = list(values) + [complex(z) for image in images for z in image]
    frame = _Frame(every)
    lines: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {VIEWBOX:.0f} {VIEWBOX:.0f}" '
        f'width="{VIEWBOX:.0f}" height="{VIEWBOX:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]

    hull = convex_hull(values)
    if len(hull) >= 3:
        pts = " ".join(f"{x},{y}" for x, y in map(frame, hull))
        lines.append(f'<polygon points="{pts}" fill="#eef3fb" stroke="#9db3d6" stroke-width="2"/>')

    for i, j in segments:
        (x1, y1), (x2, y2) = frame(values[i]), frame(values[j])
        lines.append(
            f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="#bbbbbb" stroke-width="2" stroke-dasharray="8,6"/>'
        )

    for image in images:
        step = max(1, len(image) // 400)
        pts = " ".join(f"{x},{y}" for x, y in map(frame, list(image[::step]) + [image[-1]]))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="3"/>')

    for k, w in enumerate(values):
        x, y = frame(w)
        label = labels[k] if labels else str(k)
        lines.append(f'<circle cx="{x}" cy="{y}" r="9" fill="#1f3a68"/>')
        lines.append(f'<text x="{x + 14}" y="{y - 14}" font-family="monospace" font-size="24">{label}</text>')

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_heatmap(path: Path, s: np.ndarray, t: np.ndarray, data: np.ndarray, title: str) -> Path:
    """PNG heat map of a real array over the (s, t) grid."""
    fig = pyplot.figure(figsize=(5, 4))
    S, T = np.meshgrid(s, t, indexing="ij")
    im = pyplot.pcolormesh(S, T, data, shading="auto")
    pyplot.colorbar(im)
    pyplot.xlabel("s")
    pyplot.ylabel("t")
    pyplot.title(title)
    pyplot.tight_layout()
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=120)
    pyplot.close(fig)
    return write_atomic(path, buffer.getvalue())
