# fsforge/src/landscape/geometry.py
from typing import List, Optional, Sequence

import numpy as np


def _cross(o: complex, a: complex, b: complex) -> float:
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def convex_hull(points: Sequence[complex]) -> List[complex]:
    """
    Vertices of the convex hull in counter-clockwise order (monotone chain).

    Collinear boundary points are dropped, so a set of collinear points
    yields its two extreme points.
    """
    pts = sorted(set(complex(p) for p in points), key=lambda z: (z.real, z.imag))
    if len(pts) <= 2:
        return pts

    lower: List[complex] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[complex] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _distance_to_segment(p: complex, a: complex, b: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    t = ((p - a) * np.conj(d)).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


def in_convex_hull(point: complex, others: Sequence[complex], tol: float) -> bool:
    """True when point lies in the closed hull of others (within tol)."""
    hull = convex_hull(others)
    if not hull:
        return False
    if len(hull) == 1:
        return abs(point - hull[0]) <= tol
    if len(hull) == 2:
        return _distance_to_segment(point, hull[0], hull[1]) <= tol

    # Counter-clockwise polygon: inside iff left of (or within tol of) every edge
    for a, b in zip(hull, hull[1:] + hull[:1]):
        if _cross(a, b, point) < -tol * abs(b - a):
            return False
    return True


def interior_witness(values: Sequence[complex], tol: float) -> Optional[int]:
    """First index whose value lies in the hull of the remaining values."""
    for i, w in enumerate(values):
        others = [v for j, v in enumerate(values) if j != i]
        if in_convex_hull(w, others, tol):
            return i
    return None


def distance_to_segment(p: complex, a: complex, b: complex) -> float:
    return float(_distance_to_segment(complex(p), complex(a), complex(b)))


def segment_parameter(p: complex, a: complex, b: complex) -> float:
    """Projection parameter of p onto the line a + t (b - a)."""
    d = b - a
    return float(((p - a) * np.conj(d)).real / abs(d) ** 2)
