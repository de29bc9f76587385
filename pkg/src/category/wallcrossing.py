# fsforge/src/category/wallcrossing.py
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from core.config import Settings, settings as default_settings
from core.exceptions import CountUndefined, FsforgeError, MultipleCrossings, PreconditionFailed
from core.models import pair_key
from flow.service import FlowService
from landscape.geometry import segment_parameter
from landscape.service import LandscapeService
from .models import CoefficientFamily, WallCrossingEvent
from .service import CategoryService

logger = logging.getLogger(__name__)


def _orientation(a: complex, b: complex, c: complex) -> float:
    """Signed area of the triangle (a, b, c)."""
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


class WallCrossingService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings
        self.landscape = LandscapeService(self.settings)
        self.flow = FlowService(self.settings)
        self.category = CategoryService(self.settings)

    def track(self, family: CoefficientFamily, t_grid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Critical points and values along the family, columns labelled by the
        critical indices at t_grid[0]; points are matched step to step by
        minimal total displacement.
        """
        crit = self.landscape.critical_points(family.at(t_grid[0]))
        points = np.array([c.point for c in crit])
        values = np.empty((len(t_grid), len(points)), dtype=complex)
        tracked = np.empty_like(values)
        values[0] = [c.value for c in crit]
        tracked[0] = points
        for n, t in enumerate(t_grid[1:], start=1):
            current = self.landscape.critical_points(family.at(t))
            if len(current) != len(points):
                raise PreconditionFailed("number of critical points changes along the family", t=float(t))
            new_points = np.array([c.point for c in current])
            cost = np.abs(points[:, None] - new_points[None, :])
            _, cols = linear_sum_assignment(cost)
            points = new_points[cols]
            values[n] = [current[c].value for c in cols]
            tracked[n] = points
        return tracked, values

    def find_crossings(
        self, values: np.ndarray, t_grid: np.ndarray, i: int, k: int
    ) -> List[Tuple[int, float]]:
        """(middle index, t) for every passage of a third value through the open segment (w_i, w_k)."""
        crossings = []
        for m in range(values.shape[1]):
            if m in (i, k):
                continue
            signs = np.sign([_orientation(v[i], v[k], v[m]) for v in values])
            last = None
            for n, sign in enumerate(signs):
                if sign == 0:
                    continue
                if last is not None and sign != signs[last]:
                    o0 = _orientation(values[last, i], values[last, k], values[last, m])
                    o1 = _orientation(values[n, i], values[n, k], values[n, m])
                    w = o0 / (o0 - o1)
                    t_cross = float(t_grid[last] + w * (t_grid[n] - t_grid[last]))
                    mid = values[last] + w * (values[n] - values[last])
                    u = segment_parameter(mid[m], mid[i], mid[k])
                    if 0.0 < u < 1.0:
                        crossings.append((m, t_cross))
                last = n
        return crossings

    def _counts(self, family: CoefficientFamily, t: float, pairs: List[Tuple[int, int]], labels: np.ndarray) -> Dict[str, int]:
        """Mod-2 connection counts at parameter t, pairs given in tracked labels."""
        F = family.at(t)
        crit = self.landscape.critical_points(F)
        points = np.array([c.point for c in crit])
        counts: Dict[str, int] = {}
        for a, b in pairs:
            x = int(np.argmin(np.abs(points - labels[a])))
            y = int(np.argmin(np.abs(points - labels[b])))
            try:
                result = self.flow.find_connections(F, x, y, crit=crit)
            except FsforgeError as e:
                raise CountUndefined(f"count undefined at t={t}: {e.detail}", t=t, pair=[a, b], cause=e.code) from e
            counts[pair_key(a, b)] = result.count_mod2
        return counts

    def deform_and_recount(
        self,
        family: CoefficientFamily,
        pair: Tuple[int, int],
        t_before: float = 0.0,
        t_after: float = 1.0,
        steps: int = 64,
    ) -> WallCrossingEvent:
        """
        Detect a wall crossing of the (i, k) segment along the family and
        compare the mod-2 prediction with recounted connections.
        """
        i, k = pair
        t_grid = np.linspace(t_before, t_after, steps + 1)
        tracked, values = self.track(family, t_grid)
        if not (0 <= i < values.shape[1] and 0 <= k < values.shape[1]) or i == k:
            raise PreconditionFailed("frame pair must name two critical points", pair=list(pair))

        crossings = self.find_crossings(values, t_grid, i, k)
        if len(crossings) > 1:
            raise MultipleCrossings("more than one wall crossing along the family", crossings=[list(c) for c in crossings])

        others = [m for m in range(values.shape[1]) if m not in (i, k)]
        moving = crossings[0][0] if crossings else (others[0] if len(others) == 1 else None)
        pairs = [(i, k)] if moving is None else [(i, moving), (moving, k), (i, k)]

        before = self._counts(family, t_before, pairs, tracked[0])
        after = self._counts(family, t_after, pairs, tracked[-1])

        predicted = dict(before)
        if crossings:
            predicted[pair_key(i, k)] = self.category.wall_crossing_predict(
                before[pair_key(i, moving)], before[pair_key(moving, k)], before[pair_key(i, k)]
            )

        event = WallCrossingEvent(
            frame=(i, k),
            moving=moving if crossings else None,
            t_before=float(t_before),
            t_after=float(t_after),
            t_crossing=crossings[0][1] if crossings else None,
            before_counts=before,
            predicted_counts=predicted,
            recounted_counts=after,
        )
        logger.info(
            f"wall crossing ({i},{k}): crossing={event.t_crossing}, predicted={predicted}, "
            f"recounted={after}, passed={event.passed}"
        )
        return event


wallcrossing_service = WallCrossingService()
