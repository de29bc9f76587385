# fsforge/src/category/service.py
import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.config import Settings, settings as default_settings
from core.exceptions import DirectednessViolation, PreconditionFailed, RelationFailure, ValueAtOrigin
from core.models import Confidence, HomKind, pair_key
from floer.models import M1Estimate
from flow.models import HomBasis
from landscape.models import PhaseGeometry
from landscape.service import wrap_angle
from .models import AInfinityReport, CategoryHom, DirectedCategoryData, ExceptionalAngle, PLLattice

logger = logging.getLogger(__name__)


class CategoryService:
    def __init__(self, config: Optional[Settings] = None):
        self.settings = config or default_settings

    # ==================== Assembly ====================

    def assemble(
        self,
        geometry: PhaseGeometry,
        homs: Mapping[Tuple[int, int], HomBasis],
        gradings: Optional[Mapping[Tuple[int, int], Sequence[Optional[int]]]] = None,
        m1_estimates: Optional[Mapping[Tuple[int, int], M1Estimate]] = None,
        m2: Optional[Mapping[Tuple[int, int, int], Any]] = None,
    ) -> DirectedCategoryData:
        """Directed category from Hom bases, gradings and m1 estimates for one (F, alpha)."""
        gradings = gradings or {}
        m1_estimates = m1_estimates or {}
        objects = tuple(geometry.order)

        out_homs: Dict[str, CategoryHom] = {}
        m1: Dict[str, np.ndarray] = {}
        confidence: Dict[str, np.ndarray] = {}
        provenance: Dict[str, Dict[str, Any]] = {}

        for (i, j), basis in homs.items():
            if i != j and basis.rank and not geometry.precedes(i, j):
                raise DirectednessViolation("nonzero Hom against the clockwise order", source=i, target=j, rank=basis.rank)
            if i == j and basis.kind != HomKind.IDENTITY:
                raise DirectednessViolation("endomorphisms must be the identity", index=i)

        for i in objects:
            for j in objects:
                key = pair_key(i, j)
                if i == j:
                    out_homs[key] = CategoryHom(
                        source=i, target=i, kind=HomKind.IDENTITY, generators=(f"id[{i}]",), gradings=(0,), actions=(0.0,)
                    )
                    m1[key] = np.zeros((1, 1), dtype=int)
                    provenance[key] = {"hom": "identity", "gradings": "identity", "m1": "zero"}
                    continue
                basis = homs.get((i, j))
                if basis is None or basis.rank == 0:
                    continue

                grades = tuple(gradings.get((i, j), ())) or (None,) * basis.rank
                actions = tuple(f.action for f in basis.flowlines) if len(basis.flowlines) == basis.rank else ()
                out_homs[key] = CategoryHom(
                    source=i,
                    target=j,
                    kind=basis.kind,
                    generators=basis.generators,
                    gradings=grades,
                    actions=actions,
                )
                record = {
                    "hom": "find_connections" if basis.flowlines else "supplied",
                    "gradings": "absolute_grading" if (i, j) in gradings else "none",
                }

                estimate = m1_estimates.get((i, j))
                if estimate is not None:
                    if estimate.matrix.shape != (basis.rank, basis.rank):
                        raise PreconditionFailed("m1 estimate does not match the Hom rank", pair=[i, j])
                    m1[key] = np.asarray(estimate.matrix, dtype=int) % 2
                    confidence[key] = estimate.confidence_matrix()
                    record["m1"] = "supplied" if any(e.supplied for e in estimate.entries) else "multistart"
                    record["m1_confidence"] = estimate.confidence.value
                else:
                    m1[key] = np.zeros((basis.rank, basis.rank), dtype=int)
                    record["m1"] = "zero"
                provenance[key] = record

        m2_tensors = None
        if m2 is not None:
            m2_tensors = {f"{i},{j},{k}": np.asarray(t, dtype=int) % 2 for (i, j, k), t in m2.items()}

        data = DirectedCategoryData(
            objects=objects,
            homs=out_homs,
            m1=m1,
            m1_confidence=confidence,
            m2=m2_tensors,
            provenance=provenance,
        )
        logger.info(f"assembled category: {len(objects)} objects, {len(out_homs) - len(objects)} nonzero Homs")
        return data

    # ==================== A-infinity relations ====================

    def verify_a_infinity(self, data: DirectedCategoryData, max_n: int = 1) -> AInfinityReport:
        """
        Check m1∘m1 = 0, the grading shift of m1 and, for max_n = 2, the
        Leibniz rule and strict unitality of m2. LOW-confidence m1 entries
        are excluded. Raises RelationFailure with a witness.
        """
        if max_n not in (1, 2):
            raise PreconditionFailed("max_n must be 1 or 2", max_n=max_n)
        if max_n == 2 and data.m2 is None:
            raise PreconditionFailed("m2 tensors required for max_n = 2")

        checks: List[str] = []
        excluded = 0
        for key, hom in data.homs.items():
            i, j = (int(p) for p in key.split(","))
            M = data.m1_matrix(i, j, verified_only=True)
            excluded += int(np.count_nonzero(data.m1_matrix(i, j) != M))
            if M.shape != (hom.rank, hom.rank):
                raise PreconditionFailed("m1 matrix does not match the Hom rank", pair=[i, j])

            square = (M @ M) % 2
            if np.any(square):
                row, col = (int(v) for v in np.argwhere(square)[0])
                raise RelationFailure("m1∘m1 != 0", relation="m1^2", pair=[i, j], witness=[row, col])

            if hom.graded:
                for row, col in np.argwhere(M):
                    if hom.gradings[row] - hom.gradings[col] != 1:
                        raise RelationFailure(
                            "m1 does not raise the grading by one",
                            relation="grading",
                            pair=[i, j],
                            witness=[int(row), int(col)],
                        )
            checks.append(f"m1^2[{key}]")

        if max_n == 2:
            for key, T in data.m2.items():
                i, j, k = (int(p) for p in key.split(","))
                self._check_m2(data, i, j, k, T)
                checks.append(f"m2[{key}]")

        return AInfinityReport(passed=True, max_n=max_n, checks=tuple(checks), excluded_low_confidence=excluded)

    def _check_m2(self, data: DirectedCategoryData, i: int, j: int, k: int, T: np.ndarray) -> None:
        shape = (data.rank(i, k), data.rank(i, j), data.rank(j, k))
        if T.shape != shape:
            raise PreconditionFailed("m2 tensor shape mismatch", triple=[i, j, k], expected=list(shape), found=list(T.shape))

        M_ij = data.m1_matrix(i, j, verified_only=True)
        M_jk = data.m1_matrix(j, k, verified_only=True)
        M_ik = data.m1_matrix(i, k, verified_only=True)
        lhs = np.einsum("dc,cab->dab", M_ik, T)
        rhs = np.einsum("deb,ea->dab", T, M_ij) + np.einsum("daf,fb->dab", T, M_jk)
        defect = (lhs + rhs) % 2
        if np.any(defect):
            c, a, b = (int(v) for v in np.argwhere(defect)[0])
            raise RelationFailure("Leibniz rule fails", relation="leibniz", triple=[i, j, k], witness=[c, a, b])

        if i == j and not np.array_equal(T[:, 0, :], np.eye(shape[0], dtype=int)):
            raise RelationFailure("m2(id, b) != b", relation="unit", triple=[i, j, k])
        if j == k and not np.array_equal(T[:, :, 0], np.eye(shape[0], dtype=int)):
            raise RelationFailure("m2(a, id) != a", relation="unit", triple=[i, j, k])

    # ==================== Picard-Lefschetz lattice ====================

    @staticmethod
    def pl_transform(lattice: PLLattice, c, x) -> np.ndarray:
        """τ_c(x) = x + ⟨x, c⟩ c."""
        c = np.asarray(c, dtype=int)
        x = np.asarray(x, dtype=int)
        return x + lattice.pair(x, c) * c

    @staticmethod
    def lattice_from_counts(order: Sequence[int], counts: Mapping[Tuple[int, int], int]) -> PLLattice:
        """Pairing ⟨e_i, e_j⟩ = n_ij for i before j in the clockwise order, antisymmetric."""
        order = tuple(order)
        n = len(order)
        Q = np.zeros((n, n), dtype=int)
        for (i, j), count in counts.items():
            a, b = order.index(i), order.index(j)
            if a == b:
                continue
            lo, hi = (a, b) if a < b else (b, a)
            Q[lo, hi] = int(count)
            Q[hi, lo] = -int(count)
        return PLLattice(basis=order, pairing=Q)

    @staticmethod
    def wall_crossing_predict(n12: int, n23: int, n13: int) -> int:
        """n'13 = n13 + n12·n23 (mod 2)."""
        return (int(n13) + int(n12) * int(n23)) % 2

    # ==================== Exceptional angles ====================

    def exceptional_angles(self, values: Sequence[complex]) -> List[ExceptionalAngle]:
        """Arguments of the critical values, each with the objects that wrap from last to first."""
        values = [complex(v) for v in values]
        for k, w in enumerate(values):
            if abs(w) < self.settings.TOL_RAY_CLEARANCE:
                raise ValueAtOrigin("critical value at the origin", index=k)
        args = np.array([wrap_angle(np.angle(w)) for w in values])
        distinct = np.unique(np.round(args, 12))
        gaps = np.diff(np.append(distinct, distinct[0] + 2 * np.pi))
        eps = 0.25 * float(np.min(gaps)) if len(distinct) > 1 else 0.5

        def order(alpha: float) -> Tuple[int, ...]:
            clockwise = np.mod(alpha - args, 2 * np.pi)
            return tuple(int(i) for i in np.argsort(clockwise, kind="stable"))

        angles = []
        for a in distinct:
            wrapping = tuple(int(k) for k in np.flatnonzero(np.isclose(args, a, atol=1e-12)))
            angles.append(
                ExceptionalAngle(
                    angle=float(a),
                    wrapping=wrapping,
                    order_before=order(a - eps),
                    order_after=order(a + eps),
                )
            )
        return angles

    # ==================== Reports and synthetic data ====================

    @staticmethod
    def hom_dimension_report(
        before: Mapping[Tuple[int, int], int], after: Mapping[Tuple[int, int], int]
    ) -> List[Dict[str, Any]]:
        rows = []
        for pair in sorted(set(before) | set(after)):
            b, a = int(before.get(pair, 0)), int(after.get(pair, 0))
            rows.append({"pair": list(pair), "before": b, "after": a, "change": a - b})
        return rows

    @staticmethod
    def random_square_zero(n: int, rng: np.random.Generator) -> np.ndarray:
        """
        Random strictly upper-triangular 0/1 matrix with M∘M = 0 over F2.

        Columns are drawn left to right; column j only needs M c_j = 0 against
        the columns already placed, so every such matrix has positive probability.
        """
        M = np.zeros((n, n), dtype=int)
        for j in range(1, n):
            A = M[:j, :j]
            for _ in range(64):
                c = rng.integers(0, 2, size=j)
                if not np.any((A @ c) % 2):
                    break
            else:
                c = np.zeros(j, dtype=int)
            M[:j, j] = c
        return M


category_service = CategoryService()
