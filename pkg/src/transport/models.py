# fsforge/src/transport/models.py
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import PrivateAttr, model_validator

from core.models import DomainModel
from flow.models import Flowline

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def real_hessian(a) -> np.ndarray:
    """
    Real Hessian of Re(G) where G'' = a = p + iq.

    Returns [[p, -q], [-q, -p]] stacked over the shape of `a`.
    """
    a = np.asarray(a, dtype=complex)
    p, q = a.real, a.imag
    return np.stack([np.stack([p, -q], axis=-1), np.stack([-q, -p], axis=-1)], axis=-2)


def complex_structure(dim: int) -> np.ndarray:
    """Block-diagonal J on R^dim = C^(dim/2)."""
    return np.kron(np.eye(dim // 2), J2)


def line_angle(v: np.ndarray) -> np.ndarray:
    """Angle of a real 2-vector (or stack of them) in (-π, π]."""
    v = np.asarray(v, dtype=float)
    return np.arctan2(v[..., 1], v[..., 0])


class LinearizedSystem(DomainModel):
    """Kernel ODE v' = H(t) v of the linearized flow operator along a path."""

    times: np.ndarray
    hessians: np.ndarray
    J: np.ndarray
    t_mid: float
    flowline: Optional[Flowline] = None
    tangent: Optional[np.ndarray] = None

    _evaluator: Optional[Callable] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def check_shapes(self):
        n = self.times.shape[0]
        d = self.J.shape[0]
        if self.times.ndim != 1 or n < 2:
            raise ValueError("need at least two sample times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self.hessians.shape != (n, d, d):
            raise ValueError(f"hessians must have shape ({n}, {d}, {d})")
        if not self.times[0] <= self.t_mid <= self.times[-1]:
            raise ValueError("t_mid outside the time window")
        return self

    @property
    def dim(self) -> int:
        return int(self.J.shape[0])

    def with_evaluator(self, evaluator: Callable) -> "LinearizedSystem":
        self._evaluator = evaluator
        return self

    def hessian_at(self, t) -> np.ndarray:
        """H(t); exact along flowlines, linear interpolation of samples otherwise."""
        t = np.asarray(t, dtype=float)
        if self._evaluator is not None:
            return self._evaluator(t)
        flat = self.hessians.reshape(len(self.times), -1)
        cols = [np.interp(t, self.times, flat[:, k]) for k in range(flat.shape[1])]
        return np.stack(cols, axis=-1).reshape(t.shape + (self.dim, self.dim))

    def anticommutation_defect(self) -> float:
        """max ‖JH + HJ‖ over the samples."""
        return float(np.max(np.abs(self.J @ self.hessians + self.hessians @ self.J)))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.hessians - np.swapaxes(self.hessians, -1, -2))))

    def trace_defect(self) -> float:
        return float(np.max(np.abs(np.trace(self.hessians, axis1=-2, axis2=-1))))

    @classmethod
    def synthetic(cls, times, hessians, t_mid: Optional[float] = None) -> "LinearizedSystem":
        """A system from raw samples, with no flowline behind it."""
        times = np.asarray(times, dtype=float)
        hessians = np.asarray(hessians, dtype=float)
        t_mid = float(0.5 * (times[0] + times[-1])) if t_mid is None else float(t_mid)
        if not np.any(np.isclose(times, t_mid)):
            k = int(np.searchsorted(times, t_mid))
            flat = hessians.reshape(len(times), -1)
            inserted = np.array([np.interp(t_mid, times, flat[:, c]) for c in range(flat.shape[1])])
            times = np.insert(times, k, t_mid)
            hessians = np.insert(hessians, k, inserted.reshape(hessians.shape[1:]), axis=0)
        return cls(times=times, hessians=hessians, J=complex_structure(hessians.shape[-1]), t_mid=t_mid)


class TransportFrame(DomainModel):
    """Fundamental matrix of the kernel ODE and the path of one transported line."""

    times: np.ndarray
    phi: np.ndarray
    history: np.ndarray
    det_drift: float
    omega_drift: float
    condition: float
    initial_angle: Optional[float] = None
    lagrangian_path: Optional[np.ndarray] = None
    unwrapped_path: Optional[np.ndarray] = None

    def at(self, t: float) -> np.ndarray:
        """Fundamental matrix at the grid time nearest t."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.history[k]


class NondegeneracyReport(DomainModel):
    nondegenerate: bool
    kernel_dim: int
    principal_angles: Tuple[float, ...]
    start_dim: int
    end_dim: int
    t_mid: float
    tangent_angle: Optional[float] = None


class GradingDatum(DomainModel):
    source: int
    target: int
    ray: int
    lift: float
    lift_sheet: int
    grading: int
    end_angle: float
    snap_error: float
    convention: str
