# fsforge/src/floer/solver.py
import logging
import warnings
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, lsqr, spsolve

from core.exceptions import DivergedField, NoConvergence
from landscape.models import HolomorphicFunction

logger = logging.getLogger(__name__)


def gradient_values(F: HolomorphicFunction, theta: float, u):
    """∇f_θ(u) = conj(e^{-iθ} F'(u)), elementwise."""
    return np.conj(np.exp(-1j * theta) * F.derivative(u))


def interior_residual(F: HolomorphicFunction, theta: float, u: np.ndarray, hs: float, ht: float) -> np.ndarray:
    """Central-difference ∂_s u + i(∂_t u − ∇f_θ(u)) on interior nodes."""
    ds = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * hs)
    dt = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * ht)
    return ds + 1j * (dt - gradient_values(F, theta, u[1:-1, 1:-1]))


def _central_difference(n: int, h: float) -> sparse.spmatrix:
    off = np.full(n - 1, 1.0 / (2.0 * h))
    return sparse.diags([-off, off], [-1, 1], shape=(n, n))


def difference_operators(ns: int, nt: int, hs: float, ht: float) -> Tuple[sparse.spmatrix, sparse.spmatrix]:
    """D_s and D_t restricted to interior unknowns, row-major over (s, t)."""
    ms, mt = ns - 2, nt - 2
    A_s = sparse.kron(_central_difference(ms, hs), sparse.identity(mt), format="csr")
    A_t = sparse.kron(sparse.identity(ms), _central_difference(mt, ht), format="csr")
    return A_s, A_t


def _newton_step(J: sparse.spmatrix, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        delta = spsolve(J, rhs)
    if not np.all(np.isfinite(delta)):
        logger.debug("singular Jacobian, falling back to least squares")
        delta = lsqr(J, rhs, atol=1e-14, btol=1e-14, iter_lim=10 * J.shape[0])[0]
    return delta


def gauss_newton(
    F: HolomorphicFunction,
    theta: float,
    u0: np.ndarray,
    hs: float,
    ht: float,
    tol: float,
    max_iter: int,
    r_max: float,
) -> Tuple[np.ndarray, float, int]:
    """
    Newton iteration on the interior unknowns with backtracking line search.

    The boundary ring of u0 is kept fixed. Returns (field, ‖R‖, iterations).
    """
    ns, nt = u0.shape
    A_s, A_t = difference_operators(ns, nt, hs, ht)
    rot = np.exp(-1j * theta)

    u = np.array(u0, dtype=complex)
    r = interior_residual(F, theta, u, hs, ht)
    norm = float(np.linalg.norm(r))

    for iteration in range(max_iter + 1):
        if norm < tol:
            logger.debug(f"Floer solve converged: |R|={norm:.3e} after {iteration} iterations")
            return u, norm, iteration
        if iteration == max_iter:
            break

        a = rot * F.second_derivative(u[1:-1, 1:-1]).ravel()
        ar, ai = sparse.diags(a.real), sparse.diags(a.imag)
        J = sparse.bmat([[A_s - ai, -A_t - ar], [A_t - ar, A_s + ai]], format="csc")
        rhs = -np.concatenate([r.real.ravel(), r.imag.ravel()])
        delta = _newton_step(J, rhs)
        m = a.size
        step = (delta[:m] + 1j * delta[m:]).reshape(ns - 2, nt - 2)

        alpha = 1.0
        accepted = False
        while alpha >= 1.0 / 64:
            trial = u.copy()
            trial[1:-1, 1:-1] += alpha * step
            r_trial = interior_residual(F, theta, trial, hs, ht)
            norm_trial = float(np.linalg.norm(r_trial))
            if np.isfinite(norm_trial) and norm_trial < (1.0 - 1e-4 * alpha) * norm:
                accepted = True
                break
            alpha *= 0.5

        if not accepted:
            if not np.isfinite(norm_trial):
                raise DivergedField("non-finite field during Newton iteration", iteration=iteration)
            raise NoConvergence("line search found no decrease", residual_norm=norm, iteration=iteration)
        u, r, norm = trial, r_trial, norm_trial
        if float(np.max(np.abs(u))) > r_max:
            raise DivergedField("field left the bounded region", bound=r_max, iteration=iteration)
        logger.debug(f"Newton iteration {iteration}: |R|={norm:.3e}, step={alpha}")

    raise NoConvergence("Newton iteration cap reached", residual_norm=norm, max_iter=max_iter)
