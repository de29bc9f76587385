# fsforge/src/landscape/roots.py
import logging
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

logger = logging.getLogger(__name__)


def residual_scale(coeffs: np.ndarray, z: complex) -> float:
    """Size of the terms of the polynomial at z, used to scale residual tests."""
    powers = np.abs(z) ** np.arange(len(coeffs))
    return float(max(1.0, np.sum(np.abs(coeffs) * powers)))


def companion_roots(coeffs: np.ndarray) -> np.ndarray:
    """Eigenvalues of the companion matrix (coefficients constant term first)."""
    return P.polyroots(coeffs)


def newton_polish(coeffs: np.ndarray, z0: complex, tol: float, max_iter: int = 50) -> Optional[complex]:
    """Newton refinement of a simple root; None when it fails to settle."""
    dcoeffs = P.polyder(coeffs)
    z = complex(z0)
    for _ in range(max_iter):
        p = P.polyval(z, coeffs)
        if abs(p) <= tol * residual_scale(coeffs, z):
            return z
        dp = P.polyval(z, dcoeffs)
        if dp == 0:
            return None
        step = p / dp
        z = z - step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            p = P.polyval(z, coeffs)
            return z if abs(p) <= tol * residual_scale(coeffs, z) else None
    return None


def aberth(coeffs: np.ndarray, tol: float = 1e-14, max_iter: int = 200) -> Optional[np.ndarray]:
    """Aberth–Ehrlich simultaneous iteration from a Cauchy-bound circle."""
    n = len(coeffs) - 1
    if n < 1:
        return np.array([], dtype=complex)
    dcoeffs = P.polyder(coeffs)

    # Cauchy bound for initial roots, rotated off the real axis
    radius = 1 + np.max(np.abs(coeffs[:-1])) / np.abs(coeffs[-1])
    roots = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))

    for _ in range(max_iter):
        p_vals = P.polyval(roots, coeffs)
        dp_vals = P.polyval(roots, dcoeffs)
        diff = roots[:, None] - roots[None, :]
        np.fill_diagonal(diff, 1.0)
        s = np.sum(1.0 / diff, axis=1) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p_vals / dp_vals
            correction = ratio / (1.0 - ratio * s)
        correction = np.where(p_vals == 0, 0.0, correction)
        if not np.all(np.isfinite(correction)):
            return None
        roots = roots - correction
        if np.max(np.abs(correction)) < tol * max(1.0, np.max(np.abs(roots))):
            return roots
    logger.debug("Aberth iteration hit its cap")
    return None


def find_roots(coeffs: np.ndarray, tol: float, max_iter: int = 100) -> Optional[np.ndarray]:
    """All roots of the polynomial, Newton-polished; None if no method converges."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if len(coeffs) <= 1:
        return np.array([], dtype=complex)

    for name, seeds in (("companion", companion_roots), ("aberth", aberth)):
        guess = seeds(coeffs)
        if guess is None or len(guess) != len(coeffs) - 1:
            continue
        polished = [newton_polish(coeffs, z, tol, max_iter) for z in guess]
        if all(z is not None for z in polished):
            logger.debug(f"roots via {name}: {polished}")
            return np.asarray(polished, dtype=complex)
        logger.debug(f"{name} seeds failed Newton polish, trying next method")
    return None
