"""Maximization of a quadratic-plus-linear form over a Euclidean sphere.

Used for exact disturbance worst cases: max_{||w|| = r} w'Mw + 2w'g with
symmetric M. The stationarity condition (nu I - M) w = g with nu above the
top eigenvalue reduces to a scalar secular equation, solved by bracketing;
the degenerate branch (g orthogonal to the top eigenspace) is handled by
adding a top-eigenvector component.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.optimize import brentq

__all__ = ["max_quadratic_over_sphere", "max_quadratic_over_ball"]


def max_quadratic_over_sphere(M: np.ndarray, g: np.ndarray, radius: float = 1.0) -> Tuple[float, np.ndarray]:
    """Return (max value, argmax w) of w'Mw + 2w'g over ||w|| = radius."""
    M = 0.5 * (np.atleast_2d(np.asarray(M, float)) + np.atleast_2d(np.asarray(M, float)).T)
    g = np.asarray(g, float).reshape(-1)
    r = float(radius)
    if r <= 0:
        raise ValueError("radius must be positive")
    lams, V = np.linalg.eigh(M)
    gt = V.T @ g
    lmax = lams[-1]
    gnorm = np.linalg.norm(gt)
    if gnorm < 1e-15:
        w = V[:, -1] * r
        return float(w @ M @ w + 2.0 * w @ g), w

    def norm2(nu: float) -> float:
        return float(np.sum((gt / (nu - lams)) ** 2))

    # w(nu) = (nu I - M)^{-1} g has norm decreasing on (lmax, inf)
    eps = max(1e-14, 1e-12 * max(1.0, abs(lmax)))
    lo = lmax + eps
    if norm2(lo) < r * r:
        # hard case: top-eigenspace component of g vanishes; pad with it
        top = np.isclose(lams, lmax, rtol=0, atol=10 * eps)
        wt = np.zeros_like(gt)
        rest = ~top
        wt[rest] = gt[rest] / (lmax - lams[rest])
        pad = np.sqrt(max(0.0, r * r - float(np.sum(wt**2))))
        idx = int(np.argmax(top))
        wt[idx] += pad
        w = V @ wt
        return float(w @ M @ w + 2.0 * w @ g), w
    hi = lmax + 1.0 + gnorm / r
    while norm2(hi) > r * r:
        hi = lmax + 2.0 * (hi - lmax)
    nu = brentq(lambda v: norm2(v) - r * r, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    w = V @ (gt / (nu - lams))
    return float(w @ M @ w + 2.0 * w @ g), w


def max_quadratic_over_ball(M: np.ndarray, g: np.ndarray, radius: float = 1.0) -> Tuple[float, np.ndarray]:
    """Return (max value, argmax w) of w'Mw + 2w'g over ||w|| <= radius.

    Requires M positive semidefinite (the form is then convex and its
    maximum over the ball sits on the sphere). All callers pass Gram
    matrices of the form D'PD with P positive definite.
    """
    lams = np.linalg.eigvalsh(0.5 * (M + M.T))
    if lams.min() < -1e-10 * max(1.0, abs(lams).max()):
        raise ValueError("ball maximization requires a positive semidefinite quadratic part")
    return max_quadratic_over_sphere(M, g, radius)
