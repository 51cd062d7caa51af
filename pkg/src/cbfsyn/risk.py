"""Finite-horizon exit-probability machinery.

Given a certificate whose expected decrease satisfies
E[V(x+)] <= (1-beta) V(x) + (beta - delta) with V(x) = x'Omega^{-1}x,
the scaled process

    zeta_t = eta^t V(x_t) + psi * eta * (eta^T - eta^t) / (eta - 1),

with psi = beta - delta and eta in (1, 1/(1-beta)], is a nonnegative
supermartingale, and a maximal inequality turns E[zeta_0] into an upper
bound on the probability of leaving the barrier set within T steps. Two
closed-form cases arise from optimizing eta: delta < 0 (bound evaluated at
the horizon) and delta >= 0 (bound evaluated at time zero).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .model import Certificate

__all__ = [
    "BoundCase",
    "RiskBound",
    "MartingaleTrace",
    "zeta",
    "exit_bound",
    "select_delta",
    "DeltaBranch",
    "inflate_support",
    "supermartingale_weights",
]

_ETA_CLAMP = 1.0 - 1e-9


class BoundCase(enum.Enum):
    DELTA_NEGATIVE = "delta_negative"  # bound tight at t = T
    DELTA_NONNEG = "delta_nonneg"  # bound tight at t = 0


@dataclass(frozen=True)
class RiskBound:
    alpha: float
    case: BoundCase
    eta_star: float
    psi: float
    beta: float
    delta: float
    horizon: int
    b0: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must be clamped to [0,1]")
        if self.eta_star <= 1.0:
            raise ValueError("eta_star must exceed 1")

    def __str__(self) -> str:
        return (
            f"exit bound alpha = {self.alpha:.6g} ({self.case.value}, "
            f"eta* = {self.eta_star:.6g}, psi = {self.psi:.6g}, T = {self.horizon}, b0 = {self.b0:.6g})"
        )


@dataclass(frozen=True)
class MartingaleTrace:
    values: np.ndarray
    eta: float
    psi: float
    horizon: int


def supermartingale_weights(
    gains: Sequence[float], offsets: Sequence[float], beta: float, delta: float
) -> None:
    """Validate a user-supplied weight family (g_i, h_i) for the scaled
    supermartingale construction; raises on violation.

    Required: 0 < g_i <= 1/(1-beta); h_i >= 0; and the telescoping
    condition prod_{i<=t+1} g_i * psi <= h_{t+1} - h_t for every t.
    """
    psi = beta - delta
    g = np.asarray(gains, float)
    h = np.asarray(offsets, float)
    if np.any(g <= 0) or np.any(g > 1.0 / (1.0 - beta) + 1e-12):
        raise ValueError("gains must lie in (0, 1/(1-beta)]")
    if np.any(h < 0):
        raise ValueError("offsets must be nonnegative")
    prod = np.cumprod(g)
    for t in range(len(h) - 1):
        if prod[t + 1] * psi > h[t + 1] - h[t] + 1e-12:
            raise ValueError(f"telescoping condition fails at step {t}")


def zeta(
    x_path: Sequence[np.ndarray],
    cert_or_omega,
    eta: float,
    psi: float,
    horizon: int,
) -> MartingaleTrace:
    """Evaluate the scaled supermartingale along a state path of length T+1."""
    if eta <= 1.0:
        raise ValueError("eta must exceed 1")
    if psi < 0.0:
        raise ValueError("psi must be nonnegative")
    X = np.atleast_2d(np.asarray(x_path, float))
    if X.shape[0] != horizon + 1:
        raise ValueError(f"path must contain T+1 = {horizon + 1} states")
    if isinstance(cert_or_omega, Certificate):
        V = np.array([x @ cert_or_omega.omega_solve(x) for x in X])
    else:
        Om = np.atleast_2d(np.asarray(cert_or_omega, float))
        Oi = np.linalg.inv(Om)
        V = np.einsum("ij,jk,ik->i", X, Oi, X)
    t = np.arange(horizon + 1, dtype=float)
    vals = eta**t * V + psi * eta * (eta**horizon - eta**t) / (eta - 1.0)
    return MartingaleTrace(values=vals, eta=eta, psi=psi, horizon=horizon)


def _alpha_delta_negative(b0: float, beta: float, psi: float, T: int) -> Tuple[float, float]:
    # eta* = 1/(1-beta). Only the negative power eta^{-T} = (1-beta)^T is
    # formed; it lies in (0,1], so large horizons underflow harmlessly
    # instead of overflowing.
    eta = 1.0 / (1.0 - min(beta, _ETA_CLAMP))
    eta_negT = (1.0 - beta) ** T
    coeff = psi * eta / (eta - 1.0)
    alpha = (1.0 - b0) * eta_negT + coeff * (1.0 - eta_negT)
    return alpha, eta


def _alpha_delta_nonneg(b0: float, psi: float, T: int) -> Tuple[float, float]:
    # eta* = 1/(1-psi); closed form alpha = 1 - b0 (1-psi)^T. psi < 1 always
    # on the admissible domain; the clamp keeps eta finite and > 1 at the
    # psi -> 1 and psi = 0 edges.
    eta = 1.0 / (1.0 - min(max(psi, 1e-9), _ETA_CLAMP))
    alpha = 1.0 - b0 * (1.0 - psi) ** T
    return alpha, eta


def exit_bound(b0: float, beta: float, delta: float, T: int) -> RiskBound:
    """Upper bound on the T-step exit probability from the barrier set.

    ``b0`` is the initial barrier value (or the guaranteed floor sigma when
    starting anywhere in the initial set). delta < 0 uses the horizon-end
    bound; delta >= 0 the time-zero bound 1 - b0 (1 - beta + delta)^T. The
    two agree at delta = 0. The result is clamped to [0, 1].
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0,1)")
    if not (beta - 1.0 < delta <= beta):
        raise ValueError("delta must lie in (beta-1, beta]")
    if not (0.0 <= b0 <= 1.0):
        raise ValueError("b0 must lie in [0,1]")
    if T < 1:
        raise ValueError("T must be a positive integer")
    psi = beta - delta
    if delta < 0.0:
        alpha, eta = _alpha_delta_negative(b0, beta, psi, T)
        case = BoundCase.DELTA_NEGATIVE
    else:
        alpha, eta = _alpha_delta_nonneg(b0, psi, T)
        case = BoundCase.DELTA_NONNEG
    alpha = min(1.0, max(0.0, alpha))
    return RiskBound(
        alpha=alpha, case=case, eta_star=eta, psi=psi, beta=beta, delta=delta, horizon=T, b0=b0
    )


@dataclass(frozen=True)
class DeltaBranch:
    """A feasible interval of the decrease shift for one case of the
    target-risk selection; ``z`` = 0 for delta < 0, 1 for delta >= 0."""

    z: int
    lo: float
    hi: float

    @property
    def best(self) -> float:
        """Least-conservative admissible shift (smallest delta)."""
        return self.lo


def select_delta(
    alpha_bar: float, beta: float, sigma: float, T: int, big_m: float = 10.0
) -> List[DeltaBranch]:
    """Feasible delta intervals meeting a target exit probability alpha_bar.

    Starting anywhere in the initial set guarantees b0 >= sigma, so the two
    closed-form bound cases become affine conditions on delta:

        z=0 (delta < 0):  theta3 * delta >= theta2 - theta1*sigma - alpha_bar
        z=1 (delta >= 0): delta >= theta4 + beta - 1,
                          theta4 = ((1-alpha_bar)/sigma)^(1/T)

    with theta1 = (1-beta)^T, theta3 = sum_{i=1..T} (1-beta)^{i-1}, and
    theta2 = theta1 + beta*theta3. Each branch is intersected with its sign
    domain inside (beta-1, beta]; empty branches are dropped. One SDP per
    returned branch (at ``branch.best``) and the better objective wins.
    ``big_m`` only documents the disjunction constant of the equivalent
    mixed-integer encoding; enumeration makes it immaterial.
    """
    if not (0.0 < alpha_bar < 1.0):
        raise ValueError("alpha_bar must lie in (0,1)")
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0,1)")
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0,1)")
    if T < 1:
        raise ValueError("T must be a positive integer")
    theta1 = (1.0 - beta) ** T
    theta3 = (1.0 - theta1) / beta  # geometric sum
    theta2 = theta1 + beta * theta3
    theta4 = ((1.0 - alpha_bar) / sigma) ** (1.0 / T)

    branches: List[DeltaBranch] = []
    # delta < 0 branch
    lo0 = (theta2 - theta1 * sigma - alpha_bar) / theta3
    lo0 = max(lo0, np.nextafter(beta - 1.0, beta))
    if lo0 < 0.0:
        branches.append(DeltaBranch(z=0, lo=lo0, hi=0.0))
    # delta >= 0 branch
    lo1 = max(0.0, theta4 + beta - 1.0)
    if lo1 <= beta:
        branches.append(DeltaBranch(z=1, lo=lo1, hi=beta))
    return branches


def inflate_support(cert: Certificate, hausdorff_d: float) -> Certificate:
    """Shrink the certified set to absorb a support misestimate.

    A disturbance set inflated by ``hausdorff_d`` (Minkowski sum with a ball
    of that radius) is covered by scaling states by (1 + d); the barrier
    matrix becomes Omega / (1+d)^2, so every level-set semi-axis shrinks by
    exactly (1 + d). The feedback gain K is unchanged in the scaled
    coordinates; the scale factor is recorded in the params.
    """
    if hausdorff_d < 0:
        raise ValueError("Hausdorff distance must be nonnegative")
    scale = (1.0 + hausdorff_d) ** 2
    params = dict(cert.params)
    params["support_inflation"] = hausdorff_d
    return Certificate(
        Omega=cert.Omega / scale,
        Y=cert.Y / scale,  # keeps K = Y Omega^{-1} identical
        mode=cert.mode,
        params=params,
        objective_value=cert.objective_value / scale,
        solver_status=cert.solver_status,
    )
