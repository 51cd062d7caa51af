"""Online safety filter: minimally invasive input correction.

At each state x the filter solves

    min_u 0.5 ||u - u_nom||^2
    s.t.  b(Ax + Bu + Dw) >= (1-beta) b(x)  for all ||w|| <= 1,

which the S-procedure turns into a small SDP in (u, gamma, lambda). A
closed-loop runner applies the filter along a trajectory, falling back to
the certificate controller u = Kx whenever the per-state program is
reported infeasible (inside the barrier set Kx always satisfies the robust
decrease, so the fallback is safe there; outside, the step is flagged).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .conic import (
    ConicProgram,
    LinearConstraint,
    MatrixVar,
    Objective,
    ScalarVar,
    SolverSettings,
    solve,
    sym_block,
)
from .model import Certificate, Plant, SolverStatus, barrier_value
from .quadratics import max_quadratic_over_ball

__all__ = [
    "FilterParams",
    "FilterResult",
    "filter_params",
    "solve_filter",
    "Trajectory",
    "run_closed_loop",
]


@dataclass(frozen=True)
class FilterParams:
    """State-dependent data of the per-state program.

    With P = Omega^{-1} and the decrease target b(x+) >= (1-beta) b(x):
        Q = B'PB, a = B'PAx, bmat = D'PB, L = D'PD, dvec = D'PAx,
        kappa = x'(A'PA - (1-beta)P)x - beta,
    so that the filter constraint reads, for all ||w|| <= 1,
        u'Qu + 2u'a + kappa + (w'Lw + 2w'(bmat u + dvec)) <= 0.
    (Expanding b(x+) - (1-beta)b(x) >= 0 and negating gives the constant
    -beta; the multiplier on P in the quadratic term is 1-beta.)
    """

    Q: np.ndarray
    a: np.ndarray
    bmat: np.ndarray
    L: np.ndarray
    dvec: np.ndarray
    kappa: float
    beta: float
    x: np.ndarray


@dataclass(frozen=True)
class FilterResult:
    u_star: np.ndarray
    objective: float
    status: SolverStatus
    lam_f: float = float("nan")
    gam_f: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


def filter_params(cert: Certificate, plant: Plant, beta: float, x: np.ndarray) -> FilterParams:
    x = np.asarray(x, float).reshape(-1)
    A, B, D = plant.A, plant.B, plant.D
    PB = cert.omega_solve(B)
    PD = cert.omega_solve(D)
    PAx = cert.omega_solve(A @ x)
    Px = cert.omega_solve(x)
    Q = B.T @ PB
    L = D.T @ PD
    kappa = float((A @ x) @ PAx - (1.0 - beta) * (x @ Px) - beta)
    return FilterParams(
        Q=0.5 * (Q + Q.T),
        a=B.T @ PAx,
        bmat=D.T @ PB,
        L=0.5 * (L + L.T),
        dvec=D.T @ PAx,
        kappa=kappa,
        beta=beta,
        x=x,
    )


def worst_case_violation(params: FilterParams, u: np.ndarray) -> float:
    """Exact constraint value at the worst unit-ball disturbance;
    nonpositive means u is robustly admissible at this state."""
    u = np.asarray(u, float).reshape(-1)
    sup, _ = max_quadratic_over_ball(params.L, params.bmat @ u + params.dvec)
    return float(u @ params.Q @ u + 2.0 * u @ params.a + params.kappa + sup)


def _filter_program(params: FilterParams, u_nom: np.ndarray) -> ConicProgram:
    m = params.Q.shape[0]
    d = params.L.shape[0]
    u_nom = np.asarray(u_nom, float).reshape(-1, 1)

    # PSD factor of Q for the Schur form of the quadratic constraint
    w, V = np.linalg.eigh(params.Q)
    G = (V * np.sqrt(np.clip(w, 0.0, None))).T  # Q = G'G

    def eye_terms(var, size, scale=1.0):
        out = []
        for i in range(size):
            e = np.zeros((size, 1))
            e[i, 0] = 1.0
            out.append((var, scale * e, e.T, False))
        return out

    # 0.5||u - u_nom||^2 <= t  via  [I, u - u_nom; *, 2t] >= 0
    epi = sym_block(
        "objective_epigraph",
        [
            [np.eye(m), [("u", np.eye(m), np.eye(1), False), -u_nom]],
            [[("u", np.eye(1), np.eye(m), True), -u_nom.T], eye_terms("t", 1, 2.0)],
        ],
        [m, 1],
    )
    # u'Qu + 2u'a + kappa + gam <= 0  via  [I, Gu; *, -(2a'u + kappa + gam)] >= 0
    quad = sym_block(
        "robust_quadratic",
        [
            [np.eye(m), [("u", G, np.eye(1), False)]],
            [
                [("u", np.eye(1), G.T, True)],
                [("u", -2.0 * params.a.reshape(1, -1), np.eye(1), False)]
                + eye_terms("gam", 1, -1.0)
                + [np.array([[-params.kappa]])],
            ],
        ],
        [m, 1],
    )
    # S-procedure block for the unit-ball disturbance
    slem = sym_block(
        "s_lemma",
        [
            [eye_terms("lam", d) + [-params.L], [("u", params.bmat, np.eye(1), False), params.dvec.reshape(-1, 1)]],
            [
                [("u", np.eye(1), params.bmat.T, True), params.dvec.reshape(1, -1)],
                eye_terms("gam", 1) + eye_terms("lam", 1, -1.0),
            ],
        ],
        [d, 1],
    )
    return ConicProgram(
        scalar_vars=(ScalarVar("t"), ScalarVar("gam", nonneg=True), ScalarVar("lam", nonneg=True)),
        matrix_vars=(MatrixVar("u", m, 1),),
        lmi_blocks=(epi, quad, slem),
        objective=Objective("minimize", "scalar", "t"),
    )


def solve_filter(
    params: FilterParams,
    u_nom: np.ndarray,
    settings: SolverSettings = SolverSettings(),
) -> FilterResult:
    """Minimally modify u_nom subject to the robust barrier decrease.

    If u_nom itself passes the exact worst-case check the program is skipped
    and u_nom is returned unchanged (the S-procedure is lossless for the
    single ball constraint, so this agrees with the SDP optimum).
    """
    u_nom = np.asarray(u_nom, float).reshape(-1)
    if worst_case_violation(params, u_nom) <= 0.0:
        return FilterResult(u_star=u_nom.copy(), objective=0.0, status=SolverStatus.OPTIMAL)
    sol = solve(_filter_program(params, u_nom), settings)
    if not sol.optimal:
        return FilterResult(u_star=u_nom.copy(), objective=float("nan"), status=sol.status)
    u = np.asarray(sol.values["u"], float).reshape(-1)
    return FilterResult(
        u_star=u,
        objective=float(sol.objective),
        status=sol.status,
        lam_f=float(sol.values["lam"]),
        gam_f=float(sol.values["gam"]),
    )


@dataclass
class Trajectory:
    states: np.ndarray  # (T+1, n)
    inputs: np.ndarray  # (T, m)
    barrier: np.ndarray  # (T+1,)
    fallback: np.ndarray  # (T,) bool
    metadata: dict = field(default_factory=dict)

    @property
    def min_barrier(self) -> float:
        return float(self.barrier.min())


def run_closed_loop(
    plant: Plant,
    cert: Certificate,
    beta: float,
    u_nom_fn: Callable[[np.ndarray], np.ndarray],
    noise_sampler: Callable[[np.random.Generator], np.ndarray],
    T: int,
    seed: int = 42,
    x0: Optional[np.ndarray] = None,
    settings: SolverSettings = SolverSettings(),
) -> Trajectory:
    """Simulate the filtered loop for T steps; deterministic given seed."""
    if T < 1:
        raise ValueError("T must be a positive integer")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed & (2**64 - 1), 0], dtype=np.uint64)))
    n, m = plant.n, plant.m
    x = np.zeros(n) if x0 is None else np.asarray(x0, float).reshape(-1)
    states = np.zeros((T + 1, n))
    inputs = np.zeros((T, m))
    barrier = np.zeros(T + 1)
    fallback = np.zeros(T, dtype=bool)
    states[0] = x
    barrier[0] = barrier_value(cert, x)
    for t in range(T):
        params = filter_params(cert, plant, beta, x)
        res = solve_filter(params, np.asarray(u_nom_fn(x), float).reshape(-1), settings)
        if res.optimal:
            u = res.u_star
        else:
            u = cert.K @ x
            fallback[t] = True
        w = np.asarray(noise_sampler(rng), float).reshape(-1)
        x = plant.A @ x + plant.B @ u + plant.D @ w
        inputs[t] = u
        states[t + 1] = x
        barrier[t + 1] = barrier_value(cert, x)
    return Trajectory(
        states=states,
        inputs=inputs,
        barrier=barrier,
        fallback=fallback,
        metadata={"seed": seed, "beta": beta, "fallback_steps": int(fallback.sum())},
    )
