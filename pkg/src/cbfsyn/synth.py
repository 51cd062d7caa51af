"""Assembly of the barrier/controller co-design SDPs.

Each ``build_*`` function turns problem data into a :class:`ConicProgram`
(or a reusable :class:`Fragment` of one). Decision variables throughout:
``Omega`` (n x n symmetric, the barrier shape matrix) and ``Y`` (m x n,
with the feedback gain recovered as K = Y Omega^{-1}).

Sign conventions. The robust decrease condition is
``b(x+) - b(x) >= -beta b(x)`` with ``beta in (0,1)``; equivalently the
quadratic form V = x'Omega^{-1}x contracts with factor (1-beta) plus a
disturbance allowance. The expected-decrease condition of the stochastic
design reads ``E[b(x+)] >= (1-beta) b(x) + delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .conic import (
    ConicProgram,
    LinearConstraint,
    LmiBlock,
    MatrixVar,
    Objective,
    ScalarVar,
    Solution,
    SolverSettings,
    solve,
    sym_block,
)
from .model import (
    CertMode,
    Certificate,
    FreeInput,
    NoiseKind,
    NoiseModel,
    NormBallInput,
    Plant,
    PolytopeInput,
    SafetySpec,
    SolverStatus,
)

__all__ = [
    "InfiniteHorizonSpec",
    "FiniteHorizonSpec",
    "GelbrichSpec",
    "FrobeniusSpec",
    "Fragment",
    "build_infinite_horizon",
    "build_finite_horizon",
    "build_ellipsoidal_containment",
    "build_norm_input_constraint",
    "build_polytopic_input_constraint",
    "build_gelbrich_robust",
    "build_frobenius_robust",
    "extract_certificate",
    "synthesize_infinite_horizon",
    "synthesize_finite_horizon",
    "bisect_infinite_horizon",
    "LAMBDA_U_GRID",
]

# outer grid for the fixed input-polytope multiplier, as fractions of 2*min(h)
LAMBDA_U_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class InfiniteHorizonSpec:
    """Parameters of the robust (bounded-noise) design: S-procedure
    multiplier ``lam`` and decrease rate ``beta``, both in (0,1)."""

    lam: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise ValueError("lambda must lie in (0,1)")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0,1)")

    @property
    def beta_tilde(self) -> float:
        return 1.0 - self.beta


@dataclass(frozen=True)
class FiniteHorizonSpec:
    """Parameters of the probabilistic (unbounded-noise) design.

    ``delta`` shifts the expected-decrease condition and may be negative
    (less conservative) down to beta-1; ``psi = beta - delta`` is the
    additive budget that absorbs the noise second moment. ``trace_mode``
    selects the moment encoding: "sound" bounds tr(Omega^{-1} Sigma) exactly
    through a PSD slack, "paper" reproduces the scalar-multiplier variant
    that only bounds the largest eigenvalue.
    """

    beta: float
    delta: float = 0.0
    sigma: float = 0.5
    horizon: int = 1
    trace_mode: str = "sound"  # "sound" | "paper"

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0,1)")
        if not (self.beta - 1.0 < self.delta <= self.beta):
            raise ValueError("delta must lie in (beta-1, beta]")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (0,1)")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if self.trace_mode not in ("sound", "paper"):
            raise ValueError("trace_mode must be 'sound' or 'paper'")

    @property
    def psi(self) -> float:
        return self.beta - self.delta


@dataclass(frozen=True)
class GelbrichSpec:
    """Moment ambiguity ball: covariances within Gelbrich distance
    ``radius`` of the nominal covariance ``nominal``."""

    nominal: np.ndarray
    radius: float

    def __post_init__(self):
        S = 0.5 * (np.atleast_2d(np.asarray(self.nominal, float)) + np.atleast_2d(np.asarray(self.nominal, float)).T)
        if np.linalg.eigvalsh(S).min() <= 0:
            raise ValueError("nominal covariance must be positive definite")
        object.__setattr__(self, "nominal", S)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class FrobeniusSpec:
    """Frobenius-ball covariance robustification around the matrix that
    enters the moment block off-diagonally (as printed, the nominal itself)."""

    nominal: np.ndarray
    radius: float

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.nominal, float))
        object.__setattr__(self, "nominal", S)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class Fragment:
    """A reusable piece of a program: variables plus constraints."""

    scalar_vars: Tuple[ScalarVar, ...] = ()
    matrix_vars: Tuple[MatrixVar, ...] = ()
    lmi_blocks: Tuple[LmiBlock, ...] = ()
    linear_constraints: Tuple[LinearConstraint, ...] = ()


def _merge(base_vars, fragments, objective) -> ConicProgram:
    scal, mat, blocks, lins = [], [], [], []
    for f in fragments:
        scal.extend(f.scalar_vars)
        mat.extend(f.matrix_vars)
        blocks.extend(f.lmi_blocks)
        lins.extend(f.linear_constraints)
    mat = list(base_vars) + mat
    return ConicProgram(
        scalar_vars=tuple(scal),
        matrix_vars=tuple(mat),
        lmi_blocks=tuple(blocks),
        linear_constraints=tuple(lins),
        objective=objective,
    )


def _eye_terms(var: str, size: int, scale: float = 1.0):
    """Terms summing to scale * var * I for a scalar variable."""
    out = []
    for i in range(size):
        e = np.zeros((size, 1))
        e[i, 0] = 1.0
        out.append((var, scale * e, e.T, False))
    return out


def _scalar_matrix_terms(var: str, M: np.ndarray):
    """Terms summing to var * M for a scalar variable (M fixed)."""
    M = np.atleast_2d(np.asarray(M, float))
    out = []
    for j in range(M.shape[1]):
        e = np.zeros((1, M.shape[1]))
        e[0, j] = 1.0
        out.append((var, M[:, [j]], e, False))
    return out


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues clamped at zero."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _pd_floor(plant: Plant) -> float:
    return 1e-8 * (1.0 + np.linalg.norm(plant.A, 2))


def _floor_block(plant: Plant) -> LmiBlock:
    n = plant.n
    eps = _pd_floor(plant)
    return sym_block("omega_pd_floor", [[[("Omega", np.eye(n), np.eye(n), False), -eps * np.eye(n)]]], [n])


def _halfspace_constraints(spec: SafetySpec) -> Tuple[LinearConstraint, ...]:
    out = []
    for j, a in enumerate(spec.halfspaces):
        out.append(
            LinearConstraint(
                name=f"halfspace_{j}",
                terms=(("Omega", -np.outer(a, a)),),
                const=1.0,
                sense=">=",
            )
        )
    return tuple(out)


def _initial_containment(spec: SafetySpec, n: int) -> LmiBlock:
    Reff = spec.effective_R
    return sym_block(
        "initial_containment",
        [[Reff, np.eye(n)], [np.eye(n), [("Omega", np.eye(n), np.eye(n), False)]]],
        [n, n],
    )


def build_ellipsoidal_containment(S: np.ndarray) -> Fragment:
    """Containment of the barrier set in the ellipsoid {x'Sx <= 1}:
    [Omega, Omega; Omega, S^{-1}] >= 0, with S^{-1} formed by factorization."""
    S = 0.5 * (np.atleast_2d(np.asarray(S, float)) + np.atleast_2d(np.asarray(S, float)).T)
    if np.linalg.eigvalsh(S).min() <= 0:
        raise ValueError("ellipsoidal safe-set matrix must be positive definite")
    n = S.shape[0]
    Sinv = cho_solve(cho_factor(S), np.eye(n))
    Sinv = 0.5 * (Sinv + Sinv.T)
    om = ("Omega", np.eye(n), np.eye(n), False)
    block = sym_block(
        "ellipsoidal_containment",
        [[[om], [om]], [[om], Sinv]],
        [n, n],
    )
    return Fragment(lmi_blocks=(block,))


def build_norm_input_constraint(u_bar: float, n: int, m: int) -> Fragment:
    """Bound u'u <= u_bar over the barrier set: [Omega, Y'; Y, u_bar I] >= 0."""
    if u_bar <= 0:
        raise ValueError("u_bar must be positive")
    block = sym_block(
        "norm_input",
        [
            [[("Omega", np.eye(n), np.eye(n), False)], [("Y", np.eye(n), np.eye(m), True)]],
            [[("Y", np.eye(m), np.eye(n), False)], u_bar * np.eye(m)],
        ],
        [n, m],
    )
    return Fragment(lmi_blocks=(block,))


def build_polytopic_input_constraint(
    H: np.ndarray, h: np.ndarray, n: int, lambda_u: float
) -> Fragment:
    """Polytopic input constraint H u <= h over the barrier set.

    For a fixed multiplier lambda_u in (0, 2 min h) this emits, per row i,
    the Schur form of lambda_u Omega >= Y'H_i'H_i Y / (2 h_i - lambda_u);
    the multiplier itself is chosen by an outer grid to preserve joint
    convexity in (Omega, Y).
    """
    H = np.atleast_2d(np.asarray(H, float))
    h = np.asarray(h, float).reshape(-1)
    if np.any(h <= 0):
        raise ValueError("polytopic input constraint requires h > 0 componentwise")
    if not (0.0 < lambda_u < 2.0 * h.min()):
        raise ValueError("lambda_u must lie in (0, 2*min(h))")
    m = H.shape[1]
    blocks = []
    for i in range(H.shape[0]):
        Hi = H[i : i + 1, :]  # 1 x m
        blocks.append(
            sym_block(
                f"input_poly_{i}",
                [
                    [[("Omega", lambda_u * np.eye(n), np.eye(n), False)], [("Y", np.eye(n), Hi.T, True)]],
                    [[("Y", Hi, np.eye(n), False)], np.array([[2.0 * h[i] - lambda_u]])],
                ],
                [n, 1],
            )
        )
    return Fragment(lmi_blocks=tuple(blocks))


def _input_fragment(spec: SafetySpec, plant: Plant, lambda_u: Optional[float]) -> Fragment:
    iset = spec.input_set
    if isinstance(iset, FreeInput):
        return Fragment()
    if isinstance(iset, NormBallInput):
        return build_norm_input_constraint(iset.u_bar, plant.n, plant.m)
    if isinstance(iset, PolytopeInput):
        if lambda_u is None:
            lambda_u = 0.5 * 2.0 * iset.h.min()
        return build_polytopic_input_constraint(iset.H, iset.h, plant.n, lambda_u)
    raise TypeError(f"unknown input set {iset!r}")


# ---------------------------------------------------------------------------
# infinite horizon

def build_infinite_horizon(
    plant: Plant,
    spec: SafetySpec,
    ih: InfiniteHorizonSpec,
    noise: Optional[NoiseModel] = None,
    objective: str = "trace",
    lambda_u: Optional[float] = None,
) -> ConicProgram:
    """Robust-invariance program for ball-bounded disturbances.

    Constraints: the (n+d+n) robust-decrease LMI (<= 0), initial-set
    containment, half-space and optional ellipsoidal safe-set containment,
    input-set fragments, and a PD floor on Omega.
    """
    if noise is not None:
        if noise.kind != NoiseKind.UNIT_BALL:
            raise ValueError("infinite-horizon synthesis requires unit-ball noise")
        D = plant.D * noise.radius
    else:
        D = plant.D
    n, m, d = plant.n, plant.m, plant.d
    A, B = plant.A, plant.B
    lam, bt = ih.lam, ih.beta_tilde

    base_vars = (MatrixVar("Omega", n, n, symmetric=True), MatrixVar("Y", m, n))
    omega = ("Omega", np.eye(n), np.eye(n), False)
    decrease = sym_block(
        "robust_decrease",
        [
            [[("Omega", (lam - bt) * np.eye(n), np.eye(n), False)], None, [("Omega", np.eye(n), A.T, False), ("Y", np.eye(n), B.T, True)]],
            [None, -lam * np.eye(d), D.T],
            [[("Omega", A, np.eye(n), False), ("Y", B, np.eye(n), False)], D, [("Omega", -np.eye(n), np.eye(n), False)]],
        ],
        [n, d, n],
        negative=True,
    )
    frags = [
        Fragment(lmi_blocks=(decrease, _initial_containment(spec, n), _floor_block(plant)),
                 linear_constraints=_halfspace_constraints(spec)),
        _input_fragment(spec, plant, lambda_u),
    ]
    if spec.ellipsoidal_safe is not None:
        frags.append(build_ellipsoidal_containment(spec.ellipsoidal_safe))
    return _merge(base_vars, frags, Objective("maximize", objective, "Omega"))


# ---------------------------------------------------------------------------
# finite horizon

def _moment_fragment(fh: FiniteHorizonSpec, sigma_sqrt: np.ndarray, n: int) -> Fragment:
    budget = fh.beta - fh.delta
    if fh.trace_mode == "paper":
        lam_terms = _eye_terms("lam_m", n)
        block = sym_block(
            "moment",
            [[lam_terms, sigma_sqrt], [sigma_sqrt.T, [("Omega", np.eye(n), np.eye(n), False)]]],
            [n, n],
        )
        lin = LinearConstraint("moment_budget", (("lam_m", np.array([[-1.0]])),), const=budget, sense=">=")
        return Fragment(scalar_vars=(ScalarVar("lam_m", nonneg=True),), lmi_blocks=(block,), linear_constraints=(lin,))
    # sound mode: exact epigraph of tr(Omega^{-1} Sigma)
    zvar = ("Z", np.eye(n), np.eye(n), False)
    block = sym_block(
        "moment",
        [[[zvar], sigma_sqrt], [sigma_sqrt.T, [("Omega", np.eye(n), np.eye(n), False)]]],
        [n, n],
    )
    zpsd = sym_block("moment_slack_psd", [[[zvar]]], [n])
    lin = LinearConstraint("moment_budget", (("Z", -np.eye(n)),), const=budget, sense=">=")
    return Fragment(
        matrix_vars=(MatrixVar("Z", n, n, symmetric=True),),
        lmi_blocks=(block, zpsd),
        linear_constraints=(lin,),
    )


def _decrease_block(plant: Plant, beta: float) -> LmiBlock:
    n, m = plant.n, plant.m
    A, B = plant.A, plant.B
    bt = 1.0 - beta
    return sym_block(
        "expected_decrease",
        [
            [[("Omega", bt * np.eye(n), np.eye(n), False)], [("Omega", np.eye(n), A.T, False), ("Y", np.eye(n), B.T, True)]],
            [[("Omega", A, np.eye(n), False), ("Y", B, np.eye(n), False)], [("Omega", np.eye(n), np.eye(n), False)]],
        ],
        [n, n],
    )


def effective_covariance(plant: Plant, noise: NoiseModel) -> np.ndarray:
    """State-noise covariance D Sigma D' seen by the barrier dynamics."""
    if noise.kind != NoiseKind.GAUSSIAN or noise.covariance is None:
        raise ValueError("finite-horizon synthesis requires Gaussian noise with a covariance")
    return plant.D @ noise.covariance @ plant.D.T


def build_finite_horizon(
    plant: Plant,
    spec: SafetySpec,
    fh: FiniteHorizonSpec,
    noise: NoiseModel,
    objective: str = "trace",
    lambda_u: Optional[float] = None,
) -> ConicProgram:
    """Expected-decrease program for Gaussian disturbances.

    Constraints: the moment bound on the noise second moment (mode per
    ``fh.trace_mode``), the expected-decrease LMI, initial-set containment
    scaled by 1/(1-sigma), half-space / ellipsoidal containment, input-set
    fragments, and the PD floor.
    """
    n, m = plant.n, plant.m
    sig_sqrt = _psd_sqrt(effective_covariance(plant, noise))
    base_vars = (MatrixVar("Omega", n, n, symmetric=True), MatrixVar("Y", m, n))
    frags = [
        _moment_fragment(fh, sig_sqrt, n),
        Fragment(
            lmi_blocks=(_decrease_block(plant, fh.beta), _initial_containment(spec, n), _floor_block(plant)),
            linear_constraints=_halfspace_constraints(spec),
        ),
        _input_fragment(spec, plant, lambda_u),
    ]
    if spec.ellipsoidal_safe is not None:
        frags.append(build_ellipsoidal_containment(spec.ellipsoidal_safe))
    return _merge(base_vars, frags, Objective("maximize", objective, "Omega"))


def build_gelbrich_robust(plant: Plant, gelbrich: GelbrichSpec, fh: FiniteHorizonSpec) -> Fragment:
    """Distributionally robust moment condition over a Gelbrich ball.

    Dual variables gamma >= 0, Z >= 0, Q and q0 certify
    sup {tr(D'Omega^{-1}D Sigma) : Sigma in ball} <= beta - delta
    jointly with the expected-decrease LMI. Replaces both the nominal
    moment fragment and the plain decrease block.

    Two fixes relative to the printed dual are applied (see the decisions
    ledger): the scalar lower bound is q0 >= delta - beta (the printed
    q0 >= beta + delta makes the program infeasible for any delta >= -beta),
    and the decrease condition enters as its own PSD block rather than
    bounded above by q0*I.
    """
    S = gelbrich.nominal
    d = S.shape[0]
    if d != plant.d:
        raise ValueError("nominal covariance dimension must match the disturbance input")
    n = plant.n
    rho = gelbrich.radius
    Ssq = _psd_sqrt(S)
    qvar = ("Q", np.eye(d), np.eye(d), False)

    gram = sym_block(
        "gelbrich_gram",
        [[[qvar], plant.D.T], [plant.D, [("Omega", np.eye(n), np.eye(n), False)]]],
        [d, n],
    )
    dual = sym_block(
        "gelbrich_dual",
        [
            [_eye_terms("gamma_g", d) + [("Q", -np.eye(d), np.eye(d), False)], _scalar_matrix_terms("gamma_g", Ssq)],
            [_scalar_matrix_terms("gamma_g", Ssq.T), [("Zg", np.eye(d), np.eye(d), False)]],
        ],
        [d, d],
    )
    zpsd = sym_block("gelbrich_slack_psd", [[[("Zg", np.eye(d), np.eye(d), False)]]], [d])
    lin_budget = LinearConstraint(
        "gelbrich_budget",
        (("q0", np.array([[-1.0]])), ("gamma_g", np.array([[-(rho**2 - np.trace(S))]])), ("Zg", -np.eye(d))),
        const=0.0,
        sense=">=",
    )
    lin_q0 = LinearConstraint(
        "gelbrich_q0_floor",
        (("q0", np.array([[1.0]])),),
        const=fh.beta - fh.delta,
        sense=">=",
    )
    return Fragment(
        scalar_vars=(ScalarVar("gamma_g", nonneg=True), ScalarVar("q0")),
        matrix_vars=(MatrixVar("Zg", d, d, symmetric=True), MatrixVar("Q", d, d, symmetric=True)),
        lmi_blocks=(gram, dual, zpsd, _decrease_block(plant, fh.beta)),
        linear_constraints=(lin_budget, lin_q0),
    )


def build_frobenius_robust(S: np.ndarray, rho: float, plant: Plant, fh: FiniteHorizonSpec) -> Fragment:
    """Frobenius-ball robustification of the moment block.

    Adds nu >= rho^2/2 and [(lam - nu) I, S; S', Omega - nu I] >= 0 in place
    of the nominal moment LMI; S enters the off-diagonal exactly as given.
    """
    if rho < 0:
        raise ValueError("radius must be nonnegative")
    S = np.atleast_2d(np.asarray(S, float))
    d, n = S.shape[0], plant.n
    if S.shape != (d, n):
        raise ValueError("S must map state dimension to disturbance dimension")
    block = sym_block(
        "frobenius_moment",
        [
            [_eye_terms("lam_m", d) + _eye_terms("nu_f", d, -1.0), S],
            [S.T, [("Omega", np.eye(n), np.eye(n), False)] + _eye_terms("nu_f", n, -1.0)],
        ],
        [d, n],
    )
    lin_nu = LinearConstraint(
        "frobenius_nu_floor", (("nu_f", np.array([[1.0]])),), const=-(rho**2) / 2.0, sense=">="
    )
    lin_budget = LinearConstraint(
        "moment_budget", (("lam_m", np.array([[-1.0]])),), const=fh.beta - fh.delta, sense=">="
    )
    return Fragment(
        scalar_vars=(ScalarVar("lam_m", nonneg=True), ScalarVar("nu_f", nonneg=True)),
        lmi_blocks=(block,),
        linear_constraints=(lin_nu, lin_budget),
    )


def build_finite_horizon_robust(
    plant: Plant,
    spec: SafetySpec,
    fh: FiniteHorizonSpec,
    robust: Union[GelbrichSpec, FrobeniusSpec],
    objective: str = "trace",
    lambda_u: Optional[float] = None,
) -> ConicProgram:
    """Finite-horizon program with the nominal moment (and, for Gelbrich,
    decrease) constraints replaced by a distributionally robust fragment."""
    n, m = plant.n, plant.m
    base_vars = (MatrixVar("Omega", n, n, symmetric=True), MatrixVar("Y", m, n))
    if isinstance(robust, GelbrichSpec):
        robust_frag = build_gelbrich_robust(plant, robust, fh)
        extra_blocks = ()
    elif isinstance(robust, FrobeniusSpec):
        robust_frag = build_frobenius_robust(robust.nominal, robust.radius, plant, fh)
        extra_blocks = (_decrease_block(plant, fh.beta),)
    else:
        raise TypeError("robust must be a GelbrichSpec or FrobeniusSpec")
    frags = [
        robust_frag,
        Fragment(
            lmi_blocks=extra_blocks + (_initial_containment(spec, n), _floor_block(plant)),
            linear_constraints=_halfspace_constraints(spec),
        ),
        _input_fragment(spec, plant, lambda_u),
    ]
    if spec.ellipsoidal_safe is not None:
        frags.append(build_ellipsoidal_containment(spec.ellipsoidal_safe))
    return _merge(base_vars, frags, Objective("maximize", objective, "Omega"))


# ---------------------------------------------------------------------------
# certificate extraction and convenience drivers

def extract_certificate(solution: Solution, mode: CertMode, params: dict) -> Certificate:
    """Build a Certificate from an Optimal solution; raises otherwise."""
    if solution.status != SolverStatus.OPTIMAL:
        raise ValueError(f"cannot extract a certificate from a {solution.status.value} solution")
    Om = np.asarray(solution.values["Omega"], float)
    Om = 0.5 * (Om + Om.T)
    Y = np.atleast_2d(np.asarray(solution.values["Y"], float))
    return Certificate(
        Omega=Om,
        Y=Y,
        mode=mode,
        params=dict(params),
        objective_value=solution.objective,
        solver_status=solution.status,
    )


def _poly_grid(spec: SafetySpec):
    iset = spec.input_set
    if isinstance(iset, PolytopeInput):
        return [f * 2.0 * iset.h.min() for f in LAMBDA_U_GRID]
    return [None]


def synthesize_infinite_horizon(
    plant: Plant,
    spec: SafetySpec,
    ih: InfiniteHorizonSpec,
    noise: Optional[NoiseModel] = None,
    objective: str = "trace",
    settings: SolverSettings = SolverSettings(),
):
    """Build and solve; returns (certificate_or_None, best_solution).

    Polytopic input sets solve one program per multiplier grid point and
    keep the best objective.
    """
    best: Optional[Solution] = None
    for lu in _poly_grid(spec):
        sol = solve(build_infinite_horizon(plant, spec, ih, noise, objective, lambda_u=lu), settings)
        if best is None or (sol.optimal and (not best.optimal or sol.objective > best.objective)):
            best = sol
    params = {"lam": ih.lam, "beta": ih.beta, "sigma": spec.initial_margin, "objective": objective}
    if best is not None and best.optimal:
        return extract_certificate(best, CertMode.INFINITE_HORIZON, params), best
    return None, best


def synthesize_finite_horizon(
    plant: Plant,
    spec: SafetySpec,
    fh: FiniteHorizonSpec,
    noise: Optional[NoiseModel] = None,
    robust: Union[GelbrichSpec, FrobeniusSpec, None] = None,
    objective: str = "trace",
    settings: SolverSettings = SolverSettings(),
):
    """Build and solve the finite-horizon program (nominal or robust)."""
    best: Optional[Solution] = None
    for lu in _poly_grid(spec):
        if robust is None:
            prog = build_finite_horizon(plant, spec, fh, noise, objective, lambda_u=lu)
        else:
            prog = build_finite_horizon_robust(plant, spec, fh, robust, objective, lambda_u=lu)
        sol = solve(prog, settings)
        if best is None or (sol.optimal and (not best.optimal or sol.objective > best.objective)):
            best = sol
    params = {
        "beta": fh.beta,
        "delta": fh.delta,
        "sigma": fh.sigma,
        "horizon": fh.horizon,
        "trace_mode": fh.trace_mode,
        "objective": objective,
    }
    if robust is not None:
        params["rho"] = robust.radius
    if best is not None and best.optimal:
        return extract_certificate(best, CertMode.FINITE_HORIZON, params), best
    return None, best


def bisect_infinite_horizon(
    plant: Plant,
    spec: SafetySpec,
    beta: float,
    noise: Optional[NoiseModel] = None,
    objective: str = "trace",
    interval: Tuple[float, float] = (1e-3, 1.0 - 1e-3),
    tol: float = 1e-3,
    settings: SolverSettings = SolverSettings(),
):
    """Golden-section search over the S-procedure multiplier; returns
    (lam_star, certificate_or_None, solution)."""
    from .conic import bisect_lambda

    def builder(lam: float) -> ConicProgram:
        return build_infinite_horizon(plant, spec, InfiniteHorizonSpec(lam, beta), noise, objective)

    lam_star, sol = bisect_lambda(builder, interval, tol, settings)
    if sol.optimal:
        params = {"lam": lam_star, "beta": beta, "sigma": spec.initial_margin, "objective": objective}
        return lam_star, extract_certificate(sol, CertMode.INFINITE_HORIZON, params), sol
    return lam_star, None, sol
