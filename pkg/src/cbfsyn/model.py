"""Domain types: plants, disturbance models, safety specifications, certificates.

All types are immutable after construction and safe to share across threads;
the operations in this module are pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "Plant",
    "NoiseKind",
    "NoiseModel",
    "FreeInput",
    "PolytopeInput",
    "NormBallInput",
    "InputSet",
    "SafetySpec",
    "CertMode",
    "SolverStatus",
    "Certificate",
    "ValidationReport",
    "validate_problem",
    "barrier_value",
    "controller",
]


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def is_symmetric(M: np.ndarray, tol: float = 1e-10) -> bool:
    return M.shape[0] == M.shape[1] and np.allclose(M, M.T, atol=tol * (1 + abs(M).max()))


def min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


@dataclass(frozen=True)
class Plant:
    """Discrete-time linear system x+ = A x + B u + D w."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "D", _as_matrix(self.D, "D"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.B.shape}")
        if self.D.shape[0] != n:
            raise ValueError(f"D must have {n} rows, got {self.D.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def d(self) -> int:
        return self.D.shape[1]


class NoiseKind(enum.Enum):
    UNIT_BALL = "unit_ball"
    GAUSSIAN = "gaussian"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class NoiseModel:
    """Disturbance description.

    UNIT_BALL: w ranges over the Euclidean ball of the given radius.
    GAUSSIAN: w ~ N(0, covariance), i.i.d. in time.
    EMPIRICAL: w drawn uniformly from a finite sample set.
    """

    kind: NoiseKind
    covariance: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    radius: float = 1.0

    def __post_init__(self):
        if self.kind == NoiseKind.GAUSSIAN:
            if self.covariance is None:
                raise ValueError("Gaussian noise requires a covariance matrix")
            S = _as_matrix(self.covariance, "covariance")
            if not is_symmetric(S):
                raise ValueError("covariance must be symmetric")
            if min_eig(S) < -1e-10 * (1 + abs(S).max()):
                raise ValueError("covariance must be positive semidefinite")
            object.__setattr__(self, "covariance", 0.5 * (S + S.T))
        elif self.kind == NoiseKind.EMPIRICAL:
            if self.samples is None or len(self.samples) == 0:
                raise ValueError("Empirical noise requires at least one sample")
            object.__setattr__(self, "samples", np.atleast_2d(np.asarray(self.samples, float)))
        elif self.kind == NoiseKind.UNIT_BALL:
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> Optional[int]:
        if self.covariance is not None:
            return self.covariance.shape[0]
        if self.samples is not None:
            return self.samples.shape[1]
        return None


@dataclass(frozen=True)
class FreeInput:
    pass


@dataclass(frozen=True)
class PolytopeInput:
    """Input set {u : H u <= h}; h > 0 so that 0 lies in the interior."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", _as_matrix(self.H, "H"))
        h = np.asarray(self.h, float).reshape(-1)
        if not np.all(np.isfinite(h)):
            raise ValueError("h contains non-finite entries")
        if self.H.shape[0] != h.size:
            raise ValueError("H and h row counts differ")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class NormBallInput:
    """Input set {u : u'u <= u_bar}; note the bound is on the squared norm."""

    u_bar: float

    def __post_init__(self):
        if self.u_bar <= 0:
            raise ValueError("u_bar must be positive")


InputSet = Union[FreeInput, PolytopeInput, NormBallInput]


@dataclass(frozen=True)
class SafetySpec:
    """Safe set, initial set and input set.

    The safe set is the intersection of half-spaces {a_j'x + 1 >= 0} and,
    optionally, an ellipsoid {x'Sx <= 1}. The initial set is the ellipsoid
    {1 - x'Rx >= sigma}; sigma = 0 means the full ellipsoid {x'Rx <= 1}.
    """

    halfspaces: Sequence[np.ndarray] = ()
    ellipsoidal_safe: Optional[np.ndarray] = None
    initial_R: np.ndarray = None
    initial_margin: float = 0.0
    input_set: InputSet = field(default_factory=FreeInput)

    def __post_init__(self):
        hs = tuple(np.asarray(a, float).reshape(-1) for a in self.halfspaces)
        for a in hs:
            if not np.all(np.isfinite(a)):
                raise ValueError("half-space vector contains non-finite entries")
        object.__setattr__(self, "halfspaces", hs)
        if self.initial_R is None:
            raise ValueError("initial_R is required")
        R = _as_matrix(self.initial_R, "R")
        if not is_symmetric(R):
            raise ValueError("R must be symmetric")
        if min_eig(R) <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "initial_R", 0.5 * (R + R.T))
        if self.ellipsoidal_safe is not None:
            S = _as_matrix(self.ellipsoidal_safe, "S")
            if not is_symmetric(S) or min_eig(S) <= 0:
                raise ValueError("ellipsoidal safe-set matrix must be symmetric positive definite")
            object.__setattr__(self, "ellipsoidal_safe", 0.5 * (S + S.T))
        if not (0.0 <= self.initial_margin < 1.0):
            raise ValueError("initial margin must lie in [0, 1)")
        if len(hs) == 0 and self.ellipsoidal_safe is None:
            raise ValueError("safe set is empty: need half-spaces or an ellipsoid")

    @property
    def n(self) -> int:
        return self.initial_R.shape[0]

    @property
    def effective_R(self) -> np.ndarray:
        """Shape matrix of {x : 1 - x' R x >= sigma} rewritten as a full ellipsoid."""
        return self.initial_R / (1.0 - self.initial_margin)


class CertMode(enum.Enum):
    INFINITE_HORIZON = "infinite_horizon"
    FINITE_HORIZON = "finite_horizon"


class SolverStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class Certificate:
    """Synthesized barrier/controller pair.

    The barrier is b(x) = 1 - x' Omega^{-1} x and the feedback is
    u(x) = K x with K = Y Omega^{-1}. K is computed by a linear solve
    against a cached Cholesky factorization of Omega, never by forming
    the explicit inverse.
    """

    Omega: np.ndarray
    Y: np.ndarray
    mode: CertMode
    params: dict = field(default_factory=dict)
    objective_value: float = float("nan")
    solver_status: SolverStatus = SolverStatus.OPTIMAL

    def __post_init__(self):
        Om = _as_matrix(self.Omega, "Omega")
        if not is_symmetric(Om, tol=1e-6):
            raise ValueError("Omega must be symmetric")
        Om = 0.5 * (Om + Om.T)
        if min_eig(Om) <= 0:
            raise ValueError("Omega must be positive definite")
        Y = _as_matrix(self.Y, "Y")
        if Y.shape[1] != Om.shape[0]:
            raise ValueError("Y column count must match Omega")
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "params", dict(self.params))
        # cached factorization; used by barrier_value / controller / verify
        object.__setattr__(self, "_chol", cho_factor(Om))
        K = cho_solve(self._chol, Y.T).T
        object.__setattr__(self, "_K", K)
        resid = np.linalg.norm(K @ Om - Y)
        if resid > 1e-8 * max(1.0, np.linalg.norm(Y)):
            raise ValueError(f"K*Omega = Y violated beyond tolerance (residual {resid:.3e})")

    @property
    def n(self) -> int:
        return self.Omega.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[0]

    @property
    def K(self) -> np.ndarray:
        return self._K

    def omega_solve(self, X: np.ndarray) -> np.ndarray:
        """Return Omega^{-1} X via the cached factorization."""
        return cho_solve(self._chol, X)

    def omega_inv(self) -> np.ndarray:
        """Dense Omega^{-1}; prefer omega_solve where possible."""
        return cho_solve(self._chol, np.eye(self.n))

    def omega_sqrt(self) -> np.ndarray:
        """Symmetric square root of Omega (maps the unit sphere onto the barrier boundary)."""
        w, V = np.linalg.eigh(self.Omega)
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def barrier_value(cert: Certificate, x: np.ndarray) -> float:
    """b(x) = 1 - x' Omega^{-1} x, evaluated through the cached factorization."""
    x = np.asarray(x, float).reshape(-1)
    return 1.0 - float(x @ cert.omega_solve(x))


def controller(cert: Certificate, x: np.ndarray) -> np.ndarray:
    """u(x) = K x."""
    x = np.asarray(x, float).reshape(-1)
    return cert.K @ x


@dataclass
class ValidationReport:
    entries: list

    @property
    def ok(self) -> bool:
        return not self.entries

    def __str__(self) -> str:
        if self.ok:
            return "problem data valid"
        return "\n".join(f"- {e}" for e in self.entries)


def validate_problem(
    plant: Plant,
    spec: SafetySpec,
    noise: NoiseModel,
    mode: Optional[CertMode] = None,
) -> ValidationReport:
    """Collect dimension mismatches, definiteness failures and missing
    mode prerequisites into a report; never raises."""
    entries = []
    n = plant.n
    if spec.n != n:
        entries.append(f"initial set R is {spec.n}x{spec.n} but the plant state dimension is {n}")
    for j, a in enumerate(spec.halfspaces):
        if a.size != n:
            entries.append(f"half-space {j} has length {a.size}, expected {n}")
    if spec.ellipsoidal_safe is not None and spec.ellipsoidal_safe.shape[0] != n:
        entries.append("ellipsoidal safe-set matrix dimension does not match the plant")
    if isinstance(spec.input_set, PolytopeInput):
        if spec.input_set.H.shape[1] != plant.m:
            entries.append(
                f"input polytope H has {spec.input_set.H.shape[1]} columns, expected {plant.m}"
            )
        if np.any(spec.input_set.h <= 0):
            entries.append("input polytope requires h > 0 componentwise (origin interior)")
    nd = noise.dim
    if nd is not None and nd != plant.d:
        entries.append(f"noise dimension {nd} does not match disturbance input D ({plant.d} columns)")
    if mode == CertMode.FINITE_HORIZON and noise.kind != NoiseKind.GAUSSIAN:
        entries.append("finite-horizon synthesis requires Gaussian noise with a covariance matrix")
    if mode == CertMode.INFINITE_HORIZON and noise.kind != NoiseKind.UNIT_BALL:
        entries.append("infinite-horizon synthesis requires bounded (unit-ball) noise")
    return ValidationReport(entries)
