"""Certificate validation: analytic containment and decrease checks, a
sampled worst-case invariance oracle, and Monte Carlo exit estimation.

Randomness is counter-based: every run draws from a Philox stream keyed by
(seed, run), so results are reproducible regardless of execution order and
safe to parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .model import Certificate, NoiseKind, NoiseModel, Plant, SafetySpec
from .quadratics import max_quadratic_over_sphere

__all__ = [
    "run_generator",
    "noise_sampler",
    "ContainmentMargins",
    "check_containment",
    "invariance_oracle",
    "DecreaseMargins",
    "expected_decrease_oracle",
    "MCResult",
    "monte_carlo_exit",
    "VerificationReport",
    "full_report",
]

CONTAINMENT_TOL = 1e-7
INVARIANCE_TOL = 1e-6


def run_generator(seed: int, run: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, run)."""
    key = np.array([seed & (2**64 - 1), run & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def noise_sampler(noise: NoiseModel, dim: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Per-step disturbance sampler for the given model."""
    if noise.kind == NoiseKind.GAUSSIAN:
        root = _psd_sqrt(noise.covariance)

        def sample(rng: np.random.Generator) -> np.ndarray:
            return root @ rng.standard_normal(dim)

    elif noise.kind == NoiseKind.UNIT_BALL:
        radius = noise.radius

        def sample(rng: np.random.Generator) -> np.ndarray:
            v = rng.standard_normal(dim)
            nrm = np.linalg.norm(v)
            if nrm == 0.0:
                return np.zeros(dim)
            return v / nrm * radius * rng.uniform() ** (1.0 / dim)

    elif noise.kind == NoiseKind.EMPIRICAL:
        samples = noise.samples

        def sample(rng: np.random.Generator) -> np.ndarray:
            return samples[rng.integers(len(samples))]

    else:
        raise ValueError(f"unsupported noise kind {noise.kind}")
    return sample


class ContainmentMargins(NamedTuple):
    initial: float  # lambda_min(R_eff - Omega^{-1})
    safe: float  # min_j (1 - a_j' Omega a_j);  +inf when no half-spaces
    ellipsoidal: Optional[float]  # lambda_min(S^{-1} - Omega) when applicable

    @property
    def ok(self) -> bool:
        ell = self.ellipsoidal if self.ellipsoidal is not None else 0.0
        return (
            self.initial >= -CONTAINMENT_TOL
            and self.safe >= -CONTAINMENT_TOL
            and ell >= -CONTAINMENT_TOL
        )


def check_containment(cert: Certificate, spec: SafetySpec) -> ContainmentMargins:
    """Eigenvalue/quadratic-form containment margins; no sampling."""
    Oi = cert.omega_inv()
    initial = float(np.linalg.eigvalsh(spec.effective_R - Oi).min())
    if spec.halfspaces:
        safe = min(1.0 - float(a @ cert.Omega @ a) for a in spec.halfspaces)
    else:
        safe = float("inf")
    ell = None
    if spec.ellipsoidal_safe is not None:
        S = spec.ellipsoidal_safe
        Sinv = np.linalg.inv(S)
        ell = float(np.linalg.eigvalsh(0.5 * (Sinv + Sinv.T) - cert.Omega).min())
    return ContainmentMargins(initial, safe, ell)


def _boundary_points(cert: Certificate, count: int, seed: int) -> np.ndarray:
    """Points on the barrier boundary: Omega^{1/2} applied to unit vectors.

    In two dimensions the directions are an exact angular grid; otherwise
    seeded uniform directions on the sphere.
    """
    n = cert.n
    if n == 1:
        U = np.array([[1.0], [-1.0]])
    elif n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        U = np.column_stack([np.cos(th), np.sin(th)])
    else:
        rng = run_generator(seed, 0)
        U = rng.standard_normal((count, n))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    return U @ cert.omega_sqrt().T


def _unit_directions(dim: int, count: int, seed: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    rng = run_generator(seed, 1)
    W = rng.standard_normal((count, dim))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def invariance_oracle(
    cert: Certificate,
    plant: Plant,
    n_boundary: int = 1000,
    n_dirs: int = 720,
    radius: float = 1.0,
    seed: int = 0,
    worst_case: bool = True,
) -> float:
    """Sampled one-step invariance margin min 1 - V(Ax + BKx + Dw).

    x ranges over boundary samples of the barrier set and w over unit
    disturbance directions (the worst case over the ball is attained on the
    sphere since V is convex). With ``worst_case`` the exact maximizing w is
    also evaluated for every sampled x, making the sweep tight per sample.
    """
    Oi = cert.omega_inv()
    Acl = plant.A + plant.B @ cert.K
    D = plant.D * radius
    X = _boundary_points(cert, n_boundary, seed)
    W = _unit_directions(plant.d, n_dirs, seed)
    M = D.T @ Oi @ D
    M = 0.5 * (M + M.T)
    margin = float("inf")
    DOiD_c = D.T @ Oi  # for worst-case linear term
    for x in X:
        c = Acl @ x
        # grid sweep
        Xp = c[:, None] + D @ W.T
        V = np.einsum("ij,ik,kj->j", Xp, Oi, Xp)
        vmax = float(V.max())
        if worst_case and plant.d >= 1:
            g = DOiD_c @ c
            val, w = max_quadratic_over_sphere(M, g)
            vmax = max(vmax, float(c @ Oi @ c) + val)
        margin = min(margin, 1.0 - vmax)
    return margin


class DecreaseMargins(NamedTuple):
    sampled: float
    analytic: float

    @property
    def ok(self) -> bool:
        return self.analytic >= -INVARIANCE_TOL


def expected_decrease_oracle(
    cert: Certificate,
    plant: Plant,
    beta: float,
    delta: float,
    Sigma: np.ndarray,
    n_points: int = 500,
    seed: int = 0,
) -> DecreaseMargins:
    """Closed-form expected-decrease slack over the barrier set.

    slack(x) = x'((1-beta) P - Acl'P Acl)x + (beta - delta - tr(P Sigma)),
    P = Omega^{-1}, Acl = A + BK; ``Sigma`` is the state-noise covariance
    (pass D Sigma_w D' for a disturbance input map). Returns the sampled
    minimum over points of the barrier set and the exact analytic minimum.
    """
    Oi = cert.omega_inv()
    Acl = plant.A + plant.B @ cert.K
    Sigma = np.atleast_2d(np.asarray(Sigma, float))
    const = beta - delta - float(np.trace(Oi @ Sigma))
    Mq = (1.0 - beta) * Oi - Acl.T @ Oi @ Acl
    Mq = 0.5 * (Mq + Mq.T)

    rng = run_generator(seed, 2)
    n = cert.n
    U = rng.standard_normal((n_points, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    U *= rng.uniform(size=(n_points, 1)) ** (1.0 / n)
    X = U @ cert.omega_sqrt().T  # uniform-ish over the barrier set
    sampled = const + float(np.einsum("ij,jk,ik->i", X, Mq, X).min())

    H = cert.omega_sqrt() @ Mq @ cert.omega_sqrt()
    analytic = const + min(0.0, float(np.linalg.eigvalsh(0.5 * (H + H.T)).min()))
    return DecreaseMargins(sampled=sampled, analytic=analytic)


class MCResult(NamedTuple):
    runs: int
    exits: int
    empirical_exit: float
    stderr: float


def _gaussian_noise_paths(noise: NoiseModel, n_runs: int, T: int, d: int, seed: int) -> np.ndarray:
    root = _psd_sqrt(noise.covariance)
    out = np.empty((n_runs, T, d))
    for r in range(n_runs):
        rng = run_generator(seed, r)
        out[r] = rng.standard_normal((T, d)) @ root.T
    return out


def _ball_noise_paths(noise: NoiseModel, n_runs: int, T: int, d: int, seed: int) -> np.ndarray:
    out = np.empty((n_runs, T, d))
    for r in range(n_runs):
        rng = run_generator(seed, r)
        V = rng.standard_normal((T, d))
        V /= np.maximum(np.linalg.norm(V, axis=1, keepdims=True), 1e-300)
        out[r] = V * noise.radius * rng.uniform(size=(T, 1)) ** (1.0 / d)
    return out


def _empirical_noise_paths(noise: NoiseModel, n_runs: int, T: int, d: int, seed: int) -> np.ndarray:
    out = np.empty((n_runs, T, d))
    for r in range(n_runs):
        rng = run_generator(seed, r)
        out[r] = noise.samples[rng.integers(len(noise.samples), size=T)]
    return out


def monte_carlo_exit(
    cert: Certificate,
    plant: Plant,
    noise: NoiseModel,
    T: int,
    n_runs: int,
    x0: Union[np.ndarray, Callable[[np.random.Generator], np.ndarray], None] = None,
    seed: int = 42,
    adversarial: bool = False,
) -> MCResult:
    """Closed-loop exit-frequency estimate under u = Kx.

    A run exits when min_t b(x_t) < 0 over t = 0..T. ``x0`` is a fixed
    start (default: origin), or a callable drawing starts per run.
    ``adversarial`` replaces sampled disturbances by the exact unit-sphere
    maximizer of V(x+) at every step (bounded noise only).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    n, d = plant.n, plant.d
    Acl = plant.A + plant.B @ cert.K
    Oi = cert.omega_inv()

    starts = np.zeros((n_runs, n))
    if callable(x0):
        for r in range(n_runs):
            starts[r] = np.asarray(x0(run_generator(seed, r)), float).reshape(-1)
    elif x0 is not None:
        starts[:] = np.asarray(x0, float).reshape(-1)

    if adversarial:
        if noise.kind != NoiseKind.UNIT_BALL:
            raise ValueError("adversarial disturbances require bounded noise")
        D = plant.D * noise.radius
        M = 0.5 * ((D.T @ Oi @ D) + (D.T @ Oi @ D).T)
        exits = 0
        for r in range(n_runs):
            x = starts[r].copy()
            bad = (1.0 - x @ Oi @ x) < 0.0
            for _ in range(T):
                if bad:
                    break
                c = Acl @ x
                _, w = max_quadratic_over_sphere(M, D.T @ (Oi @ c))
                x = c + D @ w
                bad = (1.0 - x @ Oi @ x) < 0.0
            exits += bool(bad)
    else:
        if noise.kind == NoiseKind.GAUSSIAN:
            Wp = _gaussian_noise_paths(noise, n_runs, T, d, seed)
        elif noise.kind == NoiseKind.UNIT_BALL:
            Wp = _ball_noise_paths(noise, n_runs, T, d, seed)
        else:
            Wp = _empirical_noise_paths(noise, n_runs, T, d, seed)
        X = starts.copy()
        V = np.einsum("ij,jk,ik->i", X, Oi, X)
        vmax = V.copy()
        for t in range(T):
            X = X @ Acl.T + Wp[:, t, :] @ plant.D.T
            V = np.einsum("ij,jk,ik->i", X, Oi, X)
            vmax = np.maximum(vmax, V)
        exits = int((vmax > 1.0).sum())

    p = exits / n_runs
    stderr = float(np.sqrt(p * (1.0 - p) / n_runs))
    return MCResult(runs=n_runs, exits=exits, empirical_exit=p, stderr=stderr)


@dataclass
class VerificationReport:
    containment_initial: float
    containment_safe: float
    containment_ellipsoidal: Optional[float]
    invariance_margin: Optional[float]
    decrease_sampled: Optional[float]
    decrease_analytic: Optional[float]
    mc: Optional[MCResult]
    bound_alpha: Optional[float]
    passed: bool
    notes: list = field(default_factory=list)

    def __str__(self) -> str:
        lines = [
            f"containment (initial set): lambda_min = {self.containment_initial:.3e}",
            f"containment (half-spaces): min margin = {self.containment_safe:.3e}",
        ]
        if self.containment_ellipsoidal is not None:
            lines.append(f"containment (ellipsoid):   lambda_min = {self.containment_ellipsoidal:.3e}")
        if self.invariance_margin is not None:
            lines.append(f"invariance margin (sampled worst case): {self.invariance_margin:.3e}")
        if self.decrease_analytic is not None:
            lines.append(
                f"expected-decrease slack: sampled {self.decrease_sampled:.3e}, analytic {self.decrease_analytic:.3e}"
            )
        if self.mc is not None:
            lines.append(
                f"monte carlo: {self.mc.exits}/{self.mc.runs} exits "
                f"(p = {self.mc.empirical_exit:.4f} +- {self.mc.stderr:.4f})"
            )
        if self.bound_alpha is not None:
            lines.append(f"analytic exit bound: alpha = {self.bound_alpha:.6g}")
        for note in self.notes:
            lines.append(f"note: {note}")
        lines.append("PASSED" if self.passed else "FAILED")
        return "\n".join(lines)


def full_report(
    cert: Certificate,
    plant: Plant,
    spec: SafetySpec,
    noise: NoiseModel,
    mc_runs: int = 0,
    T: Optional[int] = None,
    seed: int = 42,
    x0: Optional[np.ndarray] = None,
) -> VerificationReport:
    """Run every applicable check for the certificate's mode."""
    from .model import CertMode
    from .risk import exit_bound

    margins = check_containment(cert, spec)
    passed = margins.ok
    notes = []
    invariance = None
    dec_sampled = dec_analytic = None
    bound_alpha = None
    mc = None

    if cert.mode == CertMode.INFINITE_HORIZON:
        invariance = invariance_oracle(cert, plant, radius=getattr(noise, "radius", 1.0))
        passed = passed and invariance >= -INVARIANCE_TOL
        horizon = T if T is not None else 100
        if mc_runs > 0:
            mc = monte_carlo_exit(cert, plant, noise, horizon, mc_runs, x0=x0, seed=seed)
            passed = passed and mc.exits == 0
            if mc.exits:
                notes.append("bounded-noise certificate produced exits")
    else:
        beta = cert.params.get("beta")
        delta = cert.params.get("delta", 0.0)
        horizon = T if T is not None else int(cert.params.get("horizon", 1))
        sigma_eff = plant.D @ noise.covariance @ plant.D.T if noise.covariance is not None else None
        if beta is not None and sigma_eff is not None:
            dec = expected_decrease_oracle(cert, plant, beta, delta, sigma_eff)
            dec_sampled, dec_analytic = dec.sampled, dec.analytic
            passed = passed and dec.ok
            b0 = cert.params.get("sigma", 0.0)
            if x0 is not None:
                from .model import barrier_value

                b0 = max(0.0, min(1.0, barrier_value(cert, x0)))
            bound_alpha = exit_bound(b0, beta, delta, horizon).alpha
        if mc_runs > 0:
            mc = monte_carlo_exit(cert, plant, noise, horizon, mc_runs, x0=x0, seed=seed)
            if bound_alpha is not None:
                dominated = mc.empirical_exit <= bound_alpha + 3.0 * mc.stderr
                passed = passed and dominated
                if not dominated:
                    notes.append("empirical exit frequency exceeds the analytic bound")

    return VerificationReport(
        containment_initial=margins.initial,
        containment_safe=margins.safe,
        containment_ellipsoidal=margins.ellipsoidal,
        invariance_margin=invariance,
        decrease_sampled=dec_sampled,
        decrease_analytic=dec_analytic,
        mc=mc,
        bound_alpha=bound_alpha,
        passed=passed,
        notes=notes,
    )
