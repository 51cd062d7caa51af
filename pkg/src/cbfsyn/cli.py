"""Command-line interface: problem/certificate files, synthesis, bounds,
filtered simulation, verification, and one-command experiment reproduction.

File formats are canonical JSON (sorted keys, two-space indent, trailing
newline) so that parse -> serialize round-trips byte-identically. Exit
codes: 0 ok, 1 usage/validation error, 2 infeasible or fallback steps,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import risk, verify
from .conic import SolverSettings
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
    validate_problem,
)
from .safety_filter import run_closed_loop
from .synth import (
    FiniteHorizonSpec,
    GelbrichSpec,
    InfiniteHorizonSpec,
    bisect_infinite_horizon,
    synthesize_finite_horizon,
    synthesize_infinite_horizon,
)

__all__ = [
    "load_problem",
    "dump_problem",
    "load_certificate",
    "dump_certificate",
    "cmd_synth",
    "cmd_bound",
    "cmd_select_delta",
    "cmd_filter_run",
    "cmd_verify",
    "cmd_reproduce",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFY_FAILED = 3


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _mat(x) -> list:
    return np.asarray(x, float).tolist()


# ---------------------------------------------------------------------------
# problem files

def problem_to_dict(plant: Plant, noise: NoiseModel, spec: SafetySpec, params: dict) -> dict:
    noise_d: dict = {"kind": noise.kind.value}
    if noise.covariance is not None:
        noise_d["covariance"] = _mat(noise.covariance)
    if noise.samples is not None:
        noise_d["samples"] = _mat(noise.samples)
    if noise.kind == NoiseKind.UNIT_BALL:
        noise_d["radius"] = noise.radius
    safe: dict = {}
    if spec.halfspaces:
        safe["halfspaces"] = [list(map(float, a)) for a in spec.halfspaces]
    if spec.ellipsoidal_safe is not None:
        safe["ellipsoid_S"] = _mat(spec.ellipsoidal_safe)
    iset = spec.input_set
    if isinstance(iset, PolytopeInput):
        input_d = {"kind": "polytope", "H": _mat(iset.H), "h": list(map(float, iset.h))}
    elif isinstance(iset, NormBallInput):
        input_d = {"kind": "norm_ball", "u_bar": iset.u_bar}
    else:
        input_d = {"kind": "free"}
    return {
        "plant": {"A": _mat(plant.A), "B": _mat(plant.B), "D": _mat(plant.D)},
        "noise": noise_d,
        "safe_set": safe,
        "initial_set": {"R": _mat(spec.initial_R), "sigma": spec.initial_margin},
        "input_set": input_d,
        "params": params,
    }


def problem_from_dict(data: dict) -> Tuple[Plant, NoiseModel, SafetySpec, dict]:
    plant = Plant(A=data["plant"]["A"], B=data["plant"]["B"], D=data["plant"]["D"])
    nd = data["noise"]
    noise = NoiseModel(
        kind=NoiseKind(nd["kind"]),
        covariance=nd.get("covariance"),
        samples=nd.get("samples"),
        radius=float(nd.get("radius", 1.0)),
    )
    sd = data.get("safe_set", {})
    idata = data.get("input_set", {"kind": "free"})
    if idata.get("kind") == "polytope":
        input_set = PolytopeInput(H=idata["H"], h=idata["h"])
    elif idata.get("kind") == "norm_ball":
        input_set = NormBallInput(u_bar=float(idata["u_bar"]))
    else:
        input_set = FreeInput()
    spec = SafetySpec(
        halfspaces=sd.get("halfspaces", ()),
        ellipsoidal_safe=sd.get("ellipsoid_S"),
        initial_R=data["initial_set"]["R"],
        initial_margin=float(data["initial_set"].get("sigma", 0.0)),
        input_set=input_set,
    )
    return plant, noise, spec, dict(data.get("params", {}))


def dump_problem(path, plant, noise, spec, params) -> None:
    Path(path).write_text(canonical_json(problem_to_dict(plant, noise, spec, params)))


def load_problem(path) -> Tuple[Plant, NoiseModel, SafetySpec, dict]:
    return problem_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# certificate files

def certificate_to_dict(cert: Certificate, residuals: dict, bound: Optional[dict] = None) -> dict:
    data = {
        "Omega": _mat(cert.Omega),
        "Y": _mat(cert.Y),
        "K": _mat(cert.K),
        "mode": cert.mode.value,
        "params": cert.params,
        "objective": cert.objective_value,
        "residuals": residuals,
    }
    if bound is not None:
        data["bound"] = bound
    return data


def certificate_from_dict(data: dict) -> Certificate:
    return Certificate(
        Omega=data["Omega"],
        Y=data["Y"],
        mode=CertMode(data["mode"]),
        params=data.get("params", {}),
        objective_value=float(data.get("objective", float("nan"))),
    )


def dump_certificate(path, cert: Certificate, residuals: dict, bound: Optional[dict] = None) -> None:
    Path(path).write_text(canonical_json(certificate_to_dict(cert, residuals, bound)))


def load_certificate(path) -> Certificate:
    return certificate_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# commands

def _print_err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_synth(problem_path, out_path, bisect: bool = False, logdet: bool = False) -> int:
    try:
        plant, noise, spec, params = load_problem(problem_path)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        _print_err(f"cannot load problem file: {exc}")
        return EXIT_USAGE

    mode = params.get("mode", "infinite")
    objective = "logdet" if logdet else params.get("objective", "trace")
    cert_mode = CertMode.INFINITE_HORIZON if mode == "infinite" else CertMode.FINITE_HORIZON
    report = validate_problem(plant, spec, noise, cert_mode)
    if not report.ok:
        _print_err(str(report))
        return EXIT_USAGE

    try:
        if mode == "infinite":
            beta = float(params["beta"])
            if bisect:
                lam, cert, sol = bisect_infinite_horizon(plant, spec, beta, noise, objective)
            else:
                lam = float(params.get("lambda", 0.5))
                if not (0.0 < lam < 1.0):
                    _print_err("lambda must lie in (0,1)")
                    return EXIT_USAGE
                cert, sol = synthesize_infinite_horizon(
                    plant, spec, InfiniteHorizonSpec(lam, beta), noise, objective
                )
        else:
            fh = FiniteHorizonSpec(
                beta=float(params["beta"]),
                delta=float(params.get("delta", 0.0)),
                sigma=float(params.get("sigma", spec.initial_margin or 0.5)),
                horizon=int(params.get("T", 1)),
                trace_mode=params.get("trace_mode", "sound"),
            )
            robust = None
            if params.get("rho") is not None and float(params["rho"]) >= 0 and params.get("robust") == "gelbrich":
                robust = GelbrichSpec(nominal=np.asarray(noise.covariance), radius=float(params["rho"]))
            cert, sol = synthesize_finite_horizon(plant, spec, fh, noise, robust=robust, objective=objective)
    except (KeyError, ValueError) as exc:
        _print_err(str(exc))
        return EXIT_USAGE

    if cert is None:
        print(f"synthesis failed: {sol.status.value}")
        return EXIT_INFEASIBLE

    margins = verify.check_containment(cert, spec)
    residuals = {
        "containment_initial": margins.initial,
        "containment_safe": margins.safe if np.isfinite(margins.safe) else None,
        "lmi_max": sol.max_lmi_residual,
    }
    bound = None
    if cert.mode == CertMode.FINITE_HORIZON:
        rb = risk.exit_bound(
            b0=cert.params.get("sigma", 0.0),
            beta=cert.params["beta"],
            delta=cert.params.get("delta", 0.0),
            T=int(cert.params.get("horizon", 1)),
        )
        bound = {"alpha": rb.alpha, "case": rb.case.value, "eta_star": rb.eta_star}
        print(str(rb))
    dump_certificate(out_path, cert, residuals, bound)
    print(
        f"objective = {cert.objective_value:.6g}; containment margins: "
        f"initial {margins.initial:.3e}, safe {margins.safe:.3e}; "
        f"lmi residual {sol.max_lmi_residual:.3e}"
    )
    return EXIT_OK


def cmd_bound(beta: float, delta: float, T: int, b0: Optional[float] = None, sigma: Optional[float] = None) -> int:
    if b0 is None and sigma is None:
        _print_err("provide --b0 or --sigma")
        return EXIT_USAGE
    level = b0 if b0 is not None else sigma
    try:
        rb = risk.exit_bound(float(level), float(beta), float(delta), int(T))
    except ValueError as exc:
        _print_err(str(exc))
        return EXIT_USAGE
    print(f"alpha = {rb.alpha:.6g}")
    print(f"case = {rb.case.value}")
    print(f"eta_star = {rb.eta_star:.6g}")
    return EXIT_OK


def cmd_select_delta(alpha_bar: float, beta: float, sigma: float, T: int) -> int:
    try:
        branches = risk.select_delta(float(alpha_bar), float(beta), float(sigma), int(T))
    except ValueError as exc:
        _print_err(str(exc))
        return EXIT_USAGE
    by_z = {b.z: b for b in branches}
    for z in (0, 1):
        if z in by_z:
            b = by_z[z]
            print(f"z={z}: [{b.lo:.6g}, {b.hi:.6g}]")
        else:
            print(f"z={z}: empty")
    return EXIT_OK


def cmd_filter_run(cert_path, problem_path, unom: str, T: int, runs: int, seed: int, out_path) -> int:
    if runs < 1:
        _print_err("--runs must be positive")
        return EXIT_USAGE
    if T < 1:
        _print_err("--T must be positive")
        return EXIT_USAGE
    try:
        cert = load_certificate(cert_path)
        plant, noise, spec, params = load_problem(problem_path)
        gains = np.array([float(v) for v in unom.split(",")], dtype=float)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        _print_err(str(exc))
        return EXIT_USAGE
    if cert.mode != CertMode.INFINITE_HORIZON:
        _print_err("the safety filter requires an infinite-horizon certificate")
        return EXIT_USAGE
    if gains.size != cert.m * cert.n:
        _print_err(f"--unom needs {cert.m * cert.n} entries (row-major m x n gain)")
        return EXIT_USAGE
    Knom = gains.reshape(cert.m, cert.n)
    beta = float(cert.params.get("beta", params.get("beta", 0.5)))
    sampler = verify.noise_sampler(noise, plant.d)

    min_b = float("inf")
    any_fallback = False
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (
            ["run", "t"]
            + [f"x{i+1}" for i in range(plant.n)]
            + [f"u{i+1}" for i in range(plant.m)]
            + ["b", "fallback"]
        )
        writer.writerow(header)
        for run in range(runs):
            traj = run_closed_loop(
                plant, cert, beta, lambda x: Knom @ x, sampler, T, seed=(seed << 20) + run
            )
            min_b = min(min_b, traj.min_barrier)
            any_fallback = any_fallback or bool(traj.fallback.any())
            for t in range(T + 1):
                row = [run, t] + [repr(float(v)) for v in traj.states[t]]
                if t < T:
                    row += [repr(float(v)) for v in traj.inputs[t]]
                    row += [repr(float(traj.barrier[t])), int(traj.fallback[t])]
                else:
                    row += ["" for _ in range(plant.m)] + [repr(float(traj.barrier[t])), ""]
                writer.writerow(row)
    print(f"min barrier value over {runs} runs x {T} steps: {min_b:.6g}")
    if any_fallback:
        print("warning: fallback controller engaged on some steps")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify(cert_path, problem_path, mc_runs: int = 0, seed: int = 42) -> int:
    try:
        cert = load_certificate(cert_path)
        plant, noise, spec, params = load_problem(problem_path)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        _print_err(str(exc))
        return EXIT_USAGE
    T = int(params.get("T", cert.params.get("horizon", 100)))
    report = verify.full_report(cert, plant, spec, noise, mc_runs=mc_runs, T=T, seed=seed)
    print(str(report))
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# experiment reproduction

def pendulum_problem(beta: float = 0.2, delta: float = 0.0) -> Tuple[Plant, NoiseModel, SafetySpec, dict]:
    """Inverted-pendulum benchmark: 2-state linearization with Gaussian noise
    and a +-pi/6 box. The A matrix follows the benchmark source verbatim
    (its (2,1) entry is the step size, not a gravity/length ratio).

    ``beta`` here is the decrease rate of this package's convention, i.e.
    the expected-decrease condition E[b+] >= (1-beta) b + delta. The
    benchmark's quoted rate corresponds to the complementary convention;
    see the README discussion. beta=0.2 reproduces the benchmark program.
    """
    dt = 0.01
    plant = Plant(A=[[1.0, dt], [dt, 1.0]], B=[[0.0], [dt]], D=np.eye(2))
    noise = NoiseModel(kind=NoiseKind.GAUSSIAN, covariance=np.diag([0.0075**2, 0.05**2]))
    c = np.pi / 6.0
    spec = SafetySpec(
        halfspaces=[[1 / c, 0.0], [-1 / c, 0.0], [0.0, 1 / c], [0.0, -1 / c]],
        initial_R=5000.0 * np.eye(2),
        initial_margin=0.9,
    )
    params = {"mode": "finite", "beta": beta, "delta": delta, "T": 100, "sigma": 0.9}
    return plant, noise, spec, params


def double_integrator_problem() -> Tuple[Plant, NoiseModel, SafetySpec, dict]:
    """Double-integrator benchmark: bounded disturbances, +-2 box."""
    plant = Plant(A=[[0.1, 0.65], [0.0, 1.02]], B=[[0.5], [0.5]], D=0.01 * np.eye(2))
    noise = NoiseModel(kind=NoiseKind.UNIT_BALL)
    spec = SafetySpec(
        halfspaces=[[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]],
        initial_R=100.0 * np.eye(2),
        initial_margin=0.0,
    )
    params = {"mode": "infinite", "beta": 0.4, "lambda": 0.05}
    return plant, noise, spec, params


def _reproduce_pendulum(outdir: Path, seed: int) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    report_lines = []

    # literal parametrization: beta plays the decrease-rate slot directly
    plant, noise, spec, params = pendulum_problem(beta=0.8, delta=0.0)
    dump_problem(outdir / "pendulum_literal.json", plant, noise, spec, params)
    fh = FiniteHorizonSpec(beta=0.8, delta=0.0, sigma=0.9, horizon=100)
    cert_lit, sol_lit = synthesize_finite_horizon(plant, spec, fh, noise)
    report_lines.append(f"literal beta=0.8 synthesis: {sol_lit.status.value}")

    # convention-mapped parametrization (quoted rate = contraction factor)
    plant, noise, spec, params = pendulum_problem(beta=0.2, delta=0.0)
    dump_problem(outdir / "pendulum.json", plant, noise, spec, params)
    fh = FiniteHorizonSpec(beta=0.2, delta=0.0, sigma=0.9, horizon=100)
    cert, sol = synthesize_finite_horizon(plant, spec, fh, noise)
    report_lines.append(f"mapped beta=0.2 synthesis: {sol.status.value}")
    verdict = sol.optimal
    if cert is not None:
        margins = verify.check_containment(cert, spec)
        dump_certificate(
            outdir / "pendulum_cert.json",
            cert,
            {
                "containment_initial": margins.initial,
                "containment_safe": margins.safe,
                "lmi_max": sol.max_lmi_residual,
            },
        )
        mc = verify.monte_carlo_exit(cert, plant, noise, T=100, n_runs=500, x0=np.zeros(2), seed=seed)
        rb = risk.exit_bound(b0=1.0, beta=0.2, delta=0.0, T=100)
        report_lines.append(
            f"monte carlo (500 runs from the origin): empirical safety {1 - mc.empirical_exit:.3f}"
        )
        report_lines.append(f"analytic exit bound: alpha = {rb.alpha:.6g} (vacuous at this horizon)")
        # sensitivity grid: empirical exit frequency and analytic bound over starts
        grid = np.linspace(-np.pi / 6, np.pi / 6, 11)
        with open(outdir / "pendulum_sensitivity.csv", "w", newline="") as fhandle:
            writer = csv.writer(fhandle)
            writer.writerow(["x1", "x2", "b0", "empirical_exit", "bound_alpha"])
            for x1 in grid:
                for x2 in grid:
                    x0 = np.array([x1, x2])
                    from .model import barrier_value

                    b0 = barrier_value(cert, x0)
                    if b0 < 0:
                        continue
                    m = verify.monte_carlo_exit(cert, plant, noise, T=100, n_runs=100, x0=x0, seed=seed)
                    alpha = risk.exit_bound(max(0.0, min(1.0, b0)), 0.2, 0.0, 100).alpha
                    writer.writerow([x1, x2, b0, m.empirical_exit, alpha])
        with open(outdir / "pendulum_mc.csv", "w", newline="") as fhandle:
            writer = csv.writer(fhandle)
            writer.writerow(["runs", "exits", "empirical_exit", "stderr"])
            writer.writerow([mc.runs, mc.exits, mc.empirical_exit, mc.stderr])
    (outdir / "report.txt").write_text("\n".join(report_lines) + "\n")
    print("\n".join(report_lines))
    return EXIT_OK if verdict else EXIT_INFEASIBLE


def _reproduce_double_integrator(outdir: Path, seed: int) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    plant, noise, spec, params = double_integrator_problem()
    dump_problem(outdir / "double_integrator.json", plant, noise, spec, params)
    cert, sol = synthesize_infinite_horizon(plant, spec, InfiniteHorizonSpec(lam=0.05, beta=0.4), noise)
    lines = [f"synthesis: {sol.status.value}"]
    if cert is None:
        (outdir / "report.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        return EXIT_INFEASIBLE
    margins = verify.check_containment(cert, spec)
    dump_certificate(
        outdir / "double_integrator_cert.json",
        cert,
        {
            "containment_initial": margins.initial,
            "containment_safe": margins.safe,
            "lmi_max": sol.max_lmi_residual,
        },
    )
    rc = cmd_filter_run(
        outdir / "double_integrator_cert.json",
        outdir / "double_integrator.json",
        unom="0,50",
        T=100,
        runs=50,
        seed=seed,
        out_path=outdir / "double_integrator_traj.csv",
    )
    ok = rc == EXIT_OK
    lines.append(f"filter campaign exit code: {rc}")
    (outdir / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_reproduce(name: str, outdir, seed: int = 42) -> int:
    outdir = Path(outdir)
    if name == "pendulum":
        return _reproduce_pendulum(outdir, seed)
    if name == "double-integrator":
        return _reproduce_double_integrator(outdir, seed)
    _print_err(f"unknown experiment {name!r}; choose 'pendulum' or 'double-integrator'")
    return EXIT_USAGE


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cbfsyn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a certificate from a problem file")
    p.add_argument("problem")
    p.add_argument("--out", required=True)
    p.add_argument("--bisect-lambda", action="store_true", dest="bisect")
    p.add_argument("--logdet", action="store_true")

    p = sub.add_parser("bound", help="print the finite-horizon exit bound")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--b0", type=float)
    p.add_argument("--sigma", type=float)

    p = sub.add_parser("select-delta", help="feasible delta branches for a target risk")
    p.add_argument("--alpha-bar", type=float, required=True, dest="alpha_bar")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--T", type=int, required=True)

    p = sub.add_parser("filter-run", help="simulate the filtered closed loop")
    p.add_argument("certificate")
    p.add_argument("problem")
    p.add_argument("--unom", required=True, help="comma-separated row-major nominal gain")
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="validate a certificate against its problem")
    p.add_argument("certificate")
    p.add_argument("problem")
    p.add_argument("--mc-runs", type=int, default=0, dest="mc_runs")
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("reproduce", help="reproduce a benchmark experiment")
    p.add_argument("name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)

    args = parser.parse_args(argv)
    if args.command == "synth":
        return cmd_synth(args.problem, args.out, bisect=args.bisect, logdet=args.logdet)
    if args.command == "bound":
        return cmd_bound(args.beta, args.delta, args.T, b0=args.b0, sigma=args.sigma)
    if args.command == "select-delta":
        return cmd_select_delta(args.alpha_bar, args.beta, args.sigma, args.T)
    if args.command == "filter-run":
        return cmd_filter_run(args.certificate, args.problem, args.unom, args.T, args.runs, args.seed, args.out)
    if args.command == "verify":
        return cmd_verify(args.certificate, args.problem, mc_runs=args.mc_runs, seed=args.seed)
    if args.command == "reproduce":
        return cmd_reproduce(args.name, args.out, seed=args.seed)
    parser.error("unknown command")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
