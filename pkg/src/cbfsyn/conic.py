"""Solver-agnostic SDP intermediate representation and solve interface.

A :class:`ConicProgram` holds named scalar/matrix variables, affine LMI
blocks (a constant matrix plus terms that are linear in one variable each),
affine scalar constraints, and a linear or log-det objective. Programs are
immutable once built; :func:`solve` compiles one to cvxpy and runs a conic
solver, and :func:`lmi_residuals` re-checks feasibility independently of the
solver, by plain eigenvalue computations on the evaluated blocks.

The evaluated matrix of every block is exactly symmetric: evaluation ends
with (M + M')/2, which is elementwise symmetric in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .model import SolverStatus

__all__ = [
    "ScalarVar",
    "MatrixVar",
    "MatTerm",
    "LmiBlock",
    "LinearConstraint",
    "Objective",
    "ConicProgram",
    "SolverSettings",
    "Solution",
    "solve",
    "lmi_residuals",
    "bisect_lambda",
    "sym_block",
    "TOL_FEAS",
]

# absolute eigenvalue residual accepted as feasible
TOL_FEAS = 1e-7


@dataclass(frozen=True)
class ScalarVar:
    name: str
    nonneg: bool = False


@dataclass(frozen=True)
class MatrixVar:
    name: str
    rows: int
    cols: int
    symmetric: bool = False


@dataclass(frozen=True)
class MatTerm:
    """Contribution  left @ X @ right  (or left @ X' @ right) to a block.

    ``left``/``right`` are full-block-size embeddings, so terms from
    different cells simply add up. Scalar variables are treated as 1x1.
    """

    var: str
    left: np.ndarray
    right: np.ndarray
    transpose: bool = False


@dataclass(frozen=True)
class LmiBlock:
    """Affine symmetric-matrix expression constrained >= 0 or <= 0."""

    name: str
    const: np.ndarray
    terms: Tuple[MatTerm, ...] = ()
    negative: bool = False  # True: expression <= 0

    @property
    def size(self) -> int:
        return self.const.shape[0]


@dataclass(frozen=True)
class LinearConstraint:
    """const + sum_v tr(C_v' X_v) [sense] 0 over scalar entries.

    ``terms`` maps each variable to a coefficient array C of the variable's
    shape (1x1 for scalars); the contribution is the elementwise product sum.
    """

    name: str
    terms: Tuple[Tuple[str, np.ndarray], ...]
    const: float = 0.0
    sense: str = ">="  # ">=", "<=", "=="


@dataclass(frozen=True)
class Objective:
    sense: str  # "maximize" | "minimize"
    kind: str  # "trace" | "scalar" | "logdet"
    var: str


@dataclass(frozen=True)
class ConicProgram:
    scalar_vars: Tuple[ScalarVar, ...] = ()
    matrix_vars: Tuple[MatrixVar, ...] = ()
    lmi_blocks: Tuple[LmiBlock, ...] = ()
    linear_constraints: Tuple[LinearConstraint, ...] = ()
    objective: Optional[Objective] = None

    def __post_init__(self):
        names = {v.name for v in self.scalar_vars} | {v.name for v in self.matrix_vars}
        if len(names) != len(self.scalar_vars) + len(self.matrix_vars):
            raise ValueError("duplicate variable names")
        shapes = self.var_shapes()
        for blk in self.lmi_blocks:
            if blk.const.shape[0] != blk.const.shape[1]:
                raise ValueError(f"LMI block {blk.name} is not square")
            N = blk.size
            for t in blk.terms:
                if t.var not in names:
                    raise ValueError(f"block {blk.name} references undeclared variable {t.var}")
                r, c = shapes[t.var]
                if t.transpose:
                    r, c = c, r
                if t.left.shape != (N, r) or t.right.shape != (c, N):
                    raise ValueError(f"term for {t.var} in block {blk.name} has inconsistent shape")
        for lc in self.linear_constraints:
            for vname, C in lc.terms:
                if vname not in names:
                    raise ValueError(f"constraint {lc.name} references undeclared variable {vname}")
                if np.shape(C) != shapes[vname]:
                    raise ValueError(f"constraint {lc.name}: coefficient shape mismatch for {vname}")
        if self.objective is not None and self.objective.var not in names:
            raise ValueError(f"objective references undeclared variable {self.objective.var}")

    def var_shapes(self) -> dict:
        shapes = {v.name: (1, 1) for v in self.scalar_vars}
        shapes.update({v.name: (v.rows, v.cols) for v in self.matrix_vars})
        return shapes


def _value_of(values: Mapping[str, object], name: str) -> np.ndarray:
    if name not in values:
        raise KeyError(f"missing value for variable {name!r}")
    return np.atleast_2d(np.asarray(values[name], dtype=float))


def evaluate_block(block: LmiBlock, values: Mapping[str, object]) -> np.ndarray:
    """Numeric value of an LMI block; exactly symmetric by construction."""
    M = block.const.astype(float).copy()
    for t in block.terms:
        X = _value_of(values, t.var)
        if t.transpose:
            X = X.T
        M += t.left @ X @ t.right
    return 0.5 * (M + M.T)


def evaluate_linear(lc: LinearConstraint, values: Mapping[str, object]) -> float:
    total = lc.const
    for vname, C in lc.terms:
        X = _value_of(values, vname)
        total += float(np.sum(np.asarray(C, float) * X))
    return total


def lmi_residuals(program: ConicProgram, values: Mapping[str, object]) -> list:
    """Per-block most-negative eigenvalue after substituting ``values``.

    For a block constrained <= 0 the sign is flipped so that a feasible
    block always reports a nonnegative residual.
    """
    out = []
    for blk in program.lmi_blocks:
        M = evaluate_block(blk, values)
        if blk.negative:
            M = -M
        out.append(float(np.linalg.eigvalsh(M).min()))
    return out


def linear_residuals(program: ConicProgram, values: Mapping[str, object]) -> list:
    """Slack of each linear constraint (nonnegative = satisfied; equalities
    report minus the absolute violation)."""
    out = []
    for lc in program.linear_constraints:
        v = evaluate_linear(lc, values)
        if lc.sense == ">=":
            out.append(v)
        elif lc.sense == "<=":
            out.append(-v)
        else:
            out.append(-abs(v))
    return out


# ---------------------------------------------------------------------------
# block assembly helper

Cell = Union[np.ndarray, float, None, Sequence]


def sym_block(
    name: str,
    grid: Sequence[Sequence[object]],
    row_sizes: Sequence[int],
    negative: bool = False,
) -> LmiBlock:
    """Assemble a square symmetric LMI block from a grid of cells.

    Each cell is either a constant array (or scalar for 1x1 cells), or a list
    of ``(var, left, right, transpose)`` tuples describing terms of that cell,
    or a mix of both, or None (zero). The caller supplies a symmetric layout;
    exact numerical symmetry is enforced at evaluation time.
    """
    sizes = list(row_sizes)
    N = sum(sizes)
    offs = np.cumsum([0] + sizes)
    const = np.zeros((N, N))
    terms = []
    for i, row in enumerate(grid):
        for j, cell in enumerate(row):
            if cell is None:
                continue
            items = cell if isinstance(cell, list) else [cell]
            for item in items:
                if isinstance(item, tuple):
                    var, left, right, transpose = item
                    left = np.atleast_2d(np.asarray(left, float))
                    right = np.atleast_2d(np.asarray(right, float))
                    L = np.zeros((N, left.shape[1]))
                    L[offs[i] : offs[i] + sizes[i], :] = left
                    R = np.zeros((right.shape[0], N))
                    R[:, offs[j] : offs[j] + sizes[j]] = right
                    terms.append(MatTerm(var, L, R, transpose))
                else:
                    Cmat = np.atleast_2d(np.asarray(item, float))
                    if Cmat.shape == (1, 1) and sizes[i] == sizes[j]:
                        Cmat = Cmat[0, 0] * np.eye(sizes[i]) if sizes[i] > 1 else Cmat
                    const[offs[i] : offs[i] + sizes[i], offs[j] : offs[j] + sizes[j]] += Cmat
    return LmiBlock(name, const, tuple(terms), negative)


# ---------------------------------------------------------------------------
# solving

@dataclass(frozen=True)
class SolverSettings:
    solver: Optional[str] = None  # None: CLARABEL with SCS fallback
    tol_feas: float = TOL_FEAS
    verbose: bool = False


@dataclass
class Solution:
    status: SolverStatus
    values: dict
    objective: float
    max_lmi_residual: float

    @property
    def optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


def _compile_cvxpy(program: ConicProgram):
    import cvxpy as cp

    cvars = {}
    for sv in program.scalar_vars:
        cvars[sv.name] = cp.Variable(nonneg=True, name=sv.name) if sv.nonneg else cp.Variable(name=sv.name)
    for mv in program.matrix_vars:
        if mv.symmetric:
            cvars[mv.name] = cp.Variable((mv.rows, mv.cols), symmetric=True, name=mv.name)
        else:
            cvars[mv.name] = cp.Variable((mv.rows, mv.cols), name=mv.name)

    def as_matrix(name):
        v = cvars[name]
        return cp.reshape(v, (1, 1), order="F") if v.ndim == 0 else v

    constraints = []
    for blk in program.lmi_blocks:
        expr = cp.Constant(blk.const)
        for t in blk.terms:
            X = as_matrix(t.var)
            if t.transpose:
                X = X.T
            expr = expr + cp.Constant(t.left) @ X @ cp.Constant(t.right)
        expr = 0.5 * (expr + expr.T)
        constraints.append(expr << 0 if blk.negative else expr >> 0)
    for lc in program.linear_constraints:
        e = cp.Constant(lc.const)
        for vname, C in lc.terms:
            X = as_matrix(vname)
            e = e + cp.sum(cp.multiply(cp.Constant(np.atleast_2d(np.asarray(C, float))), X))
        if lc.sense == ">=":
            constraints.append(e >= 0)
        elif lc.sense == "<=":
            constraints.append(e <= 0)
        else:
            constraints.append(e == 0)

    objective = cp.Maximize(0)
    if program.objective is not None:
        o = program.objective
        target = cvars[o.var]
        if o.kind == "trace":
            expr = cp.trace(target)
        elif o.kind == "scalar":
            expr = target
        elif o.kind == "logdet":
            expr = cp.log_det(target)
        else:
            raise ValueError(f"unknown objective kind {o.kind}")
        objective = cp.Maximize(expr) if o.sense == "maximize" else cp.Minimize(expr)
    return cp.Problem(objective, constraints), cvars


def _extract_values(program: ConicProgram, cvars) -> dict:
    values = {}
    for sv in program.scalar_vars:
        v = cvars[sv.name].value
        values[sv.name] = float(v) if v is not None else None
    for mv in program.matrix_vars:
        v = cvars[mv.name].value
        values[mv.name] = np.asarray(v, float) if v is not None else None
    return values


def solve(program: ConicProgram, settings: SolverSettings = SolverSettings()) -> Solution:
    """Solve the program with a conic solver.

    Infeasibility/unboundedness/numerical failure are reported in the
    returned :class:`Solution`; this function does not raise for them.
    On OPTIMAL, all LMI blocks pass the independent eigenvalue residual
    check at ``settings.tol_feas``.
    """
    import cvxpy as cp

    problem, cvars = _compile_cvxpy(program)
    solvers = [settings.solver] if settings.solver else ["CLARABEL", "SCS"]
    last_status = SolverStatus.NUMERICAL_FAILURE
    for solver in solvers:
        try:
            problem.solve(solver=solver, verbose=settings.verbose)
        except cp.SolverError:
            continue
        st = problem.status
        if st in (cp.INFEASIBLE, "infeasible_inaccurate"):
            return Solution(SolverStatus.INFEASIBLE, {}, float("-inf"), float("nan"))
        if st in (cp.UNBOUNDED, "unbounded_inaccurate"):
            return Solution(SolverStatus.UNBOUNDED, {}, float("inf"), float("nan"))
        if st in (cp.OPTIMAL, "optimal_inaccurate"):
            values = _extract_values(program, cvars)
            if any(v is None for v in values.values()):
                last_status = SolverStatus.NUMERICAL_FAILURE
                continue
            resid = lmi_residuals(program, values)
            lin = linear_residuals(program, values)
            worst = min(resid, default=0.0)
            worst_lin = min(lin, default=0.0)
            if worst >= -settings.tol_feas and worst_lin >= -settings.tol_feas:
                return Solution(SolverStatus.OPTIMAL, values, float(problem.value), worst)
            # solver reported success but residuals fail the independent check
            last_status = (
                SolverStatus.MAX_ITER if st == "optimal_inaccurate" else SolverStatus.NUMERICAL_FAILURE
            )
            continue
        last_status = SolverStatus.NUMERICAL_FAILURE
    return Solution(last_status, {}, float("nan"), float("nan"))


# ---------------------------------------------------------------------------
# quasi-concave parameter search

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def bisect_lambda(
    builder: Callable[[float], ConicProgram],
    interval: Tuple[float, float] = (1e-4, 1.0 - 1e-4),
    tol: float = 1e-3,
    settings: SolverSettings = SolverSettings(),
) -> Tuple[float, Solution]:
    """Maximize the optimal objective over a scalar parameter by golden-section
    search, assuming unimodality. Infeasible probes score -inf; if every probe
    is infeasible the last infeasible solution is returned.
    """
    lo, hi = interval
    if not (hi > lo):
        raise ValueError("empty or inverted interval")

    cache = {}

    def probe(lam: float):
        if lam not in cache:
            sol = solve(builder(lam), settings)
            score = sol.objective if sol.optimal else float("-inf")
            cache[lam] = (score, sol)
        return cache[lam]

    a, b = lo, hi
    h = b - a
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    yc, sc = probe(c)
    yd, sd = probe(d)
    steps = max(1, int(math.ceil(math.log(tol / h) / math.log(_INVPHI))))
    for _ in range(steps):
        if h <= tol:
            break
        if yc >= yd:
            b, d, yd, sd = d, c, yc, sc
            h = _INVPHI * h
            c = a + _INVPHI2 * h
            yc, sc = probe(c)
        else:
            a, c, yc, sc = c, d, yd, sd
            h = _INVPHI * h
            d = a + _INVPHI * h
            yd, sd = probe(d)
    lam_best, (score, sol) = max(cache.items(), key=lambda kv: kv[1][0])
    if score == float("-inf"):
        # every probe infeasible: surface that
        return lam_best, sol
    return lam_best, sol
