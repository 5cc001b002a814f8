"""Linear-program container, solver front-end, and KKT verification.

Problems are minimizations in the standard split form

    min  c.x   s.t.   A_eq x = b_eq,   A_ub x <= b_ub,   lb <= x <= ub

Dual sign convention (used throughout the toolkit):

  * eq_duals[i]   = dObj/d(b_eq[i])   -- the "price" convention, so the dual
                    of a power-balance row is $/MWh (or tCO2/MWh when the
                    objective is emissions).
  * ineq_duals[j] = -dObj/d(b_ub[j])  >= 0 for <=-rows; relaxing the row can
                    only lower a minimum.
  * reduced_costs = c - A_eq'.eq_duals + A_ub'.ineq_duals; nonnegative at a
                    lower bound, nonpositive at an upper bound, ~0 elsewhere.

Solves are stateless: an LpProblem is immutable once built and may be shared
read-only across concurrent solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import NumericalFailure

FEAS_TOL = 1e-7     # internal feasibility/optimality target
REPORT_TOL = 1e-6   # tolerance at which residual reports pass


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    """Immutable standard-form LP. Arrays are owned by the problem; treat as read-only.

    A_eq / A_ub are CSR matrices (possibly with zero rows). Bounds default to
    [0, +inf) per variable.
    """

    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        n = self.c.shape[0]
        if self.A_eq.shape[1] != n or self.A_ub.shape[1] != n:
            raise ValueError(
                f"constraint matrices have {self.A_eq.shape[1]}/{self.A_ub.shape[1]} "
                f"columns for {n} variables"
            )
        if self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("A_eq rows do not match b_eq length")
        if self.A_ub.shape[0] != self.b_ub.shape[0]:
            raise ValueError("A_ub rows do not match b_ub length")
        if self.lb.shape[0] != n or self.ub.shape[0] != n:
            raise ValueError("bound vectors do not match variable count")
        if not np.isfinite(self.c).all():
            raise ValueError("objective coefficients must be finite")
        for mat, name in ((self.A_eq, "A_eq"), (self.A_ub, "A_ub")):
            if mat.nnz and not np.isfinite(mat.data).all():
                raise ValueError(f"{name} contains non-finite coefficients")
        if not (np.isfinite(self.b_eq).all() and np.isfinite(self.b_ub).all()):
            raise ValueError("right-hand sides must be finite")
        if np.any(self.lb > self.ub):
            j = int(np.argmax(self.lb > self.ub))
            raise ValueError(f"variable {j} has lower bound {self.lb[j]} > upper bound {self.ub[j]}")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_eq(self) -> int:
        return self.b_eq.shape[0]

    @property
    def num_ub(self) -> int:
        return self.b_ub.shape[0]


class LpBuilder:
    """Incremental LP assembly: add variables, then rows referencing them.

    Row coefficients are given as parallel (indices, values) sequences; the
    builder rejects references to undeclared variables at add time so badly
    indexed models fail fast, before any solve.
    """

    def __init__(self):
        self._cost: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._eq_rows: list[tuple[list[int], list[float]]] = []
        self._eq_rhs: list[float] = []
        self._ub_rows: list[tuple[list[int], list[float]]] = []
        self._ub_rhs: list[float] = []

    @property
    def num_vars(self) -> int:
        return len(self._cost)

    def add_var(self, cost: float = 0.0, lb: float = 0.0, ub: float = np.inf) -> int:
        self._cost.append(float(cost))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        return len(self._cost) - 1

    def add_vars(self, n: int, cost=0.0, lb=0.0, ub=np.inf) -> np.ndarray:
        """Add n variables sharing scalar or per-variable cost/bounds; returns index array."""
        cost = np.broadcast_to(np.asarray(cost, dtype=float), (n,))
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        start = len(self._cost)
        self._cost.extend(cost.tolist())
        self._lb.extend(lb.tolist())
        self._ub.extend(ub.tolist())
        return np.arange(start, start + n)

    def _check_indices(self, idx) -> list[int]:
        idx = [int(i) for i in idx]
        n = len(self._cost)
        for i in idx:
            if i < 0 or i >= n:
                raise ValueError(f"row references undeclared variable index {i} (have {n})")
        return idx

    def add_eq(self, idx, coef, rhs: float) -> int:
        """Add sum(coef*x[idx]) == rhs; returns the equality row index."""
        self._eq_rows.append((self._check_indices(idx), [float(v) for v in coef]))
        self._eq_rhs.append(float(rhs))
        return len(self._eq_rhs) - 1

    def add_le(self, idx, coef, rhs: float) -> int:
        """Add sum(coef*x[idx]) <= rhs; returns the inequality row index."""
        self._ub_rows.append((self._check_indices(idx), [float(v) for v in coef]))
        self._ub_rhs.append(float(rhs))
        return len(self._ub_rhs) - 1

    def set_cost(self, idx: int, cost: float) -> None:
        self._cost[idx] = float(cost)

    def fix_var(self, idx: int, value: float) -> None:
        self._lb[idx] = float(value)
        self._ub[idx] = float(value)

    def build(self) -> LpProblem:
        n = len(self._cost)

        def to_csr(rows, nrows):
            indptr = [0]
            indices: list[int] = []
            data: list[float] = []
            for idx, coef in rows:
                if len(idx) != len(coef):
                    raise ValueError("row indices and coefficients differ in length")
                indices.extend(idx)
                data.extend(coef)
                indptr.append(len(indices))
            return sp.csr_matrix(
                (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int32),
                 np.asarray(indptr, dtype=np.int32)),
                shape=(nrows, n),
            )

        return LpProblem(
            c=np.asarray(self._cost, dtype=float),
            A_eq=to_csr(self._eq_rows, len(self._eq_rhs)),
            b_eq=np.asarray(self._eq_rhs, dtype=float),
            A_ub=to_csr(self._ub_rows, len(self._ub_rhs)),
            b_ub=np.asarray(self._ub_rhs, dtype=float),
            lb=np.asarray(self._lb, dtype=float),
            ub=np.asarray(self._ub, dtype=float),
        )


@dataclass(frozen=True)
class LpSolution:
    """Primal/dual solution. Dual and primal arrays are None unless OPTIMAL."""

    status: SolveStatus
    x: np.ndarray | None = None
    objective_value: float = np.nan
    eq_duals: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None


def with_extra_le_row(problem: LpProblem, idx, coef, rhs: float,
                      new_cost: np.ndarray | None = None) -> LpProblem:
    """Copy a problem, appending one <=-row (and optionally swapping the objective).

    The appended row becomes the LAST inequality row, so its dual is
    ineq_duals[-1] in the new problem's solution.
    """
    n = problem.num_vars
    row = sp.csr_matrix(
        (np.asarray(coef, dtype=float), (np.zeros(len(idx), dtype=int), np.asarray(idx, dtype=int))),
        shape=(1, n),
    )
    return LpProblem(
        c=problem.c if new_cost is None else np.asarray(new_cost, dtype=float),
        A_eq=problem.A_eq,
        b_eq=problem.b_eq,
        A_ub=sp.vstack([problem.A_ub, row], format="csr"),
        b_ub=np.append(problem.b_ub, float(rhs)),
        lb=problem.lb,
        ub=problem.ub,
    )


def solve(problem: LpProblem) -> LpSolution:
    """Solve to a vertex with exact basis duals (dual simplex backend).

    Raises NumericalFailure if the backend reports numerical breakdown on
    both the default path and a presolve-disabled restart.
    """
    A_eq = problem.A_eq if problem.num_eq else None
    b_eq = problem.b_eq if problem.num_eq else None
    A_ub = problem.A_ub if problem.num_ub else None
    b_ub = problem.b_ub if problem.num_ub else None
    bounds = np.column_stack([problem.lb, problem.ub])

    res = None
    for options in ({"presolve": True}, {"presolve": False}):
        res = linprog(problem.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs-ds", options=options)
        if res.status in (0, 2, 3):
            break
    if res.status == 2:
        return LpSolution(status=SolveStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=SolveStatus.UNBOUNDED)
    if res.status != 0:
        raise NumericalFailure(f"LP backend failed after restart: {res.message}")

    x = np.asarray(res.x, dtype=float)
    mu = np.asarray(res.eqlin.marginals, dtype=float) if problem.num_eq else np.zeros(0)
    gamma = -np.asarray(res.ineqlin.marginals, dtype=float) if problem.num_ub else np.zeros(0)
    # Recompute reduced costs from the reported row duals so the reported
    # triple (x, duals, reduced costs) is internally consistent by construction.
    rc = problem.c.copy()
    if problem.num_eq:
        rc -= problem.A_eq.T @ mu
    if problem.num_ub:
        rc += problem.A_ub.T @ gamma
    return LpSolution(
        status=SolveStatus.OPTIMAL,
        x=x,
        objective_value=float(problem.c @ x),
        eq_duals=mu,
        ineq_duals=gamma,
        reduced_costs=rc,
    )


@dataclass(frozen=True)
class ResidualReport:
    """KKT residuals of a reported solution, all computed directly from inputs.

    Complementarity and the duality gap are scaled by max(1, |rhs|) and
    max(1, |objective|) respectively; primal/dual infeasibilities are absolute.
    """

    max_primal_infeasibility: float
    max_dual_infeasibility: float
    max_complementarity: float
    duality_gap: float
    tolerance: float = REPORT_TOL

    @property
    def passed(self) -> bool:
        return (
            self.max_primal_infeasibility <= self.tolerance
            and self.max_dual_infeasibility <= self.tolerance
            and self.max_complementarity <= self.tolerance
            and self.duality_gap <= self.tolerance
        )


def verify_kkt(problem: LpProblem, solution: LpSolution,
               tolerance: float = REPORT_TOL) -> ResidualReport:
    """Check a claimed optimal solution against the four KKT residual groups.

    Always returns a report; never raises on a bad solution. Reduced costs are
    recomputed from the solution's row duals, so a perturbed dual shows up as
    dual infeasibility even if the caller also tampered with reduced_costs.
    """
    if solution.status is not SolveStatus.OPTIMAL or solution.x is None:
        raise ValueError("verify_kkt requires an OPTIMAL solution with a primal point")
    x = solution.x
    mu = solution.eq_duals if solution.eq_duals is not None else np.zeros(problem.num_eq)
    gamma = solution.ineq_duals if solution.ineq_duals is not None else np.zeros(problem.num_ub)

    # Primal feasibility.
    primal = 0.0
    if problem.num_eq:
        primal = max(primal, float(np.max(np.abs(problem.A_eq @ x - problem.b_eq))))
    slack = np.zeros(0)
    if problem.num_ub:
        slack = problem.b_ub - problem.A_ub @ x
        primal = max(primal, float(np.max(-np.minimum(slack, 0.0), initial=0.0)))
    primal = max(primal, float(np.max(problem.lb - x, initial=0.0)))
    finite_ub = np.isfinite(problem.ub)
    if finite_ub.any():
        primal = max(primal, float(np.max((x - problem.ub)[finite_ub], initial=0.0)))

    # Dual feasibility via recomputed reduced costs.
    rc = problem.c.copy()
    if problem.num_eq:
        rc -= problem.A_eq.T @ mu
    if problem.num_ub:
        rc += problem.A_ub.T @ gamma
    at_lb = np.abs(x - problem.lb) <= 1e-9 * np.maximum(1.0, np.abs(problem.lb))
    at_ub = finite_ub & (np.abs(x - problem.ub) <= 1e-9 * np.maximum(1.0, np.abs(problem.ub)))
    dual = float(np.max(-gamma, initial=0.0))  # <=-row duals must be nonnegative
    interior = ~(at_lb | at_ub)
    if interior.any():
        dual = max(dual, float(np.max(np.abs(rc[interior]))))
    only_lb = at_lb & ~at_ub
    if only_lb.any():
        dual = max(dual, float(np.max(-rc[only_lb], initial=0.0)))
    only_ub = at_ub & ~at_lb
    if only_ub.any():
        dual = max(dual, float(np.max(rc[only_ub], initial=0.0)))

    # Complementary slackness: row duals x slacks, bound duals x bound gaps.
    comp = 0.0
    if problem.num_ub:
        scale = np.maximum(1.0, np.abs(problem.b_ub))
        comp = float(np.max(np.abs(gamma * slack) / scale, initial=0.0))
    lb_gap = x - problem.lb
    comp = max(comp, float(np.max(np.abs(np.maximum(rc, 0.0) * lb_gap)
                                  / np.maximum(1.0, np.abs(problem.lb)), initial=0.0)))
    if finite_ub.any():
        ub_gap = (problem.ub - x)[finite_ub]
        comp = max(comp, float(np.max(np.abs(np.minimum(rc[finite_ub], 0.0) * ub_gap)
                                      / np.maximum(1.0, np.abs(problem.ub[finite_ub])), initial=0.0)))

    # Duality gap: primal objective vs dual objective built from the same duals.
    pobj = float(problem.c @ x)
    dobj = 0.0
    if problem.num_eq:
        dobj += float(problem.b_eq @ mu)
    if problem.num_ub:
        dobj -= float(problem.b_ub @ gamma)
    pos_rc = np.maximum(rc, 0.0)
    neg_rc = np.minimum(rc, 0.0)
    finite_lb = np.isfinite(problem.lb)
    dobj += float(problem.lb[finite_lb] @ pos_rc[finite_lb])
    dobj += float(problem.ub[finite_ub] @ neg_rc[finite_ub])
    gap = abs(pobj - dobj) / max(1.0, abs(pobj))

    return ResidualReport(
        max_primal_infeasibility=primal,
        max_dual_infeasibility=dual,
        max_complementarity=comp,
        duality_gap=gap,
        tolerance=tolerance,
    )


def write_lp_text(problem: LpProblem) -> str:
    """Render the problem in a fixed-layout CPLEX-LP-style text for cross-checking.

    Variables are named v{index}; equality rows e{index}; <=-rows i{index}.
    The layout is deterministic so dumps of the same problem are byte-identical.
    """

    def fmt(v: float) -> str:
        return f"{v:.12g}"

    def terms(row: sp.csr_matrix) -> str:
        parts = []
        for j, v in zip(row.indices, row.data):
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {fmt(abs(v))} v{j}")
        return " ".join(parts) if parts else "+ 0 v0"

    lines = ["Minimize", " obj: " + terms(sp.csr_matrix(problem.c)), "Subject To"]
    for i in range(problem.num_eq):
        lines.append(f" e{i}: {terms(problem.A_eq.getrow(i))} = {fmt(problem.b_eq[i])}")
    for i in range(problem.num_ub):
        lines.append(f" i{i}: {terms(problem.A_ub.getrow(i))} <= {fmt(problem.b_ub[i])}")
    lines.append("Bounds")
    for j in range(problem.num_vars):
        lo, hi = problem.lb[j], problem.ub[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" v{j} free")
        elif hi == np.inf:
            lines.append(f" {fmt(lo)} <= v{j}")
        elif lo == -np.inf:
            lines.append(f" v{j} <= {fmt(hi)}")
        else:
            lines.append(f" {fmt(lo)} <= v{j} <= {fmt(hi)}")
    lines.append("End")
    return "\n".join(lines) + "\n"
