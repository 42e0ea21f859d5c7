"""Two-phase dense-tableau simplex over floats or exact rationals.

Every downstream computation (optimal couplings, excess-mass minimization,
upper gradients) goes through :func:`solve`. The pivot rule is Dantzig's
most-negative reduced cost for a bounded number of steps, then Bland's
lowest-index rule, so the solver terminates and is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import NumericalBreakdown

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = {"<=": "<=", "≤": "<=", "==": "==", "=": "==", ">=": ">=", "≥": ">="}


@dataclass
class LinearProgram:
    """minimize ``objective @ x`` subject to linear rows and variable bounds.

    Rows are stored as ``(coeffs, relation, rhs)`` where ``coeffs`` maps a
    variable index to its coefficient.
    """

    n_vars: int
    objective: list = None
    constraints: list = field(default_factory=list)
    lower: list = None
    upper: list = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = [0] * self.n_vars
        if self.lower is None:
            self.lower = [0] * self.n_vars
        if self.upper is None:
            self.upper = [math.inf] * self.n_vars
        self.objective = list(self.objective)
        self.lower = list(self.lower)
        self.upper = list(self.upper)
        if not len(self.objective) == len(self.lower) == len(self.upper) == self.n_vars:
            raise ValueError("objective and bounds must have length n_vars")
        rows, self.constraints = self.constraints, []
        for row in rows:
            self.add_constraint(*row)

    def add_variable(self, cost=0, lower=0, upper=math.inf) -> int:
        """Append a variable and return its index."""
        self.objective.append(cost)
        self.lower.append(lower)
        self.upper.append(upper)
        self.n_vars += 1
        return self.n_vars - 1

    def add_constraint(self, coeffs: Mapping[int, object], relation: str, rhs) -> int:
        rel = _RELATIONS.get(relation)
        if rel is None:
            raise ValueError(f"unknown relation {relation!r}")
        coeffs = dict(coeffs)
        for j in coeffs:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"constraint references undeclared variable {j}")
        if isinstance(rhs, float) and not math.isfinite(rhs):
            raise ValueError("constraint rhs must be finite")
        self.constraints.append((coeffs, rel, rhs))
        return len(self.constraints) - 1


@dataclass
class LpSolution:
    status: str
    objective_value: object = None
    primal: np.ndarray = None
    dual: np.ndarray = None
    bound_dual: np.ndarray = None
    dual_objective: object = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _as_number(v, exact):
    return Fraction(v) if exact else float(v)


class _Tableau:
    """Dense simplex tableau ``[B^-1 A | B^-1 b]`` with its basis."""

    def __init__(self, A, b, basis, exact, dantzig_steps, max_iter):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.exact = exact
        self.tol = 0 if exact else 1e-10
        self.pivot_tol = 0 if exact else 1e-11
        self.dantzig_steps = dantzig_steps
        self.max_iter = max_iter
        self.iterations = 0

    def reduced_costs(self, c):
        cb = np.array([c[k] for k in self.basis], dtype=self.A.dtype)
        r = c - cb @ self.A if len(self.basis) else c.copy()
        for k in self.basis:
            r[k] = 0
        return r

    def pivot(self, i, j):
        A, b = self.A, self.b
        p = A[i, j]
        A[i] = A[i] / p
        b[i] = b[i] / p
        col = A[:, j].copy()
        col[i] = 0
        nz = np.flatnonzero(np.asarray(col != 0, dtype=bool))
        if nz.size:
            A[nz] -= np.outer(col[nz], A[i])
            b[nz] -= col[nz] * b[i]
            if not self.exact:
                A[nz, j] = 0.0
        self.basis[i] = j
        self.iterations += 1

    def run(self, c, allowed):
        """Primal simplex on cost vector ``c``; returns OPTIMAL or UNBOUNDED."""
        steps = 0
        while True:
            if steps >= self.max_iter:
                raise NumericalBreakdown(f"simplex exceeded {self.max_iter} iterations")
            r = self.reduced_costs(c)
            cand = np.flatnonzero(np.asarray(r < -self.tol, dtype=bool) & allowed)
            if cand.size == 0:
                return OPTIMAL
            if steps < self.dantzig_steps:
                vals = r[cand]
                j = int(cand[int(np.argmin(vals))]) if not self.exact else int(cand[min(range(len(cand)), key=lambda k: (vals[k], k))])
            else:
                j = int(cand[0])
            col = self.A[:, j]
            rows = np.flatnonzero(np.asarray(col > self.pivot_tol, dtype=bool))
            if rows.size == 0:
                return UNBOUNDED
            ratios = [self.b[i] / col[i] for i in rows]
            best = min(ratios)
            if not self.exact:
                slack = 1e-12 * (1 + abs(best))
                ties = [i for i, q in zip(rows, ratios) if q <= best + slack]
            else:
                ties = [i for i, q in zip(rows, ratios) if q == best]
            i = min(ties, key=lambda k: self.basis[k])
            if not self.exact:
                # among near-ties prefer the largest pivot element for stability
                big = max(col[k] for k in ties)
                ties = [k for k in ties if col[k] >= 0.5 * big]
                i = min(ties, key=lambda k: self.basis[k])
            self.pivot(int(i), j)
            steps += 1


def solve(lp: LinearProgram, exact: bool = False, dantzig_steps: int | None = None,
          max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``; ``exact=True`` runs the same algorithm in rational arithmetic."""
    n = lp.n_vars
    num = (lambda v: _as_number(v, exact))
    dtype = object if exact else float
    lo = [num(v) for v in lp.lower]
    for v in lp.lower:
        if not math.isfinite(float(v)):
            raise ValueError("variable lower bounds must be finite")

    rows, rels, rhs = [], [], []
    for coeffs, rel, b in lp.constraints:
        row = {j: num(a) for j, a in coeffs.items() if a != 0}
        b = num(b) - sum((a * lo[j] for j, a in row.items()), num(0))
        rows.append(row)
        rels.append(rel)
        rhs.append(b)
    n_user = len(rows)
    bounded = [j for j in range(n) if math.isfinite(float(lp.upper[j]))]
    for j in bounded:
        rows.append({j: num(1)})
        rels.append("<=")
        rhs.append(num(lp.upper[j]) - lo[j])
        if rhs[-1] < 0:
            return LpSolution(INFEASIBLE)

    m = len(rows)
    sign = [1] * m
    for i in range(m):
        if rhs[i] < 0:
            sign[i] = -1
            rows[i] = {j: -a for j, a in rows[i].items()}
            rhs[i] = -rhs[i]
            rels[i] = {"<=": ">=", ">=": "<=", "==": "=="}[rels[i]]

    n_slack = sum(r != "==" for r in rels)
    n_art = sum(r != "<=" for r in rels)
    ncols = n + n_slack + n_art
    zero = num(0)
    A = np.full((m, ncols), zero, dtype=dtype)
    b = np.array(rhs, dtype=dtype) if m else np.zeros(0, dtype=dtype)
    basis, init_col = [], []
    s, a = n, n + n_slack
    art_cols = []
    for i in range(m):
        for j, v in rows[i].items():
            A[i, j] = v
        if rels[i] == "<=":
            A[i, s] = num(1)
            basis.append(s)
            init_col.append(s)
            s += 1
        else:
            if rels[i] == ">=":
                A[i, s] = num(-1)
                s += 1
            A[i, a] = num(1)
            basis.append(a)
            init_col.append(a)
            art_cols.append(a)
            a += 1
    A0, b0 = A.copy(), b.copy()

    if dantzig_steps is None:
        dantzig_steps = 5 * (m + ncols)
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000
    tab = _Tableau(A, b, basis, exact, dantzig_steps, max_iter)
    is_art = np.zeros(ncols, dtype=bool)
    is_art[art_cols] = True

    if art_cols:
        c1 = np.full(ncols, zero, dtype=dtype)
        c1[is_art] = num(1)
        tab.run(c1, np.ones(ncols, dtype=bool))
        infeas = sum((tab.b[i] for i in range(m) if is_art[tab.basis[i]]), zero)
        feas_tol = 0 if exact else 1e-9 * (1 + max((abs(v) for v in b0), default=0))
        if infeas > feas_tol:
            return LpSolution(INFEASIBLE, iterations=tab.iterations)
        for i in range(m):
            if is_art[tab.basis[i]]:
                row = tab.A[i, :n + n_slack]
                nz = np.flatnonzero(np.array([abs(v) > tab.pivot_tol for v in row], dtype=bool))
                if nz.size:
                    j = int(nz[0]) if exact else int(nz[np.argmax(np.abs(row[nz].astype(float)))])
                    tab.pivot(i, j)
                # else: redundant row; its artificial stays basic at zero

    c2 = np.full(ncols, zero, dtype=dtype)
    for j in range(n):
        c2[j] = num(lp.objective[j])
    status = tab.run(c2, ~is_art)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=tab.iterations)

    x = np.full(ncols, zero, dtype=dtype)
    if exact:
        for i, k in enumerate(tab.basis):
            x[k] = tab.b[i]
        r = tab.reduced_costs(c2)
        y = np.array([-r[init_col[i]] for i in range(m)], dtype=object)
    else:
        B = A0[:, tab.basis]
        try:
            xb = np.linalg.solve(B, b0)
            y = np.linalg.solve(B.T, c2[tab.basis])
        except np.linalg.LinAlgError:
            xb = tab.b.copy()
            r = tab.reduced_costs(c2)
            y = -r[init_col]
        x[tab.basis] = xb
        x = np.where(np.abs(x) < 1e-13, 0.0, x)
        x = np.clip(x, 0.0, None)

    primal = np.array([x[j] + lo[j] for j in range(n)], dtype=dtype)
    y = np.array([y[i] * sign[i] for i in range(m)], dtype=dtype)
    orig_rhs = [num(bv) for _, _, bv in lp.constraints] + [num(lp.upper[j]) for j in bounded]
    value = sum((num(lp.objective[j]) * primal[j] for j in range(n)), zero)
    # y on lower-shifted rows: rhs_i - a_i.lo ; add back c.lo via the shift
    shifted = [orig_rhs[i] - sum((a_ * lo[j] for j, a_ in lp.constraints[i][0].items()), zero)
               if i < n_user else orig_rhs[i] - lo[bounded[i - n_user]] for i in range(m)]
    dual_obj = sum((shifted[i] * y[i] for i in range(m)), zero) + sum(
        (num(lp.objective[j]) * lo[j] for j in range(n)), zero)
    if not exact:
        value = float(value)
        dual_obj = float(dual_obj)
    return LpSolution(OPTIMAL, value, primal, y[:n_user], y[n_user:], dual_obj, tab.iterations)


def primal_residual(lp: LinearProgram, x) -> float:
    """Largest row violation of ``x`` after scaling each row by its largest coefficient."""
    worst = 0.0
    for coeffs, rel, rhs in lp.constraints:
        scale = max([abs(float(a)) for a in coeffs.values()] + [1.0])
        lhs = sum(float(a) * float(x[j]) for j, a in coeffs.items())
        gap = lhs - float(rhs)
        viol = {"<=": max(gap, 0.0), ">=": max(-gap, 0.0), "==": abs(gap)}[rel]
        worst = max(worst, viol / scale)
    for j in range(lp.n_vars):
        worst = max(worst, float(lp.lower[j]) - float(x[j]), float(x[j]) - float(lp.upper[j]))
    return worst


def to_lp_format(lp: LinearProgram, name: str = "cdspace") -> str:
    """Render ``lp`` in CPLEX LP text format for cross-checking with external solvers."""

    def term(a, j, first):
        a = float(a)
        sgn = "-" if a < 0 else ("" if first else "+")
        return f"{sgn} {abs(a):.17g} x{j}".strip()

    def expr(coeffs):
        items = [(j, a) for j, a in sorted(coeffs.items()) if a != 0]
        if not items:
            return "0 x0"
        return " ".join(term(a, j, k == 0) for k, (j, a) in enumerate(items))

    ops = {"<=": "<=", ">=": ">=", "==": "="}
    lines = [f"\\ {name}", "Minimize", f" obj: {expr(dict(enumerate(lp.objective)))}", "Subject To"]
    for i, (coeffs, rel, rhs) in enumerate(lp.constraints):
        lines.append(f" c{i}: {expr(coeffs)} {ops[rel]} {float(rhs):.17g}")
    lines.append("Bounds")
    for j in range(lp.n_vars):
        lo, hi = float(lp.lower[j]), float(lp.upper[j])
        hi_s = "+inf" if math.isinf(hi) else f"{hi:.17g}"
        lines.append(f" {lo:.17g} <= x{j} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"
