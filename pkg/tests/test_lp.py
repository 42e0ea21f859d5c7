from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from cdspace import lp as L


def test_min_x_at_least_three():
    prog = L.LinearProgram(1, [1], [({0: 1}, ">=", 3)])
    for exact in (False, True):
        sol = L.solve(prog, exact=exact)
        assert sol.optimal and sol.objective_value == 3
        assert sol.dual[0] == 1


def test_infeasible():
    prog = L.LinearProgram(1, [0], [({0: 1}, "<=", -1)])
    assert L.solve(prog).status == L.INFEASIBLE
    assert L.solve(prog, exact=True).status == L.INFEASIBLE


def test_segment_vertex():
    prog = L.LinearProgram(2, [-1, -1], [({0: 1, 1: 1}, "<=", 1)])
    sol = L.solve(prog)
    assert sol.objective_value == pytest.approx(-1)
    # the two vertices of the optimal face
    assert tuple(np.round(sol.primal, 12)) in {(1.0, 0.0), (0.0, 1.0)}


def test_unbounded():
    prog = L.LinearProgram(1, [-1], [({0: 1}, ">=", 0)])
    assert L.solve(prog).status == L.UNBOUNDED


def test_bounds_and_equalities_exact():
    # min -x - 2y, x + y == 3/2, 0 <= y <= 1, x >= 1/4
    prog = L.LinearProgram(2, [-1, -2], lower=[Fraction(1, 4), 0], upper=[float("inf"), 1])
    prog.add_constraint({0: 1, 1: 1}, "==", Fraction(3, 2))
    sol = L.solve(prog, exact=True)
    assert sol.objective_value == Fraction(-5, 2)
    assert list(sol.primal) == [Fraction(1, 2), Fraction(1)]


def test_add_variable_and_validation():
    prog = L.LinearProgram(1)
    j = prog.add_variable(cost=2, lower=1)
    assert j == 1 and prog.n_vars == 2
    prog.add_constraint({0: 1, 1: 1}, "≥", 3)
    sol = L.solve(prog)
    assert sol.objective_value == pytest.approx(2)
    with pytest.raises(ValueError):
        prog.add_constraint({5: 1}, "<=", 1)
    with pytest.raises(ValueError):
        prog.add_constraint({0: 1}, "<", 1)
    with pytest.raises(ValueError):
        prog.add_constraint({0: 1}, "<=", float("inf"))


def test_redundant_equalities():
    prog = L.LinearProgram(2, [1, 1])
    prog.add_constraint({0: 1, 1: 1}, "==", 1)
    prog.add_constraint({0: 2, 1: 2}, "==", 2)
    prog.add_constraint({0: 1}, ">=", 0.25)
    sol = L.solve(prog)
    assert sol.optimal and sol.objective_value == pytest.approx(1)


def _random_lp(rng, n, m):
    A = rng.integers(-3, 4, size=(m, n))
    x0 = rng.integers(0, 3, size=n)
    rels = rng.choice(["<=", "==", ">="], size=m)
    b = A @ x0
    b = np.where(rels == "<=", b + rng.integers(0, 3, m), np.where(rels == ">=", b - rng.integers(0, 3, m), b))
    c = rng.integers(-2, 5, size=n)
    prog = L.LinearProgram(n, [int(v) for v in c], upper=[5] * n)
    for row, rel, rhs in zip(A, rels, b):
        prog.add_constraint({j: int(a) for j, a in enumerate(row) if a}, str(rel), int(rhs))
    return prog, A, rels, b, c


def test_against_scipy_and_duality():
    rng = np.random.default_rng(3)
    for _ in range(60):
        n, m = int(rng.integers(2, 7)), int(rng.integers(1, 6))
        prog, A, rels, b, c = _random_lp(rng, n, m)
        ub = A[rels == "<="].tolist() + (-A[rels == ">="]).tolist()
        bub = b[rels == "<="].tolist() + (-b[rels == ">="]).tolist()
        ref = linprog(c, A_ub=ub or None, b_ub=bub or None, A_eq=A[rels == "=="] if (rels == "==").any() else None,
                      b_eq=b[rels == "=="] if (rels == "==").any() else None, bounds=[(0, 5)] * n, method="highs")
        sol = L.solve(prog)
        ex = L.solve(prog, exact=True)
        assert ref.status == 0  # feasible by construction, bounded by the box
        assert sol.objective_value == pytest.approx(ref.fun, abs=1e-7)
        assert abs(float(ex.objective_value) - ref.fun) < 1e-9
        assert L.primal_residual(prog, sol.primal) < 1e-9
        # weak duality, and strong duality at the optimum
        assert sol.dual_objective <= sol.objective_value + 1e-7
        assert sol.dual_objective == pytest.approx(sol.objective_value, abs=1e-7)
        assert ex.dual_objective == ex.objective_value


def test_deterministic():
    rng = np.random.default_rng(5)
    prog, *_ = _random_lp(rng, 6, 4)
    a = L.solve(prog)
    b = L.solve(prog)
    assert a.primal.tobytes() == b.primal.tobytes()


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling instance for the textbook Dantzig rule
    c = [Fraction(-3, 4), 150, Fraction(-1, 50), 6]
    rows = [([Fraction(1, 4), -60, Fraction(-1, 25), 9], 0), ([Fraction(1, 2), -90, Fraction(-1, 50), 3], 0),
            ([0, 0, 1, 0], 1)]
    prog = L.LinearProgram(4, c)
    for coeffs, rhs in rows:
        prog.add_constraint(dict(enumerate(coeffs)), "<=", rhs)
    sol = L.solve(prog, exact=True, dantzig_steps=50)
    assert sol.objective_value == Fraction(-1, 20)


def test_lp_format_dump():
    prog = L.LinearProgram(2, [1, -2], [({0: 1, 1: 1}, "<=", 4)], upper=[3, float("inf")])
    text = L.to_lp_format(prog, "demo")
    assert "Minimize" in text and "c0: 1 x0 + 1 x1 <= 4" in text
    assert "0 <= x0 <= 3" in text and "x1 <= +inf" in text
