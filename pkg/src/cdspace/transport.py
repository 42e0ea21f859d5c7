"""Quadratic-cost optimal transport between measures on a finite space."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import lp as lpmod
from .errors import CdSpaceError, InvalidMeasure
from .space import ProbMeasure


@dataclass(frozen=True)
class Coupling:
    """Transport plan restricted to ``rows`` (support of mu0) x ``cols`` (support of mu1)."""

    rows: np.ndarray
    cols: np.ndarray
    matrix: np.ndarray
    cost: object

    def full(self, n: int) -> np.ndarray:
        out = np.zeros((n, n), dtype=self.matrix.dtype)
        if self.matrix.dtype == object:
            out[:] = Fraction(0)
        out[np.ix_(self.rows, self.cols)] = self.matrix
        return out

    def pairs(self):
        """Yield ``(i, j, weight)`` over the positive entries."""
        for a, i in enumerate(self.rows):
            for b, j in enumerate(self.cols):
                w = self.matrix[a, b]
                if w > 0:
                    yield int(i), int(j), w


def squared_distances(space, exact: bool):
    if exact:
        return space.dist_exact ** 2
    return space.dist ** 2


def _check_pair(mu0: ProbMeasure, mu1: ProbMeasure):
    if mu0.space is not mu1.space:
        raise InvalidMeasure("measures live on different spaces")


def optimal_coupling(mu0: ProbMeasure, mu1: ProbMeasure, exact: bool | None = None) -> Coupling:
    """An optimal coupling for the squared-distance cost.

    Runs in rational arithmetic when either measure carries exact weights
    (or when ``exact=True``).
    """
    _check_pair(mu0, mu1)
    if exact is None:
        exact = mu0.exact or mu1.exact
    space = mu0.space
    num = Fraction if exact else float
    a = [num(v) for v in mu0.weights]
    b = [num(v) for v in mu1.weights]
    rows = mu0.support()
    cols = mu1.support()
    c = squared_distances(space, exact)
    nr, nc = len(rows), len(cols)
    prog = lpmod.LinearProgram(nr * nc, [c[i, j] for i in rows for j in cols])
    for p, i in enumerate(rows):
        prog.add_constraint({p * nc + q: 1 for q in range(nc)}, "==", a[i])
    for q, j in enumerate(cols):
        prog.add_constraint({p * nc + q: 1 for p in range(nr)}, "==", b[j])
    sol = lpmod.solve(prog, exact=exact)
    if not sol.optimal:
        raise CdSpaceError(f"transport LP returned {sol.status}")
    matrix = sol.primal.reshape(nr, nc)
    return Coupling(rows, cols, matrix, sol.objective_value)


def w2_squared(mu0: ProbMeasure, mu1: ProbMeasure, exact: bool | None = None):
    return optimal_coupling(mu0, mu1, exact).cost


def w2(mu0: ProbMeasure, mu1: ProbMeasure, exact: bool | None = None) -> float:
    """Quadratic Wasserstein distance."""
    return math.sqrt(max(float(w2_squared(mu0, mu1, exact)), 0.0))


def coupling_cost(space, plan, exact: bool = False):
    """Sum of weight * d^2 over ``(i, j, weight)`` triples."""
    c = squared_distances(space, exact)
    zero = Fraction(0) if exact else 0.0
    return sum((w * c[i, j] for i, j, w in plan), zero)
