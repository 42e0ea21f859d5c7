"""Bounded-density displacement interpolation on finite spaces.

Intermediate measures are found by a linear program over "triple plans":
weights on ``(x0, z, x1)`` whose endpoint marginals are the given measures,
whose ``(x0, x1)`` marginal is an optimal coupling, and whose middle point
``z`` is an epsilon-approximate ``lam``-intermediate point of the pair. The
objective is the excess mass of the ``z`` marginal above a density
threshold. Dyadic geodesics are assembled from repeated midpoint solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import lp as lpmod
from ._parallel import pmap
from .errors import (BetaUndefined, BlendNotIntermediate, CNotInOpenInterval, GOutOfRange,
                     InvalidMeasure, NoAdmissibleTriple, ThresholdExceeded)
from .space import MetricMeasureSpace, ProbMeasure, midpoint_set, support_diameter
from .transport import squared_distances, w2, w2_squared

DEFAULT_TOL = 1e-7


@dataclass(frozen=True)
class DistortionParams:
    """Curvature lower bound ``K`` and dimension bound ``N`` (``math.inf`` allowed)."""

    K: float = 0.0
    N: float = math.inf

    def __post_init__(self):
        if not (self.N > 1):
            raise ValueError(f"N must exceed 1 (or be inf), got {self.N!r}")

    @property
    def K_minus(self) -> float:
        return max(-self.K, 0.0)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.N)

    def alpha(self, l: float) -> float:
        if not self.finite:
            raise BetaUndefined("alpha is only defined for finite N")
        return math.sqrt(abs(self.K) / (self.N - 1)) * l


def _log_sinhc(x: float) -> float:
    # log(sinh(x) / x) for x >= 0, stable for tiny and huge x
    if x < 1e-3:
        return x * x / 6 - x ** 4 / 180
    if x > 20:
        return x - math.log(2.0) + math.log1p(-math.exp(-2 * x)) - math.log(x)
    return math.log(math.sinh(x) / x)


def _log_sinc(x: float) -> float:
    # log(sin(x) / x) for 0 <= x < pi
    if x < 1e-3:
        return -x * x / 6 - x ** 4 / 180
    return math.log(math.sin(x) / x)


def beta(t: float, l: float, params: DistortionParams) -> float:
    """Volume distortion coefficient beta_t at distance ``l``.

    Returns ``math.inf`` when K > 0 and the distance reaches the
    conjugate-point bound (alpha >= pi).
    """
    if not params.finite:
        raise BetaUndefined("beta_t needs a finite dimension bound N")
    if not 0 < t <= 1:
        raise ValueError(f"t must lie in (0, 1], got {t!r}")
    if l < 0:
        raise ValueError("distance must be nonnegative")
    K, N = params.K, params.N
    a = params.alpha(l)
    if K == 0 or a == 0 or t == 1:
        return 1.0
    if K > 0:
        if a >= math.pi:
            return math.inf
        return math.exp((N - 1) * (_log_sinc(t * a) - _log_sinc(a)))
    return math.exp((N - 1) * (_log_sinhc(t * a) - _log_sinhc(a)))


def c_const(params: DistortionParams, D: float) -> float:
    """Midpoint density inflation factor for geodesics of length at most D."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    if params.finite:
        return math.exp(math.sqrt((params.N - 1) * params.K_minus) * D / 2)
    return math.exp(params.K_minus * D * D / 8)


def p_const(params: DistortionParams, D: float) -> float:
    """Product of c_const over the dyadic scales D, D/2, D/4, ..., in closed form."""
    if D < 0:
        raise ValueError("D must be nonnegative")
    if params.finite:
        return math.exp(math.sqrt((params.N - 1) * params.K_minus) * D)
    return math.exp(params.K_minus * D * D / 12)


def dyadic_product_bound(params: DistortionParams, D: float, levels: int) -> float:
    """prod_{i=1}^{levels} c_const(params, 2^{1-i} D); increases to p_const as levels grow."""
    return math.prod(c_const(params, D * 2.0 ** (1 - i)) for i in range(1, levels + 1))


def _numbers(mu: ProbMeasure, C, exact):
    m = mu.space.m
    if exact:
        return [Fraction(v) for v in mu.weights], list(mu.space.m_exact), Fraction(C)
    return mu.weights, m, float(C)


def _mass(space, z, exact):
    return space.m_exact[z] if exact else float(space.m[z])


def excess_mass(mu: ProbMeasure, C):
    """L1 mass of the density above ``C`` plus the mass sitting on m-null points.

    ``C`` may also be an array of per-point thresholds.
    """
    if np.ndim(C) > 0:
        exact = mu.exact or any(isinstance(c, Fraction) for c in C)
        Cs = [Fraction(c) if exact else float(c) for c in C]
    else:
        exact = mu.exact or isinstance(C, Fraction)
        Cs = [Fraction(C) if exact else float(C)] * len(mu.weights)
    if min(Cs) < 0:
        raise ValueError("threshold must be nonnegative")
    w, m, _ = _numbers(mu, 0, exact)
    zero = Fraction(0) if exact else 0.0
    total = zero
    for wi, mi, ci in zip(w, m, Cs):
        if mi > 0:
            total += max(zero, wi - ci * mi)
        else:
            total += wi
    return total


def excess_dual(mu: ProbMeasure, C, g):
    """Dual pairing <g, mu> - C <g, m> for a test function 0 <= g <= 1."""
    exact = mu.exact or isinstance(C, Fraction) or any(isinstance(v, Fraction) for v in g)
    w, m, C = _numbers(mu, C, exact)
    if len(g) != len(w):
        raise GOutOfRange("g must have one value per point")
    if any(v < 0 or v > 1 for v in g):
        raise GOutOfRange("g must take values in [0, 1]")
    zero = Fraction(0) if exact else 0.0
    return sum(((Fraction(gi) if exact else gi) * (wi - C * mi) for gi, wi, mi in zip(g, w, m)), zero)


def optimal_test_function(mu: ProbMeasure, C) -> np.ndarray:
    """Indicator of {density > C} together with m-null points carrying mass."""
    m = mu.space.m
    return np.array([1 if (mi > 0 and wi > C * mi) or (mi == 0 and wi > 0) else 0
                     for wi, mi in zip(mu.weights, m)])


@dataclass(frozen=True, eq=False)
class TriplePlan:
    """Weights on triples ``(x0, z, x1)`` of point indices.

    ``triples`` is an ``(k, 3)`` integer array and ``weights`` the matching
    masses (float or Fraction).
    """

    space: MetricMeasureSpace
    lam: float
    eps: float
    triples: np.ndarray
    weights: np.ndarray

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    def _marginal(self, axis, weights=None):
        w = self.weights if weights is None else weights
        if self.exact or w.dtype == object:
            out = np.array([Fraction(0)] * len(self.space), dtype=object)
            for k, i in enumerate(self.triples[:, axis]):
                out[i] += w[k]
            return out
        return np.bincount(self.triples[:, axis], weights=w, minlength=len(self.space))

    def _measure(self, w):
        if w.dtype != object:
            w = np.clip(w, 0, None)
            w = w / w.sum()
        return ProbMeasure(self.space, w)

    def source(self) -> ProbMeasure:
        return self._measure(self._marginal(0))

    def intermediate(self) -> ProbMeasure:
        return self._measure(self._marginal(1))

    def target(self) -> ProbMeasure:
        return self._measure(self._marginal(2))

    def endpoint_pairs(self):
        """Yield ``(x0, x1, weight)`` with repeated pairs merged."""
        acc = {}
        for (i, _, j), w in zip(self.triples, self.weights):
            acc[(int(i), int(j))] = acc.get((int(i), int(j)), 0) + w
        for (i, j), w in sorted(acc.items()):
            yield i, j, w

    def cost(self):
        c = squared_distances(self.space, self.exact)
        zero = Fraction(0) if self.exact else 0.0
        return sum((w * c[i, j] for (i, _, j), w in zip(self.triples, self.weights)), zero)

    def restrict(self, mask) -> "TriplePlan":
        mask = np.asarray(mask, dtype=bool)
        return TriplePlan(self.space, self.lam, self.eps, self.triples[mask], self.weights[mask])


class Intermediate(NamedTuple):
    nu: ProbMeasure
    plan: TriplePlan
    excess: object


def _admissible_triples(space, mu0, mu1, lam, eps):
    triples = []
    for i in mu0.support():
        for j in mu1.support():
            for z in midpoint_set(space, int(i), int(j), lam, eps):
                triples.append((int(i), int(z), int(j)))
    return np.array(triples, dtype=int).reshape(-1, 3)


def _triple_lp(space, mu0, mu1, lam, eps, exact):
    """Feasible polytope of triple plans; returns (lp, triples, zs, n_sigma)."""
    triples = _admissible_triples(space, mu0, mu1, lam, eps)
    if len(triples) == 0:
        raise NoAdmissibleTriple("no support pair has an eps-intermediate point; increase eps")
    num = Fraction if exact else float
    W2sq = w2_squared(mu0, mu1, exact)
    c = squared_distances(space, exact)
    zs = sorted(set(triples[:, 1].tolist()))
    n_sigma = len(triples)
    prog = lpmod.LinearProgram(n_sigma + len(zs))
    rows0, rows1, by_z = {}, {}, {z: [] for z in zs}
    for k, (i, z, j) in enumerate(triples):
        rows0.setdefault(i, []).append(k)
        rows1.setdefault(j, []).append(k)
        by_z[z].append(k)
    for i in mu0.support():
        prog.add_constraint({k: 1 for k in rows0.get(int(i), [])}, "==", num(mu0.weights[i]))
    for j in mu1.support():
        prog.add_constraint({k: 1 for k in rows1.get(int(j), [])}, "==", num(mu1.weights[j]))
    cost_row = {k: c[i, j] for k, (i, _, j) in enumerate(triples) if c[i, j] != 0}
    if exact:
        if cost_row:
            prog.add_constraint(cost_row, "==", W2sq)
    elif cost_row:
        # any coupling costs at least W2^2, so this pins the cost up to rounding
        prog.add_constraint(cost_row, "<=", W2sq * (1 + 1e-9) + 1e-12)
    return prog, triples, zs, by_z, n_sigma


def _check_lam(lam):
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam!r}")


def _resolve(mu0, mu1, eps, exact):
    if mu0.space is not mu1.space:
        raise InvalidMeasure("measures live on different spaces")
    if eps is None:
        eps = mu0.space.default_epsilon()
    if exact is None:
        exact = mu0.exact or mu1.exact
    return eps, exact


def intermediate_min_excess(mu0: ProbMeasure, mu1: ProbMeasure, lam: float, C, eps: float | None = None,
                            exact: bool | None = None, spread: bool = True) -> Intermediate:
    """Minimize the excess mass above ``C`` over eps-approximate lam-intermediate measures.

    Returns the minimizing intermediate measure, the triple plan realizing
    it, and the minimum value. With ``spread`` a second solve keeps the
    excess at its minimum and picks, among those plans, one whose largest
    density ratio rho(z) / C(z) is smallest; plain vertex solutions tend to
    stack mass exactly at the threshold.
    """
    _check_lam(lam)
    eps, exact = _resolve(mu0, mu1, eps, exact)
    space = mu0.space
    num = Fraction if exact else float
    per_point = np.ndim(C) > 0
    Cz = [num(c) for c in C] if per_point else [num(C)] * len(space)
    if min(Cz) < 0:
        raise ValueError("threshold must be nonnegative")
    prog, triples, zs, by_z, n_sigma = _triple_lp(space, mu0, mu1, lam, eps, exact)
    for q, z in enumerate(zs):
        e = n_sigma + q
        prog.objective[e] = 1
        row = {k: 1 for k in by_z[z]}
        row[e] = -1
        prog.add_constraint(row, "<=", Cz[z] * _mass(space, z, exact))
    sol = lpmod.solve(prog, exact=exact)
    if sol.status == lpmod.INFEASIBLE:
        raise NoAdmissibleTriple("optimal couplings cannot be routed through eps-intermediate points; "
                                 "increase eps")
    if not sol.optimal:
        raise lpmod.NumericalBreakdown(f"intermediate LP returned {sol.status}")
    if spread:
        sol = _spread(prog, sol, space, zs, by_z, n_sigma, Cz, num, exact) or sol
    weights = sol.primal[:n_sigma]
    keep = np.array([w > 0 for w in weights], dtype=bool)
    plan = TriplePlan(space, lam, eps, triples[keep], weights[keep])
    nu = plan.intermediate()
    return Intermediate(nu, plan, excess_mass(nu, Cz if per_point else Cz[0]))


def _spread(prog, sol, space, zs, by_z, n_sigma, Cz, num, exact):
    """Re-solve with the excess pinned at its optimum, minimizing max rho / C."""
    caps = {z: Cz[z] * _mass(space, z, exact) for z in zs}
    if not any(caps[z] > 0 for z in zs):
        return None
    best = sol.objective_value
    slack = 0 if exact else DEFAULT_TOL * 1e-3
    prog.objective = [0] * prog.n_vars
    prog.add_constraint({n_sigma + q: 1 for q in range(len(zs))}, "<=", best + slack)
    tau = prog.add_variable(cost=1)
    for q, z in enumerate(zs):
        if caps[z] > 0:
            row = {k: 1 for k in by_z[z]}
            row[n_sigma + q] = -1
            row[tau] = -caps[z]
            prog.add_constraint(row, "<=", 0)
    second = lpmod.solve(prog, exact=exact)
    return second if second.optimal else None


def min_sup_density(mu0: ProbMeasure, mu1: ProbMeasure, lam: float, eps: float | None = None,
                    exact: bool | None = None):
    """Smallest achievable sup-density of an intermediate measure, as one LP.

    Equal to the least threshold with zero minimal excess; infinite when
    mass is forced onto m-null points.
    """
    _check_lam(lam)
    eps, exact = _resolve(mu0, mu1, eps, exact)
    space = mu0.space
    num = Fraction if exact else float
    prog, triples, zs, by_z, n_sigma = _triple_lp(space, mu0, mu1, lam, eps, exact)
    # reuse the first slack slot as the threshold variable
    tvar = n_sigma
    prog.objective[tvar] = 1
    for q, z in enumerate(zs):
        row = {k: 1 for k in by_z[z]}
        if space.m[z] > 0:
            row[tvar] = -_mass(space, z, exact)
            prog.add_constraint(row, "<=", 0)
        else:
            prog.add_constraint(row, "==", 0)
    for q in range(1, len(zs)):
        prog.upper[n_sigma + q] = 0
    sol = lpmod.solve(prog, exact=exact)
    if sol.status == lpmod.INFEASIBLE:
        return math.inf
    return sol.primal[tvar]


def min_feasible_threshold(mu0: ProbMeasure, mu1: ProbMeasure, lam: float = 0.5, eps: float | None = None,
                           tol: float = DEFAULT_TOL, ctol: float = 1e-6) -> float:
    """Least threshold C (to relative width ``ctol``) with minimal excess <= ``tol``, by bisection.

    Relies on C -> min excess being nonincreasing. Returns ``inf`` if the
    excess cannot be driven below ``tol`` at any threshold.
    """
    space = mu0.space
    pos = space.m[space.m > 0]
    hi = 1.0 / pos.min()
    f = lambda C: float(intermediate_min_excess(mu0, mu1, lam, C, eps, exact=False).excess)
    if f(hi) > tol:
        return math.inf
    lo = 0.0
    if f(lo) <= tol:
        return 0.0
    while hi - lo > ctol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


def _membership_gap(mu0, mu1, nu, lam):
    """How far nu is from the lam-intermediate distance identities (positive = excess)."""
    W = w2(mu0, mu1)
    return max(w2(mu0, nu) - lam * W, w2(nu, mu1) - (1 - lam) * W)


def intermediate_gap(mu0: ProbMeasure, mu1: ProbMeasure, nu: ProbMeasure, lam: float) -> float:
    """max(W2(mu0,nu) - lam W, W2(nu,mu1) - (1-lam) W) with W = W2(mu0,mu1); <= 0 iff exact membership."""
    return _membership_gap(mu0, mu1, nu, lam)


def plan_surgery(plan: TriplePlan, f, nu_sub: ProbMeasure, tol: float = DEFAULT_TOL) -> ProbMeasure:
    """Replace the f-weighted part of a plan's intermediate measure by ``c * nu_sub``.

    ``f`` gives a value in [0, 1] per triple and ``c`` is the f-weighted
    mass. The result stays an (eps-approximate) intermediate measure of the
    plan's endpoints whenever ``nu_sub`` is one for the f-weighted
    endpoint marginals; both memberships are checked.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (len(plan.weights),) or np.any(f < 0) or np.any(f > 1):
        raise ValueError("f must assign a value in [0, 1] to every triple")
    w = np.asarray(plan.weights, dtype=float)
    c = float(f @ w)
    if not 0 < c < 1:
        raise CNotInOpenInterval(f"f-weighted mass {c!r} is not in (0, 1)")
    fw = f * w
    sub0 = plan._measure(plan._marginal(0, fw))
    sub1 = plan._measure(plan._marginal(2, fw))
    slack = plan.eps + tol
    if _membership_gap(sub0, sub1, nu_sub, plan.lam) > slack:
        raise BlendNotIntermediate("nu_sub is not an intermediate measure of the f-weighted endpoints")
    out_w = plan._marginal(1, w - fw) + c * np.asarray(nu_sub.weights, dtype=float)
    out = ProbMeasure(plan.space, out_w / out_w.sum())
    gap = _membership_gap(plan.source().as_float(), plan.target().as_float(), out, plan.lam)
    if gap > slack:
        raise BlendNotIntermediate(f"blended measure misses the intermediate set by {gap:.3g}")
    return out


@dataclass
class DyadicGeodesic:
    """Measures at dyadic times ``k / 2**depth`` with the plans that produced them."""

    depth: int
    times: list
    measures: list
    plans: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    excess: dict = field(default_factory=dict)
    levels: list = field(default_factory=list)
    params: DistortionParams = DistortionParams()
    eps: float = 0.0

    @property
    def space(self):
        return self.measures[0].space

    def at(self, t) -> ProbMeasure:
        return self.measures[self.times.index(Fraction(t))]

    def sup_densities(self) -> list:
        return [float(mu.sup_density()) for mu in self.measures]

    @property
    def endpoint_density(self) -> float:
        return max(float(self.measures[0].sup_density()), float(self.measures[-1].sup_density()))

    @property
    def exceeded(self) -> list:
        """Times whose midpoint LP could not reach zero excess at the prescribed threshold."""
        return [t for t in self.times if self.excess.get(t, 0) > self.levels[0]["tol"]] if self.levels else []

    def top_coupling(self):
        """(x0, x1, weight) of the coupling of the endpoints recorded by the t=1/2 plan."""
        plan = self.plans.get(Fraction(1, 2))
        if plan is None:
            raise ValueError("depth-0 geodesic has no recorded plan")
        return list(plan.endpoint_pairs())

    def density_rows(self):
        """CSV-ready rows ``(t, point_id, rho, m_weight)``."""
        rows = []
        for t, mu in zip(self.times, self.measures):
            rho = mu.density()
            for i in range(len(self.space)):
                rows.append((float(t), self.space.points[i], float(rho[i]), float(self.space.m[i])))
        return rows

    def report(self) -> dict:
        return {
            "depth": self.depth,
            "K": self.params.K,
            "N": self.params.N if self.params.finite else "inf",
            "eps": self.eps,
            "endpoint_sup_density": self.endpoint_density,
            "levels": self.levels,
            "times": [float(t) for t in self.times],
            "sup_density": self.sup_densities(),
            "threshold_exceeded_at": [float(t) for t in self.exceeded],
        }


def _identity_plan(mu: ProbMeasure, lam, eps) -> TriplePlan:
    sup = mu.support()
    return TriplePlan(mu.space, lam, eps, np.stack([sup, sup, sup], axis=1), mu.weights[sup].copy())


def dyadic_geodesic(mu0: ProbMeasure, mu1: ProbMeasure, depth: int = 4, eps: float | None = None,
                    params: DistortionParams = DistortionParams(), tol: float = DEFAULT_TOL,
                    exact: bool | None = None, on_exceed: str = "record") -> DyadicGeodesic:
    """Insert minimum-excess midpoints level by level.

    Each new midpoint between neighbours a, b at level n uses the threshold
    ``c_const(params, D / 2**n) * max(sup rho_a, sup rho_b)`` where D is the
    diameter of the union of the endpoint supports. ``on_exceed="raise"``
    turns a positive minimal excess into :class:`ThresholdExceeded`.
    """
    eps, exact = _resolve(mu0, mu1, eps, exact)
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if mu0.singular_mass() > 0 or mu1.singular_mass() > 0:
        raise InvalidMeasure("endpoint measures must have no mass on m-null points")
    if exact:
        tol = 0
    D = support_diameter(mu0, mu1)
    M = max(float(mu0.sup_density()), float(mu1.sup_density()))
    times = [Fraction(0), Fraction(1)]
    measures = [mu0, mu1]
    geo = DyadicGeodesic(depth, times, measures, params=params, eps=eps)
    for n in range(depth):
        scale = c_const(params, D / 2 ** n)

        def solve_segment(k):
            a, b = measures[k], measures[k + 1]
            C = scale * max(float(a.sup_density()), float(b.sup_density()))
            if exact:
                C = Fraction(C) if scale != 1 else max(a.sup_density(), b.sup_density())
            if np.array_equal(a.weights, b.weights):
                return C, Intermediate(a, _identity_plan(a, 0.5, eps), excess_mass(a, C))
            return C, intermediate_min_excess(a, b, 0.5, C, eps, exact)

        results = pmap(solve_segment, range(len(measures) - 1))
        new_times, new_measures = [times[0]], [measures[0]]
        worst_excess = 0.0
        for k, (C, res) in enumerate(results):
            t = (times[k] + times[k + 1]) / 2
            if float(res.excess) > tol and on_exceed == "raise":
                raise ThresholdExceeded(f"minimal excess {float(res.excess):.3g} at t={t} exceeds tol")
            geo.plans[t] = res.plan
            geo.thresholds[t] = float(C)
            geo.excess[t] = res.excess
            worst_excess = max(worst_excess, float(res.excess))
            new_times += [t, times[k + 1]]
            new_measures += [res.nu, measures[k + 1]]
        times, measures = new_times, new_measures
        level_sup = max(float(mu.sup_density()) for mu in measures[1::2])
        bound = dyadic_product_bound(params, D, n + 1) * M
        geo.levels.append({"level": n + 1, "sup_density": level_sup, "bound": bound,
                           "margin": bound - level_sup, "max_excess": worst_excess, "tol": tol})
    geo.times, geo.measures = times, measures
    return geo
