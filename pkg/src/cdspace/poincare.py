"""Local (1,1)-Poincare inequalities on finite spaces and the median-split construction behind them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .errors import EmptyBall, UpperGradientViolated
from .interpolation import DEFAULT_TOL, DistortionParams, dyadic_geodesic, p_const
from .space import MetricMeasureSpace, ProbMeasure, ball

MODES = ("averaged-main", "unaveraged-main2")


def poincare_constant_main(N: float, K: float, r: float) -> float:
    """Dimensionless constant of the doubling-based weak local Poincare inequality."""
    if not 1 < N < math.inf:
        raise ValueError("N must lie in (1, inf)")
    if not r > 0:
        raise ValueError("r must be positive")
    km = max(-K, 0.0)
    return (2 ** (N + 3) * math.exp(math.sqrt((N - 1) * km) * 2 * r)
            * math.cosh(2 * r * math.sqrt(km / (N - 1))) ** (N - 1))


def poincare_constant_main2(K: float, r: float) -> float:
    """Full constant 8 r exp(K^- r^2 / 3) of the dimension-free local inequality."""
    if not r > 0:
        raise ValueError("r must be positive")
    return 8 * r * math.exp(max(-K, 0.0) * r * r / 3)


def general_constant(params: DistortionParams, r: float) -> float:
    """8 r C(2r), with C the dyadic density-bound constant."""
    return 8 * r * p_const(params, 2 * r)


def space_edges(space: MetricMeasureSpace):
    """Graph edges, or for matrix-built spaces the pairs with no point strictly between them."""
    if space.is_graph:
        return [(i, j, float(w)) for i, j, w in space.edges]
    d = space.dist
    n = len(space)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            via = d[i, :] + d[:, j]
            via[[i, j]] = math.inf
            if not np.any(via <= d[i, j] * (1 + 1e-12)):
                out.append((i, j, float(d[i, j])))
    return out


@dataclass(frozen=True)
class FunctionPair:
    """A function ``u`` with a candidate upper gradient ``g`` (trapezoid rule on every edge)."""

    space: MetricMeasureSpace
    u: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        n = len(self.space)
        u = np.asarray(self.u, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if u.shape != (n,) or g.shape != (n,):
            raise ValueError("u and g need one value per point")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g))):
            raise ValueError("u and g must be finite")
        if np.any(g < 0):
            raise UpperGradientViolated("g must be nonnegative")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "g", g)

    def violations(self, tol: float = 1e-9):
        """Edges ``(i, j, excess)`` where |u(i) - u(j)| > l (g(i) + g(j)) / 2."""
        out = []
        for i, j, w in space_edges(self.space):
            gap = abs(self.u[i] - self.u[j]) - w * (self.g[i] + self.g[j]) / 2
            if gap > tol * max(1.0, abs(self.u[i]), abs(self.u[j])):
                out.append((i, j, gap))
        return out

    def check(self, tol: float = 1e-9) -> None:
        bad = self.violations(tol)
        if bad:
            i, j, gap = max(bad, key=lambda v: v[2])
            p = self.space.points
            raise UpperGradientViolated(f"edge ({p[i]}, {p[j]}) misses the upper-gradient bound by {gap:.3g}")


def minimal_upper_gradient(space: MetricMeasureSpace, u, method: str = "slope") -> np.ndarray:
    """A pointwise-minimal-in-spirit upper gradient of ``u``.

    ``slope`` takes at each point the largest slope |du| / l of its edges;
    ``lp`` minimizes the integral of g against m subject to the edge
    conditions (sparser, but not unique).
    """
    u = np.asarray(u, dtype=float)
    edges = space_edges(space)
    n = len(space)
    if method == "slope":
        g = np.zeros(n)
        for i, j, w in edges:
            s = abs(u[i] - u[j]) / w
            g[i] = max(g[i], s)
            g[j] = max(g[j], s)
        return g
    if method == "lp":
        # a tiny floor keeps points of zero measure from being left free
        cost = [float(m) + 1e-9 for m in space.m]
        prog = lpmod.LinearProgram(n, cost)
        for i, j, w in edges:
            need = 2 * abs(u[i] - u[j]) / w
            if need > 0:
                prog.add_constraint({i: 1, j: 1}, ">=", need)
        sol = lpmod.solve(prog)
        return np.maximum(np.asarray(sol.primal, dtype=float), 0.0)
    raise ValueError(f"unknown method {method!r}")


def median(u: np.ndarray, m: np.ndarray) -> float:
    """inf{a : m(u > a) <= m(total) / 2} for the finite measure ``m``."""
    total = float(m.sum())
    order = np.argsort(u, kind="stable")
    vals, wts = u[order], m[order]
    # m(u > vals[k]) is the mass strictly above the k-th sorted value
    for k, a in enumerate(vals):
        if float(wts[vals > a].sum()) <= total / 2 * (1 + 1e-12):
            return float(a)
    return float(vals[-1])


@dataclass
class PoincareReport:
    center: str
    r: float
    mode: str
    lhs: float
    rhs_integral: float
    theoretical_constant: float
    ratio: float | None
    margin: float
    general_constant: float
    general_margin: float
    density_bound_certified: bool
    outcome: str
    chain: dict = field(default_factory=dict)
    tol: float = DEFAULT_TOL

    @property
    def passed(self) -> bool:
        return self.outcome != "theorem violated" and self.margin >= -self.tol

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "r": self.r,
            "mode": self.mode,
            "lhs": self.lhs,
            "rhs_integral": self.rhs_integral,
            "theoretical_constant": self.theoretical_constant,
            "ratio": self.ratio,
            "margin": self.margin,
            "general_constant": self.general_constant,
            "general_margin": self.general_margin,
            "density_bound_certified": self.density_bound_certified,
            "outcome": self.outcome,
            "chain": self.chain,
        }


def _restricted(space, mask):
    w = np.where(mask, space.m, 0.0)
    return ProbMeasure(space, w / w.sum())


def verify_poincare(space: MetricMeasureSpace, center, r: float, u, g=None, mode: str = "unaveraged-main2",
                    params: DistortionParams = DistortionParams(), depth: int = 3, eps: float | None = None,
                    tol: float = DEFAULT_TOL) -> PoincareReport:
    """Check the local Poincare inequality on B(center, r) and run the median-split construction.

    The construction couples the normalized restrictions of m to B+ = {u >= M}
    and B- = {u <= M} by a dyadic geodesic and records every step of the
    estimate lhs <= 2 int_B |u - M| <= ... <= 8 r C(2r) int g. The right side
    is integrated over B(center, 2r + 2 eps) since discrete midpoints may sit
    up to eps outside the continuum bound. The outcome is "holds" when the
    general inequality has margin >= -tol, otherwise "hypothesis unmet" if
    the interpolants broke the density bound C(2r) * max endpoint density,
    and "theorem violated" only if the bound held and the inequality failed.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not r > 0:
        raise ValueError("r must be positive")
    c = space.index(center)
    u = np.asarray(u, dtype=float)
    if g is None:
        g = minimal_upper_gradient(space, u)
    pair = FunctionPair(space, u, g)
    pair.check()
    g = pair.g
    if eps is None:
        eps = space.default_epsilon()
    m = space.m
    B = np.zeros(len(space), dtype=bool)
    B[ball(space, c, r)] = True
    mB = float(m[B].sum())
    if not mB > 0:
        raise EmptyBall(f"B({space.points[c]}, {r}) has zero measure")
    B2 = np.zeros_like(B)
    B2[ball(space, c, 2 * r)] = True
    B2e = np.zeros_like(B)
    B2e[ball(space, c, 2 * r + 2 * eps)] = True

    uB = float(np.dot(u[B], m[B]) / mB)
    lhs = float(np.dot(np.abs(u[B] - uB), m[B]))
    rhs2 = float(np.dot(g[B2], m[B2]))
    rhs_inflated = float(np.dot(g[B2e], m[B2e]))

    # median split
    ub, mb = u[B], m[B]
    M = median(ub, mb)
    plus = B & (u >= M)
    minus = B & (u <= M)
    double = float(np.abs(ub[:, None] - ub[None, :]) @ mb @ mb) / mB
    two_median = 2 * float(np.dot(np.abs(ub - M), mb))
    mu_plus, mu_minus = _restricted(space, plus), _restricted(space, minus)
    geo = dyadic_geodesic(mu_plus, mu_minus, depth=depth, eps=eps, params=params, tol=tol)
    pairs = geo.top_coupling() if depth > 0 else [(i, i, w) for i, w in enumerate(mu_plus.weights) if w > 0]
    coupled_osc = float(sum(float(w) * abs(u[i] - u[j]) for i, j, w in pairs))
    # trapezoid rule in t over the dyadic interpolants
    times = np.array([float(t) for t in geo.times])
    g_along = np.array([float(np.dot(np.asarray(mu.weights, dtype=float), g)) for mu in geo.measures])
    g_path = float(np.trapezoid(g_along, times)) if len(times) > 1 else float(g_along[0])
    outside = max(float(np.asarray(mu.weights, dtype=float)[~B2e].sum()) for mu in geo.measures)

    Cgen = p_const(params, 2 * r)
    endpoint = geo.endpoint_density
    sup_rho = max(geo.sup_densities())
    certified = bool(sup_rho <= Cgen * endpoint * (1 + tol) + tol) and outside <= tol
    gconst = 8 * r * Cgen
    gmargin = gconst * rhs_inflated - lhs

    if mode == "averaged-main":
        if not params.finite:
            raise ValueError("averaged-main mode needs finite N")
        const = poincare_constant_main(params.N, params.K, r)
        avg_l = lhs / mB
        avg_r = rhs2 / float(m[B2].sum())
        margin = const * r * avg_r - avg_l
        ratio = avg_l / (r * avg_r) if avg_r > 0 else None
    else:
        const = gconst
        margin = gmargin
        ratio = lhs / rhs_inflated if rhs_inflated > 0 else None

    if gmargin >= -tol:
        outcome = "holds"
    elif not certified:
        outcome = "hypothesis unmet"
    else:
        outcome = "theorem violated"

    chain = {
        "mean": uB,
        "median": M,
        "m_ball": mB,
        "m_plus": float(m[plus].sum()),
        "m_minus": float(m[minus].sum()),
        "double_integral": double,
        "twice_median_deviation": two_median,
        "coupled_oscillation": coupled_osc,
        "transport_bound": 2 * mB * coupled_osc,
        "path_integral_g": g_path,
        "upper_gradient_bound": 4 * r * mB * g_path,
        "max_interpolant_density": sup_rho,
        "endpoint_density": endpoint,
        "density_bound": Cgen * endpoint,
        "density_constant": Cgen,
        "mass_outside_inflated_ball": outside,
        "rhs_ball_2r": rhs2,
        "rhs_inflated": rhs_inflated,
        "inflation": 2 * eps,
        "main2_constant": poincare_constant_main2(params.K, r),
        "main_constant": poincare_constant_main(params.N, params.K, r) if params.finite else None,
        "geodesic": geo.report(),
    }
    return PoincareReport(space.points[c], r, mode, lhs, rhs_inflated if mode != "averaged-main" else rhs2,
                          const, ratio, margin, gconst, gmargin, certified, outcome, chain, tol)
