"""Entropy functionals and empirical checks of synthetic Ricci curvature bounds.

All verifiers test one constructed transport plan (the minimum-excess
dyadic geodesic). A negative margin therefore means "no certificate
found along this plan", never a proof that the space fails the condition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BetaUndefined, FNotConvex, FZeroNotZero, InvalidMeasure, KPositiveRadiusViolated
from .interpolation import (DEFAULT_TOL, DistortionParams, TriplePlan, beta, c_const, dyadic_geodesic,
                            intermediate_min_excess)
from .space import MetricMeasureSpace, ProbMeasure, ball, support_diameter
from .transport import w2_squared


def renyi_entropy(mu: ProbMeasure, N: float) -> float:
    """-sum rho^(1-1/N) m over m-positive points; singular mass contributes nothing."""
    if not 1 < N < math.inf:
        raise ValueError("Renyi entropy needs N in (1, inf)")
    rho = np.asarray(mu.density(), dtype=float)
    m = mu.space.m
    pos = (m > 0) & (rho > 0)
    return -float(np.sum(rho[pos] ** (1 - 1 / N) * m[pos]))


def shannon_entropy(mu: ProbMeasure) -> float:
    """sum rho log rho m, or +inf when mass sits on m-null points."""
    if mu.singular_mass() > 0:
        return math.inf
    rho = np.asarray(mu.density(), dtype=float)
    m = mu.space.m
    pos = (m > 0) & (rho > 0)
    return float(np.sum(rho[pos] * np.log(rho[pos]) * m[pos]))


def _pairs(sigma):
    if hasattr(sigma, "pairs"):
        return list(sigma.pairs())
    return list(sigma)


def cd_finite_rhs(space: MetricMeasureSpace, sigma, rho0, rho1, t: float, params: DistortionParams) -> float:
    """Right-hand side of the CD(K,N) entropy inequality along a coupling.

    ``sigma`` is a :class:`~cdspace.transport.Coupling` or an iterable of
    ``(x0, x1, weight)``. Returns ``-inf`` when some coupled pair lies beyond
    the conjugate radius (infinite distortion).
    """
    if not params.finite:
        raise BetaUndefined("the finite-dimensional CD inequality needs N < inf")
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    N = params.N
    total = 0.0
    for i, j, w in _pairs(sigma):
        w = float(w)
        l = float(space.dist[i, j])
        term = 0.0
        if t < 1:
            b = beta(1 - t, l, params)
            if math.isinf(b):
                return -math.inf
            term += (1 - t) * (b / float(rho0[i])) ** (1 / N)
        if t > 0:
            b = beta(t, l, params)
            if math.isinf(b):
                return -math.inf
            term += t * (b / float(rho1[j])) ** (1 / N)
        total += w * term
    return -total


@dataclass
class CdReport:
    """Per-(pair, t) entropy records along the constructed geodesics."""

    params: DistortionParams
    records: list = field(default_factory=list)
    tol: float = DEFAULT_TOL
    geodesics: list = field(default_factory=list, repr=False)

    @property
    def worst_margin(self) -> float:
        return min((r["margin"] for r in self.records), default=math.inf)

    @property
    def sharpest_K(self) -> float | None:
        ks = [r["K_star"] for r in self.records if r.get("K_star") is not None]
        return min(ks) if ks else None

    @property
    def certified(self) -> bool:
        return self.worst_margin >= -self.tol

    def to_dict(self) -> dict:
        return {
            "K": self.params.K,
            "N": self.params.N if self.params.finite else "inf",
            "worst_margin": self.worst_margin,
            "sharpest_K": self.sharpest_K,
            "certified": self.certified,
            "records": self.records,
        }


def cd_margins(geo, params: DistortionParams, pair_index: int = 0) -> list:
    """Entropy-inequality records at every interior dyadic time of ``geo``."""
    mu0, mu1 = geo.measures[0], geo.measures[-1]
    W2sq = float(w2_squared(mu0, mu1))
    out = []
    if params.finite:
        rho0, rho1 = mu0.density(), mu1.density()
        sigma = geo.top_coupling() if geo.depth > 0 else []
    else:
        E0, E1 = shannon_entropy(mu0), shannon_entropy(mu1)
    for t, mu in zip(geo.times[1:-1], geo.measures[1:-1]):
        tf = float(t)
        rec = {"pair": pair_index, "t": tf}
        if params.finite:
            lhs = renyi_entropy(mu, params.N)
            rhs = cd_finite_rhs(mu.space, sigma, rho0, rho1, tf, params)
        else:
            lhs = shannon_entropy(mu)
            chord = (1 - tf) * E0 + tf * E1
            rhs = chord - params.K / 2 * tf * (1 - tf) * W2sq
            if W2sq > 0:
                rec["K_star"] = 2 * (chord - lhs) / (tf * (1 - tf) * W2sq)
        rec.update(lhs=lhs, rhs=rhs, margin=rhs - lhs)
        out.append(rec)
    return out


def check_cd(pairs: Sequence[tuple], params: DistortionParams, depth: int = 4, eps: float | None = None,
             tol: float = DEFAULT_TOL) -> CdReport:
    """Evaluate the CD(K,N) (or CD(K,inf)) inequality along minimum-excess dyadic geodesics.

    For N = inf each record also carries ``K_star``, the largest K for which
    that record's inequality would hold; ``CdReport.sharpest_K`` is their
    minimum.
    """
    report = CdReport(params, tol=tol)
    for p, (mu0, mu1) in enumerate(pairs):
        if mu0.singular_mass() > 0 or mu1.singular_mass() > 0:
            raise InvalidMeasure("check_cd needs endpoint measures without singular mass")
        geo = dyadic_geodesic(mu0, mu1, depth=depth, eps=eps, params=params)
        report.geodesics.append(geo)
        report.records.extend(cd_margins(geo, params, p))
    return report


def spreading_check(mu0: ProbMeasure, mu1: ProbMeasure, nu_mid: ProbMeasure, params: DistortionParams,
                    D: float | None = None) -> float:
    """m(support of the midpoint density) minus 1 / (C(N,K,D) * max endpoint sup-density)."""
    if D is None:
        D = support_diameter(mu0, mu1)
    M = max(float(mu0.sup_density()), float(mu1.sup_density()))
    rho = np.asarray(nu_mid.density(), dtype=float)
    m_supp = float(nu_mid.space.m[rho > 0].sum())
    return m_supp - 1.0 / (c_const(params, D) * M)


def doubling_constant(params: DistortionParams, L: float) -> float:
    """2^N cosh(L sqrt(K^-/(N-1)))^(N-1)."""
    if not params.finite:
        raise BetaUndefined("the doubling constant needs N < inf")
    N = params.N
    return 2 ** N * math.cosh(L * math.sqrt(params.K_minus / (N - 1))) ** (N - 1)


def doubling_report(space: MetricMeasureSpace, params: DistortionParams, L: float | None = None,
                    min_radius: float = 0.0) -> tuple[float, float]:
    """(theoretical doubling constant, empirical sup of m(B(x,2r)) / m(B(x,r))) over r in (min_radius, L/2].

    Ball masses are piecewise constant in r, so the sup is taken over one
    radius inside each interval between consecutive breakpoints d and d/2.
    """
    if L is None:
        L = float(space.dist.max())
    theory = doubling_constant(params, L)
    d = np.unique(space.dist)
    breaks = np.unique(np.concatenate([d, d / 2, [min_radius, L / 2]]))
    breaks = breaks[(breaks >= min_radius) & (breaks <= L / 2)]
    radii = list((breaks[:-1] + breaks[1:]) / 2)
    if len(breaks):
        radii.append(breaks[-1])
    radii = [r for r in radii if r > 0]
    worst = 1.0
    for x in range(len(space)):
        for r in radii:
            small = space.m[ball(space, x, r)].sum()
            if small > 0:
                worst = max(worst, space.m[ball(space, x, 2 * r)].sum() / small)
    return theory, float(worst)


def convex_functional(mu: ProbMeasure, F: Callable[[float], float], F_inf: float) -> float:
    """sum F(rho) m + F'(inf) * singular mass, with 0 * inf taken as 0."""
    if abs(F(0.0)) > 1e-12:
        raise FZeroNotZero(f"F(0) = {F(0.0)!r}")
    rho = np.asarray(mu.density(), dtype=float)
    m = mu.space.m
    pos = m > 0
    value = float(sum(F(float(r)) * mi for r, mi in zip(rho[pos], m[pos])))
    s = float(mu.singular_mass())
    if s > 0:
        value += F_inf * s
    return value


def _check_convex(F, upper: float, samples: int = 64):
    xs = np.linspace(0.0, upper, samples)
    rng = np.random.default_rng(0)
    for _ in range(samples):
        a, b = rng.choice(xs, 2)
        lam = rng.uniform()
        mid = F(lam * a + (1 - lam) * b)
        chord = lam * F(a) + (1 - lam) * F(b)
        if mid > chord + 1e-9 * (1 + abs(chord)):
            raise FNotConvex(f"F fails convexity between {a!r} and {b!r}")


@dataclass
class ConvexityReport:
    records: list
    density_bound_holds: bool
    max_density_ratio: float
    tol: float

    @property
    def worst_margin(self) -> float:
        return min((r["margin"] for r in self.records), default=math.inf)

    @property
    def convex(self) -> bool:
        return self.worst_margin >= -self.tol

    def to_dict(self) -> dict:
        return {"worst_margin": self.worst_margin, "convex": self.convex,
                "density_bound_holds": self.density_bound_holds,
                "max_density_ratio": self.max_density_ratio, "records": self.records}


def convexity_check(pairs: Sequence[tuple], F: Callable[[float], float], F_inf: float, depth: int = 4,
                    eps: float | None = None, tol: float = DEFAULT_TOL, geodesics=None) -> ConvexityReport:
    """Displacement convexity of the functional of ``F`` along minimum-excess geodesics.

    The geodesics are built with K = 0, N = inf so they coincide with the
    ones used by :func:`check_cd` in that case (pass ``geodesics`` to reuse
    them). When convexity holds within ``tol`` the interpolants' sup-density
    is compared with the largest endpoint sup-density.
    """
    if abs(F(0.0)) > 1e-12:
        raise FZeroNotZero(f"F(0) = {F(0.0)!r}")
    records, ratios = [], []
    for p, (mu0, mu1) in enumerate(pairs):
        geo = geodesics[p] if geodesics is not None else dyadic_geodesic(mu0, mu1, depth=depth, eps=eps)
        M = geo.endpoint_density
        _check_convex(F, 2 * max(max(geo.sup_densities()), 1.0))
        F0, F1 = convex_functional(mu0, F, F_inf), convex_functional(mu1, F, F_inf)
        for t, mu in zip(geo.times[1:-1], geo.measures[1:-1]):
            tf = float(t)
            val = convex_functional(mu, F, F_inf)
            rhs = (1 - tf) * F0 + tf * F1
            records.append({"pair": p, "t": tf, "lhs": val, "rhs": rhs, "margin": rhs - val,
                            "sup_density": float(mu.sup_density())})
        ratios.append(max(geo.sup_densities()) / M)
    report = ConvexityReport(records, False, max(ratios, default=1.0), tol)
    report.density_bound_holds = report.convex and report.max_density_ratio <= 1 + tol
    return report


# --- measure contraction -------------------------------------------------------------


def _mcp_params(params: DistortionParams):
    if not params.finite:
        raise BetaUndefined("MCP(K,N) needs a finite N")


def _check_radius(space, x, A, params):
    if params.K > 0:
        R = math.pi * math.sqrt((params.N - 1) / params.K)
        if np.any(space.dist[x, A] >= R):
            raise KPositiveRadiusViolated(f"A must lie inside B(x, {R:.6g}) when K > 0")


@dataclass
class McpFamily:
    """Plans from a point ``x`` to the normalized restriction of m to ``A``, one per time.

    ``plans[t]`` holds triples ``(x, z, y)``: mass at ``z`` at time ``t``
    that ends at ``y`` in ``A``.
    """

    x: int
    A: np.ndarray
    plans: dict
    eps: float


@dataclass
class McpReport:
    records: list
    tol: float

    @property
    def min_margin(self) -> float:
        return min((r["min_margin"] for r in self.records), default=math.inf)

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tol

    def to_dict(self) -> dict:
        return {"min_margin": self.min_margin, "passed": self.passed, "records": self.records}


def mcp_check(space: MetricMeasureSpace, x: int, A, family, params: DistortionParams,
              tol: float = DEFAULT_TOL) -> McpReport:
    """Per-point margins m(z) - sum_{triples through z at t} t^N beta_t(d(x,y)) m(A) weight.

    ``family`` is an :class:`McpFamily` or a mapping ``t -> TriplePlan``.
    """
    _mcp_params(params)
    A = np.asarray(sorted(set(int(a) for a in A)))
    mA = float(space.m[A].sum())
    if not mA > 0:
        raise InvalidMeasure("A must have positive reference measure")
    _check_radius(space, x, A, params)
    plans = family.plans if isinstance(family, McpFamily) else family
    records = []
    for t in sorted(plans):
        tf = float(t)
        plan = plans[t]
        load = np.zeros(len(space))
        for (x0, z, y), w in zip(plan.triples, plan.weights):
            b = beta(tf, float(space.dist[x, y]), params)
            load[z] += tf ** params.N * b * mA * float(w)
        margins = space.m - load
        z = int(np.argmin(margins))
        records.append({"t": tf, "min_margin": float(margins[z]), "argmin": space.points[z]})
    return McpReport(records, tol)


def _annuli(dists: np.ndarray, ratio: float):
    """Group positive distances into bins [ratio^(k-1), ratio^k); returns {k: mask}."""
    ks = np.floor(np.log(dists) / math.log(ratio)).astype(int) + 1
    return {int(k): ks == k for k in np.unique(ks)}


def mcp_geodesic(space: MetricMeasureSpace, x: int, A, params: DistortionParams, depth: int = 3,
                 eps: float | None = None, ratio: float = 2.0, chain: bool = False) -> McpFamily:
    """Contract the normalized restriction of m to ``A`` toward ``x`` at all times k / 2^depth.

    Times are processed from 1 downwards. The measure at t comes from the
    endpoint measure (or, with ``chain``, from the one at the next larger
    time s, using lam = t/s) by a minimum-excess intermediate solve toward
    the Dirac mass, done separately on each annulus
    ``ratio^(k-1) <= d(x, y) < ratio^k`` of endpoints. An annulus's density
    threshold is 1/(t^N min beta_t m(A_k)) scaled by the share of each
    point's contraction budget not yet used by the other annuli.
    """
    _mcp_params(params)
    if eps is None:
        # half-edge windows pin each endpoint to a single intermediate point and
        # overload some of them; a full edge leaves room to spread
        eps = space.max_edge if space.is_graph else 2 * space.default_epsilon()
    A = np.asarray(sorted(set(int(a) for a in A)))
    mA = float(space.m[A].sum())
    if not mA > 0:
        raise InvalidMeasure("A must have positive reference measure")
    _check_radius(space, x, A, params)
    N = params.N
    dx = space.dist[x]
    base = A[dx[A] == 0]
    rest = A[dx[A] > 0]
    groups = [(k, rest[mask]) for k, mask in sorted(_annuli(dx[rest], ratio).items())] if rest.size else []

    def initial_plan():
        tri = np.stack([np.full(len(A), x), A, A], axis=1)
        return TriplePlan(space, 1.0, eps, tri, space.m[A] / mA)

    plans = {Fraction(1): initial_plan()}
    times = [Fraction(k, 2 ** depth) for k in range(2 ** depth - 1, 0, -1)]
    prev = Fraction(1)
    delta = space.dirac(x)
    for t in times:
        if not chain:
            prev = Fraction(1)
        lam = float(t / prev)
        tf = float(t)
        old = plans[prev]
        used = np.zeros(len(space))
        triples, weights = [], []
        for y in base:
            triples.append((x, x, int(y)))
            weights.append(space.m[y] / mA)
            used[x] += tf ** N * mA * space.m[y] / mA
        for k, members in groups:
            in_k = np.isin(old.triples[:, 2], members)
            sub_t, sub_w = old.triples[in_k], np.asarray(old.weights, dtype=float)[in_k]
            share = sub_w.sum()
            if share <= 0:
                continue
            pos = np.bincount(sub_t[:, 1], weights=sub_w, minlength=len(space)) / share
            target = ProbMeasure(space, pos / pos.sum())
            mAk = share * mA
            lo_r, hi_r = ratio ** (k - 1), ratio ** k
            bmin = min(beta(tf, lo_r, params), beta(tf, hi_r, params))
            free = np.clip(1 - used / np.where(space.m > 0, space.m, 1), 0, None)
            C = free / (tf ** N * bmin * mAk)
            res = intermediate_min_excess(delta, target, lam, C, eps)
            # glue: split each LP triple's mass over the endpoints attributed to its target point
            for (_, z, yp), w in zip(res.plan.triples, res.plan.weights):
                rows = sub_t[:, 1] == yp
                attr = sub_w[rows]
                for y, a in zip(sub_t[rows, 2], attr / attr.sum()):
                    mass = float(w) * share * a
                    triples.append((x, int(z), int(y)))
                    weights.append(mass)
                    used[z] += tf ** N * beta(tf, float(dx[y]), params) * mA * mass
        tri = np.array(triples, dtype=int).reshape(-1, 3)
        wts = np.array(weights, dtype=float)
        plans[t] = TriplePlan(space, tf, eps, tri, wts / wts.sum())
        prev = t
    return McpFamily(x, A, plans, eps)
