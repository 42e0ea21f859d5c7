"""Acceptance criteria 1-11. Each test prints one PASS/FAIL line with its measurements."""
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from cdspace import (DistortionParams, MetricMeasureSpace, ProbMeasure, beta, c_const, check_cd, convexity_check,
                     doubling_report, dyadic_geodesic, excess_mass, grid_space, intermediate_min_excess, mcp_check,
                     mcp_geodesic, minimal_upper_gradient, optimal_coupling, p_const, path_space,
                     poincare_constant_main, poincare_constant_main2, renyi_entropy, shannon_entropy, star_space,
                     verify_poincare, w2, w2_squared)
from cdspace.curvature import doubling_constant
from cdspace.poincare import general_constant
from conftest import interval_uniform
from oracles import excess_by_enumeration, floyd_warshall, rand_graph, rand_rational_weights, transport_vertex_min


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nacceptance criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def quarters(n):
    sp = path_space(n)
    return sp, interval_uniform(sp, 0, 0.25), interval_uniform(sp, 0.75, 1)


def test_criterion_01_transport_oracle(capsys):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        sp = MetricMeasureSpace(tuple(range(n)), floyd_warshall(n, rand_graph(rng, n)), [1.0] * n)
        a, b = rand_rational_weights(rng, n), rand_rational_weights(rng, n)
        cost = [[Fraction(int(v)) ** 2 for v in row] for row in sp.dist]
        ref, _ = transport_vertex_min(a, b, cost)
        mu0 = ProbMeasure(sp, [float(v) for v in a])
        mu1 = ProbMeasure(sp, [float(v) for v in b])
        cp = optimal_coupling(mu0, mu1)
        full = cp.full(n)
        plan_cost = float(np.sum(full * sp.dist ** 2))
        worst = max(worst, abs(w2(mu0, mu1) - math.sqrt(ref)), abs(plan_cost - float(ref)),
                    float(np.abs(full.sum(1) - mu0.weights).max()), float(np.abs(full.sum(0) - mu1.weights).max()))
        # the exact backend must hit the oracle value on the nose
        assert w2_squared(ProbMeasure(sp, a), ProbMeasure(sp, b)) == ref
    elapsed = time.perf_counter() - start
    verdict(capsys, 1, worst <= 1e-9 and elapsed < 10, f"max deviation {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_excess_duality(capsys):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    bad = 0
    for _ in range(30):
        n = int(rng.integers(2, 13))
        m = [Fraction(int(v), int(rng.integers(1, 4))) for v in rng.integers(0, 4, n)]
        m[0] += 1
        sp = MetricMeasureSpace(tuple(range(n)), floyd_warshall(n, rand_graph(rng, n)), m)
        w = rand_rational_weights(rng, n, max_den=12)
        mu = ProbMeasure(sp, w)
        C = Fraction(int(rng.integers(0, 9)), int(rng.integers(1, 5)))
        value = excess_mass(mu, C)
        bad += not (isinstance(value, Fraction) and value == excess_by_enumeration(w, m, C))
    elapsed = time.perf_counter() - start
    verdict(capsys, 2, bad == 0 and elapsed < 30, f"{bad} mismatches of 30, {elapsed:.2f} s")


def test_criterion_03_zero_excess(capsys):
    start = time.perf_counter()
    out = {}
    ok = True
    for n in (9, 17, 33):
        sp, a, b = quarters(n)
        C = max(a.sup_density(), b.sup_density())
        ex = float(intermediate_min_excess(a, b, 0.5, C).excess)
        out[n] = ex
        ok &= ex <= (0.05 * C * float(sp.m.sum()) if n == 9 else 1e-7)
    elapsed = time.perf_counter() - start
    verdict(capsys, 3, ok and elapsed < 60, f"excess {out}, {elapsed:.2f} s")


def test_criterion_04_dyadic_density(capsys):
    start = time.perf_counter()
    ratio = {}
    for n in (17, 33):
        _, a, b = quarters(n)
        geo = dyadic_geodesic(a, b, depth=4)
        sups = geo.sup_densities()
        ratio[n] = max(sups[1:-1]) / geo.endpoint_density
    elapsed = time.perf_counter() - start
    ok = ratio[17] <= 1.25 and abs(ratio[33] - 1) < abs(ratio[17] - 1) and elapsed < 120
    verdict(capsys, 4, ok, f"interior sup / endpoint sup: n=17 {ratio[17]:.4f}, n=33 {ratio[33]:.4f}, "
                           f"{elapsed:.2f} s")


def test_criterion_05_constants(capsys):
    mpmath.mp.dps = 40
    checks = []
    for N in (1.5, 2.0, 3.0, 7.0):
        flat = DistortionParams(0, N)
        checks.append(c_const(flat, 1.7) == 1 and p_const(flat, 1.7) == 1)
        checks.append(math.isclose(doubling_constant(flat, 2.0), 2 ** N, rel_tol=1e-15))
        checks.append(math.isclose(poincare_constant_main(N, 0, 0.8), 2 ** (N + 3), rel_tol=1e-15))
    checks.append(c_const(DistortionParams(0, math.inf), 3) == 1 and p_const(DistortionParams(0, math.inf), 3) == 1)
    for r in (0.1, 1.0, 2.5):
        checks.append(math.isclose(poincare_constant_main2(0, r), 8 * r, rel_tol=1e-15))
        checks.append(math.isclose(general_constant(DistortionParams(0, 2), r), 8 * r, rel_tol=1e-15))
    neg = DistortionParams(-1, 2)
    one = mpmath.mpf(1)
    spot = {
        "C": (c_const(neg, 1.0), mpmath.e ** (one / 2)),
        "P": (p_const(neg, 1.0), mpmath.e),
        "doubling": (doubling_constant(neg, 1.0), 4 * mpmath.cosh(one)),
        "main": (poincare_constant_main(2, -1, 1.0), 32 * mpmath.e ** 2 * mpmath.cosh(2)),
        "main2": (poincare_constant_main2(-1, 1.0), 8 * mpmath.e ** (one / 3)),
        "beta": (beta(0.5, 1.0, neg), mpmath.sinh(one / 2) / (mpmath.sinh(one) / 2)),
    }
    dev = max(abs(mpmath.mpf(v) - ref) / max(1, abs(ref)) for v, ref in spot.values())
    ok = all(checks) and dev <= 1e-9
    verdict(capsys, 5, ok, f"{sum(checks)}/{len(checks)} closed forms, max spot deviation {float(dev):.2e}")


def test_criterion_06_beta(capsys):
    rng = np.random.default_rng(606)
    start = time.perf_counter()
    bad = 0
    for _ in range(1000):
        t, l = float(rng.uniform(1e-6, 1)), float(rng.uniform(0, 10))
        K, N = -float(rng.uniform(1e-6, 5)), float(rng.uniform(1.001, 30))
        p = DistortionParams(K, N)
        b = beta(t, l, p)
        lower = math.exp(-math.sqrt((N - 1) * -K) * l / 2)
        bad += not (0 < b <= 1 and beta(0.5, l, p) >= lower * (1 - 1e-12))
    jump = 0.0
    for _ in range(200):
        t, l, N = float(rng.uniform(1e-3, 1)), float(rng.uniform(0, 10)), float(rng.uniform(1.001, 30))
        at0 = beta(t, l, DistortionParams(0, N))
        for K in (-1e-8, -1e-10, 1e-10, 1e-8):
            jump = max(jump, abs(beta(t, l, DistortionParams(K, N)) - at0))
    elapsed = time.perf_counter() - start
    ok = bad == 0 and jump <= 1e-6 and elapsed < 5
    verdict(capsys, 6, ok, f"{bad} bound failures of 1000, max jump across K=0 {jump:.1e}, {elapsed:.2f} s")


def test_criterion_07_jensen(capsys):
    rng = np.random.default_rng(707)
    start = time.perf_counter()
    sp = path_space(12)
    bad_bound = bad_eq = 0
    for k in range(1000):
        sub = np.flatnonzero(rng.random(12) < 0.5)
        if len(sub) == 0:
            sub = np.array([int(rng.integers(12))])
        N = float(rng.uniform(1.01, 20))
        ms = float(sp.m[sub].sum())
        flat = sp.uniform_on(sub)
        if k % 2:
            mu = flat
        else:
            w = np.zeros(12)
            w[sub] = rng.random(len(sub)) + 0.05
            mu = ProbMeasure(sp, w / w.sum())
        r, s = renyi_entropy(mu, N), shannon_entropy(mu)
        bad_bound += not (r >= -ms ** (1 / N) - 1e-12 and s >= -math.log(ms) - 1e-12)
        rho = mu.density()[sub]
        constant = np.ptp(rho) <= 1e-12 * rho.max()
        tight = abs(r + ms ** (1 / N)) <= 1e-9 and abs(s + math.log(ms)) <= 1e-9
        bad_eq += tight != constant
    elapsed = time.perf_counter() - start
    ok = bad_bound == 0 and bad_eq == 0 and elapsed < 5
    verdict(capsys, 7, ok, f"{bad_bound} bound failures, {bad_eq} equality-case mismatches of 1000, {elapsed:.2f} s")


def test_criterion_08_cd_margins(capsys):
    start = time.perf_counter()
    sp = path_space(17)
    spans = [((0, 0.25), (0.75, 1)), ((0, 0.25), (0.5, 1)), ((0, 0.5), (0.5, 1)), ((0.25, 0.5), (0.5, 0.75)),
             ((0, 0.125), (0.375, 1))]
    ks = []
    for lo, hi in spans:
        rep = check_cd([(interval_uniform(sp, *lo), interval_uniform(sp, *hi))], DistortionParams(0, math.inf))
        ks.append(rep.sharpest_K)
    st = star_space()
    i = st.index
    star_pairs = [(st.dirac(i("c")), st.dirac(i("a2"))), (st.dirac(i("a1")), st.dirac(i("b2"))),
                  (st.uniform_on([i("a1"), i("a2")]), st.uniform_on([i("b1"), i("b2")]))]
    star = check_cd(star_pairs, DistortionParams(0, math.inf), depth=2)
    elapsed = time.perf_counter() - start
    ok = min(ks) >= -0.5 and star.worst_margin < 0 and elapsed < 120
    verdict(capsys, 8, ok, f"interval sharpest K {[round(k, 3) for k in ks]}, star worst K=0 margin "
                           f"{star.worst_margin:.4f}, {elapsed:.2f} s")


def test_criterion_09_mcp(capsys):
    start = time.perf_counter()
    sp = path_space(17)
    params = DistortionParams(0, 2)
    A = range(17)
    fam = mcp_geodesic(sp, 0, A, params, depth=3)
    rep = mcp_check(sp, 0, A, fam, params)
    bound = -0.05 * float(sp.m.min())
    times = sorted(float(t) for t in fam.plans)
    dyadic = times == [k / 8 for k in range(1, 9)]
    elapsed = time.perf_counter() - start
    ok = dyadic and rep.min_margin >= bound and elapsed < 120
    verdict(capsys, 9, ok, f"min margin {rep.min_margin:.3e} (bound {bound:.3e}) over {len(times)} times, "
                           f"{elapsed:.2f} s")


def _random_pairs(rng, sp, count):
    for _ in range(count):
        u = np.cumsum(rng.normal(size=len(sp))) if rng.random() < 0.5 else rng.normal(size=len(sp))
        g = minimal_upper_gradient(sp, u, "slope" if rng.random() < 0.5 else "lp")
        yield u, g + rng.random(len(sp)) * rng.uniform(0, 0.5) * (rng.random() < 0.5)


def test_criterion_10_poincare(capsys):
    rng = np.random.default_rng(1010)
    start = time.perf_counter()
    params = DistortionParams(0, math.inf)
    cases = [(path_space(17), lambda: float(rng.uniform(0.08, 0.3))),
             (grid_space(7, 7), lambda: float(rng.uniform(1.0, 2.0)))]
    counts = {"holds": 0, "hypothesis unmet": 0, "theorem violated": 0}
    certified = bad = 0
    worst = math.inf
    for sp, radius in cases:
        for u, g in _random_pairs(rng, sp, 20):
            rep = verify_poincare(sp, int(rng.integers(len(sp))), radius(), u, g, mode="unaveraged-main2",
                                  params=params, depth=3)
            counts[rep.outcome] += 1
            if rep.density_bound_certified:
                certified += 1
                worst = min(worst, rep.general_margin)
                bad += rep.general_margin < 0
    elapsed = time.perf_counter() - start
    ok = bad == 0 and counts["theorem violated"] == 0 and elapsed < 300
    verdict(capsys, 10, ok, f"outcomes {counts}, {certified} certified, worst certified margin {worst:.4g}, "
                            f"{elapsed:.2f} s")


def test_criterion_11_convexity(capsys):
    start = time.perf_counter()
    _, a, b = quarters(17)
    rep = convexity_check([(a, b)], lambda x: x * x, math.inf, tol=0.05)
    elapsed = time.perf_counter() - start
    ok = rep.convex and rep.max_density_ratio <= 1.25 and elapsed < 60
    verdict(capsys, 11, ok, f"worst margin {rep.worst_margin:.4g}, density ratio {rep.max_density_ratio:.4f}, "
                            f"{elapsed:.2f} s")


@pytest.mark.parametrize("n", [17])
def test_doubling_sanity_on_interval(n):
    # supporting check for criterion 5: the empirical doubling ratio stays below 2^N above mesh scale
    theory, emp = doubling_report(path_space(n), DistortionParams(0, 2), min_radius=1 / (n - 1))
    assert emp <= theory
