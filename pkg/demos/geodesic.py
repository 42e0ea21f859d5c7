"""Minimum-excess midpoints and a dyadic geodesic on a discretized interval."""
import numpy as np

from cdspace import dyadic_geodesic, intermediate_min_excess, path_space

sp = path_space(17)
x = np.linspace(0, 1, 17)
mu0 = sp.uniform_on(np.flatnonzero(x <= 0.25))
mu1 = sp.uniform_on(np.flatnonzero(x >= 0.75))
C = max(mu0.sup_density(), mu1.sup_density())

for thr in (0.5 * C, 0.8 * C, C):
    res = intermediate_min_excess(mu0, mu1, 0.5, thr)
    print(f"threshold {thr:.3f}: minimal excess {float(res.excess):.4f}")

geo = dyadic_geodesic(mu0, mu1, depth=4)
print("\nt      sup density")
for t, s in zip(geo.times, geo.sup_densities()):
    print(f"{float(t):.4f} {s:.4f}")
print("per-level bounds:", [round(lv["bound"], 4) for lv in geo.levels])
