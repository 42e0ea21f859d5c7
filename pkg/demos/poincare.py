"""Local Poincare inequality on a grid, with the constructive chain of estimates."""
import numpy as np

from cdspace import grid_space, minimal_upper_gradient, verify_poincare

sp = grid_space(7, 7)
rows = np.array([int(p.split(",")[0]) for p in sp.points])
u = np.tanh(rows - 3.0)
g = minimal_upper_gradient(sp, u)
center = sp.index("3,3")

rep = verify_poincare(sp, center, 2.5, u, g, depth=3)
print(f"lhs {rep.lhs:.4f}  constant {rep.general_constant:.2f}  margin {rep.general_margin:.4f}")
print("outcome:", rep.outcome, "| density bound certified:", rep.density_bound_certified)
for key in ("median", "m_plus", "m_minus", "double_integral", "transport_bound", "max_interpolant_density",
            "density_bound", "rhs_inflated"):
    print(f"  {key:24s} {rep.chain[key]}")
