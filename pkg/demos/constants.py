"""Distortion coefficients and constants for a few curvature bounds."""
import math

from cdspace import DistortionParams, beta, c_const, p_const, poincare_constant_main, poincare_constant_main2
from cdspace.curvature import doubling_constant

for K in (0.0, -0.5, -1.0):
    p = DistortionParams(K, 3)
    print(f"K={K:+.1f} N=3: beta_1/2(1)={beta(0.5, 1.0, p):.5f} C(1)={c_const(p, 1.0):.5f} "
          f"P(1)={p_const(p, 1.0):.5f} doubling(1)={doubling_constant(p, 1.0):.4f} "
          f"main(r=1)={poincare_constant_main(3, K, 1.0):.2f}")
for K in (0.0, -1.0):
    p = DistortionParams(K, math.inf)
    print(f"K={K:+.1f} N=inf: C(1)={c_const(p, 1.0):.5f} P(1)={p_const(p, 1.0):.5f} "
          f"main2(r=1)={poincare_constant_main2(K, 1.0):.4f}")
