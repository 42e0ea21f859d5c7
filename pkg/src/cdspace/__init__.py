"""Optimal transport, curvature-dimension checks and Poincare inequalities on finite metric measure spaces."""
from .errors import *  # noqa: F401,F403
from .space import (MetricMeasureSpace, ProbMeasure, Violation, ball, build_from_graph, diameter, grid_space,
                    midpoint_set, path_space, star_space, support_diameter, validate_metric)
from .lp import LinearProgram, LpSolution, solve
from .transport import Coupling, optimal_coupling, w2, w2_squared
from .interpolation import (DistortionParams, DyadicGeodesic, TriplePlan, beta, c_const, dyadic_geodesic,
                            dyadic_product_bound, excess_dual, excess_mass, intermediate_gap, intermediate_min_excess,
                            min_feasible_threshold, min_sup_density, optimal_test_function, p_const, plan_surgery)
from .curvature import (check_cd, convex_functional, convexity_check, cd_finite_rhs, doubling_constant,
                        doubling_report, mcp_check, mcp_geodesic, renyi_entropy, shannon_entropy, spreading_check)
from .poincare import (FunctionPair, PoincareReport, minimal_upper_gradient, poincare_constant_main,
                       poincare_constant_main2, verify_poincare)

__version__ = "0.1.0"
