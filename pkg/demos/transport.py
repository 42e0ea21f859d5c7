"""Exact and floating point W2 on a small weighted graph."""
from fractions import Fraction

from cdspace import build_from_graph, optimal_coupling, w2, w2_squared

# a 4-cycle with one long side
sp = build_from_graph([("a", 1), ("b", 1), ("c", 1), ("d", 1)],
                      [("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "a", 3)])
h = Fraction(1, 2)
mu0 = sp.measure({"a": h, "b": h})
mu1 = sp.measure({"c": h, "d": h})

print("distance matrix")
print(sp.dist)
print("W2^2 (exact):", w2_squared(mu0, mu1))
print("W2 (float):  ", w2(mu0.as_float(), mu1.as_float()))
for i, j, w in optimal_coupling(mu0, mu1).pairs():
    print(f"  move {w} from {sp.points[i]} to {sp.points[j]}")
