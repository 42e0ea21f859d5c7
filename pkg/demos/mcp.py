"""Contracting the interval toward its left endpoint and checking the MCP(0,2) margins."""
from cdspace import DistortionParams, mcp_check, mcp_geodesic, path_space

sp = path_space(17)
params = DistortionParams(0, 2)
fam = mcp_geodesic(sp, 0, range(17), params, depth=3)
rep = mcp_check(sp, 0, range(17), fam, params)
for r in rep.records:
    print(f"t={r['t']:.3f}  min margin {r['min_margin']:+.4f} at {r['argmin']}")
print("passed:", rep.passed)
