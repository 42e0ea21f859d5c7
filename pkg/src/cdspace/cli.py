"""Command-line front end: ``cdspace <subcommand> ...``.

Reports are JSON on stdout (or ``--out``). The exit status is 0 when every
reported margin is >= -tol, 1 when a margin is negative or the computation
failed (a JSON error object is printed), and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io as cio
from .curvature import check_cd, doubling_constant, mcp_check, mcp_geodesic
from .errors import CdSpaceError
from .interpolation import (DEFAULT_TOL, DistortionParams, beta, c_const, dyadic_geodesic, intermediate_min_excess,
                            min_feasible_threshold, p_const)
from .poincare import MODES, general_constant, poincare_constant_main, poincare_constant_main2, verify_poincare
from .space import MetricMeasureSpace, support_diameter, validate_metric
from .transport import optimal_coupling


class UsageError(Exception):
    pass


def _float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return v


def _params(args) -> DistortionParams:
    try:
        return DistortionParams(args.K, args.N)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _space(args) -> MetricMeasureSpace:
    return cio.load_space(args.space)


def _measures(args, space):
    return cio.load_measure(space, args.mu0), cio.load_measure(space, args.mu1)


def _coupling_rows(space, pairs):
    return [{"x0": space.points[i], "x1": space.points[j], "weight": w} for i, j, w in pairs]


def cmd_validate(args):
    data = cio.load_json(args.space)
    if "distance_matrix" in data:
        bad = validate_metric(np.asarray(data["distance_matrix"], dtype=float))
        if bad:
            return {"valid": False, "violations": [{"kind": v.kind, "indices": list(v.indices),
                                                    "excess": v.excess} for v in bad]}, False
    space = cio.space_from_dict(data)
    return {
        "valid": True,
        "points": len(space),
        "graph": space.is_graph,
        "diameter": float(space.dist.max()),
        "total_measure": float(space.m.sum()),
        "default_eps": space.default_epsilon(),
    }, True


def cmd_w2(args):
    space = _space(args)
    mu0, mu1 = _measures(args, space)
    cp = optimal_coupling(mu0, mu1, exact=True if args.exact else None)
    cost = cp.cost
    return {"w2": math.sqrt(max(float(cost), 0.0)), "w2_squared": cost,
            "coupling": _coupling_rows(space, cp.pairs())}, True


def _threshold(args, mu0, mu1, params):
    M = max(float(mu0.sup_density()), float(mu1.sup_density()))
    if args.threshold == "auto":
        return c_const(params, support_diameter(mu0, mu1)) * M
    try:
        return float(args.threshold)
    except ValueError:
        raise UsageError("--threshold must be 'auto' or a number") from None


def cmd_interpolate(args):
    space = _space(args)
    mu0, mu1 = _measures(args, space)
    params = _params(args)
    C = _threshold(args, mu0, mu1, params)
    res = intermediate_min_excess(mu0, mu1, args.lam, C, args.eps)
    p = space.points
    report = {
        "lambda": args.lam,
        "threshold": C,
        "excess": res.excess,
        "intermediate": cio.measure_to_dict(res.nu)["weights"],
        "sup_density": float(res.nu.sup_density()),
        "plan": [{"x0": p[i], "z": p[z], "x1": p[j], "weight": w}
                 for (i, z, j), w in zip(res.plan.triples, res.plan.weights)],
    }
    return report, float(res.excess) <= args.tol


def cmd_geodesic(args):
    space = _space(args)
    mu0, mu1 = _measures(args, space)
    geo = dyadic_geodesic(mu0, mu1, depth=args.depth, eps=args.eps, params=_params(args), tol=args.tol)
    ok = all(lv["margin"] >= -args.tol for lv in geo.levels)
    if args.format == "csv":
        return cio.density_csv(geo.density_rows()), ok
    return geo.report(), ok


def cmd_sweep(args):
    space = _space(args)
    mu0, mu1 = _measures(args, space)
    M = max(float(mu0.sup_density()), float(mu1.sup_density()))
    if args.thresholds:
        Cs = [float(c) for c in args.thresholds.split(",")]
    else:
        Cs = list(np.linspace(args.low * M, args.high * M, args.steps))
    rows = [{"threshold": C, "excess": float(intermediate_min_excess(mu0, mu1, args.lam, C, args.eps).excess)}
            for C in Cs]
    least = min_feasible_threshold(mu0, mu1, args.lam, args.eps, tol=args.tol)
    return {"lambda": args.lam, "endpoint_sup_density": M, "sweep": rows, "min_feasible_threshold": least}, True


def _pairs_from_file(space, path):
    data = cio.load_json(path)
    try:
        items = data["pairs"]
    except (KeyError, TypeError):
        raise UsageError('pairs file needs a "pairs" list of {"mu0": ..., "mu1": ...}') from None
    return [(cio.measure_from_dict(space, it["mu0"]), cio.measure_from_dict(space, it["mu1"])) for it in items]


def cmd_check_cd(args):
    space = _space(args)
    if args.pairs:
        pairs = _pairs_from_file(space, args.pairs)
    elif args.mu0 and args.mu1:
        pairs = [_measures(args, space)]
    else:
        raise UsageError("check-cd needs --pairs or both --mu0 and --mu1")
    rep = check_cd(pairs, _params(args), depth=args.depth, eps=args.eps, tol=args.tol)
    return rep.to_dict(), rep.certified


def cmd_check_mcp(args):
    space = _space(args)
    params = _params(args)
    x = space.index(args.x)
    A = range(len(space)) if not args.A else [space.index(a) for a in args.A.split(",")]
    fam = mcp_geodesic(space, x, A, params, depth=args.depth, eps=args.eps)
    rep = mcp_check(space, x, A, fam, params, tol=args.tol)
    return rep.to_dict(), rep.passed


def cmd_check_poincare(args):
    space = _space(args)
    u, g = cio.function_from_dict(space, cio.load_json(args.function))
    rep = verify_poincare(space, args.center, args.radius, u, g, mode=args.mode, params=_params(args),
                          depth=args.depth, eps=args.eps, tol=args.tol)
    return rep.to_dict(), rep.passed


def cmd_constants(args):
    params = _params(args)
    r = args.r if args.r is not None else args.D / 2
    out = {"K": args.K, "N": args.N if params.finite else "inf", "D": args.D, "r": r,
           "C": c_const(params, args.D), "P": p_const(params, args.D),
           "main2_constant": poincare_constant_main2(args.K, r),
           "general_constant": general_constant(params, r)}
    if params.finite:
        out["doubling"] = doubling_constant(params, args.D)
        out["main_constant"] = poincare_constant_main(params.N, args.K, r)
        if args.t is not None:
            out["beta"] = beta(args.t, args.l if args.l is not None else args.D, params)
    return out, True


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdspace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, space=True, params=False, measures=False, depth=None):
        if space:
            p.add_argument("--space", required=True, help="space JSON file")
        if measures is True:
            p.add_argument("--mu0", required=True)
            p.add_argument("--mu1", required=True)
        elif measures == "optional":
            p.add_argument("--mu0")
            p.add_argument("--mu1")
        if params:
            p.add_argument("--K", type=_float, default=0.0)
            p.add_argument("--N", type=_float, default=math.inf)
        if depth is not None:
            p.add_argument("--depth", type=int, default=depth)
        p.add_argument("--eps", type=_float, default=None, help="midpoint slack (default: half the longest edge)")
        p.add_argument("--tol", type=_float, default=DEFAULT_TOL)
        p.add_argument("--out", help="write the report here instead of stdout")

    p = sub.add_parser("validate", help="check a space file")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("w2", help="Wasserstein distance and optimal coupling")
    common(p, measures=True)
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    p.set_defaults(fn=cmd_w2)

    p = sub.add_parser("interpolate", help="minimum-excess intermediate measure at one lambda")
    common(p, params=True, measures=True)
    p.add_argument("--lam", type=_float, default=0.5)
    p.add_argument("--threshold", default="auto", help="'auto' (C(N,K,D) times endpoint sup-density) or a number")
    p.set_defaults(fn=cmd_interpolate)

    p = sub.add_parser("geodesic", help="dyadic geodesic with density bounds")
    common(p, params=True, measures=True, depth=4)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_geodesic)

    p = sub.add_parser("sweep-threshold", help="minimal excess as a function of the threshold")
    common(p, measures=True)
    p.add_argument("--lam", type=_float, default=0.5)
    p.add_argument("--thresholds", help="comma-separated thresholds")
    p.add_argument("--low", type=_float, default=0.5, help="sweep start, in units of the endpoint sup-density")
    p.add_argument("--high", type=_float, default=1.5)
    p.add_argument("--steps", type=int, default=11)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("check-cd", help="entropy inequality along constructed geodesics")
    common(p, params=True, measures="optional", depth=4)
    p.add_argument("--pairs", help='JSON {"pairs": [{"mu0": {...}, "mu1": {...}}]}')
    p.set_defaults(fn=cmd_check_cd)

    p = sub.add_parser("check-mcp", help="measure contraction toward a point")
    common(p, params=True, depth=3)
    p.add_argument("--x", required=True, help="contraction point id")
    p.add_argument("--A", help="comma-separated point ids (default: all)")
    p.set_defaults(fn=cmd_check_mcp)

    p = sub.add_parser("check-poincare", help="local Poincare inequality on a ball")
    common(p, params=True, depth=3)
    p.add_argument("--function", required=True, help='JSON {"u": {...}, "g": {...}}')
    p.add_argument("--center", required=True)
    p.add_argument("--radius", type=_float, required=True)
    p.add_argument("--mode", choices=MODES, default="unaveraged-main2")
    p.set_defaults(fn=cmd_check_poincare)

    p = sub.add_parser("constants", help="closed-form distortion, density and Poincare constants")
    p.add_argument("--K", type=_float, default=0.0)
    p.add_argument("--N", type=_float, default=math.inf)
    p.add_argument("--D", type=_float, default=1.0)
    p.add_argument("--r", type=_float, default=None, help="ball radius (default D/2)")
    p.add_argument("--t", type=_float, default=None, help="time for beta_t")
    p.add_argument("--l", type=_float, default=None, help="distance for beta_t (default D)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_constants)
    return ap


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, ok = args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (CdSpaceError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        _emit(cio.dumps({"error": type(exc).__name__, "message": str(msg)}), getattr(args, "out", None))
        return 1
    _emit(report if isinstance(report, str) else cio.dumps(report), args.out)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
