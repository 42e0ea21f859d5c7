"""JSON and CSV formats for spaces, measures, functions and reports."""
from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction

import numpy as np

from .errors import InvalidMeasure, InvalidSpace
from .space import MetricMeasureSpace, ProbMeasure, build_from_graph


def parse_number(v):
    """JSON number, or a string such as "1/3" read as an exact rational."""
    if isinstance(v, bool):
        raise ValueError(f"not a number: {v!r}")
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a number: {v!r}") from None
    raise ValueError(f"not a number: {v!r}")


def format_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def space_from_dict(data: dict) -> MetricMeasureSpace:
    if "vertices" in data:
        try:
            verts = [(str(v["id"]), parse_number(v["m"])) for v in data["vertices"]]
            edges = [(str(e["u"]), str(e["v"]), parse_number(e["length"])) for e in data.get("edges", [])]
        except (KeyError, TypeError) as exc:
            raise InvalidSpace(f"malformed graph space: {exc}") from None
        return build_from_graph(verts, edges)
    if "distance_matrix" in data:
        try:
            points = [str(p) for p in data["points"]]
            dist = [[parse_number(x) for x in row] for row in data["distance_matrix"]]
            m = [parse_number(x) for x in data["measure"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpace(f"malformed matrix space: {exc}") from None
        if len(m) != len(points):
            raise InvalidSpace("measure and points differ in length")
        return MetricMeasureSpace(points, dist, m)
    raise InvalidSpace('space JSON needs "vertices" or "distance_matrix"')


def _exact_or_float(x: Fraction):
    # rationals a float represents exactly are written as floats, others as "p/q"
    return float(x) if float(x) == x else str(x)


def space_to_dict(space: MetricMeasureSpace) -> dict:
    m = [_exact_or_float(v) for v in space.m_exact]
    dx = space.dist_exact
    if space.is_graph:
        p = space.points
        return {
            "vertices": [{"id": p[i], "m": m[i]} for i in range(len(space))],
            "edges": [{"u": p[i], "v": p[j], "length": _exact_or_float(dx[i, j]) if float(dx[i, j]) == w else w}
                      for i, j, w in space.edges],
        }
    return {
        "points": list(space.points),
        "distance_matrix": [[_exact_or_float(v) for v in row] for row in dx],
        "measure": m,
    }


def measure_from_dict(space: MetricMeasureSpace, data: dict) -> ProbMeasure:
    if "weights" not in data or not isinstance(data["weights"], dict):
        raise InvalidMeasure('measure JSON needs a "weights" object')
    raw = {}
    for k, v in data["weights"].items():
        raw[space.index(str(k))] = parse_number(v)
    exact = any(isinstance(v, Fraction) for v in raw.values())
    if exact:
        if any(isinstance(v, float) for v in raw.values()):
            raise InvalidMeasure("mix of rational strings and floating-point weights")
        w = np.array([Fraction(0)] * len(space), dtype=object)
        for i, v in raw.items():
            w[i] = Fraction(v)
    else:
        w = np.zeros(len(space))
        for i, v in raw.items():
            w[i] = float(v)
    return ProbMeasure(space, w)


def measure_to_dict(mu: ProbMeasure) -> dict:
    return {"weights": {mu.space.points[i]: format_number(mu.weights[i]) for i in mu.support()}}


def function_from_dict(space: MetricMeasureSpace, data: dict):
    """``(u, g)`` arrays from {"u": {id: num}, "g": {id: num}}; missing ids read as 0, g may be None."""
    if "u" not in data:
        raise ValueError('function JSON needs a "u" object')

    def values(obj):
        out = np.zeros(len(space))
        for k, v in obj.items():
            out[space.index(str(k))] = float(parse_number(v))
        return out

    return values(data["u"]), (values(data["g"]) if data.get("g") is not None else None)


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_space(path) -> MetricMeasureSpace:
    return space_from_dict(load_json(path))


def load_measure(space, path) -> ProbMeasure:
    return measure_from_dict(space, load_json(path))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return format_number(obj)


def dumps(obj) -> str:
    """Deterministic JSON text; rationals become "p/q" strings and infinities "inf"."""
    return json.dumps(_plain(obj), indent=2, ensure_ascii=False) + "\n"


def density_csv(rows) -> str:
    """CSV with columns t, point_id, rho, m_weight."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "point_id", "rho", "m_weight"])
    for t, pid, rho, mw in rows:
        w.writerow([repr(float(t)), pid, repr(float(rho)), repr(float(mw))])
    return buf.getvalue()
