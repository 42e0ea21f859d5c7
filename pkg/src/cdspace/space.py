"""Finite metric measure spaces, probability measures on them, and geometric queries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import DisconnectedGraph, InvalidMeasure, InvalidSpace, NonpositiveEdge

METRIC_RTOL = 1e-12
MASS_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    kind: str  # "shape", "diagonal", "positivity", "symmetry", "triangle", "finite"
    indices: tuple
    excess: float

    def __str__(self):
        return f"{self.kind} violation at {self.indices} (by {self.excess:.3g})"


def validate_metric(dist) -> list[Violation]:
    """Check the metric axioms on a square matrix.

    Returns every violation found, each with its witnessing index tuple. An
    empty list means ``dist`` is a metric up to a relative tolerance of 1e-12.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [Violation("shape", tuple(d.shape), float("nan"))]
    n = d.shape[0]
    if not np.all(np.isfinite(d)):
        bad = np.argwhere(~np.isfinite(d))
        return [Violation("finite", tuple(int(v) for v in ij), float("inf")) for ij in bad]
    tol = METRIC_RTOL * max(1.0, float(np.abs(d).max(initial=0.0)))
    out = []
    for i in range(n):
        if abs(d[i, i]) > tol:
            out.append(Violation("diagonal", (i, i), abs(d[i, i])))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(d[i, j] - d[j, i]) > tol:
                out.append(Violation("symmetry", (i, j), abs(d[i, j] - d[j, i])))
            if min(d[i, j], d[j, i]) <= tol:
                out.append(Violation("positivity", (i, j), -min(d[i, j], d[j, i])))
    # d[i, j] - min_k (d[i, k] + d[k, j])
    via = d[:, :, None] + d[None, :, :]  # via[i, k, j]
    best_k = via.argmin(axis=1)
    gap = d - via.min(axis=1)
    for i, j in np.argwhere(gap > tol):
        if j < i and gap[j, i] > tol:
            continue  # already reported as (j, i)
        k = int(best_k[i, j])
        out.append(Violation("triangle", (int(i), int(j), k), float(gap[i, j])))
    return out


def _is_rational(v) -> bool:
    return isinstance(v, (int, np.integer, Fraction)) and not isinstance(v, bool)


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """A finite point set with a metric and a nonnegative reference measure.

    ``edges`` is kept when the space came from a graph; it holds index
    triples ``(i, j, length)`` and is used for discrete upper gradients.
    """

    points: tuple
    dist: np.ndarray
    m: np.ndarray
    edges: tuple = field(default=())
    # exact copies for rational arithmetic: Fractions where the input was rational,
    # otherwise the exact value of the float
    dist_exact: np.ndarray = field(init=False, repr=False)
    m_exact: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw_d = np.array(self.dist, dtype=object)
        raw_m = np.array(self.m, dtype=object)
        d = np.array(self.dist, dtype=float)
        m = np.array(self.m, dtype=float)
        n = len(self.points)
        if len(set(self.points)) != n:
            raise InvalidSpace("point ids must be unique")
        if d.shape != (n, n) or m.shape != (n,):
            raise InvalidSpace(f"shape mismatch: {n} points, dist {d.shape}, m {m.shape}")
        problems = validate_metric(d)
        if problems:
            raise InvalidSpace("; ".join(str(p) for p in problems[:5]))
        # within-tolerance asymmetry is averaged away
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        if np.any(m < 0) or not np.any(m > 0):
            raise InvalidSpace("reference measure must be nonnegative and not identically zero")
        d_ex = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                a, b = raw_d[i, j], raw_d[j, i]
                d_ex[i, j] = Fraction(a) if _is_rational(a) and _is_rational(b) and a == b else Fraction(d[i, j])
        m_ex = np.array([Fraction(v) if _is_rational(v) else Fraction(m[i]) for i, v in enumerate(raw_m)],
                        dtype=object)
        for arr in (d, m, d_ex, m_ex):
            arr.setflags(write=False)
        object.__setattr__(self, "dist_exact", d_ex)
        object.__setattr__(self, "m_exact", m_ex)
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(w)) for i, j, w in self.edges))

    def __len__(self):
        return len(self.points)

    def index(self, point) -> int:
        """Position of a point id; a plain integer that is not an id is taken as a position."""
        try:
            return self.points.index(point)
        except ValueError:
            if isinstance(point, (int, np.integer)) and not isinstance(point, bool) and 0 <= point < len(self):
                return int(point)
            raise KeyError(f"unknown point {point!r}") from None

    @property
    def is_graph(self) -> bool:
        return bool(self.edges)

    @property
    def max_edge(self) -> float:
        return max((w for _, _, w in self.edges), default=0.0)

    def default_epsilon(self) -> float:
        """Half the longest edge; for matrix-built spaces, half the largest nearest-neighbour gap."""
        if self.edges:
            return self.max_edge / 2
        if len(self) < 2:
            return 0.0
        d = self.dist + np.diag(np.full(len(self), np.inf))
        return float(d.min(axis=1).max()) / 2

    def measure(self, weights) -> "ProbMeasure":
        """Build a ProbMeasure from an array or a ``{point id: weight}`` mapping."""
        if isinstance(weights, Mapping):
            w = [0] * len(self)
            for k, v in weights.items():
                w[self.index(k)] = v
            weights = w
        return ProbMeasure(self, weights)

    def uniform_on(self, subset: Iterable[int]) -> "ProbMeasure":
        """The normalized restriction of ``m`` to ``subset`` (indices)."""
        idx = np.fromiter(subset, dtype=int)
        w = np.zeros(len(self))
        w[idx] = self.m[idx]
        total = w.sum()
        if total <= 0:
            raise InvalidMeasure("subset has zero reference measure")
        return ProbMeasure(self, w / total)

    def dirac(self, i: int) -> "ProbMeasure":
        w = np.zeros(len(self))
        w[i] = 1.0
        return ProbMeasure(self, w)


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


class ProbMeasure:
    """Probability weights on the points of a space.

    Weights may be floats or, for exact computations, ``Fraction`` objects
    (stored in an object array).
    """

    __slots__ = ("space", "weights")

    def __init__(self, space: MetricMeasureSpace, weights):
        w = np.asarray(weights)
        if w.dtype == object or any(isinstance(v, Fraction) for v in w.ravel()):
            w = np.array([Fraction(v) for v in w], dtype=object)
        else:
            w = w.astype(float)
        if w.shape != (len(space),):
            raise InvalidMeasure(f"expected {len(space)} weights, got shape {w.shape}")
        if _is_exact(w):
            if any(v < 0 for v in w) or sum(w) != 1:
                raise InvalidMeasure("exact weights must be nonnegative and sum to exactly 1")
        else:
            if not np.all(np.isfinite(w)) or np.any(w < -MASS_TOL):
                raise InvalidMeasure("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > MASS_TOL * max(1, len(w)):
                raise InvalidMeasure(f"weights sum to {w.sum()!r}, not 1")
            w = np.clip(w, 0.0, None)
            w.setflags(write=False)
        self.space = space
        self.weights = w

    @property
    def exact(self) -> bool:
        return _is_exact(self.weights)

    def support(self) -> np.ndarray:
        return np.flatnonzero(np.asarray([v > 0 for v in self.weights]))

    def density(self) -> np.ndarray:
        """weights / m on m-positive points, 0 on m-null points."""
        m = self.space.m
        if self.exact:
            mx = self.space.m_exact
            return np.array([self.weights[i] / mx[i] if mx[i] > 0 else Fraction(0)
                             for i in range(len(m))], dtype=object)
        rho = np.zeros(len(m))
        pos = m > 0
        rho[pos] = self.weights[pos] / m[pos]
        return rho

    def singular_mass(self):
        null = self.space.m == 0
        if self.exact:
            return sum((v for v, z in zip(self.weights, null) if z), Fraction(0))
        return float(self.weights[null].sum())

    def sup_density(self) -> float:
        """Essential sup of the density; +inf if there is singular mass."""
        if self.singular_mass() > 0:
            return float("inf")
        return max(self.density())

    def as_float(self) -> "ProbMeasure":
        if not self.exact:
            return self
        w = np.array([float(v) for v in self.weights])
        return ProbMeasure(self.space, w / w.sum())

    def as_dict(self) -> dict:
        return {self.space.points[i]: (self.weights[i] if self.exact else float(self.weights[i]))
                for i in self.support()}

    def __repr__(self):
        return f"ProbMeasure({self.as_dict()!r})"


def build_from_graph(vertices: Sequence[tuple], edges: Sequence[tuple]) -> MetricMeasureSpace:
    """Shortest-path metric space of a weighted connected graph.

    ``vertices`` is a list of ``(id, m_weight)``; ``edges`` a list of
    ``(u_id, v_id, length)`` with positive lengths.
    """
    ids = [v for v, _ in vertices]
    pos = {v: i for i, v in enumerate(ids)}
    n = len(ids)
    rows, cols, vals, kept = [], [], [], {}
    for u, v, w in edges:
        if not w > 0:
            raise NonpositiveEdge(f"edge ({u!r}, {v!r}) has length {w!r}")
        if u not in pos or v not in pos:
            raise InvalidSpace(f"edge ({u!r}, {v!r}) references an unknown vertex")
        i, j = pos[u], pos[v]
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        kept[key] = min(w, kept.get(key, np.inf))
    for (i, j), w in kept.items():
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    # rational lengths are scaled to integers so the float path sums stay exact
    scale = 1
    if all(_is_rational(w) for w in vals):
        scale = math.lcm(1, *(Fraction(w).denominator for w in vals))
    graph = csr_matrix(([float(Fraction(w) * scale) if scale > 1 else w for w in vals], (rows, cols)), shape=(n, n))
    dist = shortest_path(graph, method="D", directed=False)
    if np.isinf(dist).any():
        i, j = np.argwhere(np.isinf(dist))[0]
        raise DisconnectedGraph(f"no path between {ids[i]!r} and {ids[j]!r}")
    if scale > 1 and dist.max() < 2 ** 53:
        dist = np.array([[Fraction(int(v), scale) for v in row] for row in dist], dtype=object)
    return MetricMeasureSpace(tuple(ids), dist, [w for _, w in vertices],
                              edges=tuple((i, j, w) for (i, j), w in sorted(kept.items())))


def path_space(n: int, length: float = 1.0, weights: str = "trapezoid") -> MetricMeasureSpace:
    """Path graph discretizing [0, length] with n equally spaced vertices.

    ``weights="trapezoid"`` gives each vertex the length of its Voronoi cell,
    so ``m`` approximates Lebesgue measure; ``"unit"`` uses counting measure.
    """
    if n == 1:
        return build_from_graph([("0", 1.0)], [])
    h = length / (n - 1)
    if weights == "trapezoid":
        m = [h / 2 if i in (0, n - 1) else h for i in range(n)]
    elif weights == "unit":
        m = [1.0] * n
    else:
        raise ValueError(f"unknown weights {weights!r}")
    return build_from_graph([(str(i), m[i]) for i in range(n)],
                            [(str(i), str(i + 1), h) for i in range(n - 1)])


def grid_space(rows: int, cols: int, spacing: float = 1.0, weight: float | None = None) -> MetricMeasureSpace:
    """Rectangular grid graph with the shortest-path (l1) metric and constant vertex weights."""
    w = spacing ** 2 if weight is None else weight
    verts = [(f"{r},{c}", w) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((f"{r},{c}", f"{r},{c + 1}", spacing))
            if r + 1 < rows:
                edges.append((f"{r},{c}", f"{r + 1},{c}", spacing))
    return build_from_graph(verts, edges)


def star_space(arms: int = 3, arm_length: int = 2, center_mass: float = 8.0, mass: float = 1.0) -> MetricMeasureSpace:
    """Star graph: a center vertex ``c`` with ``arms`` unit-edge paths of ``arm_length`` edges."""
    verts = [("c", center_mass)]
    edges = []
    for a in range(arms):
        prev = "c"
        for k in range(1, arm_length + 1):
            v = f"{chr(ord('a') + a)}{k}"
            verts.append((v, mass))
            edges.append((prev, v, 1.0))
            prev = v
    return build_from_graph(verts, edges)


def _leq(a, b, scale):
    return a <= b + METRIC_RTOL * max(1.0, scale)


def midpoint_set(space: MetricMeasureSpace, x0: int, x1: int, lam: float, eps: float = 0.0) -> np.ndarray:
    """Indices z with d(x0,z) <= lam*d(x0,x1)+eps and d(z,x1) <= (1-lam)*d(x0,x1)+eps."""
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam!r}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    d = space.dist
    L = d[x0, x1]
    scale = max(L, eps)
    ok = _leq(d[x0], lam * L + eps, scale) & _leq(d[:, x1], (1 - lam) * L + eps, scale)
    return np.flatnonzero(ok)


def ball(space: MetricMeasureSpace, center: int, r: float) -> np.ndarray:
    """Open ball {y : d(center, y) < r}."""
    return np.flatnonzero(space.dist[center] < r)


def diameter(space: MetricMeasureSpace, subset=None) -> float:
    idx = np.arange(len(space)) if subset is None else np.asarray(list(subset), dtype=int)
    if idx.size < 2:
        return 0.0
    return float(space.dist[np.ix_(idx, idx)].max())


def support_diameter(*measures: ProbMeasure) -> float:
    sup = np.unique(np.concatenate([mu.support() for mu in measures]))
    return diameter(measures[0].space, sup)
