"""Shared geometric primitives: metric spaces, entourages as radii,
formal convex combinations with finite support, and barycentric coordinates.

All types here are immutable after construction and all operations are pure.
Uniform-space machinery is specialized to metrics throughout: an entourage
is just a positive radius, and a "ball" around a set is the open set of
points strictly within that radius of it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedTree,
    EmptySet,
    LengthMismatch,
    NegativeWeight,
    WeightSumOutOfTolerance,
)

WEIGHT_SUM_INPUT_TOL = 1e-9     # accepted slack on input weight sums
WEIGHT_SUM_CANONICAL_TOL = 1e-12  # guaranteed after renormalization


@dataclass(frozen=True)
class Entourage:
    """A uniformity element in the metric specialization: a radius."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"entourage radius must be positive, got {self.radius}")

    def half(self) -> "Entourage":
        return Entourage(self.radius / 2.0)

    def scaled(self, factor: float) -> "Entourage":
        return Entourage(self.radius * factor)


# ---------------------------------------------------------------------------
# Metric spaces
# ---------------------------------------------------------------------------

class MetricSpace:
    """Common interface of the three shipped space kinds.

    Points are plain hashable values: coordinate tuples for Euclidean boxes,
    labels for discrete spaces, canonical ``TreePoint`` instances for trees.
    """

    kind: str = "abstract"

    def distance(self, p, q) -> float:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def sample_point(self, rng: np.random.Generator):
        raise NotImplementedError

    def perturb(self, rng: np.random.Generator, p, radius: float):
        """A point strictly within ``radius`` of ``p`` (stays in the space)."""
        raise NotImplementedError

    def grid(self, density: float) -> tuple:
        """Deterministic audit grid. For one-dimensional spaces ``density``
        is points per unit length; in higher dimension the per-axis count is
        ``round(length * density ** (1/dim))`` so the total stays near the
        budget."""
        raise NotImplementedError

    def net(self, resolution: float) -> tuple:
        """Deterministic finite set covering the space within ``resolution``."""
        raise NotImplementedError


class EuclideanBox(MetricSpace):
    """A compact axis-aligned box in R^dim with the Euclidean metric."""

    kind = "euclidean"

    def __init__(self, dim: int, box: Sequence[Sequence[float]]):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if len(box) != dim:
            raise ValueError("box must give one [lo, hi] interval per axis")
        lo = np.array([float(b[0]) for b in box])
        hi = np.array([float(b[1]) for b in box])
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("bounding box must be compact (finite bounds)")
        if np.any(hi < lo):
            raise ValueError("box intervals must satisfy lo <= hi")
        self.dim = dim
        self.lo = lo
        self.hi = hi

    def as_array(self, p) -> np.ndarray:
        a = np.asarray(p, dtype=float)
        if a.shape != (self.dim,):
            a = a.reshape(self.dim)
        return a

    def as_point(self, a) -> tuple:
        return tuple(float(v) for v in np.asarray(a).reshape(self.dim))

    def contains_point(self, p, tol: float = 1e-12) -> bool:
        a = self.as_array(p)
        return bool(np.all(a >= self.lo - tol) and np.all(a <= self.hi + tol))

    def clip(self, a: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(a, self.lo), self.hi)

    def distance(self, p, q) -> float:
        return float(np.linalg.norm(self.as_array(p) - self.as_array(q)))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def sample_point(self, rng):
        return self.as_point(self.lo + rng.random(self.dim) * (self.hi - self.lo))

    def perturb(self, rng, p, radius: float):
        a = self.as_array(p)
        direction = rng.normal(size=self.dim)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            return self.as_point(a)
        step = 0.999 * radius * rng.random() ** (1.0 / self.dim)
        # per-axis clipping never increases the distance to an in-box center
        return self.as_point(self.clip(a + direction / norm * step))

    def _axis_counts(self, density: float) -> list[int]:
        lengths = self.hi - self.lo
        if self.dim == 1:
            return [max(2, int(round(density * max(lengths[0], 1e-12))))]
        per_unit = density ** (1.0 / self.dim)
        return [max(2, int(round(per_unit * max(l, 1e-12)))) for l in lengths]

    def grid(self, density: float) -> tuple:
        axes = [np.linspace(self.lo[i], self.hi[i], n)
                for i, n in enumerate(self._axis_counts(density))]
        return tuple(itertools.product(*(map(float, ax) for ax in axes)))

    def grid_array(self, density: float) -> np.ndarray:
        return np.array(self.grid(density), dtype=float).reshape(-1, self.dim)

    def net(self, resolution: float) -> tuple:
        # per-axis spacing chosen so the half-diagonal of a cell <= resolution
        spacing = 2.0 * resolution / math.sqrt(self.dim)
        axes = []
        for i in range(self.dim):
            length = self.hi[i] - self.lo[i]
            n = max(2, int(math.ceil(length / spacing)) + 1) if length > 0 else 1
            axes.append(np.linspace(self.lo[i], self.hi[i], n))
        return tuple(itertools.product(*(map(float, ax) for ax in axes)))


class DiscreteSpace(MetricSpace):
    """A finite labeled set with the 0/1 discrete metric."""

    kind = "discrete"

    def __init__(self, points: Sequence):
        if not points:
            raise ValueError("discrete space needs at least one point")
        self.points = tuple(points)
        self._index = {p: i for i, p in enumerate(self.points)}
        if len(self._index) != len(self.points):
            raise ValueError("discrete points must be distinct")

    def distance(self, p, q) -> float:
        return 0.0 if p == q else 1.0

    def min_positive_distance(self) -> float:
        return 1.0

    def diameter(self) -> float:
        return 1.0 if len(self.points) > 1 else 0.0

    def sample_point(self, rng):
        return self.points[int(rng.integers(len(self.points)))]

    def perturb(self, rng, p, radius: float):
        if radius <= 1.0:
            return p
        return self.sample_point(rng)

    def grid(self, density: float) -> tuple:
        return self.points

    def net(self, resolution: float) -> tuple:
        return self.points


@dataclass(frozen=True, order=True)
class TreePoint:
    """Canonical point of a metric tree.

    Vertex points use ``u == v`` and ``t == 0``; interior edge points keep
    ``u < v`` with ``t`` the distance from ``u``. Construct through
    ``MetricTree.point`` so equality and ordering stay consistent.
    """

    u: str
    v: str
    t: float

    def is_vertex(self) -> bool:
        return self.u == self.v


class MetricTree(MetricSpace):
    """A finite tree with positive edge lengths and geodesic distance."""

    kind = "metric_tree"

    def __init__(self, vertices: Sequence[str], edges: Sequence[tuple]):
        self.vertices = tuple(str(v) for v in vertices)
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ValueError("tree vertices must be distinct")
        self.edge_length: dict[tuple[str, str], float] = {}
        adjacency: dict[str, list[tuple[str, float]]] = {v: [] for v in self.vertices}
        for u, v, length in edges:
            u, v, length = str(u), str(v), float(length)
            if length <= 0:
                raise ValueError("edge lengths must be positive")
            if u not in vset or v not in vset:
                raise ValueError(f"edge endpoint missing from vertex list: {u}-{v}")
            a, b = (u, v) if u < v else (v, u)
            self.edge_length[(a, b)] = length
            adjacency[u].append((v, length))
            adjacency[v].append((u, length))
        if len(edges) != len(self.vertices) - 1:
            raise DisconnectedTree("a tree on n vertices needs exactly n-1 edges")
        self._adjacency = adjacency
        self._vertex_dist = self._all_vertex_distances()

    def _all_vertex_distances(self) -> dict[str, dict[str, float]]:
        dists = {}
        for root in self.vertices:
            d = {root: 0.0}
            stack = [root]
            while stack:
                cur = stack.pop()
                for nxt, length in self._adjacency[cur]:
                    if nxt not in d:
                        d[nxt] = d[cur] + length
                        stack.append(nxt)
            if len(d) != len(self.vertices):
                raise DisconnectedTree("tree is not connected")
            dists[root] = d
        return dists

    # -- point handling ------------------------------------------------------

    def vertex(self, name: str) -> TreePoint:
        if name not in self._adjacency:
            raise ValueError(f"unknown vertex {name!r}")
        return TreePoint(name, name, 0.0)

    def point(self, u: str, v: str, t: float, snap: float = 1e-12) -> TreePoint:
        """Canonical point at distance ``t`` from ``u`` along edge ``u``-``v``."""
        if u == v:
            return self.vertex(u)
        a, b = (u, v) if u < v else (v, u)
        length = self.edge_length.get((a, b))
        if length is None:
            raise ValueError(f"no edge {u}-{v}")
        if u > v:
            t = length - t
        if t < -snap or t > length + snap:
            raise ValueError("edge parameter out of range")
        if t <= snap:
            return self.vertex(a)
        if t >= length - snap:
            return self.vertex(b)
        return TreePoint(a, b, float(t))

    def _vertex_distance(self, a: str, b: str) -> float:
        return self._vertex_dist[a][b]

    def distance(self, p: TreePoint, q: TreePoint) -> float:
        if p == q:
            return 0.0
        if p.is_vertex() and q.is_vertex():
            return self._vertex_distance(p.u, q.u)
        if not p.is_vertex() and not q.is_vertex() and (p.u, p.v) == (q.u, q.v):
            direct = abs(p.t - q.t)
            # in the tree the within-edge path is always the geodesic
            return direct
        best = math.inf
        for ep, dp in self._exit_costs(p):
            for eq, dq in self._exit_costs(q):
                best = min(best, dp + self._vertex_distance(ep, eq) + dq)
        return best

    def _exit_costs(self, p: TreePoint) -> list[tuple[str, float]]:
        if p.is_vertex():
            return [(p.u, 0.0)]
        length = self.edge_length[(p.u, p.v)]
        return [(p.u, p.t), (p.v, length - p.t)]

    def geodesic_point(self, p: TreePoint, q: TreePoint, s: float) -> TreePoint:
        """The point at distance ``s`` from ``p`` on the geodesic toward ``q``."""
        total = self.distance(p, q)
        if s <= 0 or total == 0.0:
            return p
        if s >= total:
            return q
        segments = self._geodesic_segments(p, q)
        walked = 0.0
        for (u, v, lo, hi) in segments:
            seg_len = abs(hi - lo)
            if walked + seg_len >= s - 1e-15:
                frac = (s - walked) / seg_len
                t = lo + (hi - lo) * frac
                return self.point(u, v, t) if u < v else self.point(
                    v, u, self.edge_length[(v, u)] - t)
            walked += seg_len
        return q

    def _geodesic_segments(self, p: TreePoint, q: TreePoint):
        """Geodesic as (u, v, t_from, t_to) pieces in canonical edge coords."""
        if not p.is_vertex() and not q.is_vertex() and (p.u, p.v) == (q.u, q.v):
            return [(p.u, p.v, p.t, q.t)]
        best = None
        for ep, dp in self._exit_costs(p):
            for eq, dq in self._exit_costs(q):
                cost = dp + self._vertex_distance(ep, eq) + dq
                if best is None or cost < best[0] - 1e-15:
                    best = (cost, ep, eq)
        _, ep, eq = best
        segs = []
        if not p.is_vertex():
            length = self.edge_length[(p.u, p.v)]
            segs.append((p.u, p.v, p.t, 0.0 if ep == p.u else length))
        cur = ep
        for nxt in self._vertex_path(ep, eq):
            a, b = (cur, nxt) if cur < nxt else (nxt, cur)
            length = self.edge_length[(a, b)]
            segs.append((a, b, 0.0 if cur == a else length, length if cur == a else 0.0))
            cur = nxt
        if not q.is_vertex():
            length = self.edge_length[(q.u, q.v)]
            segs.append((q.u, q.v, 0.0 if eq == q.u else length, q.t))
        return segs

    def _vertex_path(self, a: str, b: str) -> list[str]:
        """Vertices after ``a`` on the unique path to ``b``."""
        if a == b:
            return []
        parent = {a: None}
        stack = [a]
        while stack:
            cur = stack.pop()
            if cur == b:
                break
            for nxt, _ in self._adjacency[cur]:
                if nxt not in parent:
                    parent[nxt] = cur
                    stack.append(nxt)
        path = []
        cur = b
        while cur != a:
            path.append(cur)
            cur = parent[cur]
        return list(reversed(path))

    def total_edge_length(self) -> float:
        return sum(self.edge_length.values())

    def diameter(self) -> float:
        verts = self.vertices
        return max(self._vertex_dist[a][b] for a in verts for b in verts)

    def sample_point(self, rng):
        edges = sorted(self.edge_length)
        lengths = np.array([self.edge_length[e] for e in edges])
        weights = lengths / lengths.sum()
        idx = int(rng.choice(len(edges), p=weights))
        u, v = edges[idx]
        return self.point(u, v, float(rng.random() * lengths[idx]))

    def perturb(self, rng, p, radius: float):
        target = self.sample_point(rng)
        d = self.distance(p, target)
        if d == 0.0:
            return p
        step = min(0.999 * radius * rng.random(), d)
        return self.geodesic_point(p, target, step)

    def edge_points(self, spacing: float) -> tuple:
        pts = [self.vertex(v) for v in sorted(self.vertices)]
        for (u, v) in sorted(self.edge_length):
            length = self.edge_length[(u, v)]
            n = int(math.ceil(length / spacing))
            for j in range(1, n):
                pts.append(self.point(u, v, length * j / n))
        seen, out = set(), []
        for p in pts:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return tuple(out)

    def grid(self, density: float) -> tuple:
        return self.edge_points(1.0 / max(density, 1e-9))

    def net(self, resolution: float) -> tuple:
        return self.edge_points(resolution)

    def ball_net(self, center: TreePoint, radius: float, resolution: float) -> tuple:
        return tuple(p for p in self.edge_points(resolution)
                     if self.distance(center, p) <= radius)


# ---------------------------------------------------------------------------
# Formal convex combinations
# ---------------------------------------------------------------------------

def point_sort_key(p):
    if isinstance(p, TreePoint):
        return (p.u, p.v, p.t)
    if isinstance(p, tuple):
        return p
    return (p,)


@dataclass(frozen=True)
class FormalConvexCombination:
    """Finite-support weighted point list in canonical form.

    Canonical means: strictly positive weights, duplicate points merged,
    points sorted, weights renormalized to sum 1 within 1e-12. Built through
    ``make_combination``; do not construct directly.
    """

    weights: tuple
    points: tuple

    def __len__(self) -> int:
        return len(self.weights)

    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)


def make_combination(weights: Iterable[float], points: Iterable) -> FormalConvexCombination:
    """Canonicalize a weighted point list.

    Zero weights are dropped, duplicate points merged (their weights summed
    in descending order so merging is permutation-invariant bit for bit),
    and the result renormalized to sum exactly 1 within 1e-12.
    """
    w = [float(x) for x in weights]
    pts = list(points)
    if len(w) != len(pts):
        raise LengthMismatch(f"{len(w)} weights vs {len(pts)} points")
    for x in w:
        if x < 0.0:
            raise NegativeWeight(f"negative weight {x}")
    total = math.fsum(w)
    if abs(total - 1.0) > WEIGHT_SUM_INPUT_TOL:
        raise WeightSumOutOfTolerance(f"weights sum to {total}, expected 1")
    groups: dict = {}
    for x, p in zip(w, pts):
        if x == 0.0:
            continue
        groups.setdefault(p, []).append(x)
    if not groups:
        raise WeightSumOutOfTolerance("all weights are zero")
    ordered = sorted(groups, key=point_sort_key)
    merged = [math.fsum(sorted(groups[p], reverse=True)) for p in ordered]
    norm = math.fsum(merged)
    if abs(norm - 1.0) > 1e-13:  # skip when already canonical: idempotent bitwise
        merged = [x / norm for x in merged]
    return FormalConvexCombination(tuple(merged), tuple(ordered))


def support(c: FormalConvexCombination) -> frozenset:
    """The set of points carrying positive weight."""
    return frozenset(c.points)


def combination_in(c: FormalConvexCombination, predicate: Callable) -> bool:
    """Whether every support point satisfies ``predicate`` (c in Delta(A))."""
    return all(predicate(p) for p in c.points)


# ---------------------------------------------------------------------------
# Barycentric coordinates
# ---------------------------------------------------------------------------

COORD_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SimplexCoords:
    """A barycentric coordinate vector: entries >= 0 summing to 1."""

    coords: tuple

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float)
        if arr.size == 0:
            raise ValueError("coordinates must be nonempty")
        if np.any(arr < -COORD_SUM_TOL):
            raise ValueError("barycentric coordinates must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise ValueError(f"coordinates sum to {arr.sum()}, expected 1")

    @staticmethod
    def from_array(arr) -> "SimplexCoords":
        a = np.maximum(np.asarray(arr, dtype=float), 0.0)
        total = float(a.sum())
        if total <= 0:
            raise ValueError("cannot normalize an all-zero coordinate vector")
        return SimplexCoords(tuple(float(x) for x in a / total))

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self) -> int:
        return len(self.coords)


# ---------------------------------------------------------------------------
# Balls
# ---------------------------------------------------------------------------

def ball(space: MetricSpace, center_set: Iterable, e: Entourage) -> Callable:
    """Open-ball membership predicate: x is strictly within ``e.radius`` of
    some center. Matches the open covers used by the selection engine."""
    centers = list(center_set)
    if not centers:
        raise EmptySet("ball needs a nonempty center set")
    radius = e.radius

    def predicate(x) -> bool:
        return min(space.distance(x, c) for c in centers) < radius

    return predicate


def set_distance(space: MetricSpace, x, points: Iterable) -> float:
    """Distance from ``x`` to a finite point set."""
    ds = [space.distance(x, p) for p in points]
    if not ds:
        raise EmptySet("distance to an empty set")
    return min(ds)
