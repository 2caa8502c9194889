"""Hull representations and exact-ish distance computations.

Euclidean polytope distances use Wolfe's min-norm-point algorithm (finitely
convergent active-set scheme), so membership tests at 1e-9 tolerance are
meaningful in any dimension. Tree hulls use the closed form for distance to
a geodesic segment: dist(x,[a,b]) = max(0, (d(x,a)+d(x,b)-d(a,b))/2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import EuclideanBox, MetricTree, TreePoint

DEFAULT_HULL_TOL = 1e-9


def min_norm_point(points: np.ndarray, tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """The minimum-norm point of the convex hull of the rows of ``points``."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    P = np.unique(P, axis=0)
    m = P.shape[0]
    norms2 = np.einsum("ij,ij->i", P, P)
    scale = max(1.0, float(norms2.max()))
    j = int(np.argmin(norms2))
    active = [j]
    lam = np.array([1.0])
    x = P[j].copy()
    for _ in range(max_iter):
        dots = P @ x
        jnew = int(np.argmin(dots))
        if float(x @ x) - float(dots[jnew]) <= tol * scale:
            break
        if jnew in active:
            break
        active.append(jnew)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[active]
            k = len(active)
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = Q @ Q.T
            A[:k, k] = 1.0
            A[k, :k] = 1.0
            b = np.zeros(k + 1)
            b[k] = 1.0
            try:
                alpha = np.linalg.solve(A, b)[:k]
            except np.linalg.LinAlgError:
                alpha = np.linalg.lstsq(A, b, rcond=None)[0][:k]
            if np.all(alpha > 1e-14):
                lam = alpha
                x = alpha @ Q
                break
            denom = lam - alpha
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(denom > 1e-18, lam / denom, np.inf)
            steps = steps[alpha <= 1e-14]
            theta = min(1.0, float(steps.min()) if steps.size else 1.0)
            lam = (1.0 - theta) * lam + theta * alpha
            lam[lam < 1e-14] = 0.0
            keep = lam > 0.0
            if not np.any(keep):
                active = [jnew]
                lam = np.array([1.0])
                x = P[jnew].copy()
                break
            active = [a for a, k_ in zip(active, keep) if k_]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ P[active]
    return x


def polytope_distance(vertices: np.ndarray, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Distance from ``x`` to conv(vertices) plus the nearest hull point."""
    V = np.asarray(vertices, dtype=float)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if V.shape[1] == 1:
        lo, hi = float(V.min()), float(V.max())
        p = min(max(float(x[0]), lo), hi)
        return abs(float(x[0]) - p), np.array([p])
    y = min_norm_point(V - x)
    return float(np.linalg.norm(y)), x + y


class HullRepr:
    """Deterministic representation of conv(A) with a tolerant membership test."""

    kind: str = "abstract"
    tolerance: float = DEFAULT_HULL_TOL

    def distance(self, x) -> float:
        raise NotImplementedError

    def contains(self, x, tol: float | None = None) -> bool:
        return self.distance(x) <= (self.tolerance if tol is None else tol)

    def project(self, x):
        raise NotImplementedError

    def sample_net(self, resolution: float) -> tuple:
        """A finite set filling the hull within ``resolution``."""
        raise NotImplementedError


@dataclass
class VertexPolytope(HullRepr):
    """Convex hull of finitely many Euclidean points."""

    vertices: tuple
    tolerance: float = DEFAULT_HULL_TOL
    kind: str = field(default="vertex_polytope", init=False)

    def __post_init__(self):
        self._V = np.array([np.asarray(v, dtype=float) for v in self.vertices])
        if self._V.ndim == 1:
            self._V = self._V.reshape(-1, 1)

    @property
    def dim(self) -> int:
        return self._V.shape[1]

    def distance(self, x) -> float:
        return polytope_distance(self._V, np.asarray(x, dtype=float))[0]

    def project(self, x):
        p = polytope_distance(self._V, np.asarray(x, dtype=float))[1]
        return tuple(float(v) for v in p)

    def sample_net(self, resolution: float) -> tuple:
        lo = self._V.min(axis=0)
        hi = self._V.max(axis=0)
        spacing = 2.0 * resolution / math.sqrt(self.dim)
        axes = []
        for i in range(self.dim):
            n = max(2, int(math.ceil((hi[i] - lo[i]) / max(spacing, 1e-12))) + 1) \
                if hi[i] > lo[i] else 1
            axes.append(np.linspace(lo[i], hi[i], n))
        pts = [tuple(map(float, p)) for p in itertools.product(*axes)
               if self.distance(p) <= resolution * 1e-6 + self.tolerance]
        # vertices always belong, and guarantee nonemptiness for thin hulls
        out = {tuple(map(float, v)) for v in self._V}
        out.update(pts)
        return tuple(sorted(out))


@dataclass
class FiniteSetHull(HullRepr):
    """A hull that is itself a finite point set (discrete-style structures)."""

    points: tuple
    space_distance: Callable
    tolerance: float = DEFAULT_HULL_TOL
    kind: str = field(default="finite_set", init=False)

    def distance(self, x) -> float:
        return min(self.space_distance(x, p) for p in self.points)

    def project(self, x):
        return min(self.points, key=lambda p: self.space_distance(x, p))

    def sample_net(self, resolution: float) -> tuple:
        return tuple(self.points)


@dataclass
class GeodesicHull(HullRepr):
    """Geodesic convex hull in a metric tree: the subtree spanned by the
    generators, i.e. the union of their pairwise geodesics."""

    generators: tuple
    tree: MetricTree
    tolerance: float = DEFAULT_HULL_TOL
    kind: str = field(default="geodesic_hull", init=False)

    def _segment_distance(self, x: TreePoint, a: TreePoint, b: TreePoint) -> float:
        gap = self.tree.distance(x, a) + self.tree.distance(x, b) - self.tree.distance(a, b)
        return max(0.0, 0.5 * gap)

    def distance(self, x) -> float:
        gens = self.generators
        if len(gens) == 1:
            return self.tree.distance(x, gens[0])
        best = math.inf
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                best = min(best, self._segment_distance(x, a, b))
        return best

    def project(self, x):
        gens = self.generators
        if len(gens) == 1:
            return gens[0]
        best = (math.inf, None)
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                d = self._segment_distance(x, a, b)
                if d < best[0] - 1e-15:
                    # foot of x on [a,b] sits at the Gromov product (x|b)_a from a
                    da = 0.5 * (self.tree.distance(x, a)
                                + self.tree.distance(a, b)
                                - self.tree.distance(x, b))
                    da = min(max(da, 0.0), self.tree.distance(a, b))
                    best = (d, self.tree.geodesic_point(a, b, da))
        return best[1]

    def sample_net(self, resolution: float) -> tuple:
        pts = set(self.generators)
        gens = self.generators
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                total = self.tree.distance(a, b)
                n = int(math.ceil(total / max(resolution, 1e-12)))
                for j in range(1, n):
                    pts.add(self.tree.geodesic_point(a, b, total * j / n))
        return tuple(sorted(pts))
