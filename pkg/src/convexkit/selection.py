"""Constructive selection pipeline.

The chain is: finite ball cover of the target region, a distance-based
partition of unity subordinate to the cover's fibers, and the combination
of cover centers under the partition weights. Accuracy certificates are
audit-grid measurements, never symbolic claims. The iterated scheme reuses
the almost-selection step against shrinking ball intersections and certifies
the Cauchy increments stage by stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .convexity import DISCRETE_Y_VECTOR_Z, ConvexityStructure
from .core import (
    Entourage,
    EuclideanBox,
    MetricSpace,
    SimplexCoords,
    make_combination,
    point_sort_key,
)
from .errors import (
    ConvexkitError,
    CoverageFailure,
    DivisionByZeroCover,
    EmptyIntersection,
    ResidualAboveTolerance,
    ScheduleNotHalving,
)
from .multifunction import Multifunction, _dedup_rows

GREEDY_PRUNE_LIMIT = 4096  # above this, cell-hash dedup replaces greedy pruning


# ---------------------------------------------------------------------------
# samplers for the cover's target region
# ---------------------------------------------------------------------------

class ExplicitSampler:
    """A fixed finite candidate set."""

    def __init__(self, points: Sequence):
        self._points = tuple(points)

    def points(self, resolution: float):
        return self._points


class SpaceSampler:
    """Candidate centers from a whole-space net."""

    def __init__(self, space: MetricSpace):
        self.space = space

    def points(self, resolution: float):
        return self.space.net(resolution)


class ValuesSampler:
    """Candidate centers from the multifunction's value region.

    Uses the compiled value-region net when the map provides one; otherwise
    unions value nets over domain probes. Probe spacing can be forced finer
    for value sets that move quickly relative to the requested resolution.
    """

    def __init__(self, T: Multifunction, probe_resolution: float | None = None):
        self.T = T
        self.probe_resolution = probe_resolution

    def points(self, resolution: float):
        if self.T.values_region_net is not None:
            return self.T.values_region_net(resolution)
        probe_res = self.probe_resolution if self.probe_resolution else resolution
        probes = self.T.domain.net(probe_res)
        euclid = isinstance(self.T.codomain, EuclideanBox)
        if euclid:
            nets = [np.atleast_2d(self.T.eval_net(p, resolution)) for p in probes]
            if not nets:
                return np.zeros((0, 1))
            merged = np.concatenate(nets, axis=0)
            return _dedup_rows(merged, resolution / 2.0)
        seen, out = set(), []
        for p in probes:
            for q in self.T.eval_net(p, resolution):
                if q not in seen:
                    seen.add(q)
                    out.append(q)
        return tuple(out)


def as_sampler(y_prime, T: Multifunction):
    if y_prime is None:
        return ValuesSampler(T)
    if hasattr(y_prime, "points") and callable(y_prime.points):
        return y_prime
    if isinstance(y_prime, MetricSpace):
        return SpaceSampler(y_prime)
    return ExplicitSampler(y_prime)


# ---------------------------------------------------------------------------
# ball covers
# ---------------------------------------------------------------------------

@dataclass
class BallCover:
    """Finite centers with radius W; fiber k is the set of domain points whose
    value set comes strictly within W of center k. Fiber distances use the
    multifunction's exact value distance when available and the net rule at
    resolution W/4 otherwise (same convention as ``meets_ball``)."""

    multifunction: Multifunction
    centers: tuple
    radius: Entourage
    _distance_fn: Callable = field(repr=False)
    _center_array: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self._memo: dict = {}

    def fiber_distances(self, x) -> np.ndarray:
        key = x if isinstance(x, (tuple, str)) else tuple(np.asarray(x).reshape(-1))
        hit = self._memo.get(key)
        if hit is None:
            hit = self._distance_fn(x)
            self._memo[key] = hit
        return hit

    def fiber(self, k: int) -> Callable:
        return lambda x: bool(self.fiber_distances(x)[k] < self.radius.radius)

    @property
    def fibers(self):
        return [self.fiber(k) for k in range(len(self.centers))]


def _center_distance_fn(T: Multifunction, centers: tuple, W: float):
    euclid = isinstance(T.codomain, EuclideanBox)
    if euclid:
        C = np.array([np.asarray(c, dtype=float).reshape(-1) for c in centers])
        if T.value_distance_many is not None:
            return (lambda x: T.value_distance_many(x, C)), C

        def net_based(x):
            pts = np.atleast_2d(T.eval_net(x, W / 4.0))
            out = np.full(len(C), np.inf)
            chunk = max(1, int(2_000_000 // max(len(C), 1)))
            for i in range(0, len(pts), chunk):
                block = pts[i:i + chunk]
                d = np.linalg.norm(block[:, None, :] - C[None, :, :], axis=2)
                out = np.minimum(out, d.min(axis=0))
            return out

        return net_based, C

    space = T.codomain

    def generic(x):
        if T.value_distance is not None:
            return np.array([T.value_distance(x, c) for c in centers])
        pts = T.net_points(x, W / 4.0)
        return np.array([min(space.distance(p, c) for p in pts) for c in centers])

    return generic, None


def _prune_candidates(candidates, spacing: float, space_distance, euclid: bool):
    """Greedy minimum-distance pruning, or cell-hash dedup past the size limit.
    The threshold carries a relative slack so grid points a rounding error
    inside the spacing are not dropped asymmetrically."""
    threshold = spacing * (1.0 - 1e-9)
    if euclid:
        arr = np.atleast_2d(np.asarray(candidates, dtype=float))
        if len(arr) > GREEDY_PRUNE_LIMIT:
            # cell diagonal <= spacing keeps the drop distance within the
            # same budget the greedy path guarantees
            cell = spacing / math.sqrt(max(arr.shape[1], 1))
            return [tuple(map(float, row)) for row in _dedup_rows(arr, cell)]
        kept: list = []
        kept_arr = np.zeros((0, arr.shape[1]))
        for row in arr:
            if len(kept) == 0 or np.min(np.linalg.norm(kept_arr - row, axis=1)) >= threshold:
                kept.append(tuple(map(float, row)))
                kept_arr = np.vstack([kept_arr, row])
        return kept
    kept = []
    for p in candidates:
        if all(space_distance(p, q) >= threshold for q in kept):
            kept.append(p)
    return kept


def build_cover(T: Multifunction, y_prime, W: Entourage,
                audit_points: Sequence | None = None,
                *, prune_empty_fibers: bool = True) -> BallCover:
    """Finite center set covering the target region at radius W.

    Candidates come from the sampler at resolution W/2, are pruned to a W/2
    net (greedy order for small candidate sets), centers whose fibers miss
    every audit point are dropped, and the remaining fibers must cover the
    audit grid.
    """
    sampler = as_sampler(y_prime, T)
    candidates = sampler.points(W.radius / 2.0)
    if isinstance(candidates, np.ndarray):
        candidate_list = [tuple(map(float, row)) for row in np.atleast_2d(candidates)]
        euclid = True
    else:
        candidate_list = list(candidates)
        euclid = isinstance(T.codomain, EuclideanBox)
    if not candidate_list:
        raise CoverageFailure("the target-region sampler produced no candidates")

    centers = _prune_candidates(candidate_list, W.radius / 2.0,
                                T.codomain.distance, euclid)
    centers = tuple(sorted(centers, key=point_sort_key))

    if audit_points is None:
        audit_points = T.domain.grid(256)
    audit_points = list(audit_points)

    dist_fn, C = _center_distance_fn(T, centers, W.radius)
    # pruning slack: a center whose distance equals W up to representation
    # error must not be dropped on one side of a symmetric problem only
    keep_radius = W.radius * (1.0 + 1e-9)
    keep_mask = np.zeros(len(centers), dtype=bool)
    worst_x = None
    for x in audit_points:
        d = dist_fn(x)
        keep_mask |= d < keep_radius
        if len(d) == 0 or float(d.min()) >= W.radius:
            if worst_x is None:
                worst_x = x
    if worst_x is not None:
        raise CoverageFailure(
            f"audit point {worst_x} meets no fiber at radius {W.radius}: "
            "hypothesis violation or too-coarse net")
    if prune_empty_fibers and not keep_mask.all():
        centers = tuple(c for c, k in zip(centers, keep_mask) if k)
        dist_fn, C = _center_distance_fn(T, centers, W.radius)

    return BallCover(T, centers, W, dist_fn, C)


# ---------------------------------------------------------------------------
# partition of unity
# ---------------------------------------------------------------------------

@dataclass
class PartitionOfUnity:
    """Normalized hat bumps over the cover's fiber distances.

    The bump for center k at x is max(0, 1 - d_k(x)/W) where d_k(x) is the
    distance from center k to the value set at x; normalization divides by
    the bump sum. The weight is zero exactly when x is outside fiber k.
    """

    cover: BallCover

    def weights(self, x) -> np.ndarray:
        d = self.cover.fiber_distances(x)
        h = np.maximum(0.0, 1.0 - d / self.cover.radius.radius)
        s = float(h.sum())
        if s <= 0.0:
            raise DivisionByZeroCover(f"all bumps vanish at {x}")
        return h / s

    def coords(self, x) -> SimplexCoords:
        return SimplexCoords(tuple(float(v) for v in self.weights(x)))

    @property
    def functions(self):
        def make(k):
            return lambda x: float(self.weights(x)[k])

        return [make(k) for k in range(len(self.cover.centers))]


def partition_of_unity(cover: BallCover) -> PartitionOfUnity:
    return PartitionOfUnity(cover)


# ---------------------------------------------------------------------------
# selection results
# ---------------------------------------------------------------------------

@dataclass
class SelectionResult:
    """A computed (almost) selection with its audit certificate."""

    kind: str                      # "almost" | "continuous"
    evaluate: Callable
    support_points: tuple
    coords: Callable
    accuracy: float
    residual_stats: dict
    status: str = "ok"
    lipschitz_estimate: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def to_certificate(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "accuracy": self.accuracy,
            "n_centers": len(self.support_points),
            "residual_stats": self.residual_stats,
            "lipschitz_estimate": self.lipschitz_estimate,
            **{k: v for k, v in self.extras.items() if _jsonable(v)},
        }


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, list, dict, type(None)))


def _assembler(structure: ConvexityStructure, centers: tuple):
    vs = structure.value_space
    if isinstance(vs, EuclideanBox):
        if structure.target_topology == DISCRETE_Y_VECTOR_Z:
            mat = np.array([np.asarray(
                structure.combine_fn(make_combination([1.0], [c])), dtype=float)
                for c in centers])
        elif structure.space.kind == "euclidean":
            mat = np.array([vs.as_array(c) for c in centers])
        else:
            mat = None
        if mat is not None:
            return lambda w: vs.as_point(w @ mat)

    def assemble(w):
        nz = np.nonzero(w > 0.0)[0]
        pts = [centers[i] for i in nz]
        return structure.combine_fn(make_combination([float(w[i]) for i in nz], pts))

    return assemble


def _memoized(fn):
    memo: dict = {}

    def wrapped(x):
        key = x if isinstance(x, (tuple, str)) else tuple(np.asarray(x).reshape(-1))
        hit = memo.get(key)
        if hit is None:
            hit = fn(x)
            memo[key] = hit
        return hit

    wrapped.memo = memo
    return wrapped


def _value_residual(structure: ConvexityStructure, T: Multifunction,
                    x, g_x, net_resolution: float) -> float:
    """Distance from g(x) to the hull of the value set at x."""
    if T.value_shape_tag == "convex" and T.value_distance is not None:
        return float(T.value_distance(x, g_x))
    gens = []
    seen = set()
    for p in T.net_points(x, net_resolution):
        if p not in seen:
            seen.add(p)
            gens.append(p)
    return float(structure.hull_fn(tuple(gens)).distance(g_x))


def _lipschitz_estimate(space: MetricSpace, xs, values, value_distance) -> Optional[float]:
    best = None
    for a, b, va, vb in zip(xs, xs[1:], values, values[1:]):
        d = space.distance(a, b) if not isinstance(space, EuclideanBox) else \
            float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
        if d <= 0:
            continue
        ratio = value_distance(va, vb) / d
        best = ratio if best is None else max(best, ratio)
    return best


def almost_selection(structure: ConvexityStructure, T: Multifunction,
                     y_prime=None, U: Entourage | None = None, *,
                     audit_density: float = 1000.0,
                     audit_points: Sequence | None = None,
                     audit: bool = True) -> SelectionResult:
    """A function x -> combine(partition weights, cover centers) whose values
    stay strictly within U of the hull of the value set, certified on the
    audit grid. Centers default to a net of the map's own value region."""
    if U is None:
        raise ValueError("an accuracy entourage U is required")
    W = structure.modulus(U)
    if audit_points is None:
        audit_points = T.domain.grid(audit_density)
    audit_points = list(audit_points)
    cover = build_cover(T, y_prime, W, audit_points)
    pou = partition_of_unity(cover)
    assemble = _assembler(structure, cover.centers)

    def _evaluate(x):
        return assemble(pou.weights(x))

    evaluate = _memoized(_evaluate)

    stats = {"max": 0.0, "mean": 0.0, "count": 0}
    lipschitz = None
    extras: dict = {"W": W.radius, "U": U.radius}
    if audit:
        residuals = []
        values = []
        for x in audit_points:
            g_x = evaluate(x)
            values.append(g_x)
            residuals.append(_value_residual(structure, T, x, g_x, W.radius / 4.0))
        res = np.array(residuals)
        stats = {"max": float(res.max()), "mean": float(res.mean()),
                 "count": int(res.size)}
        lipschitz = _lipschitz_estimate(T.domain, audit_points, values,
                                        structure.value_distance)
        if structure.admissible(cover.centers):
            confinement = max(
                float(structure.hull_fn(cover.centers).distance(v)) for v in values)
            extras["range_confinement_max"] = confinement
        result = SelectionResult("almost", evaluate, cover.centers, pou.coords,
                                 U.radius, stats, "ok", lipschitz, extras)
        if stats["max"] >= U.radius:
            raise ResidualAboveTolerance(
                f"almost-selection residual {stats['max']} reached accuracy "
                f"{U.radius}: hypothesis violation", best=result)
        return result
    return SelectionResult("almost", evaluate, cover.centers, pou.coords,
                           U.radius, stats, "ok", lipschitz, extras)


# ---------------------------------------------------------------------------
# iterated (continuous) selection
# ---------------------------------------------------------------------------

def _ball_intersection(T: Multifunction, center_fn: Callable, radius: float,
                       pad: float) -> Multifunction:
    """Values of T restricted to a moving ball around center_fn(x), fattened
    by ``pad`` so the intersection net is never starved by discretization.

    The distance oracle is max(dist to T(x), dist to the ball): a lower bound
    for the true intersection distance, which keeps bump supports inside both
    constraint fibers separately; that is exactly what the iteration's
    accuracy and increment audits consume.
    """
    euclid = isinstance(T.codomain, EuclideanBox)
    box = T.codomain if euclid else None

    def _center(x):
        c = center_fn(x)
        return np.asarray(c, dtype=float).reshape(-1) if euclid else c

    def eval_net(x, eps):
        c = _center(x)
        if euclid:
            spacing = min(eps, pad)
            half = radius + pad
            axes = [np.arange(ci - half, ci + half + spacing / 2.0, spacing)
                    for ci in c]
            grids = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=1)
            near = np.linalg.norm(pts - c, axis=1) < radius + pad
            pts = pts[near]
            if T.value_distance_many is not None:
                keep = T.value_distance_many(x, pts) <= 1e-12
            else:
                keep = np.array([T.contains(x, p, 1e-12) for p in pts], dtype=bool)
            pts = pts[keep]
            if len(pts) == 0:
                fallback = np.atleast_2d(T.eval_net(x, eps))
                near = np.linalg.norm(fallback - c, axis=1) < radius + pad + eps
                pts = fallback[near]
            if len(pts) == 0:
                raise EmptyIntersection(
                    f"value set at {x} misses the ball of radius {radius}")
            return pts
        pts = [p for p in T.net_points(x, min(eps, pad))
               if T.codomain.distance(p, center_fn(x)) < radius + pad]
        if not pts:
            raise EmptyIntersection(
                f"value set at {x} misses the ball of radius {radius}")
        return tuple(pts)

    def value_distance(x, p):
        if euclid:
            d_center = float(np.linalg.norm(
                np.asarray(p, dtype=float).reshape(-1) - _center(x)))
        else:
            d_center = T.codomain.distance(p, center_fn(x))
        return max(T.distance_to_value(x, p), max(0.0, d_center - radius))

    value_distance_many = None
    if euclid and T.value_distance_many is not None:
        def value_distance_many(x, P):
            P = np.atleast_2d(np.asarray(P, dtype=float))
            d_ball = np.maximum(0.0, np.linalg.norm(P - _center(x), axis=1) - radius)
            return np.maximum(T.value_distance_many(x, P), d_ball)

    return Multifunction(
        domain=T.domain, codomain=T.codomain,
        eval_net=eval_net,
        contains=lambda x, y, tol: T.contains(x, y, tol)
        and T.codomain.distance(y, center_fn(x)) < radius + pad + tol,
        semicontinuity_tag=T.semicontinuity_tag, value_shape_tag="convex",
        value_distance=value_distance, value_distance_many=value_distance_many,
        name=f"{T.name}|ball",
    )


def _dyadic_net_count(length: float, spacing: float) -> int:
    raw = max(2, int(math.ceil(length / spacing)))
    return 2 ** int(math.ceil(math.log2(raw))) + 1


def michael_selection(structure: ConvexityStructure, T: Multifunction,
                      schedule: Sequence[Entourage], max_iter: int | None = None,
                      *, audit_density: float = 1000.0) -> SelectionResult:
    """Iterated almost selections under a halving radius schedule.

    Stage n selects within radius schedule[n] of the previous iterate
    intersected with the values, at accuracy schedule[n+1]. The certificate
    records per-stage accuracy (distance to the value set stays below the
    next radius) and the Cauchy increments (consecutive iterates move less
    than the previous radius).
    """
    if not structure.convex_uniform_base:
        raise ConvexkitError(
            f"structure {structure.name!r} does not declare a convex uniform base")
    radii = [e.radius for e in schedule]
    if len(radii) < 2:
        raise ScheduleNotHalving("schedule needs at least two radii")
    for a, b in zip(radii, radii[1:]):
        if 2.0 * b > a + 1e-15:
            raise ScheduleNotHalving(f"2*{b} > {a}: radii must at least halve")

    audit_points = list(T.domain.grid(audit_density))
    n_stages = len(radii) - 1
    if max_iter is not None:
        n_stages = min(n_stages, max_iter)
    status = "ok" if n_stages == len(radii) - 1 else "max_iter"

    evaluate = None
    prev_values = None
    lipschitz = 2.0
    stage_rows = []
    increments = []
    sel = None
    for n in range(1, n_stages + 1):
        r_n = radii[n - 1]
        u_next = radii[n]
        if n == 1:
            G = T
            y_prime = ValuesSampler(T)
        else:
            G = _ball_intersection(T, evaluate, r_n, pad=r_n / 4.0)
            w_cover = structure.modulus(Entourage(u_next)).radius
            probe_spacing = w_cover / (2.0 * (1.0 + min(max(lipschitz, 1.0), 8.0)))
            y_prime = _DyadicProbeSampler(G, probe_spacing)
        sel = almost_selection(structure, G, y_prime, Entourage(u_next),
                               audit_points=audit_points, audit=False)
        evaluate = sel.evaluate
        values = [evaluate(x) for x in audit_points]
        acc = max(T.distance_to_value(x, v, u_next / 4.0)
                  for x, v in zip(audit_points, values))
        row = {"stage": n, "radius": r_n, "accuracy_radius": u_next,
               "accuracy_measured": float(acc), "n_centers": len(sel.support_points)}
        if prev_values is not None:
            inc = max(structure.value_distance(a, b)
                      for a, b in zip(values, prev_values))
            row["increment"] = float(inc)
            increments.append(float(inc))
        stage_rows.append(row)
        est = _lipschitz_estimate(T.domain, audit_points, values,
                                  structure.value_distance)
        lipschitz = est if est is not None else lipschitz
        prev_values = values

    final_radius = radii[n_stages]
    res = np.array([T.distance_to_value(x, v, final_radius / 4.0)
                    for x, v in zip(audit_points, prev_values)])
    stats = {"max": float(res.max()), "mean": float(res.mean()),
             "count": int(res.size)}
    tail = sum(radii[n_stages:])
    return SelectionResult(
        kind="continuous",
        evaluate=evaluate,
        support_points=sel.support_points,
        coords=sel.coords,
        accuracy=final_radius + 1e-6,
        residual_stats=stats,
        status=status,
        lipschitz_estimate=lipschitz,
        extras={"schedule": radii, "stages": stage_rows,
                "increments": increments, "tail_bound": tail},
    )


class _DyadicProbeSampler:
    """Values sampler whose probe grid counts are powers of two plus one, so
    successive stages reuse memoized evaluations of earlier iterates."""

    def __init__(self, T: Multifunction, probe_spacing: float):
        self.T = T
        self.probe_spacing = probe_spacing

    def points(self, resolution: float):
        domain = self.T.domain
        if isinstance(domain, EuclideanBox) and domain.dim == 1:
            n = _dyadic_net_count(float(domain.hi[0] - domain.lo[0]),
                                  self.probe_spacing)
            probes = [(float(v),) for v in
                      np.linspace(domain.lo[0], domain.hi[0], n)]
        else:
            probes = domain.net(self.probe_spacing)
        if isinstance(self.T.codomain, EuclideanBox):
            nets = [np.atleast_2d(self.T.eval_net(p, resolution)) for p in probes]
            return _dedup_rows(np.concatenate(nets, axis=0), resolution / 2.0)
        seen, out = set(), []
        for p in probes:
            for q in self.T.eval_net(p, resolution):
                if q not in seen:
                    seen.add(q)
                    out.append(q)
        return tuple(out)
