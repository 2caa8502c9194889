"""Evaluable set-valued maps.

A ``Multifunction`` exposes its values only through an epsilon-net oracle
plus a membership predicate; no exact set algebra anywhere. Compiled kinds
additionally carry an exact distance-to-value function, which engines use
for bump weights and residual audits when present. Semicontinuity is a tag:
engines trust it, the ``check_lsc``/``check_usc`` audits sample it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .convexity import ConvexityStructure
from .core import DiscreteSpace, Entourage, EuclideanBox, MetricSpace, MetricTree
from .errors import DomainMismatch, MalformedSpec, NotAdmissible

LSC = "lsc"
USC = "usc"
BOTH = "both"

BREAKPOINT_SNAP = 1e-9  # closed-graph evaluation: x this close to a breakpoint
                        # is evaluated on the breakpoint branch


@dataclass(frozen=True)
class Multifunction:
    """A set-valued map given by net and membership oracles.

    ``eval_net(x, eps)`` returns a finite eps-net of the value set, as an
    ``(n, d)`` array for Euclidean codomains and a tuple of points otherwise.
    Every net point belongs to the value set; nets refine consistently.
    ``value_distance``, when present, is the exact distance from a point to
    the value set and must agree with the nets in the limit.
    """

    domain: MetricSpace
    codomain: MetricSpace
    eval_net: Callable
    contains: Callable
    semicontinuity_tag: str = BOTH
    value_shape_tag: str = "closed"
    single_valued: bool = False
    value_distance: Optional[Callable] = None
    value_distance_many: Optional[Callable] = None
    values_region_net: Optional[Callable] = None
    name: str = "multifunction"

    def is_lsc(self) -> bool:
        return self.semicontinuity_tag in (LSC, BOTH)

    def is_usc(self) -> bool:
        return self.semicontinuity_tag in (USC, BOTH)

    def net_points(self, x, eps: float) -> list:
        net = self.eval_net(x, eps)
        if isinstance(net, np.ndarray):
            return [tuple(float(v) for v in row) for row in net]
        return list(net)

    def distance_to_value(self, x, p, eps: float | None = None) -> float:
        """Distance from p to T(x): exact when available, else via the net."""
        if self.value_distance is not None:
            return float(self.value_distance(x, p))
        eps = eps if eps is not None else 1e-3
        pts = self.net_points(x, eps)
        return min(self.codomain.distance(p, q) for q in pts)


# ---------------------------------------------------------------------------
# net builders
# ---------------------------------------------------------------------------

def interval_net(lo: float, hi: float, eps: float) -> np.ndarray:
    if hi < lo:
        lo, hi = hi, lo
    if hi - lo <= 0.0:
        return np.array([[lo]])
    n = int(math.ceil((hi - lo) / eps)) + 1
    return np.linspace(lo, hi, n).reshape(-1, 1)


def disc_net(center: np.ndarray, radius: float, eps: float) -> np.ndarray:
    if radius <= 0.0:
        return center.reshape(1, 2)
    n_rings = max(1, int(math.ceil(radius / eps)))
    rows = [center.reshape(1, 2)]
    for j in range(1, n_rings + 1):
        rho = radius * j / n_rings
        m = max(1, int(math.ceil(2.0 * math.pi * rho / eps)))
        theta = 2.0 * math.pi * np.arange(m) / m
        ring = center + rho * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        rows.append(ring)
    return np.concatenate(rows, axis=0)


def _dedup_rows(arr: np.ndarray, spacing: float) -> np.ndarray:
    """Keep the first row per grid cell of size ``spacing`` (order-stable)."""
    if len(arr) == 0:
        return arr
    cells = np.floor(arr / spacing).astype(np.int64)
    _, idx = np.unique(cells, axis=0, return_index=True)
    return arr[np.sort(idx)]


# ---------------------------------------------------------------------------
# compiled kinds
# ---------------------------------------------------------------------------

def _affine_1d(coeffs, x) -> float:
    a, b = float(coeffs[0]), float(coeffs[1])
    return a * float(np.asarray(x).reshape(-1)[0]) + b


def interval_map(domain: EuclideanBox, lo_coeffs, hi_coeffs,
                 codomain: EuclideanBox | None = None,
                 tag: str = BOTH) -> Multifunction:
    """T(x) = [lo(x), hi(x)] with affine endpoint maps on a 1-D domain."""
    if domain.dim != 1:
        raise MalformedSpec("map.kind interval_valued: domain must be 1-D")
    corners = [domain.lo[0], domain.hi[0]]
    vals = [_affine_1d(lo_coeffs, c) for c in corners] + \
           [_affine_1d(hi_coeffs, c) for c in corners]
    if codomain is None:
        codomain = EuclideanBox(1, [[min(vals) - 1e-9, max(vals) + 1e-9]])

    def endpoints(x):
        lo = _affine_1d(lo_coeffs, x)
        hi = _affine_1d(hi_coeffs, x)
        if hi < lo:
            raise MalformedSpec("map.lo exceeds map.hi on the domain")
        return lo, hi

    def eval_net(x, eps):
        lo, hi = endpoints(x)
        return interval_net(lo, hi, eps)

    def contains(x, y, tol):
        lo, hi = endpoints(x)
        yv = float(np.asarray(y).reshape(-1)[0])
        return lo - tol <= yv <= hi + tol

    def value_distance(x, p):
        lo, hi = endpoints(x)
        pv = float(np.asarray(p).reshape(-1)[0])
        return max(lo - pv, pv - hi, 0.0)

    def value_distance_many(x, P):
        lo, hi = endpoints(x)
        pv = np.asarray(P, dtype=float).reshape(-1)
        return np.maximum(np.maximum(lo - pv, pv - hi), 0.0)

    def values_region_net(resolution):
        lo = min(_affine_1d(lo_coeffs, c) for c in corners)
        hi = max(_affine_1d(hi_coeffs, c) for c in corners)
        return interval_net(lo, hi, resolution)

    return Multifunction(
        domain=domain, codomain=codomain,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=tag, value_shape_tag="convex",
        value_distance=value_distance, value_distance_many=value_distance_many,
        values_region_net=values_region_net, name="interval_valued",
    )


def ball_map(domain: EuclideanBox, center_matrix, center_offset, radius: float,
             codomain: EuclideanBox | None = None, tag: str = BOTH) -> Multifunction:
    """T(x) = closed ball of fixed radius around an affine center map."""
    M = np.atleast_2d(np.asarray(center_matrix, dtype=float))
    b = np.asarray(center_offset, dtype=float).reshape(-1)
    d_out = M.shape[0]
    if d_out not in (1, 2):
        raise MalformedSpec("map.kind ball_valued: codomain must be 1-D or 2-D")
    if M.shape[1] != domain.dim or b.shape[0] != d_out:
        raise MalformedSpec("map.center shapes do not match the domain")
    radius = float(radius)
    if radius < 0:
        raise MalformedSpec("map.radius: must be nonnegative")

    corners = np.array(list(_box_corners(domain)))
    centers_at_corners = corners @ M.T + b
    if codomain is None:
        lo = centers_at_corners.min(axis=0) - radius - 1e-9
        hi = centers_at_corners.max(axis=0) + radius + 1e-9
        codomain = EuclideanBox(d_out, [[float(l), float(h)] for l, h in zip(lo, hi)])

    def center(x):
        return M @ np.asarray(x, dtype=float).reshape(-1) + b

    def eval_net(x, eps):
        c = center(x)
        if d_out == 1:
            return interval_net(float(c[0]) - radius, float(c[0]) + radius, eps)
        return disc_net(c, radius, eps)

    def contains(x, y, tol):
        c = center(x)
        return float(np.linalg.norm(np.asarray(y, dtype=float).reshape(-1) - c)) <= radius + tol

    def value_distance(x, p):
        c = center(x)
        return max(0.0, float(np.linalg.norm(np.asarray(p, dtype=float).reshape(-1) - c)) - radius)

    def value_distance_many(x, P):
        c = center(x)
        P = np.asarray(P, dtype=float).reshape(-1, d_out)
        return np.maximum(0.0, np.linalg.norm(P - c, axis=1) - radius)

    def values_region_net(resolution):
        lo = centers_at_corners.min(axis=0) - radius
        hi = centers_at_corners.max(axis=0) + radius
        if d_out == 1:
            return interval_net(float(lo[0]), float(hi[0]), resolution)
        spacing = resolution  # half-diagonal resolution/sqrt(2): margin below
        axes = [np.arange(lo[i], hi[i] + spacing, spacing) for i in range(2)]
        gx, gy = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        # the affine image of the box is the hull of the corner centers;
        # keep grid points within the radius of that polygon
        keep = _convex_region_distances(pts, centers_at_corners) <= radius + 1e-12
        return pts[keep]

    return Multifunction(
        domain=domain, codomain=codomain,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=tag, value_shape_tag="convex",
        single_valued=radius == 0.0,
        value_distance=value_distance, value_distance_many=value_distance_many,
        values_region_net=values_region_net, name="ball_valued",
    )


def _box_corners(box: EuclideanBox):
    import itertools

    for bits in itertools.product(*[[box.lo[i], box.hi[i]] for i in range(box.dim)]):
        yield np.array(bits, dtype=float)


def _segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    feet = a + t[:, None] * ab
    return np.linalg.norm(pts - feet, axis=1)


def _convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counterclockwise, duplicates removed."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _convex_region_distances(pts: np.ndarray, generators: np.ndarray) -> np.ndarray:
    """Vectorized distance from each row of ``pts`` to conv(generators) in 2-D."""
    hull = _convex_hull_2d(generators)
    if len(hull) == 1:
        return np.linalg.norm(pts - hull[0], axis=1)
    if len(hull) == 2:
        return _segment_distances(pts, hull[0], hull[1])
    inside = np.ones(len(pts), dtype=bool)
    edge_d = np.full(len(pts), np.inf)
    for i in range(len(hull)):
        a = hull[i]
        b = hull[(i + 1) % len(hull)]
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cross >= -1e-12
        edge_d = np.minimum(edge_d, _segment_distances(pts, a, b))
    return np.where(inside, 0.0, edge_d)


def _value_descriptor(desc: dict):
    """A piece value: finite points or a closed 1-D interval."""
    if "points" in desc:
        pts = np.atleast_2d(np.asarray(desc["points"], dtype=float))
        return ("points", pts)
    if "interval" in desc:
        lo, hi = float(desc["interval"][0]), float(desc["interval"][1])
        return ("interval", (lo, hi))
    raise MalformedSpec("map.pieces: each value needs 'points' or 'interval'")


def piecewise_const_map(domain: EuclideanBox, breakpoints, pieces, at_breakpoints,
                        codomain: EuclideanBox | None = None,
                        tag: str = USC) -> Multifunction:
    """Piecewise-constant values on a 1-D domain with separate values exactly
    at the breakpoints. Evaluation snaps to a breakpoint within 1e-9, so the
    closed-graph branch is reachable by the solvers."""
    if domain.dim != 1:
        raise MalformedSpec("map.kind piecewise_const: domain must be 1-D")
    bps = [float(b) for b in breakpoints]
    if sorted(bps) != bps:
        raise MalformedSpec("map.breakpoints: must be sorted")
    if len(pieces) != len(bps) + 1 or len(at_breakpoints) != len(bps):
        raise MalformedSpec("map.pieces: need len(breakpoints)+1 pieces and "
                            "one at_breakpoints value per breakpoint")
    piece_vals = [_value_descriptor(p) for p in pieces]
    bp_vals = [_value_descriptor(p) for p in at_breakpoints]

    all_vals = []
    for kind, v in piece_vals + bp_vals:
        if kind == "points":
            all_vals.extend(v.reshape(-1))
        else:
            all_vals.extend(v)
    if codomain is None:
        codomain = EuclideanBox(1, [[min(all_vals) - 1e-9, max(all_vals) + 1e-9]])

    def branch(x):
        xv = float(np.asarray(x).reshape(-1)[0])
        for i, b in enumerate(bps):
            if abs(xv - b) <= BREAKPOINT_SNAP:
                return bp_vals[i]
        idx = 0
        for b in bps:
            if xv > b:
                idx += 1
        return piece_vals[idx]

    def eval_net(x, eps):
        kind, v = branch(x)
        if kind == "points":
            return v.copy()
        return interval_net(v[0], v[1], eps)

    def value_distance(x, p):
        kind, v = branch(x)
        pv = float(np.asarray(p).reshape(-1)[0])
        if kind == "points":
            return float(np.min(np.abs(v.reshape(-1) - pv)))
        return max(v[0] - pv, pv - v[1], 0.0)

    def value_distance_many(x, P):
        kind, v = branch(x)
        pv = np.asarray(P, dtype=float).reshape(-1)
        if kind == "points":
            return np.min(np.abs(pv[:, None] - v.reshape(1, -1)), axis=1)
        return np.maximum(np.maximum(v[0] - pv, pv - v[1]), 0.0)

    def contains(x, y, tol):
        return value_distance(x, y) <= tol

    def values_region_net(resolution):
        nets = []
        for kind, v in piece_vals + bp_vals:
            if kind == "points":
                nets.append(v.reshape(-1, 1))
            else:
                nets.append(interval_net(v[0], v[1], resolution))
        return _dedup_rows(np.concatenate(nets, axis=0), resolution / 2.0)

    return Multifunction(
        domain=domain, codomain=codomain,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=tag, value_shape_tag="convex",
        value_distance=value_distance, value_distance_many=value_distance_many,
        values_region_net=values_region_net, name="piecewise_const",
    )


def finite_fiber_map(domain: EuclideanBox, fibers: dict,
                     codomain: DiscreteSpace | None = None) -> Multifunction:
    """T(x) = labels whose open fiber interval contains x (1-D domain).
    Open fibers make the map lower semicontinuous by construction."""
    if domain.dim != 1:
        raise MalformedSpec("map.kind finite_fiber: domain must be 1-D")
    labels = list(fibers)
    intervals = {lbl: [(float(lo), float(hi)) for lo, hi in fibers[lbl]]
                 for lbl in labels}
    if codomain is None:
        codomain = DiscreteSpace(tuple(labels))

    def value(x):
        xv = float(np.asarray(x).reshape(-1)[0])
        out = tuple(lbl for lbl in labels
                    if any(lo < xv < hi for lo, hi in intervals[lbl]))
        if not out:
            raise MalformedSpec(f"map.fibers: do not cover domain point {xv}")
        return out

    def eval_net(x, eps):
        return value(x)

    def contains(x, y, tol):
        return y in value(x)

    def value_distance(x, p):
        return 0.0 if p in value(x) else 1.0

    def values_region_net(resolution):
        return tuple(labels)

    return Multifunction(
        domain=domain, codomain=codomain,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=LSC, value_shape_tag="admissible",
        value_distance=value_distance,
        values_region_net=values_region_net, name="finite_fiber",
    )


def affine_map(domain: EuclideanBox, matrix, offset,
               codomain: EuclideanBox | None = None) -> Multifunction:
    """Single-valued affine map as a degenerate multifunction."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.asarray(offset, dtype=float).reshape(-1)
    mf = ball_map(domain, M, b, 0.0, codomain=codomain, tag=BOTH)
    return Multifunction(
        domain=mf.domain, codomain=mf.codomain,
        eval_net=mf.eval_net, contains=mf.contains,
        semicontinuity_tag=BOTH, value_shape_tag="convex", single_valued=True,
        value_distance=mf.value_distance, value_distance_many=mf.value_distance_many,
        values_region_net=mf.values_region_net, name="affine",
    )


def identity_map(space: EuclideanBox) -> Multifunction:
    return affine_map(space, np.eye(space.dim), np.zeros(space.dim), codomain=space)


def constant_map(domain: MetricSpace, points, codomain: MetricSpace) -> Multifunction:
    """Constant finite-set-valued map (a single point in the common case)."""
    if isinstance(codomain, EuclideanBox):
        pts = np.atleast_2d(np.asarray(points, dtype=float))

        def eval_net(x, eps):
            return pts.copy()

        def value_distance(x, p):
            return float(np.min(np.linalg.norm(
                pts - np.asarray(p, dtype=float).reshape(1, -1), axis=1)))

        def value_distance_many(x, P):
            P = np.asarray(P, dtype=float).reshape(-1, pts.shape[1])
            return np.min(np.linalg.norm(P[:, None, :] - pts[None, :, :], axis=2), axis=1)

        region = pts.copy()
        n_points = len(pts)
    else:
        pts = tuple(points)

        def eval_net(x, eps):
            return pts

        def value_distance(x, p):
            return min(codomain.distance(p, q) for q in pts)

        value_distance_many = None
        region = pts
        n_points = len(pts)

    return Multifunction(
        domain=domain, codomain=codomain,
        eval_net=eval_net,
        contains=lambda x, y, tol: value_distance(x, y) <= tol,
        semicontinuity_tag=BOTH, value_shape_tag="convex" if n_points == 1 else "closed",
        single_valued=n_points == 1,
        value_distance=value_distance, value_distance_many=value_distance_many,
        values_region_net=lambda res: region, name="constant",
    )


def tree_ball_map(domain: EuclideanBox, tree: MetricTree, center_path,
                  radius: float) -> Multifunction:
    """T(x) = geodesic ball of fixed radius whose center moves along the
    geodesic between two tree points as the 1-D domain parameter sweeps."""
    if domain.dim != 1:
        raise MalformedSpec("map.kind tree_ball: domain must be 1-D")
    p0 = tree.vertex(center_path[0]) if isinstance(center_path[0], str) else center_path[0]
    p1 = tree.vertex(center_path[1]) if isinstance(center_path[1], str) else center_path[1]
    total = tree.distance(p0, p1)
    radius = float(radius)

    def center(x):
        xv = float(np.asarray(x).reshape(-1)[0])
        frac = (xv - domain.lo[0]) / max(domain.hi[0] - domain.lo[0], 1e-12)
        return tree.geodesic_point(p0, p1, min(max(frac, 0.0), 1.0) * total)

    def eval_net(x, eps):
        return tree.ball_net(center(x), radius, eps)

    def value_distance(x, p):
        return max(0.0, tree.distance(p, center(x)) - radius)

    def values_region_net(resolution):
        return tuple(p for p in tree.edge_points(resolution)
                     if _dist_to_path(p) <= radius)

    def _dist_to_path(p):
        gap = tree.distance(p, p0) + tree.distance(p, p1) - total
        return max(0.0, 0.5 * gap)

    return Multifunction(
        domain=domain, codomain=tree,
        eval_net=eval_net,
        contains=lambda x, y, tol: value_distance(x, y) <= tol,
        semicontinuity_tag=BOTH, value_shape_tag="convex",
        value_distance=value_distance,
        values_region_net=values_region_net, name="tree_ball",
    )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def compile(spec: dict, domain: MetricSpace,
            codomain: MetricSpace | None = None) -> Multifunction:
    """Build a Multifunction from a declarative kind + parameters dict."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise MalformedSpec("map.kind: required")
    kind = spec["kind"]
    try:
        if kind == "interval_valued":
            return interval_map(domain, spec["lo"], spec["hi"], codomain,
                                tag=spec.get("tag", BOTH))
        if kind == "ball_valued":
            return ball_map(domain, spec["center_matrix"], spec["center_offset"],
                            spec["radius"], codomain, tag=spec.get("tag", BOTH))
        if kind == "piecewise_const":
            return piecewise_const_map(domain, spec["breakpoints"], spec["pieces"],
                                       spec["at_breakpoints"], codomain,
                                       tag=spec.get("tag", USC))
        if kind == "finite_fiber":
            return finite_fiber_map(domain, spec["fibers"], codomain)
        if kind == "affine":
            return affine_map(domain, spec["matrix"], spec["offset"], codomain)
        if kind == "identity":
            return identity_map(domain)
        if kind == "constant":
            if codomain is None:
                codomain = domain
            return constant_map(domain, spec["points"], codomain)
        if kind == "tree_ball":
            if not isinstance(codomain, MetricTree):
                raise MalformedSpec("map.kind tree_ball: codomain must be a tree")
            return tree_ball_map(domain, codomain, spec["center_path"], spec["radius"])
        if kind == "composition":
            inner = compile(spec["inner"], domain)
            outer = compile(spec["outer"], inner.codomain, codomain)
            return compose(outer, inner)
    except KeyError as exc:
        raise MalformedSpec(f"map.{exc.args[0]}: required for kind {kind!r}") from exc
    raise MalformedSpec(f"map.kind: unknown kind {kind!r}")


def compose(outer: Multifunction, inner: Multifunction) -> Multifunction:
    """(outer o inner)(x): union of outer values over the inner net, with the
    resolution split evenly between the two stages."""
    if inner.codomain.kind != outer.domain.kind:
        raise DomainMismatch(
            f"cannot compose {outer.name} after {inner.name}: "
            f"{inner.codomain.kind} != {outer.domain.kind}")

    euclid_out = isinstance(outer.codomain, EuclideanBox)

    def eval_net(x, eps):
        mids = inner.net_points(x, eps / 2.0)
        nets = [outer.eval_net(m, eps / 2.0) for m in mids]
        if euclid_out:
            merged = np.concatenate([np.atleast_2d(n) for n in nets], axis=0)
            return _dedup_rows(merged, eps / 8.0)
        seen, out = set(), []
        for n in nets:
            for p in n:
                if p not in seen:
                    seen.add(p)
                    out.append(p)
        return tuple(out)

    def contains(x, y, tol):
        return any(outer.contains(m, y, tol / 2.0)
                   for m in inner.net_points(x, tol / 2.0))

    return Multifunction(
        domain=inner.domain, codomain=outer.codomain,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=USC if (inner.is_usc() and outer.is_usc()) else "none",
        value_shape_tag="closed",
        single_valued=inner.single_valued and outer.single_valued,
        name=f"{outer.name}∘{inner.name}",
    )


def hull_map(structure: ConvexityStructure, T: Multifunction) -> Multifunction:
    """x -> hull of T(x), represented through hull nets in the structure's
    value space. Values must be admissible for the structure."""

    def gens(x, eps):
        pts = T.net_points(x, eps)
        unique = []
        seen = set()
        for p in pts:
            if p not in seen:
                seen.add(p)
                unique.append(p)
        if not structure.admissible(tuple(unique)):
            raise NotAdmissible(f"values of {T.name} not admissible for {structure.name}")
        return tuple(unique)

    def the_hull(x, eps):
        return structure.hull_fn(gens(x, eps))

    euclid_out = isinstance(structure.value_space, EuclideanBox)

    def eval_net(x, eps):
        net = the_hull(x, eps / 2.0).sample_net(eps / 2.0)
        if euclid_out:
            return np.array([np.asarray(p, dtype=float).reshape(-1) for p in net])
        return tuple(net)

    def contains(x, y, tol):
        return the_hull(x, max(tol, 1e-9)).distance(y) <= tol

    def value_distance(x, p):
        return the_hull(x, 1e-4).distance(p)

    return Multifunction(
        domain=T.domain, codomain=structure.value_space,
        eval_net=eval_net, contains=contains,
        semicontinuity_tag=T.semicontinuity_tag, value_shape_tag="convex",
        single_valued=T.single_valued,
        value_distance=value_distance,
        name=f"hull({T.name})",
    )


def meets_ball(T: Multifunction, x, center, e: Entourage) -> bool:
    """Whether the value net at resolution radius/4 meets the open ball.
    Under-approximates: a coarse net can only produce false negatives."""
    pts = T.net_points(x, e.radius / 4.0)
    return any(T.codomain.distance(p, center) < e.radius for p in pts)


@dataclass
class SemicontinuityReport:
    """Sampled audit of a semicontinuity hypothesis."""

    kind: str
    samples: int
    delta: float
    eps: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "samples": self.samples,
            "delta": self.delta,
            "eps": self.eps,
            "passed": self.passed,
            "violations": [
                {"x": _plain(x), "x_near": _plain(xn), "y": _plain(y)}
                for x, xn, y in self.violations[:16]
            ],
        }


def _plain(p):
    if isinstance(p, np.ndarray):
        return [float(v) for v in p.reshape(-1)]
    if isinstance(p, tuple):
        return [float(v) if isinstance(v, (int, float)) else str(v) for v in p]
    return p if isinstance(p, (int, float, str)) else str(p)


def check_lsc(T: Multifunction, samples: Sequence, delta: float, eps: float) -> SemicontinuityReport:
    """For each sampled x and net value y, nearby sampled points must keep a
    value within 2*eps of y. Violating (x, x_near, y) triples are reported."""
    report = SemicontinuityReport("lsc", len(samples), delta, eps)
    pts = list(samples)
    for x in pts:
        ys = T.net_points(x, eps)
        near = [xn for xn in pts if 0.0 < T.domain.distance(x, xn) < delta]
        for y in ys:
            for xn in near:
                if T.distance_to_value(xn, y, eps) >= 2.0 * eps:
                    report.violations.append((x, xn, y))
    return report


def check_usc(S: Multifunction, samples: Sequence, delta: float, eps: float) -> SemicontinuityReport:
    """Dual audit: values at nearby sampled points must stay within 2*eps of
    the value set at x. A pair is flagged only when the escape is mutual
    (neither value set absorbs the other): a one-sided jump between two
    samples cannot be attributed to a side at finite resolution, and maps
    whose value at the jump point is the absorbing one must pass."""
    report = SemicontinuityReport("usc", len(samples), delta, eps)
    pts = list(samples)

    def escapes(a, b):
        # first point of S(b) that stays 2*eps away from S(a), if any
        for z in S.net_points(b, eps):
            if S.distance_to_value(a, z, eps) >= 2.0 * eps:
                return z
        return None

    for i, x in enumerate(pts):
        for xn in pts[i + 1:]:
            d = S.domain.distance(x, xn)
            if not 0.0 < d < delta:
                continue
            z = escapes(x, xn)
            if z is not None and escapes(xn, x) is not None:
                report.violations.append((x, xn, z))
    return report
