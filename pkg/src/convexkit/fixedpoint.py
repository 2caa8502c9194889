"""Fixed-point engines.

``brouwer_solve`` finds approximate fixed points of continuous simplex
self-maps by Sperner labeling on a uniform barycentric grid, zooming into
the completely labeled cell until the measured residual meets the target.
``almost_fixed_point`` reduces a composed fixed-point problem to the map's
low-dimensional domain: solving x = R(Psi(f(x))) there gives d = f(x) with
d in f(R(Psi(d))) on the spanned face, which is audited directly. The
staged ``fixed_point`` driver extracts a cluster point of the almost-fixed
points and certifies the final residual against the enclosing map.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .convexity import ConvexityStructure
from .core import Entourage, EuclideanBox, SimplexCoords
from .errors import (
    ContainmentViolated,
    ConvexkitError,
    LabelingFailure,
    MaxDepthExceeded,
    NoClusterPoint,
    ResidualAboveTolerance,
)
from .multifunction import Multifunction, compose
from .selection import SelectionResult, almost_selection, _value_residual


@dataclass(frozen=True)
class SimplexMap:
    """A self-map of the n-simplex in barycentric coordinates.

    ``apply`` (single-valued) maps a coordinate array to a coordinate array;
    ``apply_net`` (multivalued) maps (coords, resolution) to a finite list of
    coordinate arrays sampling the image set.
    """

    dim: int
    apply: Optional[Callable] = None
    apply_net: Optional[Callable] = None
    continuity_tag: str = "continuous"

    def __post_init__(self):
        if self.apply is None and self.apply_net is None:
            raise ValueError("a simplex map needs apply or apply_net")


def cyclic_shift_map(dim: int) -> SimplexMap:
    return SimplexMap(dim, apply=lambda t: np.roll(t, 1))


def coordinate_power_map(dim: int, exponent: float) -> SimplexMap:
    def apply(t):
        p = np.asarray(t, dtype=float) ** exponent
        return p / p.sum()

    return SimplexMap(dim, apply=apply)


def identity_simplex_map(dim: int) -> SimplexMap:
    return SimplexMap(dim, apply=lambda t: np.asarray(t, dtype=float).copy())


# ---------------------------------------------------------------------------
# Sperner machinery
# ---------------------------------------------------------------------------

def _grid_cells(n: int, m: int):
    """Cells of the standard triangulation of the simplex grid at resolution m.

    Grid points are compositions of m into n+1 parts, identified with their
    monotone partial-sum vectors; cells come from the staircase subdivision
    of the unit cube restricted to the monotone region.
    """
    if n == 1:
        for z in range(m):
            yield (((m - z, z)), ((m - z - 1, z + 1)))
        return
    rng = range(m)
    for z in itertools.product(rng, repeat=n):
        for sigma in itertools.permutations(range(n)):
            vertex = list(z)
            path = [tuple(vertex)]
            ok = all(vertex[i] <= vertex[i + 1] for i in range(n - 1))
            if not ok:
                continue
            for step in sigma:
                vertex[step] += 1
                if any(vertex[i] > vertex[i + 1] for i in range(n - 1)):
                    ok = False
                    break
                path.append(tuple(vertex))
            if ok:
                yield tuple(_sums_to_composition(s, m) for s in path)


def _sums_to_composition(s: tuple, m: int) -> tuple:
    comp = [s[0]]
    for a, b in zip(s, s[1:]):
        comp.append(b - a)
    comp.append(m - s[-1])
    return tuple(comp)


def _label(coords: np.ndarray, image: np.ndarray) -> int:
    for i in range(len(coords)):
        if coords[i] > 0.0 and image[i] <= coords[i]:
            return i
    raise LabelingFailure(
        "no admissible label: the map does not preserve the simplex")


def _inflate(cell: np.ndarray, factor: float) -> np.ndarray:
    """Scale the cell about its centroid by up to ``factor``, shrinking the
    scale uniformly so all barycentric coordinates stay nonnegative."""
    c = cell.mean(axis=0)
    beta = factor
    for v in cell:
        d = v - c
        for j in range(len(c)):
            if d[j] < -1e-300 and c[j] < beta * (c[j] - v[j]):
                beta = min(beta, c[j] / (c[j] - v[j]))
    out = c + beta * (cell - c)
    return np.maximum(out, 0.0)


def brouwer_solve(F: SimplexMap, epsilon: float, *, grid: int = 12,
                  inflate: float = 3.0, max_depth: int = 60) -> SimplexCoords:
    """A point t with ||F(t) - t||_inf <= epsilon for a continuous simplex
    self-map, by Sperner labeling with zoom refinement. The label of a grid
    vertex is the smallest coordinate that is positive and not increased by
    the map; the search refines the completely labeled cell whose best
    vertex has the smallest measured residual (ties: lexicographic order)."""
    if F.apply is None:
        raise ValueError("brouwer_solve needs a single-valued map")
    n = F.dim
    m = grid
    full = np.eye(n + 1)
    region = full.copy()
    cache: dict = {}

    def evaluate(v: np.ndarray):
        key = np.round(v, 14).tobytes()
        hit = cache.get(key)
        if hit is None:
            img = np.asarray(F.apply(v), dtype=float)
            if img.shape != v.shape or img.min() < -1e-9 \
                    or abs(float(img.sum()) - 1.0) > 1e-6:
                raise LabelingFailure("map image is not a barycentric vector")
            hit = (img, float(np.max(np.abs(img - v))))
            cache[key] = hit
        return hit

    best_res = math.inf
    best_point = None
    expansions = 0
    for _ in range(max_depth):
        verts: dict = {}
        for cell in _grid_cells(n, m):
            for comp in cell:
                if comp not in verts:
                    local = np.array(comp, dtype=float) / m
                    v = local @ region
                    img, res = evaluate(v)
                    verts[comp] = (v, res, _label(v, img))
        for comp, (v, res, _) in verts.items():
            if res < best_res:
                best_res, best_point = res, v
        if best_res <= epsilon:
            return SimplexCoords(tuple(float(x) for x in best_point))

        complete = []
        for cell in _grid_cells(n, m):
            labels = {verts[comp][2] for comp in cell}
            if len(labels) == n + 1:
                cell_res = min(verts[comp][1] for comp in cell)
                complete.append((cell_res, cell))
        if not complete:
            if np.allclose(region, full):
                raise LabelingFailure(
                    "no completely labeled cell on the full simplex")
            region = _inflate(region, 2.0)
            expansions += 1
            if expansions > 3:
                region = full.copy()
            continue
        complete.sort(key=lambda item: (item[0], item[1]))
        _, cell = complete[0]
        cell_coords = np.array([np.array(c, dtype=float) / m for c in cell]) @ region
        region = _inflate(cell_coords, inflate)
    raise MaxDepthExceeded(
        f"residual {best_res} above {epsilon} after {max_depth} refinements",
        best=SimplexCoords(tuple(float(x) for x in best_point)))


def simplex_residual_search(F: SimplexMap, epsilon: float, *, grid: int = 32,
                            max_depth: int = 40) -> SimplexCoords:
    """Grid point minimizing the distance to the (multivalued) image set,
    zooming around the minimizer. Returns it once the residual is within
    epsilon; otherwise reports the best point found."""
    if F.apply_net is None and F.apply is None:
        raise ValueError("simplex_residual_search needs a map")
    n = F.dim

    def residual(t: np.ndarray) -> float:
        if F.apply_net is not None:
            net = F.apply_net(t, epsilon / 2.0)
            return min(float(np.max(np.abs(np.asarray(z, dtype=float) - t)))
                       for z in net)
        img = np.asarray(F.apply(t), dtype=float)
        return float(np.max(np.abs(img - t)))

    region = np.eye(n + 1)
    best = (math.inf, None)
    for depth in range(max_depth):
        m = grid
        pts = [np.array(c, dtype=float) / m
               for c in _compositions(m, n + 1)]
        for local in pts:
            v = local @ region
            r = residual(v)
            if r < best[0]:
                best = (r, v)
        if best[0] <= epsilon:
            return SimplexCoords(tuple(float(x) for x in best[1]))
        centroid = region.mean(axis=0)
        shrink = 3.0 / m
        anchored = best[1] + shrink * (region - centroid)
        region = _inflate(anchored, 1.0)
        if float(np.max(region.max(axis=0) - region.min(axis=0))) < 1e-13:
            break
    raise ResidualAboveTolerance(
        f"best residual {best[0]} above {epsilon}",
        best=SimplexCoords(tuple(float(x) for x in best[1])))


def _compositions(m: int, parts: int):
    if parts == 1:
        yield (m,)
        return
    for head in range(m + 1):
        for rest in _compositions(m - head, parts - 1):
            yield (head,) + rest


# ---------------------------------------------------------------------------
# almost fixed points
# ---------------------------------------------------------------------------

@dataclass
class AlmostFixedPoint:
    """A point within the requested entourage of its composed image."""

    y: object
    witness_x: object
    residual: float
    accuracy: float
    selection: SelectionResult
    face_residual: float
    solver: dict = field(default_factory=dict)

    def to_certificate(self) -> dict:
        return {
            "point": _plain_point(self.y),
            "witness_x": _plain_point(self.witness_x),
            "residual": self.residual,
            "accuracy": self.accuracy,
            "face_residual": self.face_residual,
            "selection": self.selection.to_certificate(),
            **self.solver,
        }


def _plain_point(p):
    if isinstance(p, tuple):
        return [float(v) if isinstance(v, (int, float)) else str(v) for v in p]
    if isinstance(p, np.ndarray):
        return [float(v) for v in p.reshape(-1)]
    return p if isinstance(p, (int, float, str)) else str(p)


def _box_simplex_frames(box: EuclideanBox):
    """Affine frames between a box and a simplex containing it, with a
    clamping retraction, so box self-maps become simplex self-maps with the
    same fixed points."""
    if box.dim == 1:
        a, b = float(box.lo[0]), float(box.hi[0])

        def to_point(t):
            return np.array([a + (b - a) * t[1]])

        def to_coords(p):
            u = (float(p[0]) - a) / (b - a)
            u = min(max(u, 0.0), 1.0)
            return np.array([1.0 - u, u])

        return 1, to_point, to_coords
    if box.dim == 2:
        lo = box.lo.copy()
        span = 2.0 * float((box.hi - box.lo).sum())
        verts = np.array([lo, lo + [span, 0.0], lo + [0.0, span]])
        A = np.array([[verts[1][0] - verts[0][0], verts[2][0] - verts[0][0]],
                      [verts[1][1] - verts[0][1], verts[2][1] - verts[0][1]]])
        A_inv = np.linalg.inv(A)

        def to_point(t):
            return t @ verts

        def to_coords(p):
            uv = A_inv @ (np.asarray(p, dtype=float) - verts[0])
            uv = np.maximum(uv, 0.0)
            s = uv.sum()
            if s > 1.0:
                uv = uv / s
            return np.array([1.0 - uv.sum(), uv[0], uv[1]])

        return 2, to_point, to_coords
    raise ConvexkitError("fixed-point solves support 1-D and 2-D domains")


def _box_residual_search(box: EuclideanBox, q: Callable, epsilon: float, *,
                         per_axis: int = 33, max_depth: int = 24):
    lo = box.lo.copy()
    hi = box.hi.copy()
    best = (math.inf, None)
    stalled = 0
    for _ in range(max_depth):
        previous = best[0]
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(box.dim)]
        for p in itertools.product(*axes):
            x = tuple(float(v) for v in p)
            r = q(x)
            if r < best[0]:
                best = (r, x)
        if best[0] <= epsilon:
            return best[1], best[0]
        stalled = stalled + 1 if best[0] >= previous else 0
        if stalled >= 2:
            break
        width = (hi - lo) / (per_axis - 1) * 4.0
        center = np.asarray(best[1], dtype=float)
        lo = box.clip(center - width)
        hi = box.clip(center + width)
        if float(np.max(hi - lo)) < 1e-13:
            break
    return best[1], best[0]


def almost_fixed_point(structure: ConvexityStructure, R: Multifunction,
                       T: Multifunction, U: Entourage, *,
                       y_prime=None, audit_density: float = 1000.0,
                       solver_eps: float = 1e-8,
                       selection: SelectionResult | None = None) -> AlmostFixedPoint:
    """A point y within U of the hull of values of T over R(y).

    Runs the almost selection for T at accuracy U, then solves the composed
    coordinate fixed-point problem by cycling it through the map's domain:
    a solution x of x = R(Psi(f(x))) yields d = f(x) fixed for f o R o Psi
    on the spanned face, and y = Psi(f(x)). Continuous single-valued R goes
    through the Sperner solver; multivalued R through grid residual search.
    """
    if not structure.is_global():
        raise ConvexkitError("almost fixed points need a global structure")
    sel = selection if selection is not None else almost_selection(
        structure, T, y_prime, U, audit_density=audit_density)
    g = sel.evaluate  # = Psi o f
    domain = T.domain
    if not isinstance(domain, EuclideanBox):
        raise ConvexkitError("fixed-point solves need a box domain")

    def r_points(y, res):
        return R.net_points(y, res)

    solver: dict = {}
    if R.single_valued:
        n, to_point, to_coords = _box_simplex_frames(domain)

        def apply(t):
            # retract onto the box before evaluating: fixed points of the
            # retracted map all lie inside the box and are genuine
            p = domain.clip(to_point(np.asarray(t, dtype=float)))
            y = g(tuple(float(v) for v in p))
            x_next = r_points(y, 1e-9)[0]
            return to_coords(np.asarray(x_next, dtype=float))

        t_star = brouwer_solve(SimplexMap(n, apply=apply), solver_eps)
        x_star = tuple(float(v) for v in domain.clip(to_point(t_star.as_array())))
        solver["solver"] = "sperner_zoom"
    else:
        if R.value_distance is not None:
            # exact distance from x to the value set R(g(x))
            def q(x):
                return float(R.value_distance(g(x), x))

            eps_search = solver_eps
        else:
            net_res = max(solver_eps, U.radius / 8.0)

            def q(x):
                y = g(x)
                cands = r_points(y, net_res)
                return min(domain.distance(x, c) for c in cands)

            eps_search = max(solver_eps, 1.5 * net_res)
        x_star, q_res = _box_residual_search(domain, q, eps_search)
        solver["solver"] = "grid_residual_search"
        solver["solver_residual"] = q_res
        if q_res > eps_search:
            raise ResidualAboveTolerance(
                f"no grid point lands in its own composed image "
                f"(best residual {q_res})", best=solver)

    y_star = g(x_star)
    res_fine = max(1e-9, U.radius / 16.0)
    # x_star itself sits in R(y_star) up to the solver tolerance, so the
    # selection certificate bounds the residual through it; coarse net
    # points of R(y_star) can only improve the minimum
    r_candidates = [x_star] + list(r_points(y_star, max(U.radius / 4.0, 1e-6))[:2048])
    residual = min(
        _value_residual(structure, T, r, y_star, res_fine)
        for r in r_candidates)
    # the face-level equation d in f(R(Psi(d))): measured at d* = f(x*)
    d_star = sel.coords(x_star).as_array()
    x_back = r_points(y_star, 1e-9)[0] if R.single_valued else min(
        r_points(y_star, res_fine), key=lambda c: domain.distance(x_star, c))
    d_back = sel.coords(tuple(float(v) for v in np.asarray(x_back).reshape(-1))
                        if not isinstance(x_back, tuple) else x_back).as_array()
    face_residual = float(np.max(np.abs(d_star - d_back)))
    return AlmostFixedPoint(y_star, x_star, float(residual), U.radius,
                            sel, face_residual, solver)


# ---------------------------------------------------------------------------
# staged fixed points
# ---------------------------------------------------------------------------

@dataclass
class FixedPointCertificate:
    point: object
    residual: float
    schedule_used: list
    trace: list
    status: str

    def to_certificate(self) -> dict:
        return {
            "point": _plain_point(self.point),
            "residual": self.residual,
            "schedule_used": self.schedule_used,
            "status": self.status,
            "trace": self.trace,
        }


def _audit_containment(structure: ConvexityStructure, R: Multifunction,
                       T: Multifunction, S: Multifunction,
                       tol: float, n_samples: int = 24):
    """Sampled check that hulls of T-values over R land inside S's values."""
    ys = list(structure.value_space.grid(n_samples))
    for y in ys:
        for r in R.net_points(y, tol):
            gens = T.net_points(r, tol)
            hull = structure.hull_fn(tuple(dict.fromkeys(gens)))
            for z in hull.sample_net(max(tol, 1e-3)):
                if not S.contains(y, z, 3.0 * tol):
                    raise ContainmentViolated(
                        f"hull of values over R({_plain_point(y)}) contains "
                        f"{_plain_point(z)} outside the enclosing map's value")


def _cluster_point(distance: Callable, ys: list, radii: Sequence[float]):
    """Nested bucketing: at each radius keep the ball holding the most
    iterates (ties to the latest anchor), then return the latest survivor."""
    if not ys:
        raise NoClusterPoint("no stage produced a point")
    candidates = list(range(len(ys)))
    for r in radii:
        counts = []
        for i in candidates:
            members = [j for j in candidates if distance(ys[i], ys[j]) < r]
            counts.append((len(members), i, members))
        counts.sort(key=lambda t: (t[0], t[1]))
        _, _, keep = counts[-1]
        candidates = keep
    return ys[max(candidates)]


def fixed_point(structure: ConvexityStructure, R: Multifunction,
                T: Multifunction, S: Multifunction,
                schedule: Sequence[Entourage], *,
                audit_density: float = 1000.0,
                containment_tol: float = 2e-2,
                y_prime=None) -> FixedPointCertificate:
    """Stage i computes an almost fixed point at radius U_i; compactness is
    realized as nested-bucket cluster extraction over the iterates, and the
    certificate checks dist(y*, S(y*)) <= 3 * U_last on the finest net."""
    radii = [e.radius for e in schedule]
    if not radii or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ConvexkitError("schedule radii must be strictly decreasing")
    _audit_containment(structure, R, T, S, containment_tol)

    trace = []
    ys = []
    for i, u in enumerate(radii, start=1):
        afp = almost_fixed_point(structure, R, T, Entourage(u),
                                 y_prime=y_prime, audit_density=audit_density)
        s_res = S.distance_to_value(afp.y, afp.y, max(u / 4.0, 1e-9))
        ys.append(afp.y)
        trace.append({
            "stage": i, "radius": u, "point": _plain_point(afp.y),
            "residual": afp.residual, "s_residual": float(s_res),
            "s_bound": 3.0 * u, "face_residual": afp.face_residual,
        })

    dist = structure.value_distance
    y_star = _cluster_point(dist, ys, radii)
    fine = max(radii[-1] / 8.0, 1e-9)
    final_residual = float(S.distance_to_value(y_star, y_star, fine))
    status = "converged" if final_residual <= 3.0 * radii[-1] else "max_stage_reached"
    return FixedPointCertificate(y_star, final_residual, radii, trace, status)


def kakutani_type(structure: ConvexityStructure, f: Multifunction,
                  R: Multifunction, schedule: Sequence[Entourage], *,
                  audit_density: float = 1000.0) -> FixedPointCertificate:
    """Fixed point of the closure of f o R for continuous single-valued f and
    an upper-semicontinuous R, via the staged driver with T = f, S = f o R."""
    if not structure.is_regular():
        raise ConvexkitError("this reduction needs a regular structure")
    if not f.single_valued:
        raise ConvexkitError("f must be single-valued")
    S = compose(f, R)
    return fixed_point(structure, R, f, S, schedule,
                       audit_density=audit_density)


def browder_type(structure: ConvexityStructure, R: Multifunction,
                 T: Multifunction, *, audit_density: float = 1000.0) -> dict:
    """Exact fixed point of the hull composition for discrete structures with
    open-fibered T: at the discrete entourage the almost fixed point is a
    true fixed point, certified by exact hull membership."""
    if not structure.is_discrete():
        raise ConvexkitError("this route needs a discrete structure")
    U = structure.modulus(Entourage(1.0))
    afp = almost_fixed_point(structure, R, T, U, audit_density=audit_density)
    exact = afp.residual <= 1e-12
    return {
        "point": afp.y,
        "witness_x": afp.witness_x,
        "residual": afp.residual,
        "exact": exact,
        "certificate": afp.to_certificate(),
    }
