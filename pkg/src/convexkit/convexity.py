"""Convexity structures: admissible sets, hull operator, combination operator,
and the modulus that makes combinations of slightly fattened sets land near
the hull. Four concrete instances ship: Euclidean boxes, finite embedded
discrete sets, metric trees with geodesic interpolation, and an adapter
around user-supplied staged combination maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    DiscreteSpace,
    Entourage,
    EuclideanBox,
    FormalConvexCombination,
    MetricSpace,
    MetricTree,
    TreePoint,
    make_combination,
    point_sort_key,
)
from .errors import MichaelConditionViolation, NotAdmissible, NotInDomain
from .hulls import DEFAULT_HULL_TOL, FiniteSetHull, GeodesicHull, HullRepr, VertexPolytope

SAME_AS_Y = "same_as_Y"
DISCRETE_Y_VECTOR_Z = "discrete_Y_vector_Z"


@dataclass(frozen=True)
class ConvexityStructure:
    """The full interface a selection or fixed-point engine needs.

    ``space`` is where admissible sets live; ``value_space`` is where
    combinations land (the same space, except for discrete structures whose
    combinations land in the embedding vector space). ``modulus`` maps a
    target accuracy U to the fattening radius W under which combinations of
    W-perturbed sets stay U-close to the hull. Structures carrying
    ``strong_modulus`` additionally promise that moving every support point
    by less than ``strong_modulus(U)`` moves the combination by less than U.
    """

    name: str
    space: MetricSpace
    value_space: MetricSpace
    target_topology: str
    admissible: Callable[[Sequence], bool]
    hull_fn: Callable[[Sequence], HullRepr]
    combine_fn: Callable[[FormalConvexCombination], object]
    modulus: Callable[[Entourage], Entourage]
    flags: frozenset
    t_lipschitz: float
    strong_modulus: Optional[Callable[[Entourage], Entourage]] = None
    convex_uniform_base: bool = False
    hull_tolerance: float = DEFAULT_HULL_TOL

    def is_global(self) -> bool:
        return "global" in self.flags

    def is_regular(self) -> bool:
        return "regular" in self.flags

    def is_discrete(self) -> bool:
        return "discrete" in self.flags

    def is_strong(self) -> bool:
        return "strong" in self.flags

    def value_distance(self, p, q) -> float:
        return self.value_space.distance(p, q)


def hull(structure: ConvexityStructure, points: Sequence) -> HullRepr:
    """Hull of a finite admissible set; deterministic in the generator order."""
    pts = tuple(points)
    if not structure.admissible(pts):
        raise NotAdmissible(f"{structure.name}: set of size {len(pts)} not admissible")
    return structure.hull_fn(pts)


def combine(structure: ConvexityStructure, c: FormalConvexCombination):
    """Apply the structure's combination operator to a canonical combination."""
    return structure.combine_fn(c)


# ---------------------------------------------------------------------------
# Euclidean instance
# ---------------------------------------------------------------------------

def euclidean_convexity(dim: int, box: Sequence[Sequence[float]]) -> ConvexityStructure:
    """Affine averaging on a compact box: every finite set admissible, hulls
    are vertex polytopes, and the accuracy-to-fattening modulus is identity."""
    space = EuclideanBox(dim, box)

    def _combine(c: FormalConvexCombination):
        pts = np.array([space.as_array(p) for p in c.points])
        return space.as_point(c.weight_array() @ pts)

    return ConvexityStructure(
        name="euclidean",
        space=space,
        value_space=space,
        target_topology=SAME_AS_Y,
        admissible=lambda pts: len(tuple(pts)) > 0,
        hull_fn=lambda pts: VertexPolytope(tuple(pts)),
        combine_fn=_combine,
        modulus=lambda e: e,
        flags=frozenset({"global", "regular", "strong"}),
        t_lipschitz=space.diameter(),
        strong_modulus=lambda e: e,
        convex_uniform_base=True,
    )


# ---------------------------------------------------------------------------
# Discrete instance
# ---------------------------------------------------------------------------

def discrete_convexity(points: Sequence, embedding: dict | Callable) -> ConvexityStructure:
    """A finite set with the discrete uniformity, combined affinely through an
    injective embedding into a vector space. Hu lls and combination values
    live in the embedding space."""
    space = DiscreteSpace(points)
    if callable(embedding):
        embed_map = {p: np.atleast_1d(np.asarray(embedding(p), dtype=float))
                     for p in space.points}
    else:
        embed_map = {p: np.atleast_1d(np.asarray(embedding[p], dtype=float))
                     for p in space.points}
    dim = len(next(iter(embed_map.values())))
    vectors = np.array([embed_map[p] for p in space.points])
    if len(np.unique(vectors, axis=0)) != len(space.points):
        raise ValueError("embedding must be injective")
    lo = vectors.min(axis=0)
    hi = vectors.max(axis=0)
    pad = 1e-9  # keep the value box nondegenerate for single-point axes
    value_space = EuclideanBox(dim, [[float(l) - pad, float(h) + pad]
                                     for l, h in zip(lo, hi)])

    def _combine(c: FormalConvexCombination):
        pts = np.array([embed_map[p] for p in c.points])
        return value_space.as_point(c.weight_array() @ pts)

    half_min = space.min_positive_distance() / 2.0

    return ConvexityStructure(
        name="discrete",
        space=space,
        value_space=value_space,
        target_topology=DISCRETE_Y_VECTOR_Z,
        admissible=lambda pts: len(tuple(pts)) > 0
        and all(p in embed_map for p in pts),
        hull_fn=lambda pts: VertexPolytope(
            tuple(tuple(float(x) for x in embed_map[p]) for p in pts)),
        combine_fn=_combine,
        modulus=lambda e: Entourage(half_min),
        flags=frozenset({"global", "discrete"}),
        t_lipschitz=float(np.linalg.norm(hi - lo)) or 1.0,
        convex_uniform_base=True,
    )


def embedding_of(structure: ConvexityStructure):
    """Embedding lookup for discrete structures (labels -> value-space points)."""
    if structure.target_topology != DISCRETE_Y_VECTOR_Z:
        raise ValueError("only discrete structures carry an embedding")
    vs = structure.value_space

    def embed(label):
        return structure.combine_fn(make_combination([1.0], [label]))

    return embed


# ---------------------------------------------------------------------------
# Metric tree instance
# ---------------------------------------------------------------------------

def tree_hspace_convexity(tree: MetricTree) -> ConvexityStructure:
    """Geodesic convexity on a metric tree. The hull of a finite set is the
    subtree it spans; the combination operator is a left fold of weighted
    geodesic interpolation over the canonically ordered support. Canonical
    ordering, not the fold's algebra, is what makes the operator depend only
    on the merged weight profile.

    Metric convexity of trees gives both moduli as the identity: points
    within W of a set combine to within W of its hull, and moving every
    support point by less than W moves the fold by less than W.
    """

    def _fold(pts, wts) -> TreePoint:
        head, head_w = pts[0], wts[0]
        if len(pts) == 1:
            return head
        rest = 1.0 - head_w
        if rest <= 0.0:
            return head
        tail = _fold(pts[1:], [w / rest for w in wts[1:]])
        total = tree.distance(head, tail)
        return tree.geodesic_point(head, tail, rest * total)

    return ConvexityStructure(
        name="tree",
        space=tree,
        value_space=tree,
        target_topology=SAME_AS_Y,
        admissible=lambda pts: len(tuple(pts)) > 0,
        hull_fn=lambda pts: GeodesicHull(tuple(pts), tree),
        combine_fn=lambda c: _fold(list(c.points), list(c.weights)),
        modulus=lambda e: e,
        flags=frozenset({"global", "regular", "strong"}),
        t_lipschitz=8.0 * tree.diameter(),
        strong_modulus=lambda e: e,
        convex_uniform_base=True,
    )


# ---------------------------------------------------------------------------
# Adapter for staged combination maps
# ---------------------------------------------------------------------------

def michael_adapter(
    space: MetricSpace,
    m_predicates: Sequence[Callable[[tuple], bool]],
    k_maps: Sequence[Callable[[np.ndarray, tuple], object]],
    *,
    modulus: Callable[[Entourage], Entourage] | None = None,
    t_lipschitz: float | None = None,
    tested_radii: Sequence[float] | None = None,
    hull_t_grid: int = 5,
    check_samples: int = 25,
    seed: int = 0,
) -> ConvexityStructure:
    """Wrap a staged family of combination maps into a ConvexityStructure.

    ``m_predicates[n]`` decides whether an (n+1)-tuple of points is in the
    domain of stage n; ``k_maps[n]`` combines barycentric weights with such a
    tuple. Admissibility of a set A is tested by sampling tuples from a
    fattening of A at the ``tested_radii`` and checking the stage predicates;
    hulls are sampled images over a fixed barycentric grid. The structure is
    not global: combinations whose sorted support fails its stage predicate
    raise NotInDomain.

    At construction the maps are spot-checked on sampled inputs: stage 0 must
    return its point unchanged, dropping a zero weight must match the lower
    stage, and merging equal adjacent points must match the merged call.
    """
    n_max = len(k_maps) - 1
    if n_max < 0:
        raise ValueError("need at least the stage-0 combination map")
    if len(m_predicates) != len(k_maps):
        raise ValueError("need one domain predicate per combination map")

    if tested_radii is None:
        if isinstance(space, DiscreteSpace):
            tested_radii = [space.min_positive_distance() / 2.0]
        else:
            tested_radii = [space.diameter() * f for f in (0.02, 0.05)]
    tested_radii = [float(r) for r in tested_radii]

    if modulus is None:
        if isinstance(space, DiscreteSpace):
            half = space.min_positive_distance() / 2.0
            modulus = lambda e: Entourage(min(e.radius, half))  # noqa: E731
        else:
            modulus = lambda e: e  # noqa: E731

    rng = np.random.default_rng(seed)

    def _sorted_support(c: FormalConvexCombination):
        return c.weight_array(), tuple(c.points)

    def _combine(c: FormalConvexCombination):
        t, x = _sorted_support(c)
        n = len(x) - 1
        if n > n_max or not m_predicates[n](x):
            raise NotInDomain(
                f"support of size {n + 1} is outside the staged combination domain")
        return k_maps[n](t, x)

    def _fatten(points: tuple, radius: float) -> list:
        fat = list(points)
        if isinstance(space, DiscreteSpace):
            fat.extend(q for q in space.points
                       if any(0.0 < space.distance(q, p) < radius for p in points))
        else:
            local = np.random.default_rng(0x5EED)  # fixed: admissibility is pure
            for p in points:
                fat.extend(space.perturb(local, p, radius) for _ in range(3))
        return fat

    def _admissible(points) -> bool:
        # canonical combinations never carry repeated points, so the stage
        # predicates are tested on distinct sorted tuples only
        pts = tuple(points)
        if not pts:
            return False
        for radius in tested_radii:
            fat = sorted(set(_fatten(pts, radius)), key=point_sort_key)
            for n in range(min(n_max, len(fat) - 1) + 1):
                tuples = itertools.combinations(fat, n + 1)
                for i, tup in enumerate(tuples):
                    if i >= 64:
                        break
                    if not m_predicates[n](tup):
                        return False
        return True

    def _hull(points) -> HullRepr:
        pts = tuple(sorted(set(points), key=point_sort_key))
        image = set()
        for n in range(min(n_max, len(pts) - 1) + 1):
            for tup in itertools.islice(itertools.combinations(pts, n + 1), 128):
                if not m_predicates[n](tup):
                    continue
                for t in _barycentric_grid(n, hull_t_grid):
                    image.add(k_maps[n](t, tup))
        if not image:
            raise NotAdmissible("no stage accepts tuples from this set")
        return FiniteSetHull(tuple(sorted(image, key=point_sort_key)), space.distance)

    _construction_checks(space, m_predicates, k_maps, rng, check_samples)

    return ConvexityStructure(
        name="michael_adapter",
        space=space,
        value_space=space,
        target_topology=SAME_AS_Y,
        admissible=_admissible,
        hull_fn=_hull,
        combine_fn=_combine,
        modulus=modulus,
        flags=frozenset(),
        t_lipschitz=t_lipschitz if t_lipschitz is not None else 8.0 * space.diameter(),
    )


def _barycentric_grid(n: int, per_axis: int):
    if n == 0:
        yield np.array([1.0])
        return
    m = per_axis
    for comp in itertools.product(range(m + 1), repeat=n):
        s = sum(comp)
        if s <= m:
            yield np.array(list(comp) + [m - s], dtype=float) / m


def _construction_checks(space, m_predicates, k_maps, rng, samples):
    singletons = [p for p in _candidate_points(space, rng, samples)
                  if m_predicates[0]((p,))]
    for p in singletons:
        out = k_maps[0](np.array([1.0]), (p,))
        if space.distance(out, p) > 1e-9:
            raise MichaelConditionViolation(
                "stage-0 map must return its point unchanged")
    if len(k_maps) < 2:
        return
    pairs = [(p, q) for p in singletons for q in singletons
             if m_predicates[1]((p, q))][:samples]
    for p, q in pairs:
        # dropping a zero weight must agree with the stage below
        lowered = k_maps[0](np.array([1.0]), (p,))
        dropped = k_maps[1](np.array([1.0, 0.0]), (p, q))
        if space.distance(lowered, dropped) > 1e-9:
            raise MichaelConditionViolation(
                "zero-weight coordinates must reduce to the lower stage")
        if m_predicates[1]((p, p)):
            t = rng.random()
            merged = k_maps[1](np.array([t, 1.0 - t]), (p, p))
            if space.distance(merged, p) > 1e-9:
                raise MichaelConditionViolation(
                    "equal adjacent points must merge to the summed weight")


def _candidate_points(space, rng, samples):
    if isinstance(space, DiscreteSpace):
        return list(space.points)
    return [space.sample_point(rng) for _ in range(samples)]


def two_point_adapter_structure() -> ConvexityStructure:
    """The minimal staged structure on two atoms: only singleton supports are
    combinable (stage 0 is the identity; no higher stage exists), so the pair
    {0, 1} has no combination and the structure is not global."""
    space = DiscreteSpace((0.0, 1.0))
    m_preds = [lambda tup: all(p in (0.0, 1.0) for p in tup),
               lambda tup: False]
    k_maps = [lambda t, x: x[0], lambda t, x: x[0]]
    return michael_adapter(space, m_preds, k_maps)


def euclidean_adapter_structure(dim: int, box) -> ConvexityStructure:
    """Affine averaging wrapped in the staged-adapter interface; used to
    cross-check the adapter against the native Euclidean structure."""
    space = EuclideanBox(dim, box)

    def accept(tup) -> bool:
        return all(space.contains_point(p) for p in tup)

    def make_k(n):
        def k(t, x):
            pts = np.array([space.as_array(p) for p in x])
            return space.as_point(np.asarray(t, dtype=float) @ pts)

        return k

    n_max = 8
    return michael_adapter(
        space,
        [accept] * (n_max + 1),
        [make_k(n) for n in range(n_max + 1)],
        t_lipschitz=space.diameter(),
    )


# ---------------------------------------------------------------------------
# Deliberately broken structures (counterexample fixtures for the checker)
# ---------------------------------------------------------------------------

def broken_hull_compatibility_structure(dim: int = 2,
                                        box=((0.0, 1.0), (0.0, 1.0))) -> ConvexityStructure:
    """Breaks the fattened-hull condition only: the declared modulus lies by a
    factor of 10 and the combination returns the support point farthest from
    the support mean, so perturbed supports land well outside hull range.
    On unperturbed supports the output is a generator, hence inside the hull."""
    base = euclidean_convexity(dim, box)
    space = base.space

    def _combine(c: FormalConvexCombination):
        pts = np.array([space.as_array(p) for p in c.points])
        center = pts.mean(axis=0)
        dists = np.linalg.norm(pts - center, axis=1)
        return space.as_point(pts[int(np.argmax(dists))])

    return ConvexityStructure(
        name="broken_hull_compatibility",
        space=space,
        value_space=space,
        target_topology=SAME_AS_Y,
        admissible=base.admissible,
        hull_fn=base.hull_fn,
        combine_fn=_combine,
        modulus=lambda e: e.scaled(10.0),
        flags=frozenset({"global", "regular"}),
        t_lipschitz=space.diameter(),
    )


def broken_hull_containment_structure(dim: int = 2,
                                      box=((0.0, 1.0), (0.0, 1.0))) -> ConvexityStructure:
    """Breaks hull containment only: a constant drift of 1e-6 pushes every
    combination just past the 1e-9 hull tolerance while staying far inside
    the coarser accuracy radii the fattened-hull check uses."""
    base = euclidean_convexity(dim, box)
    space = base.space
    drift = 1e-6 * space.diameter()

    def _combine(c: FormalConvexCombination):
        pts = np.array([space.as_array(p) for p in c.points])
        out = c.weight_array() @ pts
        direction = np.zeros(space.dim)
        direction[0] = 1.0 if out[0] <= 0.5 * (space.lo[0] + space.hi[0]) else -1.0
        return space.as_point(space.clip(out + drift * direction))

    return ConvexityStructure(
        name="broken_hull_containment",
        space=space,
        value_space=space,
        target_topology=SAME_AS_Y,
        admissible=base.admissible,
        hull_fn=base.hull_fn,
        combine_fn=_combine,
        modulus=lambda e: e,
        flags=frozenset({"global", "regular"}),
        t_lipschitz=space.diameter(),
    )


def broken_point_continuity_structure(dim: int = 2,
                                      box=((0.0, 1.0), (0.0, 1.0))) -> ConvexityStructure:
    """Breaks continuity in the support points only: when two distinct support
    points sit closer than 0.01 the combination jumps to the first support
    point. Unperturbed supports (distinct sampled points) combine affinely,
    and the jump target is itself within the fattened set, so the hull checks
    stay green while point perturbation moves the output by a jump."""
    base = euclidean_convexity(dim, box)
    space = base.space

    def _combine(c: FormalConvexCombination):
        pts = np.array([space.as_array(p) for p in c.points])
        n = len(pts)
        for i in range(n):
            for j in range(i + 1, n):
                gap = float(np.linalg.norm(pts[i] - pts[j]))
                if 0.0 < gap < 0.01:
                    return space.as_point(pts[0])
        return space.as_point(c.weight_array() @ pts)

    return ConvexityStructure(
        name="broken_point_continuity",
        space=space,
        value_space=space,
        target_topology=SAME_AS_Y,
        admissible=base.admissible,
        hull_fn=base.hull_fn,
        combine_fn=_combine,
        modulus=lambda e: e,
        flags=frozenset({"global", "regular", "strong"}),
        t_lipschitz=space.diameter(),
        strong_modulus=lambda e: e,
    )
