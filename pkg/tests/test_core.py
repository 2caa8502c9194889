import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexkit.core import (
    DiscreteSpace,
    Entourage,
    EuclideanBox,
    MetricTree,
    SimplexCoords,
    ball,
    make_combination,
    support,
)
from convexkit.errors import (
    EmptySet,
    LengthMismatch,
    NegativeWeight,
    WeightSumOutOfTolerance,
)


def merge_oracle(weights, points):
    """Independent canonicalization: accumulate weight per distinct point."""
    acc = {}
    for w, p in zip(weights, points):
        if w != 0.0:
            acc[p] = acc.get(p, 0.0) + w
    total = sum(acc.values())
    return {p: w / total for p, w in acc.items()}


# -- make_combination ---------------------------------------------------------

def test_duplicate_points_merge_to_single_entry():
    c = make_combination([0.5, 0.5], [(1.0,), (1.0,)])
    assert c.weights == (1.0,)
    assert c.points == ((1.0,),)


def test_zero_weights_dropped():
    c = make_combination([0.3, 0.0, 0.7], [(1.0,), (2.0,), (3.0,)])
    assert c.points == ((1.0,), (3.0,))
    assert c.weights == pytest.approx((0.3, 0.7))


def test_merge_against_oracle():
    weights = [0.2, 0.3, 0.5]
    points = [(0.0,), (1.0,), (0.0,)]
    c = make_combination(weights, points)
    expected = merge_oracle(weights, points)
    assert set(c.points) == set(expected)
    for w, p in zip(c.weights, c.points):
        assert w == pytest.approx(expected[p], abs=1e-15)
    # spec example: ([0.2,0.3,0.5],[p,q,p]) -> weights {p: 0.7, q: 0.3}
    assert dict(zip(c.points, c.weights))[(0.0,)] == pytest.approx(0.7)


def test_validation_errors():
    with pytest.raises(LengthMismatch):
        make_combination([1.0], [(0.0,), (1.0,)])
    with pytest.raises(NegativeWeight):
        make_combination([-0.1, 1.1], [(0.0,), (1.0,)])
    with pytest.raises(WeightSumOutOfTolerance):
        make_combination([0.4, 0.4], [(0.0,), (1.0,)])
    with pytest.raises(WeightSumOutOfTolerance):
        make_combination([0.0, 0.0], [(0.0,), (1.0,)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=6),
       st.data())
def test_canonicalization_idempotent(raw, data):
    total = sum(raw)
    weights = [w / total for w in raw]
    pool = [(0.0,), (1.0,), (2.0,), (0.5,)]
    points = [pool[data.draw(st.integers(0, 3))] for _ in weights]
    c = make_combination(weights, points)
    again = make_combination(c.weights, c.points)
    assert again == c
    assert abs(math.fsum(c.weights) - 1.0) <= 1e-12


def test_canonicalization_is_permutation_invariant_bitwise():
    weights = [0.125, 0.25, 0.375, 0.25]
    points = [(3.0,), (1.0,), (3.0,), (2.0,)]
    c1 = make_combination(weights, points)
    perm = [2, 0, 3, 1]
    c2 = make_combination([weights[i] for i in perm], [points[i] for i in perm])
    assert c1 == c2  # exact tuple equality, including float bits


# -- support ------------------------------------------------------------------

def test_support_examples():
    assert support(make_combination([1.0], [(0.5,)])) == {(0.5,)}
    assert support(make_combination([0.5, 0.5], [(0.0,), (1.0,)])) == {(0.0,), (1.0,)}
    merged = make_combination([0.2, 0.3, 0.5], [(0.0,), (1.0,), (0.0,)])
    assert support(merged) == {(0.0,), (1.0,)}


# -- metric spaces ------------------------------------------------------------

def test_euclidean_requires_compact_box():
    with pytest.raises(ValueError):
        EuclideanBox(1, [[0.0, math.inf]])


@pytest.mark.parametrize("space_name", ["interval", "square", "tree", "discrete"])
def test_triangle_inequality_sampled(space_name, rng, path_tree):
    spaces = {
        "interval": EuclideanBox(1, [[0.0, 1.0]]),
        "square": EuclideanBox(2, [[0.0, 1.0], [0.0, 1.0]]),
        "tree": path_tree,
        "discrete": DiscreteSpace(["a", "b", "c"]),
    }
    space = spaces[space_name]
    for _ in range(1000):
        p, q, r = (space.sample_point(rng) for _ in range(3))
        dpq = space.distance(p, q)
        dqr = space.distance(q, r)
        dpr = space.distance(p, r)
        assert dpr <= dpq + dqr + 1e-12
        assert dpq == pytest.approx(space.distance(q, p), abs=1e-12)
    p = space.sample_point(rng)
    assert space.distance(p, p) == 0.0


def test_tree_distance_hand_values(path_tree):
    a = path_tree.vertex("a")
    c = path_tree.vertex("c")
    d = path_tree.vertex("d")
    assert path_tree.distance(a, c) == pytest.approx(3.5)
    assert path_tree.distance(a, d) == pytest.approx(3.0)
    mid_ab = path_tree.point("a", "b", 1.0)
    assert path_tree.distance(mid_ab, d) == pytest.approx(2.0)
    assert path_tree.distance(mid_ab, path_tree.point("a", "b", 0.25)) == pytest.approx(0.75)


def test_tree_point_canonicalization(path_tree):
    assert path_tree.point("b", "a", 2.0) == path_tree.vertex("a")
    assert path_tree.point("b", "a", 0.5) == path_tree.point("a", "b", 1.5)


def test_geodesic_point_parametrization(path_tree):
    a = path_tree.vertex("a")
    c = path_tree.vertex("c")
    p = path_tree.geodesic_point(a, c, 3.0)
    assert path_tree.distance(a, p) == pytest.approx(3.0)
    assert path_tree.distance(p, c) == pytest.approx(0.5)
    # walks through b onto the b-c edge
    assert p == path_tree.point("b", "c", 1.0)


# -- balls ----------------------------------------------------------------

def test_ball_on_the_line():
    space = EuclideanBox(1, [[-2.0, 2.0]])
    inside = ball(space, [(0.0,)], Entourage(1.0))
    assert inside((0.5,))
    assert not inside((1.5,))
    assert not inside((1.0,))  # open ball: boundary excluded


def test_ball_discrete_below_min_distance():
    space = DiscreteSpace(["a", "b"])
    member = ball(space, ["a"], Entourage(0.5))
    assert member("a")
    assert not member("b")


def test_ball_tree_geodesic(path_tree):
    a = path_tree.vertex("a")
    member = ball(path_tree, [a], Entourage(1.0))
    assert member(path_tree.point("a", "b", 0.999))
    assert not member(path_tree.point("a", "b", 1.0))
    assert not member(path_tree.point("a", "b", 1.5))


def test_ball_monotone_in_radius(rng, path_tree):
    centers = [path_tree.sample_point(rng) for _ in range(3)]
    small = ball(path_tree, centers, Entourage(0.4))
    large = ball(path_tree, centers, Entourage(0.9))
    for _ in range(200):
        x = path_tree.sample_point(rng)
        if small(x):
            assert large(x)


def test_ball_rejects_empty_centers(unit_interval):
    with pytest.raises(EmptySet):
        ball(unit_interval, [], Entourage(1.0))


# -- entourage / coords ---------------------------------------------------

def test_entourage_halving():
    e = Entourage(0.5)
    assert e.half().radius == 0.25
    with pytest.raises(ValueError):
        Entourage(0.0)


def test_simplex_coords_validation():
    SimplexCoords((0.5, 0.5))
    with pytest.raises(ValueError):
        SimplexCoords((0.7, 0.7))
    with pytest.raises(ValueError):
        SimplexCoords((-0.2, 1.2))
    c = SimplexCoords.from_array(np.array([2.0, 2.0]))
    assert c.coords == (0.5, 0.5)


def test_grid_density_one_d(unit_interval):
    assert len(unit_interval.grid(1000)) == 1000


def test_net_coverage(unit_interval):
    net = unit_interval.net(0.3)
    assert [p[0] for p in net] == pytest.approx([0.0, 0.5, 1.0])
