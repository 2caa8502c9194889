import numpy as np
import pytest

from convexkit.convexity import discrete_convexity, euclidean_convexity
from convexkit.core import Entourage, EuclideanBox
from convexkit.errors import DomainMismatch, MalformedSpec
from convexkit.multifunction import (
    ball_map,
    check_lsc,
    check_usc,
    compile,
    compose,
    constant_map,
    finite_fiber_map,
    hull_map,
    identity_map,
    interval_map,
    meets_ball,
    piecewise_const_map,
)


@pytest.fixture
def x_to_one(unit_interval):
    # T(x) = [x, 1]
    return interval_map(unit_interval, [1.0, 0.0], [0.0, 1.0])


@pytest.fixture
def kakutani_step(unit_interval):
    # {3/4} below 1/2, the interval [1/4, 3/4] exactly at 1/2, {1/4} above
    return piecewise_const_map(
        unit_interval, [0.5],
        pieces=[{"points": [[0.75]]}, {"points": [[0.25]]}],
        at_breakpoints=[{"interval": [0.25, 0.75]}],
    )


@pytest.fixture
def browder_fibers(unit_interval):
    return finite_fiber_map(unit_interval,
                            {"y0": [[-1.0, 0.7]], "y1": [[0.3, 2.0]]})


def test_interval_net_uniform_grid_oracle(x_to_one):
    net = x_to_one.eval_net((0.5,), 0.25)
    assert net.reshape(-1).tolist() == pytest.approx([0.5, 0.75, 1.0])


def test_ball_contains_boundary_point(unit_interval):
    T = ball_map(unit_interval, [[1.0], [0.0]], [0.0, 0.0], 1.0)
    assert T.contains((0.3,), (0.3, 1.0), 1e-9)
    assert not T.contains((0.3,), (0.3, 1.1), 1e-9)


def test_ball_net_is_internal_epsilon_net(unit_interval, rng):
    T = ball_map(unit_interval, [[1.0], [0.0]], [0.0, 0.0], 1.0)
    x = (0.25,)
    eps = 0.2
    net = T.eval_net(x, eps)
    assert np.all(T.value_distance_many(x, net) <= 1e-9)
    for _ in range(300):
        theta = rng.random() * 2 * np.pi
        rho = np.sqrt(rng.random())
        p = np.array([0.25 + rho * np.cos(theta), rho * np.sin(theta)])
        assert np.min(np.linalg.norm(net - p, axis=1)) <= eps + 1e-12


def test_piecewise_singleton_branch(kakutani_step):
    net = kakutani_step.eval_net((0.7,), 0.05)
    assert net.reshape(-1).tolist() == [0.25]
    mid = kakutani_step.eval_net((0.5,), 0.25)
    assert mid.reshape(-1).tolist() == pytest.approx([0.25, 0.5, 0.75])


def test_piecewise_breakpoint_snap(kakutani_step):
    # within 1e-9 of the breakpoint the closed-graph branch is used
    assert kakutani_step.value_distance((0.5 + 1e-12,), (0.5,)) == 0.0
    assert kakutani_step.value_distance((0.51,), (0.5,)) == pytest.approx(0.25)


def test_net_refinement_chain(x_to_one, kakutani_step, unit_interval):
    ball = ball_map(unit_interval, [[1.0], [0.0]], [0.0, 0.0], 1.0)
    for T, xs in [(x_to_one, [(0.1,), (0.6,)]),
                  (kakutani_step, [(0.2,), (0.5,)]),
                  (ball, [(0.3,)])]:
        for x in xs:
            for eps in (0.4, 0.2, 0.1):
                coarse = np.atleast_2d(T.eval_net(x, eps))
                fine = np.atleast_2d(T.eval_net(x, eps / 2))
                d_cf = max(np.min(np.linalg.norm(fine - c, axis=1)) for c in coarse)
                d_fc = max(np.min(np.linalg.norm(coarse - f, axis=1)) for f in fine)
                assert max(d_cf, d_fc) <= eps + 1e-12


# -- hull_map -------------------------------------------------------------

def test_hull_map_fills_pair_to_interval(unit_interval):
    structure = euclidean_convexity(1, [[-0.5, 1.5]])
    T = constant_map(unit_interval, [[0.0], [1.0]], structure.space)
    H = hull_map(structure, T)
    net = H.eval_net((0.3,), 0.125)
    vals = np.sort(net.reshape(-1))
    assert vals[0] == pytest.approx(0.0)
    assert vals[-1] == pytest.approx(1.0)
    assert np.max(np.diff(vals)) <= 0.125
    assert H.contains((0.3,), (0.4,), 1e-9)


def test_hull_map_idempotent_on_convex_values(kakutani_step):
    structure = euclidean_convexity(1, [[0.0, 1.0]])
    H = hull_map(structure, kakutani_step)
    for x in [(0.2,), (0.5,), (0.9,)]:
        for y in [(0.2,), (0.25,), (0.5,), (0.75,), (0.8,)]:
            assert H.contains(x, y, 1e-6) == (kakutani_step.value_distance(x, y) <= 1e-6)


def test_hull_map_browder_fibers(browder_fibers):
    structure = discrete_convexity(["y0", "y1"], {"y0": [0.0], "y1": [1.0]})
    H = hull_map(structure, browder_fibers)
    # at 0.5 both fibers are active: the embedded hull is [0, 1]
    net = H.eval_net((0.5,), 0.25)
    vals = np.sort(np.atleast_2d(net).reshape(-1))
    assert vals[0] == pytest.approx(0.0, abs=1e-9)
    assert vals[-1] == pytest.approx(1.0, abs=1e-9)
    assert H.contains((0.5,), (0.4,), 1e-9)
    # at 0.1 only y0 is active
    assert H.value_distance((0.1,), (0.0,)) <= 1e-12
    assert H.value_distance((0.1,), (1.0,)) == pytest.approx(1.0, abs=1e-9)


# -- meets_ball -----------------------------------------------------------

def test_meets_ball_examples(x_to_one, browder_fibers):
    assert meets_ball(x_to_one, (0.2,), (0.9,), Entourage(0.05))
    assert not meets_ball(x_to_one, (0.2,), (0.1,), Entourage(0.05))
    assert meets_ball(browder_fibers, (0.5,), "y1", Entourage(0.5))
    assert not meets_ball(browder_fibers, (0.1,), "y1", Entourage(0.5))


# -- semicontinuity audits --------------------------------------------------

def grid_1d(space, n):
    return [(float(v),) for v in np.linspace(space.lo[0], space.hi[0], n)]


def test_lsc_passes_for_continuous_interval(x_to_one, unit_interval):
    samples = grid_1d(unit_interval, 101)
    report = check_lsc(x_to_one, samples, delta=0.011, eps=0.01)
    assert report.passed


def test_lsc_fails_on_jump(unit_interval):
    T = piecewise_const_map(
        unit_interval, [0.5],
        pieces=[{"points": [[0.0]]}, {"points": [[1.0]]}],
        at_breakpoints=[{"points": [[1.0]]}],
    )
    samples = grid_1d(unit_interval, 101)
    report = check_lsc(T, samples, delta=0.011, eps=0.01)
    assert not report.passed
    assert all(abs(x[0] - 0.5) < 0.03 for x, _, _ in report.violations)


def test_lsc_constant_map(unit_interval):
    T = constant_map(unit_interval, [[0.4]], EuclideanBox(1, [[0.0, 1.0]]))
    report = check_lsc(T, grid_1d(unit_interval, 51), delta=0.03, eps=0.01)
    assert report.passed


def test_usc_passes_for_kakutani_and_lsc_fails(kakutani_step, unit_interval):
    samples = grid_1d(unit_interval, 129)  # includes 0.5: binary grid
    usc = check_usc(kakutani_step, samples, delta=0.009, eps=0.005)
    assert usc.passed
    lsc = check_lsc(kakutani_step, samples, delta=0.009, eps=0.005)
    assert not lsc.passed
    assert any(abs(x[0] - 0.5) < 0.01 for x, _, _ in lsc.violations)


def test_usc_constant(unit_interval):
    T = constant_map(unit_interval, [[0.4]], EuclideanBox(1, [[0.0, 1.0]]))
    assert check_usc(T, grid_1d(unit_interval, 51), delta=0.03, eps=0.01).passed


def test_open_fibers_iff_lsc(browder_fibers, unit_interval):
    """Discrete codomain: open fibers are equivalent to lower semicontinuity.

    At the discrete entourage scale (2*eps beyond the 0/1 metric's reach)
    the literal audit reduces to nearby values being nonempty; the sampled
    content of the equivalence is fiber interiorness: every sample carrying
    a label has a carrying neighbor, which fails for a closed point-fiber.
    """
    samples = grid_1d(unit_interval, 101)
    report = check_lsc(browder_fibers, samples, delta=0.011, eps=0.6)
    assert report.passed

    def carriers(T, label):
        return [x for x in samples if label in T.eval_net(x, 1.0)]

    for label in ("y0", "y1"):
        for x in carriers(browder_fibers, label):
            near = [xn for xn in carriers(browder_fibers, label)
                    if 0.0 < abs(xn[0] - x[0]) <= 0.011]
            assert near, f"isolated carrier {x} for {label}"

    # contrast: a fiber that is a single point is not open, and its carrier
    # set has no interior at any sampling resolution
    closed = finite_fiber_map(unit_interval,
                              {"y0": [[-1.0, 2.0]], "y1": [[0.5 - 1e-12, 0.5 + 1e-12]]})
    isolated = carriers(closed, "y1")
    assert isolated == [(0.5,)]
    near = [xn for xn in isolated if 0.0 < abs(xn[0] - 0.5) <= 0.011]
    assert not near


# -- compose ----------------------------------------------------------------

def test_compose_with_identity(x_to_one, unit_interval):
    comp = compose(x_to_one, identity_map(unit_interval))
    for x in [(0.2,), (0.8,)]:
        a = np.sort(np.atleast_2d(comp.eval_net(x, 0.1)).reshape(-1))
        b = np.sort(np.atleast_2d(x_to_one.eval_net(x, 0.05)).reshape(-1))
        assert abs(a[0] - b[0]) <= 0.1 and abs(a[-1] - b[-1]) <= 0.1


def test_compose_constant_inner(x_to_one, unit_interval):
    inner = constant_map(unit_interval, [[0.0]], unit_interval)
    comp = compose(x_to_one, inner)
    net = np.atleast_2d(comp.eval_net((0.9,), 0.2)).reshape(-1)
    assert net.min() == pytest.approx(0.0, abs=0.11)
    assert net.max() == pytest.approx(1.0, abs=0.11)


def test_compose_halving_oracle(unit_interval):
    # R(y) = {y/2}, T(x) = [x, 1): composition at y=1 nets [1/2, 1]
    R = affine = compile({"kind": "affine", "matrix": [[0.5]], "offset": [0.0]},
                         unit_interval)
    T = interval_map(unit_interval, [1.0, 0.0], [0.0, 1.0])
    comp = compose(T, R)
    net = np.sort(np.atleast_2d(comp.eval_net((1.0,), 0.1)).reshape(-1))
    assert net[0] == pytest.approx(0.5, abs=0.06)
    assert net[-1] == pytest.approx(1.0, abs=1e-9)


def test_compose_associative_up_to_slack(unit_interval):
    A = compile({"kind": "affine", "matrix": [[0.5]], "offset": [0.25]}, unit_interval)
    B = compile({"kind": "affine", "matrix": [[0.9]], "offset": [0.0]}, unit_interval)
    T = interval_map(unit_interval, [1.0, 0.0], [0.0, 1.0])
    left = compose(compose(T, B), A)
    right = compose(T, compose(B, A))
    eps = 0.1
    for x in [(0.0,), (0.5,), (1.0,)]:
        l = np.sort(np.atleast_2d(left.eval_net(x, eps)).reshape(-1))
        r = np.sort(np.atleast_2d(right.eval_net(x, eps)).reshape(-1))
        assert abs(l[0] - r[0]) <= 2 * eps and abs(l[-1] - r[-1]) <= 2 * eps


def test_compose_domain_mismatch(unit_interval, browder_fibers):
    with pytest.raises(DomainMismatch):
        compose(browder_fibers, browder_fibers)


def test_compile_diagnostics(unit_interval):
    with pytest.raises(MalformedSpec):
        compile({"kind": "nope"}, unit_interval)
    with pytest.raises(MalformedSpec):
        compile({}, unit_interval)
    with pytest.raises(MalformedSpec):
        compile({"kind": "interval_valued", "lo": [1.0, 0.0]}, unit_interval)
