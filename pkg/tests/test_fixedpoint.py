import numpy as np
import pytest

from convexkit.convexity import discrete_convexity, euclidean_convexity
from convexkit.core import Entourage, EuclideanBox
from convexkit.errors import ContainmentViolated, ResidualAboveTolerance
from convexkit.fixedpoint import (
    AlmostFixedPoint,
    SimplexMap,
    almost_fixed_point,
    browder_type,
    brouwer_solve,
    coordinate_power_map,
    cyclic_shift_map,
    fixed_point,
    identity_simplex_map,
    kakutani_type,
    simplex_residual_search,
)
from convexkit.multifunction import (
    affine_map,
    ball_map,
    constant_map,
    finite_fiber_map,
    identity_map,
    interval_map,
    piecewise_const_map,
)


@pytest.fixture
def kakutani_step(unit_interval):
    return piecewise_const_map(
        unit_interval, [0.5],
        pieces=[{"points": [[0.75]]}, {"points": [[0.25]]}],
        at_breakpoints=[{"interval": [0.25, 0.75]}],
    )


# -- brouwer_solve -------------------------------------------------------------

def test_brouwer_identity_immediate():
    t = brouwer_solve(identity_simplex_map(2), 1e-6)
    arr = t.as_array()
    assert arr.sum() == pytest.approx(1.0)


def test_brouwer_cyclic_shift_barycenter():
    t = brouwer_solve(cyclic_shift_map(2), 1e-4)
    assert np.allclose(t.as_array(), 1.0 / 3.0, atol=1e-3)
    # residual certificate is what the solver promised
    arr = t.as_array()
    assert np.max(np.abs(np.roll(arr, 1) - arr)) <= 1e-4


def quadratic_fixed_points():
    # algebraic enumeration for f(t) = (t0^2, t1^2)/(t0^2+t1^2) on the edge:
    # t0^2/(t0^2+t1^2) = t0 with t1 = 1-t0 gives t0 in {0, 1/2, 1}
    return [np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([1.0, 0.0])]


def test_brouwer_quadratic_edge_map():
    t = brouwer_solve(coordinate_power_map(1, 2.0), 1e-6)
    arr = t.as_array()
    assert min(np.max(np.abs(arr - fp)) for fp in quadratic_fixed_points()) <= 1e-5
    F = coordinate_power_map(1, 2.0)
    assert np.max(np.abs(F.apply(arr) - arr)) <= 1e-6


def test_brouwer_affine_contraction_2d():
    # t -> (t + barycenter)/2 has the barycenter as unique fixed point
    target = np.full(3, 1.0 / 3.0)

    def apply(t):
        return 0.5 * (np.asarray(t) + target)

    t = brouwer_solve(SimplexMap(2, apply=apply), 1e-7)
    assert np.allclose(t.as_array(), target, atol=1e-6)


def test_sperner_residual_bound_on_shipped_maps(rng):
    # completely labeled cells at step h localize residuals to
    # (n+1) * (h + omega(h)) where omega is a sampled continuity modulus
    for F, n in [(cyclic_shift_map(2), 2), (coordinate_power_map(1, 2.0), 1)]:
        m = 24
        h = 1.0 / m
        omega = 0.0
        for _ in range(400):
            a = rng.dirichlet(np.ones(n + 1))
            d = rng.dirichlet(np.ones(n + 1)) - a
            b = a + d * (h / max(np.max(np.abs(d)), 1e-12))
            b = np.maximum(b, 0.0)
            b = b / b.sum()
            omega = max(omega, float(np.max(np.abs(
                np.asarray(F.apply(a)) - np.asarray(F.apply(b))))))
        bound = (n + 1) * (h + omega)
        t = brouwer_solve(F, bound, grid=m, max_depth=1)
        arr = t.as_array()
        assert np.max(np.abs(np.asarray(F.apply(arr)) - arr)) <= bound


# -- simplex_residual_search ---------------------------------------------------

def test_residual_search_constant():
    target = np.array([0.25, 0.75])
    F = SimplexMap(1, apply_net=lambda t, eps: [target])
    t = simplex_residual_search(F, 0.01)
    assert np.allclose(t.as_array(), target, atol=0.02)


def test_residual_search_identity_valued():
    F = SimplexMap(1, apply_net=lambda t, eps: [np.asarray(t)])
    t = simplex_residual_search(F, 1e-9)
    assert t.as_array().sum() == pytest.approx(1.0)


def test_residual_search_kakutani_lifted(kakutani_step):
    def apply_net(t, eps):
        x = float(t[1])
        return [np.array([1.0 - float(v[0]), float(v[0])])
                for v in kakutani_step.eval_net((x,), eps)]

    t = simplex_residual_search(SimplexMap(1, apply_net=apply_net), 1e-6)
    assert t.as_array()[1] == pytest.approx(0.5, abs=1e-6)


def test_residual_search_reports_best_on_failure():
    away = np.array([1.0, 0.0])
    F = SimplexMap(1, apply_net=lambda t, eps: [away] if t[1] > 0.4 else
                   [np.array([0.0, 1.0])])
    with pytest.raises(ResidualAboveTolerance) as info:
        simplex_residual_search(F, 1e-12, max_depth=6)
    assert info.value.best is not None


# -- almost_fixed_point ----------------------------------------------------

def test_almost_fixed_point_affine_reflection(euclid_1d, unit_interval):
    # T(x) = {1 - x}: unique fixed point 0.5 by algebra
    T = affine_map(unit_interval, [[-1.0]], [1.0], codomain=euclid_1d.space)
    R = identity_map(unit_interval)
    afp = almost_fixed_point(euclid_1d, R, T, Entourage(0.05))
    assert afp.y[0] == pytest.approx(0.5, abs=0.05)
    assert afp.residual < 0.05


def test_almost_fixed_point_kakutani(euclid_1d, kakutani_step):
    R = identity_map(kakutani_step.domain)
    afp = almost_fixed_point(euclid_1d, R, kakutani_step, Entourage(0.05))
    assert afp.y[0] == pytest.approx(0.5, abs=0.05)
    assert afp.residual < 0.05


def test_almost_fixed_point_constant_is_exact(euclid_1d, unit_interval):
    T = constant_map(unit_interval, [[0.3]], euclid_1d.space)
    R = identity_map(unit_interval)
    afp = almost_fixed_point(euclid_1d, R, T, Entourage(0.1))
    assert afp.y == (0.3,)
    assert afp.residual == 0.0


def test_almost_fixed_point_face_equation(euclid_1d, unit_interval):
    T = affine_map(unit_interval, [[-1.0]], [1.0], codomain=euclid_1d.space)
    R = identity_map(unit_interval)
    afp = almost_fixed_point(euclid_1d, R, T, Entourage(0.05))
    assert afp.face_residual <= 1e-6


# -- fixed_point -----------------------------------------------------------

def geometric_schedule(k):
    return [Entourage(2.0 ** -n) for n in range(1, k + 1)]


def test_fixed_point_kakutani_converges(euclid_1d, kakutani_step):
    R = identity_map(kakutani_step.domain)
    cert = fixed_point(euclid_1d, R, kakutani_step, kakutani_step,
                       geometric_schedule(10))
    assert cert.status == "converged"
    assert abs(cert.point[0] - 0.5) <= 2.0 * 2.0 ** -10
    for row in cert.trace:
        assert row["s_residual"] <= row["s_bound"]
    assert cert.residual <= 3.0 * 2.0 ** -10


def test_fixed_point_contraction(euclid_1d, unit_interval):
    half = affine_map(unit_interval, [[0.5]], [0.0], codomain=euclid_1d.space)
    R = identity_map(unit_interval)
    cert = fixed_point(euclid_1d, R, half, half, geometric_schedule(8))
    assert cert.status == "converged"
    assert abs(cert.point[0]) <= 1e-2


def test_fixed_point_identity_stage_one(euclid_1d, unit_interval):
    ident = identity_map(unit_interval)
    cert = fixed_point(euclid_1d, ident, ident, ident, [Entourage(0.5)])
    assert cert.trace[0]["s_residual"] == 0.0
    assert cert.status == "converged"


def test_fixed_point_containment_violation(euclid_1d, unit_interval):
    T = affine_map(unit_interval, [[-1.0]], [1.0], codomain=euclid_1d.space)
    S = constant_map(unit_interval, [[0.0]], euclid_1d.space)
    R = identity_map(unit_interval)
    with pytest.raises(ContainmentViolated):
        fixed_point(euclid_1d, R, T, S, geometric_schedule(3))


# -- kakutani_type ----------------------------------------------------------

def test_kakutani_type_square_demo():
    structure = euclidean_convexity(2, [[0.0, 1.0], [0.0, 1.0]])
    square = structure.space
    f = identity_map(square)
    # R: convex-ball values around the reflected point; (0.5, 0.5) is fixed
    R = ball_map(square, [[-1.0, 0.0], [0.0, -1.0]], [1.0, 1.0], 0.1,
                 codomain=square, tag="usc")
    cert = kakutani_type(structure, f, R, geometric_schedule(6),
                         audit_density=400)
    assert cert.status == "converged"
    assert np.allclose(cert.point, [0.5, 0.5], atol=0.15)


def test_kakutani_type_identity_and_constant():
    structure = euclidean_convexity(2, [[0.0, 1.0], [0.0, 1.0]])
    square = structure.space
    f = identity_map(square)
    cert = kakutani_type(structure, f, identity_map(square),
                         geometric_schedule(3), audit_density=150)
    assert cert.status == "converged"
    const = constant_map(square, [[0.25, 0.75]], square)
    cert2 = kakutani_type(structure, f, const, geometric_schedule(4),
                          audit_density=150)
    assert cert2.status == "converged"
    assert np.allclose(cert2.point, [0.25, 0.75], atol=0.1)


# -- browder_type ------------------------------------------------------------

def test_browder_type_two_fiber_exact(unit_interval):
    structure = discrete_convexity(["y0", "y1"], {"y0": [0.0], "y1": [1.0]})
    T = finite_fiber_map(unit_interval, {"y0": [[-1.0, 0.7]], "y1": [[0.3, 2.0]]})
    R = affine_map(structure.value_space, [[1.0]], [0.0], codomain=unit_interval)
    out = browder_type(structure, R, T)
    assert out["exact"]
    assert out["residual"] <= 1e-12
    assert out["point"][0] == pytest.approx(0.5)


def test_browder_type_constant_map(unit_interval):
    structure = discrete_convexity(["y0", "y1"], {"y0": [0.0], "y1": [1.0]})
    T = constant_map(unit_interval, ["y1"], structure.space)
    R = affine_map(structure.value_space, [[1.0]], [0.0], codomain=unit_interval)
    out = browder_type(structure, R, T)
    assert out["exact"]
    assert out["point"][0] == pytest.approx(1.0)


def test_browder_type_singleton_space(unit_interval):
    structure = discrete_convexity(["y0"], {"y0": [0.5]})
    T = constant_map(unit_interval, ["y0"], structure.space)
    R = affine_map(structure.value_space, [[1.0]], [0.0], codomain=unit_interval)
    out = browder_type(structure, R, T)
    assert out["exact"]
    assert out["point"][0] == pytest.approx(0.5)


# -- determinism --------------------------------------------------------------

def test_fixed_point_bitwise_determinism(euclid_1d, kakutani_step):
    R = identity_map(kakutani_step.domain)
    a = fixed_point(euclid_1d, R, kakutani_step, kakutani_step,
                    geometric_schedule(6), audit_density=300)
    b = fixed_point(euclid_1d, R, kakutani_step, kakutani_step,
                    geometric_schedule(6), audit_density=300)
    assert a.to_certificate() == b.to_certificate()
