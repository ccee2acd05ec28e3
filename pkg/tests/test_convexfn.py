import numpy as np
import pytest

from numpy.testing import assert_allclose

from app.constants import Block
from app.convexfn import (
    Affine, ConvexQuadratic, MaxOfAffine, SmoothBlackBox, central_difference_gradient,
    check_subgradient_inequality, subgradient_gap
)
from app.exceptions import ConfigurationError, DimensionError, UnsupportedError


def absolute_value():
    return MaxOfAffine([Affine.state([1.0]), Affine.state([-1.0])])


def test_affine_constraint_on_active_arc():
    w = Affine.constraint([1.0], [-3.0])
    assert w.evaluate([1.0, 1.0 / 3.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert w.depends_on == frozenset({Block.X, Block.V1})
    assert_allclose(w.subdiff([5.0, 2.0, -1.0]).generators, [[1.0, -3.0, 0.0]])


def test_affine_rejects_wrong_length():
    with pytest.raises(DimensionError):
        Affine([1.0, 2.0], n=1, nblocks=3)


def test_affine_point_dimension_checked():
    with pytest.raises(DimensionError):
        Affine.state([1.0]).evaluate([1.0, 2.0])


def test_quadratic_gradient_and_subdiff():
    f = ConvexQuadratic.state([[1.0]])
    assert f.evaluate([2.0]) == pytest.approx(2.0)
    assert_allclose(f.gradient([2.0]), [2.0])
    assert f.subdiff([2.0]).is_singleton


def test_quadratic_rejects_indefinite_matrix():
    with pytest.raises(ConfigurationError):
        ConvexQuadratic.state([[1.0, 0.0], [0.0, -1.0]])


def test_quadratic_rejects_asymmetric_matrix():
    with pytest.raises(ConfigurationError):
        ConvexQuadratic.state([[1.0, 1.0], [0.0, 1.0]])


def test_quadratic_constraint_tracks_blocks():
    matrix = np.zeros((3, 3))
    matrix[2, 2] = 2.0
    w = ConvexQuadratic.constraint(matrix, linear=[1.0, 0.0, 0.0])
    assert w.depends_on == frozenset({Block.X, Block.V2})


def test_max_of_affine_kink_has_both_pieces():
    q = absolute_value()
    generators = q.subdiff([0.0]).generators
    assert sorted(generators[:, 0]) == [-1.0, 1.0]
    assert q.subdiff([2.0]).is_singleton
    assert q.evaluate([-3.0]) == 3.0
    assert not q.is_smooth


def test_max_of_affine_near_kink_uses_tolerance():
    q = absolute_value()
    assert len(q.subdiff([1e-12], eps_act=1e-8)) == 2
    assert len(q.subdiff([1e-3], eps_act=1e-8)) == 1


def test_max_of_affine_evaluate_many_matches_pointwise():
    q = absolute_value()
    Z = np.random.default_rng(3).normal(size=(50, 1))
    assert_allclose(q.evaluate_many(Z), [q.evaluate(z) for z in Z])


def test_negative_activity_tolerance_rejected():
    with pytest.raises(ConfigurationError):
        absolute_value().subdiff([0.0], eps_act=-1.0)


def test_subgradient_inequality_quadratic():
    f = ConvexQuadratic.state([[1.0]])
    assert check_subgradient_inequality(f, [1.0], [1.0], samples=100)
    assert not check_subgradient_inequality(f, [1.0], [2.0], samples=100)


def test_subgradient_inequality_absolute_value():
    q = absolute_value()
    assert check_subgradient_inequality(q, [0.0], [0.5])
    assert not check_subgradient_inequality(q, [0.0], [1.5])


def test_subgradient_gap_of_concave_function_is_negative():
    f = SmoothBlackBox(lambda z, t: -float(z @ z), lambda z, t: -2 * z)
    assert not f.is_convex
    assert subgradient_gap(f, [0.5], [-1.0], samples=200, radius=2.0) < 0.0


@pytest.mark.parametrize('fn', [
    Affine.constraint([1.0], [-3.0], [0.5], offset=2.0),
    ConvexQuadratic.state([[2.0, 0.5], [0.5, 1.0]], linear=[1.0, -1.0]),
    MaxOfAffine([Affine.state([1.0, 0.0]), Affine.state([0.0, 1.0]),
                 Affine.state([-1.0, -1.0], offset=0.5)]),
])
def test_every_generator_supports_convex_kinds(fn):
    rng = np.random.default_rng(0)
    for seed in range(100):
        z0 = rng.uniform(-2.0, 2.0, size=fn.arity)
        for g in fn.subdiff(z0).generators:
            assert check_subgradient_inequality(fn, z0, g, samples=20, seed=seed)


def test_black_box_without_gradient():
    f = SmoothBlackBox(lambda z, t: float(z[0] ** 2))
    assert not f.has_gradient
    with pytest.raises(UnsupportedError):
        f.gradient([1.0])


def test_central_difference_gradient_matches_quadratic():
    f = ConvexQuadratic.state([[2.0, 0.5], [0.5, 1.0]], linear=[1.0, -1.0])
    z = np.array([0.3, -0.7])
    assert_allclose(central_difference_gradient(f, z), f.gradient(z), atol=1e-6)


def test_increment_matches_difference_of_values():
    f = ConvexQuadratic.state([[2.0, 0.5], [0.5, 1.0]], linear=[1.0, -1.0])
    rng = np.random.default_rng(1)
    Z, Z0 = rng.normal(size=(10, 2)), rng.normal(size=(10, 2))
    assert_allclose(f.increment_many(Z, Z0), f.evaluate_many(Z) - f.evaluate_many(Z0),
                    atol=1e-12)
