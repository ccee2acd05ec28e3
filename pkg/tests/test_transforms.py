import numpy as np
import pytest

from numpy.testing import assert_allclose

from app.convexfn import Affine, SmoothBlackBox, central_difference_gradient
from app.exceptions import ConfigurationError, DimensionError, PreconditionError
from app.transforms import (
    ConeGenerators, SubgradTriple, cone_membership, phi_to_w, phi_to_w_array, reduced_to_w1,
    reduced_to_w2, w_to_phi, w_to_phi_array, weighted_hull_residual
)


@pytest.mark.parametrize('delta', [1.0, 0.1, 0.01])
def test_round_trip_on_random_triples(delta):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        g = SubgradTriple(*rng.uniform(-10.0, 10.0, size=(3, n)))
        back = w_to_phi(phi_to_w(g, delta), delta)
        assert_allclose(back.as_vector(), g.as_vector(), rtol=0.0, atol=1e-12)


def test_reverse_round_trip_loses_precision_as_delta_squared():
    # Phi blocks of a W triple grow like 1/delta^2 and cancel in phi_to_w.
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        delta = float(rng.uniform(1e-3, 1.0))
        g = SubgradTriple(*rng.uniform(-10.0, 10.0, size=(3, n)))
        again = phi_to_w(w_to_phi(g, delta), delta)
        assert_allclose(again.as_vector(), g.as_vector(), rtol=0.0, atol=1e-12 / delta ** 2)


def test_array_forms_match_triples():
    rng = np.random.default_rng(1)
    G = rng.normal(size=(7, 6))
    expected = np.vstack([phi_to_w(SubgradTriple.from_vector(g), 0.1).as_vector() for g in G])
    assert_allclose(phi_to_w_array(G, 0.1), expected)
    assert_allclose(w_to_phi_array(phi_to_w_array(G, 0.1), 0.1), G, atol=1e-10)


@pytest.mark.parametrize('delta', [1.0, 0.1])
def test_phi_gradient_maps_to_w_gradient(delta):
    w = Affine.constraint([0.7, -1.2], [2.0, 0.5], [-0.3, 1.1], offset=0.4)
    phi = SmoothBlackBox(
        lambda z, t: w.evaluate(np.concatenate([
            z[:2], (z[2:4] - z[:2]) / delta, (z[4:] - 2 * z[2:4] + z[:2]) / delta ** 2])),
        n=2, nblocks=3)
    rng = np.random.default_rng(5)
    for _ in range(50):
        nodes = rng.uniform(-3.0, 3.0, size=6)
        g_phi = central_difference_gradient(phi, nodes, h=1e-5)
        g_w = phi_to_w(SubgradTriple.from_vector(g_phi), delta)
        assert_allclose(g_w.as_vector(), w.coefficients, atol=1e-5)


def test_delta_must_be_positive():
    g = SubgradTriple([1.0], [2.0], [3.0])
    with pytest.raises(ConfigurationError):
        phi_to_w(g, 0.0)


def test_triple_blocks_must_agree():
    with pytest.raises(DimensionError):
        SubgradTriple([1.0, 2.0], [1.0], [1.0])
    with pytest.raises(DimensionError):
        SubgradTriple.from_vector([1.0, 2.0])


def test_reduction_to_w2():
    delta = 0.1
    image = phi_to_w(SubgradTriple([1.0], [-3.0], [0.0]), delta)
    assert_allclose(image.v2s, [0.0])
    xs, v1s = reduced_to_w2(SubgradTriple([1.0], [-3.0], [0.0]), delta)
    assert_allclose(xs, image.xs)
    assert_allclose(v1s, image.v1s)
    with pytest.raises(PreconditionError):
        reduced_to_w2(SubgradTriple([1.0], [-3.0], [0.5]), delta)


def test_reduction_to_w1():
    delta = 0.1
    g = SubgradTriple([1.0], [-4.0], [2.0])
    image = phi_to_w(g, delta)
    assert_allclose(image.v1s, [0.0], atol=1e-15)
    xs, v2s = reduced_to_w1(g, delta)
    assert_allclose(xs, image.xs)
    assert_allclose(v2s, image.v2s)
    with pytest.raises(PreconditionError):
        reduced_to_w1(SubgradTriple([1.0], [-3.0], [2.0]), delta)


def test_cone_membership_recovers_multiplier():
    member, coefficients = cone_membership([2.0, -6.0], ConeGenerators([[1.0, -3.0]]))
    assert member
    assert_allclose(coefficients, [2.0], atol=1e-9)


def test_cone_membership_rejects_opposite_direction():
    member, _ = cone_membership([-2.0, 6.0], ConeGenerators([[1.0, -3.0]]))
    assert not member


def test_empty_cone_holds_only_zero():
    empty = ConeGenerators(np.zeros((0, 2)))
    assert cone_membership([0.0, 0.0], empty)[0]
    assert not cone_membership([1.0, 0.0], empty)[0]


def test_cone_multipliers_sum_per_owner():
    cone = ConeGenerators([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], owners=(0, 0, 1))
    assert_allclose(cone.multipliers(np.array([1.0, 2.0, 3.0]), 2), [3.0, 3.0])


def test_weighted_hull_residual():
    kink = np.array([[1.0], [-1.0]])
    assert weighted_hull_residual([0.5], [(1.0, kink)]) == pytest.approx(0.0, abs=1e-9)
    assert weighted_hull_residual([1.5], [(1.0, kink)]) == pytest.approx(0.5, abs=1e-6)
    assert weighted_hull_residual([3.0], [(2.0, np.array([[1.5]]))]) == pytest.approx(0.0)
    assert weighted_hull_residual([1.0], [(0.0, kink)]) == pytest.approx(1.0)
