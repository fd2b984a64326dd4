import math

import numpy as np
import pytest

from stabelast.basis import (
    EDGE_VERTICES,
    bubble_space,
    edge_quadrature,
    p1_eval,
    quadrature_rule,
)
from stabelast.errors import UnsupportedElementError


def barycentric_moment(a, b, c, area=0.5):
    """Closed form: int over K of lam1^a lam2^b lam3^c."""
    return (
        math.factorial(a)
        * math.factorial(b)
        * math.factorial(c)
        * 2.0
        * area
        / math.factorial(a + b + c + 2)
    )


@pytest.mark.parametrize("degree", [1, 2, 3, 5])
def test_quadrature_exactness_against_moments(degree):
    rule = quadrature_rule(degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for a in range(rule.degree + 1):
        for b in range(rule.degree + 1 - a):
            c = rule.degree - a - b
            quad = 0.5 * np.sum(
                rule.weights
                * rule.points[:, 0] ** a
                * rule.points[:, 1] ** b
                * rule.points[:, 2] ** c
            )
            assert quad == pytest.approx(barycentric_moment(a, b, c), rel=1e-13, abs=1e-15)


def test_quadrature_degree2_integrates_x_squared():
    # reference triangle (0,0)-(1,0)-(0,1): x = lam2, int x^2 = 1/12
    rule = quadrature_rule(2)
    val = 0.5 * np.sum(rule.weights * rule.points[:, 1] ** 2)
    assert val == pytest.approx(1.0 / 12.0, rel=1e-14)


def test_quadrature_unsupported_degree():
    with pytest.raises(ValueError, match="unsupported"):
        quadrature_rule(4)
    with pytest.raises(ValueError, match="unsupported"):
        quadrature_rule(7)


def test_edge_quadrature_degree3():
    t, w = edge_quadrature()
    assert w.sum() == pytest.approx(1.0)
    for k in range(4):
        assert np.sum(w * t**k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


def test_p1_values_are_barycentric_coordinates():
    vals, grads = p1_eval((1.0, 0.0, 0.0))
    assert np.allclose(vals, [1.0, 0.0, 0.0])
    vals, _ = p1_eval((1 / 3, 1 / 3, 1 / 3))
    assert np.allclose(vals, 1 / 3)
    rng = np.random.default_rng(1)
    for _ in range(5):
        lam = rng.dirichlet([1, 1, 1])
        vals, grads = p1_eval(lam)
        assert vals.sum() == pytest.approx(1.0)
        assert np.allclose(grads.sum(axis=0), 0.0)


def test_bubble_space_counts_and_values():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    full = bubble_space(tri, [True, True, True])
    assert full.basis_count == 4
    two = bubble_space(tri, [True, False, True])
    assert two.basis_count == 3
    one = bubble_space(tri, [False, True, False])
    assert one.basis_count == 2
    with pytest.raises(UnsupportedElementError):
        bubble_space(tri, [False, False, False])

    # edge bubble is 1 at its own midpoint, cubic bubble is 1 at the centroid
    mid_of_edge0 = np.array([0.0, 0.5, 0.5])  # edge 0 joins vertices 1 and 2
    vals = full.values(mid_of_edge0)
    assert vals[0] == pytest.approx(1.0)
    vals = full.values([1 / 3, 1 / 3, 1 / 3])
    assert vals[3] == pytest.approx(1.0)


def test_bubbles_vanish_on_required_edges():
    rng = np.random.default_rng(7)
    tri = rng.uniform(-1, 1, (3, 2))
    d1, d2 = tri[1] - tri[0], tri[2] - tri[0]
    if d1[0] * d2[1] - d1[1] * d2[0] < 0:
        tri = tri[[0, 2, 1]]
    space = bubble_space(tri, [True, True, True])
    for e in range(3):
        a, b = EDGE_VERTICES[e]
        for t in rng.uniform(0, 1, 10):
            lam = np.zeros(3)
            lam[a], lam[b] = t, 1.0 - t
            vals = space.values(lam)
            # every bubble except psi_e vanishes on edge e
            others = [k for k in range(4) if k != e]
            assert np.max(np.abs(vals[others])) <= 1e-14


def test_bubble_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    tri = np.array([[0.1, -0.2], [1.3, 0.4], [0.2, 1.1]])
    space = bubble_space(tri, [True, False, True])

    # map physical point -> barycentric
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    Tinv = np.linalg.inv(T)

    def bary(p):
        lam12 = Tinv @ (p - tri[0])
        return np.array([1.0 - lam12.sum(), lam12[0], lam12[1]])

    p0 = tri.mean(axis=0) + rng.uniform(-0.05, 0.05, 2)
    h = 1e-7
    for d, step in enumerate([np.array([h, 0]), np.array([0, h])]):
        fd = (space.values(bary(p0 + step)) - space.values(bary(p0 - step))) / (2 * h)
        assert np.allclose(space.gradients(bary(p0))[:, d], fd, rtol=1e-6, atol=1e-8)
