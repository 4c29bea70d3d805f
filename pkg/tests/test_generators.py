import math

import numpy as np
import pytest

from hypfill.errors import SizeLimit
from hypfill.generators import (GENERATORS, cantor_points, make_cantor, make_circle, make_interval,
                                make_sierpinski)


def test_cantor_level_one():
    gen = make_cantor(1)
    np.testing.assert_allclose(gen.coords[:, 0], [0, 2 / 3])
    np.testing.assert_allclose(gen.natural_measure, [0.5, 0.5])


def test_cantor_level_two():
    np.testing.assert_allclose(cantor_points(2), [0, 2 / 9, 2 / 3, 8 / 9], atol=1e-15)


def test_cantor_level_eight():
    gen = make_cantor(8)
    assert gen.space.n == 256
    assert gen.known_dimension == pytest.approx(0.63093, abs=1e-5)
    assert gen.space.diameter == pytest.approx(1 - 3 ** -8, abs=1e-15)
    # the closest surviving left endpoints sit two thirds of a step apart
    assert gen.resolution == pytest.approx(2 * 3 ** -8, rel=1e-9)


def test_cantor_nested():
    a, b = set(cantor_points(4).round(12)), set(cantor_points(5).round(12))
    assert a <= b


def test_circle_four():
    d = make_circle(4).space.dist
    assert set(np.round(d[np.triu_indices(4, 1)], 15)) == {0.45, 0.9}


@pytest.mark.parametrize("n", [8, 9, 256])
def test_circle_diameter_exact(n):
    gen = make_circle(n)
    assert gen.space.diameter == 0.9
    if n % 2 == 0:
        assert gen.space.dist[0, n // 2] == 0.9


def test_sierpinski_counts():
    assert make_sierpinski(1).space.n == 6
    assert make_sierpinski(2).space.n == 15
    for k in range(1, 6):
        assert make_sierpinski(k).space.n == 3 * (3 ** k + 1) // 2


def test_sierpinski_dimension_and_diameter():
    gen = make_sierpinski(5)
    assert gen.known_dimension == pytest.approx(math.log(3) / math.log(2))
    assert gen.space.diameter == 0.9


def test_interval():
    gen = make_interval(11)
    assert gen.space.diameter == 0.9
    assert gen.resolution == pytest.approx(0.09)


@pytest.mark.parametrize("make,arg", [(make_cantor, 13), (make_sierpinski, 8), (make_circle, 4097),
                                      (make_interval, 5000)])
def test_size_limits(make, arg):
    with pytest.raises(SizeLimit):
        make(arg)


@pytest.mark.parametrize("make,arg", [(make_cantor, 0), (make_sierpinski, 0), (make_circle, 2),
                                      (make_interval, 1)])
def test_small_arguments(make, arg):
    with pytest.raises(ValueError):
        make(arg)


@pytest.mark.parametrize("kind,arg", [("cantor", 6), ("circle", 128), ("sierpinski", 3), ("interval", 64)])
def test_measure_is_probability(kind, arg):
    gen = GENERATORS[kind](arg)
    m = gen.natural_measure
    assert np.all(m >= 0)
    assert abs(m.sum() - 1) <= 1e-12
    assert gen.resolution > 0


@pytest.mark.parametrize("kind,arg", [("cantor", 7), ("circle", 256), ("sierpinski", 4)])
def test_ball_mass_scaling(kind, arg):
    """mu(B(x, r)) / r**dim stays within a factor 32 of 1 between resolution and diameter."""
    gen = GENERATORS[kind](arg)
    d, m, dim = gen.space.dist, gen.natural_measure, gen.known_dimension
    radii = np.geomspace(gen.resolution, gen.space.diameter, 12)
    for r in radii:
        ratio = ((d < r) @ m) / r ** dim
        assert ratio.max() <= 32 and ratio.min() >= 1 / 32, (r, ratio.min(), ratio.max())
