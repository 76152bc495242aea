import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affine_ifs.errors import DomainError, PreconditionError, ResourceError
from affine_ifs.ifs_core import iterate_orbit, make_system
from affine_ifs.multivalued import (
    GridPoint, KAdicInterval, fiber_distribution, fiber_is_uniform, grid_image,
    project_word, strip_interval,
)


def exact_endpoint(M, N, word):
    x = Fraction(0)
    for s in word:
        if s == 0:
            x = N * x - math.floor(N * x)
        else:
            x = (x + s - 1) / M
    return x


def brute_fiber(M, N, eta):
    slots = [range(1, M + 1) if s == 1 else (0,) for s in eta]
    return Counter(exact_endpoint(M, N, w) for w in itertools.product(*slots))


def values(counter):
    return {p.value: c for p, c in counter.items()}


def test_grid_image_examples():
    assert values(grid_image(make_system(3, 2, 0.5), 1, 0)) == {0: 1, Fraction(2, 3): 1, Fraction(1, 3): 1}
    assert values(grid_image(make_system(2, 2, 0.5), 1, 0)) == {0: 2}
    for M in (2, 3, 5):
        img = grid_image(make_system(M, 2, 0.5), 0, 1)
        assert values(img) == {Fraction(i, M): 1 for i in range(M)}


@pytest.mark.parametrize("M,N", [(2, 2), (3, 2), (2, 4), (3, 3), (4, 6)])
@pytest.mark.parametrize("level", [1, 2, 3])
def test_class0_multiplicity_profile_is_constant(M, N, level):
    counts = set(grid_image(make_system(M, N, 0.5), level, 0).values())
    assert len(counts) == 1


def test_grid_point_validation():
    assert GridPoint(2, 3, 2).value == Fraction(3, 4)
    with pytest.raises(DomainError):
        GridPoint(1, 2, 2)
    with pytest.raises(DomainError):
        grid_image(make_system(2, 2, 0.5), -1, 0)
    with pytest.raises(DomainError):
        grid_image(make_system(2, 2, 0.5), 1, 2)


def test_projection():
    assert project_word([0, 3, 1, 0, 2]) == (0, 1, 1, 0, 1)


def test_fiber_examples():
    assert values(fiber_distribution(make_system(3, 2, 0.5), [1, 0])) == {
        0: 1, Fraction(1, 3): 1, Fraction(2, 3): 1}
    assert values(fiber_distribution(make_system(3, 2, 0.5), [])) == {0: 1}
    d = fiber_distribution(make_system(2, 2, 0.5), [1, 1, 0, 1, 0])
    assert len(set(d.values())) == 1 and fiber_is_uniform(d)


@given(st.sampled_from([(2, 2), (3, 2), (2, 4), (3, 3), (2, 3)]),
       st.lists(st.integers(0, 1), max_size=9))
def test_fiber_matches_brute_force_and_is_uniform(mn, eta):
    M, N = mn
    d = fiber_distribution(make_system(M, N, 0.5), eta)
    assert values(d) == dict(brute_fiber(M, N, eta))
    assert fiber_is_uniform(d)


def test_fiber_is_uniform_rejects():
    assert not fiber_is_uniform(Counter())
    assert not fiber_is_uniform(Counter({GridPoint(1, 0, 2): 1, GridPoint(1, 1, 2): 2}))
    assert not fiber_is_uniform(Counter({GridPoint(2, 0, 2): 1, GridPoint(2, 1, 2): 1}))


def test_fiber_resource_limits():
    s = make_system(3, 2, 0.5)
    with pytest.raises(ResourceError):
        fiber_distribution(s, [1] * 13)
    with pytest.raises(ResourceError):
        fiber_distribution(s, [1] * 10, cap=3 ** 9)
    with pytest.raises(DomainError):
        fiber_distribution(s, [2])


def test_strip_examples():
    assert strip_interval(make_system(2, 2, 0.5), [1]).bounds == (0, Fraction(1, 2))
    assert strip_interval(make_system(2, 2, 0.5), []).bounds == (0, 1)
    assert strip_interval(make_system(3, 3, 0.5), [2]).bounds == (Fraction(1, 3), Fraction(2, 3))
    assert strip_interval(make_system(3, 3, 0.5), [2, 0]).bounds == (0, 1)
    with pytest.raises(PreconditionError):
        strip_interval(make_system(2, 3, 0.5), [1])


def test_kadic_interval():
    iv = KAdicInterval(3, 2, 2)
    assert iv.bounds == (Fraction(2, 9), Fraction(3, 9))
    assert iv.contains(0.25) and not iv.contains(1 / 3 + 1e-9)


@given(st.sampled_from([(2, 2), (4, 2), (2, 4), (3, 9), (9, 3), (8, 4), (3, 3)]),
       st.lists(st.integers(0, 20), max_size=30))
def test_strip_contains_sampled_images(mn, raw):
    M, N = mn
    s = make_system(M, N, 0.5)
    word = [w % (M + 1) for w in raw]
    lo, hi = (float(v) for v in strip_interval(s, word).bounds)
    # one random start per cell of width 1/64; grid starts such as 0 have exact orbits that
    # land on discontinuities, where any float evaluation may pick either side
    starts = (np.arange(64) + np.random.default_rng(64).random(64)) / 64
    slack = 1e-12
    for rec in iterate_orbit(s, word, starts):
        assert lo - slack <= rec.points[-1] < hi + slack


@given(st.sampled_from([(2, 2), (4, 2), (2, 4), (3, 9)]), st.lists(st.integers(0, 20), max_size=12))
def test_strip_contains_exact_images(mn, raw):
    M, N = mn
    word = [w % (M + 1) for w in raw]
    lo, hi = strip_interval(make_system(M, N, 0.5), word).bounds
    for x0 in (Fraction(0), Fraction(1, 3), Fraction(7, 11), Fraction(99, 100)):
        x = x0
        for w in word:
            x = N * x - math.floor(N * x) if w == 0 else (x + w - 1) / M
        assert lo <= x < hi
