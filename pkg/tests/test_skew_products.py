import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from affine_ifs.errors import DomainError
from affine_ifs.ifs_core import make_system
from affine_ifs.skew_products import G_map, L_map, Point3, encode_h, gamma, gamma_jacobians

systems = st.builds(make_system, st.integers(2, 6), st.integers(2, 6), st.floats(0.05, 0.95))
unit = st.floats(0, 1, exclude_max=True)
# within a few ulps of 1 the forward image already rounds onto the next branch
interior = st.floats(0, 1 - 1e-12)


def test_L_examples():
    s = make_system(2, 2, 0.5)
    assert L_map(s, 0.25) == 0.5
    assert L_map(s, 0.0) == 0.0
    assert L_map(s, 0.625) == pytest.approx(0.5, abs=1e-15)


def test_G_examples():
    s = make_system(2, 2, 0.5)
    w, x = G_map(s, 0.25, 0.3)
    assert (w, x) == (0.5, pytest.approx(0.6))
    assert G_map(s, 0.0, 0.0) == (0.0, 0.0)
    w, x = G_map(s, 0.8, 0.3)
    assert w == pytest.approx(0.2, abs=1e-15) and x == pytest.approx(0.65, abs=1e-15)


def test_gamma_examples():
    s = make_system(2, 2, 0.5)
    q = gamma(s, Point3(0.25, 0.6, 0.2))
    assert (q.w, q.x, q.y) == (0.5, pytest.approx(0.2, abs=1e-15), pytest.approx(0.3, abs=1e-15))
    assert gamma(s, Point3(0, 0, 0)) == Point3(0, 0, 0)


def test_domain_errors():
    s = make_system(2, 2, 0.5)
    with pytest.raises(DomainError):
        L_map(s, 1.0)
    with pytest.raises(DomainError):
        Point3(0.1, 1.2, 0.0)
    with pytest.raises(DomainError):
        gamma(s, np.array([[0.1, 0.2, -0.1]]))
    with pytest.raises(DomainError):
        gamma(s, Point3(0.1, 0.2, 0.3), "sideways")


@given(systems, interior, interior, interior)
def test_round_trip(s, w, x, y):
    p = Point3(w, x, y)
    q = gamma(s, gamma(s, p, "forward"), "inverse")
    assert abs(q.w - w) < 1e-12 and abs(q.x - x) < 1e-12 and abs(q.y - y) < 1e-12


def test_round_trip_bulk_and_factor():
    rng = np.random.default_rng(0)
    pts = rng.random((100_000, 3))
    s = make_system(3, 2, 0.35)
    fwd = gamma(s, pts, "forward")
    assert np.max(np.abs(gamma(s, fwd, "inverse") - pts)) < 1e-12
    gw, gx = G_map(s, pts[:, 0], pts[:, 1])
    assert np.max(np.abs(fwd[:, 0] - gw)) < 1e-12 and np.max(np.abs(fwd[:, 1] - gx)) < 1e-12
    assert np.all((fwd >= 0) & (fwd < 1))


def test_forward_of_inverse():
    rng = np.random.default_rng(1)
    pts = rng.random((20_000, 3))
    s = make_system(2, 3, 0.6)
    assert np.max(np.abs(gamma(s, gamma(s, pts, "inverse"), "forward") - pts)) < 1e-12


def test_branch_jacobians_symbolic():
    p0, N, M = sympy.symbols("p0 N M", positive=True)
    first = sympy.diag(1 / p0, N, p0 / N)
    second = sympy.diag(M / (1 - p0), 1 / M, 1 - p0)
    assert sympy.simplify(first.det()) == 1
    assert sympy.simplify(second.det()) == 1
    j1, j2 = gamma_jacobians(make_system(3, 2, 0.3))
    assert j1 == pytest.approx(1.0) and j2 == pytest.approx(1.0)


@given(systems)
def test_L_preserves_lebesgue(s):
    r = s.breakpoints
    inv = 0.0
    for i in range(s.M + 1):
        a = r[i] + 0.25 * (r[i + 1] - r[i])
        b = r[i] + 0.75 * (r[i + 1] - r[i])
        inv += (b - a) / (L_map(s, b) - L_map(s, a))
    assert inv == pytest.approx(1.0, abs=1e-9)


def test_encode_h_examples():
    s = make_system(2, 2, 0.5)
    assert encode_h(s, [0] * 10, 0) == 0.0
    assert encode_h(s, [], 2) == 1.0
    assert encode_h(s, [2] * 5, 2) == 1.0


def exact_h(s, word):
    p = [Fraction(v) for v in s.probs]
    r = [Fraction(v) for v in s.breakpoints]
    total, weight = Fraction(0), Fraction(1)
    for w in word:
        total += weight * r[w]
        weight *= p[w]
    return total


@given(systems, st.lists(st.integers(0, 9), min_size=1, max_size=20))
def test_encode_h_matches_exact_sum(s, raw):
    word = [w % (s.M + 1) for w in raw]
    assert encode_h(s, word, 0) == pytest.approx(float(exact_h(s, word)), abs=1e-15)


@given(systems, st.lists(st.integers(0, 9), min_size=20, max_size=20))
def test_semiconjugacy(s, raw):
    word = [w % (s.M + 1) for w in raw]
    h = encode_h(s, word, 0)
    assert abs(encode_h(s, word[1:], 0) - L_map(s, h)) < 1e-10
