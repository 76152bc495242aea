import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affine_ifs.errors import DomainError
from affine_ifs.ifs_core import (
    DIVERGE, SYNC, ZERO, SymbolStream, apply_map, branch_of, contract, expand, iterate_orbit, log_derivative,
    make_system, transfer_density_check,
)

systems = st.builds(
    make_system,
    st.integers(2, 9),
    st.integers(2, 9),
    st.floats(0.01, 0.99),
)


def exact_map(M, N, i, x: Fraction) -> Fraction:
    if i == 0:
        y = N * x
        return y - math.floor(y)
    return (x + i - 1) / M


@pytest.mark.parametrize("M,N,p0,expected", [
    (3, 2, 0.5, 0.5 * (math.log(2) - math.log(3))),
    (2, 3, 0.5, 0.5 * (math.log(3) - math.log(2))),
])
def test_lyap_examples(M, N, p0, expected):
    s = make_system(M, N, p0)
    assert s.lyap == pytest.approx(expected, rel=1e-15)
    assert abs(s.lyap) == pytest.approx(0.2027326, abs=1e-7)


def test_lyap_zero_for_symmetric_system():
    s = make_system(2, 2, 0.5)
    assert s.lyap == 0.0 and s.regime == ZERO
    assert make_system(3, 2, 0.5).regime == SYNC
    assert make_system(2, 3, 0.5).regime == DIVERGE


@given(systems)
def test_system_invariants(s):
    assert sum(s.probs) == pytest.approx(1.0, abs=1e-12)
    r = s.breakpoints
    assert r[0] == 0.0 and r[-1] == 1.0 and len(r) == s.M + 2
    assert all(a < b for a, b in zip(r, r[1:]))
    assert math.copysign(1, s.lyap) == math.copysign(1, s.p0 * math.log(s.N) - (1 - s.p0) * math.log(s.M))


@pytest.mark.parametrize("args", [(1, 2, 0.5), (2, 1, 0.5), (2, 2, 0.0), (2, 2, 1.0),
                                  (2, 2, float("nan")), (2.0, 2, 0.5), (True, 2, 0.5)])
def test_make_system_domain_errors(args):
    with pytest.raises(DomainError):
        make_system(*args)


def test_apply_map_examples():
    s = make_system(3, 2, 0.5)
    assert apply_map(s, 0, 0.75) == 0.5
    assert apply_map(s, 1, 0.0) == 0.0
    assert apply_map(s, 3, 0.5) == pytest.approx(5 / 6, abs=1e-16)


@pytest.mark.parametrize("i,x", [(0, 1.0), (0, -0.1), (4, 0.5), (-1, 0.5)])
def test_apply_map_domain(i, x):
    with pytest.raises(DomainError):
        apply_map(make_system(3, 2, 0.5), i, x)


@given(systems, st.data())
def test_apply_map_matches_exact_rational(s, data):
    i = data.draw(st.integers(0, s.M))
    x = data.draw(st.floats(0, 1, exclude_max=True))
    got = apply_map(s, i, x)
    want = exact_map(s.M, s.N, i, Fraction(x))
    assert 0.0 <= got < 1.0
    assert abs(Fraction(got) - want) <= Fraction(s.N, 2 ** 52)


@given(st.integers(2, 12), st.data())
def test_contraction_stays_in_exact_image(M, data):
    i = data.draw(st.integers(1, M))
    x = data.draw(st.one_of(st.just(0.0), st.just(float(np.nextafter(1.0, 0.0))),
                            st.floats(0, 1, exclude_max=True)))
    y = Fraction(contract(x, i, M))
    assert Fraction(i - 1, M) <= y < Fraction(i, M)
    assert abs(y - (Fraction(x) + i - 1) / M) <= Fraction(1, 2 ** 52)


@given(st.integers(2, 12), st.data())
def test_branch_index_is_exact_near_cuts(N, data):
    j = data.draw(st.integers(1, N - 1))
    ulps = data.draw(st.integers(-4, 4))
    x = j / N
    for _ in range(abs(ulps)):
        x = float(np.nextafter(x, 0.0 if ulps < 0 else 1.0))
    assert branch_of(x, N) == math.floor(Fraction(x) * N)
    y = expand(x, N)
    assert 0.0 <= y < 1.0
    assert abs(Fraction(y) - (Fraction(x) * N - math.floor(Fraction(x) * N))) <= Fraction(N, 2 ** 52)


@given(systems, st.data())
def test_constant_slopes(s, data):
    x = data.draw(st.floats(0, 1, exclude_max=True))
    y = data.draw(st.floats(0, 1, exclude_max=True))
    i = data.draw(st.integers(1, s.M))
    assert abs(apply_map(s, i, x) - apply_map(s, i, y)) == pytest.approx(abs(x - y) / s.M, abs=1e-15)
    if math.floor(x * s.N) == math.floor(y * s.N):
        assert abs(apply_map(s, 0, x) - apply_map(s, 0, y)) == pytest.approx(s.N * abs(x - y), abs=1e-14)


def test_word_value_at_zero_in_both_orders():
    s = make_system(3, 2, 0.5)
    word = [3, 0, 2, 0, 0, 2, 0]
    rec = iterate_orbit(s, word, 0.0)[0]
    x = 0.0
    for w in word:
        x = apply_map(s, w, x)
    assert rec.points[-1] == x
    # first symbol applied first: 0 -> 2/3 -> 1/3 -> 4/9 -> 8/9 -> 7/9 -> 16/27 -> 5/27
    assert rec.points[-1] == pytest.approx(5 / 27, abs=1e-15)
    # composing the word from the right instead gives 26/27
    assert iterate_orbit(s, word[::-1], 0.0)[0].points[-1] == pytest.approx(26 / 27, abs=1e-15)
    # the branch through 0 has slope N^4 / M^3
    assert rec.logDeriv[-1] == pytest.approx(math.log(16 / 27), abs=1e-15)


def test_empty_word_is_identity():
    rec = iterate_orbit(make_system(2, 2, 0.5), [], 0.3)[0]
    assert list(rec.points) == [0.3] and list(rec.logDeriv) == [0.0] and rec.crossings.size == 0


def test_duplicate_path_oracle():
    s = make_system(2, 2, 0.5)
    stream = SymbolStream(s, 42)
    a, b = iterate_orbit(s, stream, [0.1, 0.9], 10 ** 4)
    word = stream.word(10 ** 4)
    x, y = 0.1, 0.9
    for w in word:
        x, y = apply_map(s, int(w), x), apply_map(s, int(w), y)
    assert abs(a.points[-1] - b.points[-1]) == abs(x - y)
    assert a.points[-1] == x and b.points[-1] == y


@given(systems, st.lists(st.integers(0, 9), max_size=60))
def test_log_derivative_is_integer_combination(s, raw):
    word = [w % (s.M + 1) for w in raw]
    rec = iterate_orbit(s, word, 0.5)[0]
    for t in range(len(word) + 1):
        a = sum(1 for w in word[:t] if w == 0)
        assert rec.logDeriv[t] == a * math.log(s.N) - (t - a) * math.log(s.M)


@given(systems, st.lists(st.integers(0, 9), min_size=1, max_size=40), st.lists(
    st.floats(0, 1, exclude_max=True), min_size=2, max_size=4))
def test_crossing_flags(s, raw, starts):
    word = [w % (s.M + 1) for w in raw]
    recs = iterate_orbit(s, word, starts)
    cuts = [Fraction(j, s.N) for j in range(1, s.N)]
    for t, w in enumerate(word):
        pts = [Fraction(r.points[t]) for r in recs]
        lo, hi = min(pts), max(pts)
        separated = any(lo < c <= hi for c in cuts)
        assert recs[0].crossings[t] == (w == 0 and separated)


def test_orbits_stay_in_unit_interval():
    s = make_system(3, 5, 0.4)
    recs = iterate_orbit(s, SymbolStream(s, 3), np.linspace(0, 0.999, 7), 5000)
    for r in recs:
        assert r.points.min() >= 0.0 and r.points.max() < 1.0


def test_symbol_stream_law_and_determinism():
    s = make_system(3, 2, 0.3)
    w = SymbolStream(s, 11).word(10 ** 6)
    assert np.array_equal(w, SymbolStream(s, 11).word(10 ** 6))
    assert np.array_equal(w[:100], SymbolStream(s, 11).word(100))
    f0 = np.mean(w == 0)
    assert abs(f0 - 0.3) < 3 * math.sqrt(0.3 * 0.7 / 1e6)
    counts = np.bincount(w, minlength=4)[1:] / w.size
    assert np.all(np.abs(counts - 0.7 / 3) < 4 * math.sqrt(0.7 / 3 / 1e6))
    assert not np.array_equal(w[:100], SymbolStream(s, 11, trial=1).word(100))


def test_log_derivative_helper():
    s = make_system(3, 2, 0.5)
    assert np.allclose(log_derivative(s, np.array([0, 1])), [0, math.log(2), math.log(2) - math.log(3)])


def test_transfer_check_examples():
    s = make_system(3, 2, 0.5)
    assert transfer_density_check(s, np.arange(1000) / 1000) < 1e-15
    assert transfer_density_check(make_system(2, 3, 0.9), [0.5]) == 0.0


def test_transfer_check_detects_miswired_weights():
    s = make_system(3, 2, 0.5)
    assert transfer_density_check(s, [0.1, 0.5], probs=(0.5, 0.25, 0.25, 0.25)) == pytest.approx(0.25)
    assert transfer_density_check(s, [0.1, 0.5], probs=(0.25, 0.25, 0.25, 0.25)) == pytest.approx(0.0, abs=1e-15)


@given(systems, st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=50))
def test_transfer_check_vanishes(s, xs):
    assert transfer_density_check(s, xs) < 1e-14
