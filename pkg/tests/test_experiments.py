import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affine_ifs.errors import DomainError, PreconditionError
from affine_ifs.experiments import (
    divergence_experiment, equidistribution_test, geometric_checkpoints, intermittency_experiment,
    loglog_slope, pair_campaign, sync_experiment, two_point_histogram,
)
from affine_ifs.ifs_core import SymbolStream, iterate_orbit, make_system

SYNC_SYS = make_system(3, 2, 0.5)
ZERO_SYS = make_system(2, 2, 0.5)
DIV_SYS = make_system(3, 3, 0.6)


def strip_time(report):
    return {k: v for k, v in report.__dict__.items() if k != "wall_time"}


def same_report(a, b):
    sa, sb = strip_time(a), strip_time(b)
    assert sa["config"] == sb["config"] and sa["aggregates"] == sb["aggregates"]
    assert sa["tables"].keys() == sb["tables"].keys()
    for k in sa["tables"]:
        assert np.array_equal(np.asarray(sa["tables"][k]), np.asarray(sb["tables"][k]), equal_nan=True)


def test_geometric_checkpoints():
    cps = geometric_checkpoints(10 ** 4)
    assert cps[0] == 1 and cps[-1] == 10 ** 4
    assert np.all(np.diff(cps) > 0)
    assert geometric_checkpoints(0).size == 0


@pytest.mark.parametrize("sys,x,y", [(SYNC_SYS, 0.1, 0.7), (DIV_SYS, 0.2, 0.2000001), (ZERO_SYS, 0.05, 0.9)])
def test_pair_kernel_matches_plain_orbits(sys, x, y):
    cps = np.arange(1, 41)
    res = pair_campaign(sys, 1, 40, seed=17, eps=[0.1], checkpoints=cps, pair=(x, y))
    a, b = iterate_orbit(sys, SymbolStream(sys, 17, trial=0), [x, y], 40)
    plain = np.abs(b.points[1:] - a.points[1:])
    got = np.exp(res["checkpoint_log"][0])
    assert np.allclose(got, plain, rtol=1e-6, atol=1e-12)


@given(st.sampled_from([(3, 2), (2, 2), (3, 3), (2, 5)]), st.lists(st.integers(0, 9), min_size=1, max_size=80),
       st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_jumps_only_at_crossings(mn, raw, x, y):
    M, N = mn
    word = [w % (M + 1) for w in raw]
    a, b = iterate_orbit(make_system(M, N, 0.5), word, [x, y])
    d = np.abs(b.points - a.points)
    for t, w in enumerate(word):
        factor = N if w == 0 else 1 / M
        if not a.crossings[t]:
            assert d[t + 1] <= factor * d[t] + 1e-12


def test_sync_examples():
    rep = sync_experiment(SYNC_SYS, 200, 2000, seed=3)
    assert rep.aggregates["frac_below_1e-06"] >= 0.95
    assert rep.tables["log10_distance"].shape == (200, rep.tables["checkpoints"].size)
    assert rep.censored["merged"] >= 0
    diag = sync_experiment(SYNC_SYS, 5, 500, seed=3, pair=(0.3, 0.3))
    assert np.all(np.isneginf(diag.tables["log10_distance"]))
    assert diag.aggregates["frac_below_1e-09"] == 1.0


def test_sync_jumps_follow_crossings():
    rep = sync_experiment(SYNC_SYS, 200, 2000, seed=4)
    jumped = rep.tables["max_jump"] > math.log(SYNC_SYS.N) + 1e-9
    assert np.all(rep.tables["crossings"][jumped] > 0)


def test_sync_reproducible():
    same_report(sync_experiment(SYNC_SYS, 50, 500, seed=5), sync_experiment(SYNC_SYS, 50, 500, seed=5))


def test_regime_gates():
    with pytest.raises(PreconditionError):
        sync_experiment(ZERO_SYS, 2, 10, seed=0)
    with pytest.raises(PreconditionError):
        intermittency_experiment(SYNC_SYS, 0.1, 0.5, 10, seed=0)
    with pytest.raises(PreconditionError):
        divergence_experiment(make_system(2, 3, 0.2), [0.1], 10, 2, seed=0)
    with pytest.raises(PreconditionError):
        two_point_histogram(ZERO_SYS, 3, 10, seed=0)


def test_intermittency_diagonal():
    rep = intermittency_experiment(ZERO_SYS, 0.1, 0.5, 10 ** 4, seed=1, trials=3, pair=(0.4, 0.4))
    assert np.all(rep.tables["close_fraction"] == 1.0)
    assert np.all(rep.tables["excursion_episodes"] == 0)


def test_intermittency_trend_and_excursions():
    rep = intermittency_experiment(make_system(3, 3, 0.5), 0.1, 0.5, 10 ** 6, seed=2, trials=40,
                                   checkpoints=[10 ** 3, 10 ** 6])
    med = rep.aggregates["median_F"]
    assert med[10 ** 6] > med[10 ** 3]
    assert rep.aggregates["frac_with_excursion"] >= 0.9
    with pytest.raises(DomainError):
        intermittency_experiment(ZERO_SYS, 0.6, 0.5, 10, seed=0)


def test_divergence_against_analytic_mass():
    eps = 3.0 ** -np.arange(1, 4)
    rep = divergence_experiment(DIV_SYS, eps, 10 ** 6, 40, seed=21)
    assert np.all(np.abs(rep.tables["z_score"]) < 3)
    assert rep.aggregates["exponent"] == pytest.approx(-math.log(2 / 3) / math.log(3), abs=1e-12)


def test_divergence_trivial_and_independent():
    rep = divergence_experiment(DIV_SYS, [1.0, 2.0], 1000, 2, seed=0)
    assert np.all(rep.tables["P_mean"] == 1.0)
    rep = divergence_experiment(make_system(2, 3, 0.5), [0.3, 0.1, 0.01, 0.001], 10 ** 5, 4, seed=1)
    assert "P_analytic" not in rep.tables
    assert np.all(np.diff(rep.tables["P_mean"]) < 0)
    with pytest.raises(DomainError):
        divergence_experiment(DIV_SYS, [], 10, 2, seed=0)


def test_loglog_slope():
    eps = np.array([0.1, 0.01, 0.001])
    assert loglog_slope(eps, 3 * eps ** 0.5) == pytest.approx(0.5)


@pytest.mark.parametrize("sys", [SYNC_SYS, ZERO_SYS, make_system(2, 3, 0.5)])
def test_equidistribution_all_regimes(sys):
    rep = equidistribution_test(sys, 20, 10 ** 6, seed=8)
    assert rep.aggregates["passed"]
    assert rep.tables["counts"].sum() == 10 ** 6


def test_equidistribution_rejects():
    with pytest.raises(DomainError):
        equidistribution_test(SYNC_SYS, 20, 0, seed=0)
    with pytest.raises(DomainError):
        equidistribution_test(SYNC_SYS, 1, 10, seed=0)


def test_two_point_histogram():
    rep = two_point_histogram(make_system(3, 9, 0.5), 1, 5000, seed=2)
    assert rep.tables["counts"].tolist() == [[5000]]
    rep = two_point_histogram(make_system(3, 9, 0.5), 27, 10 ** 7, seed=2)
    assert rep.aggregates["max_rel_error"] < 0.05
    c = rep.tables["counts"]
    assert np.all(np.diag(c)[1:-1] > c[np.arange(1, 26), np.arange(2, 27)])
    assert np.all(np.diag(c)[1:-1] > c[np.arange(1, 26), np.arange(0, 25)])
    same_report(two_point_histogram(make_system(3, 9, 0.5), 9, 10 ** 4, seed=2),
                two_point_histogram(make_system(3, 9, 0.5), 9, 10 ** 4, seed=2))
