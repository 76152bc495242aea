"""The twelve acceptance criteria, shared by the test suite and ``verify-all``.

Each criterion returns a :class:`CriterionResult`.  Runtime limits are part
of the criteria; they are measured after :func:`warmup` has compiled every
kernel, so JIT compilation is not charged to the first criterion that
happens to use a kernel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import experiments as ex
from . import random_walks as rw
from . import stationary_measures as sm
from .ifs_core import make_system, transfer_density_check
from .multivalued import fiber_distribution, fiber_is_uniform
from .skew_products import G_map, gamma

SEED = 20240601


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float
    limit: float

    @property
    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:02d} {verdict} {self.title}: {self.detail} "
                f"[{self.elapsed:.2f}s of {self.limit:g}s]")


def _timed(number, title, limit, body: Callable[[], tuple[bool, str]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - t0
    within = elapsed <= limit
    if not within:
        detail += f"; runtime limit exceeded"
    return CriterionResult(number, title, bool(ok and within), detail, elapsed, limit)


def warmup() -> None:
    """Compile every numba kernel on tiny inputs."""
    s0 = make_system(2, 2, 0.5)
    s1 = make_system(3, 2, 0.5)
    s2 = make_system(3, 3, 0.6)
    ex.sync_experiment(s1, 2, 10, 0)
    ex.intermittency_experiment(s0, 0.1, 0.5, 10, 0, trials=2)
    ex.divergence_experiment(s2, [0.3, 0.1], 10, 2, 0)
    ex.equidistribution_test(s1, 4, 10, 0)
    ex.two_point_histogram(s2, 3, 10, 0)
    wp = rw.WalkParams(-1.0, 1.0, 0.6)
    rw.first_passage_batch(wp, 0.0, 2, 0, upperK=5.0, cap=10)
    sched = rw.LevelSchedule(10, 0.009)
    rw.stop_S_timedep_batch(rw.WalkParams.zero_drift(0.5, 1.0), sched, 0.0, 2, 0, cap=10)
    rw.stop_W_batch(s0, 0.009, 0.3, 2, 0, cap=10)
    rw.stop_V_batch(s0, [1], 2, 0, cap=10)
    rw.simulate_walk(wp, 0.0, 10, 0)
    sm.level_walk_occupation(0.75, 1, 1, 10, 0)


def criterion_01() -> CriterionResult:
    def body():
        rng = np.random.default_rng(SEED)
        xs = np.arange(10_000) / 10_000
        worst = 0.0
        for _ in range(20):
            sys = make_system(int(rng.integers(2, 10)), int(rng.integers(2, 10)), float(rng.uniform(0.01, 0.99)))
            worst = max(worst, transfer_density_check(sys, xs))
        return worst < 1e-14, f"max deviation {worst:.3g} over 20 systems (< 1e-14)"
    return _timed(1, "exact stationarity", 1.0, body)


def criterion_02() -> CriterionResult:
    def body():
        rng = np.random.default_rng(SEED + 2)
        pts = rng.random((100_000, 3))
        rt = fac = 0.0
        for M, N, p0 in ((2, 2, 0.5), (3, 2, 0.3), (2, 5, 0.7)):
            sys = make_system(M, N, p0)
            fwd = gamma(sys, pts, "forward")
            back = gamma(sys, fwd, "inverse")
            rt = max(rt, float(np.max(np.abs(back - pts))))
            gw, gx = G_map(sys, pts[:, 0], pts[:, 1])
            fac = max(fac, float(np.max(np.abs(fwd[:, 0] - gw))), float(np.max(np.abs(fwd[:, 1] - gx))))
        ok = rt < 1e-12 and fac < 1e-12
        return ok, f"round trip {rt:.3g}, factor {fac:.3g} on 1e5 points x 3 systems (< 1e-12)"
    return _timed(2, "Gamma round trip", 1.0, body)


def criterion_03() -> CriterionResult:
    def body():
        bad = []
        words = 0
        for M, N in ((2, 2), (3, 2), (2, 4), (3, 3)):
            sys = make_system(M, N, 0.5)
            for length in range(11):
                for code in range(2 ** length):
                    eta = [(code >> i) & 1 for i in range(length)]
                    words += 1
                    if not fiber_is_uniform(fiber_distribution(sys, eta)):
                        bad.append((M, N, tuple(eta)))
        return not bad, f"{words} binary words checked, {len(bad)} non-uniform fibers"
    return _timed(3, "fiber uniformity", 30.0, body)


def criterion_04() -> CriterionResult:
    def body():
        bad_counts = 0
        worst = 0.0
        cases = 0
        for k in range(1, 7):
            for l in range(1, 7):
                if math.gcd(k, l) != 1:
                    continue
                a = l / (k + l)
                for i in range(1, 21):
                    p0 = a + (1.0 - a) * i / 21.0
                    rc = sm.char_roots(p0, k, l)
                    cases += 1
                    if rc.counts != (l, 1, k - 1):
                        bad_counts += 1
                    worst = max(worst, abs(rc.nu1 - sm.nu1(p0, k, l)))
        s1 = abs(sm.nu1(0.75, 1, 1) - 1.0 / 3.0)
        s2 = abs(sm.nu1(0.5, 2, 1) - (math.sqrt(5.0) - 1.0) / 2.0)
        ok = bad_counts == 0 and worst < 1e-11 and s1 < 1e-12 and s2 < 1e-12
        return ok, (f"{cases} cases, {bad_counts} miscounted, max |nu1 diff| {worst:.3g}; "
                    f"spot errors {s1:.3g}, {s2:.3g}")
    return _timed(4, "root classification", 10.0, body)


def criterion_05() -> CriterionResult:
    def body():
        configs = ((0.75, 1, 1), (0.5, 2, 1), (0.8, 1, 2))
        res = geo = 0.0
        tvs = []
        for i, (p0, k, l) in enumerate(configs):
            cs = sm.solve_b(p0, k, l)
            res = max(res, sm.recurrence_residual(cs))
            if l == 1:
                h = np.arange(41)
                geo = max(geo, float(np.max(np.abs(cs.b[:41] / cs.b[0] - cs.ratio ** h))))
            occ = sm.level_walk_occupation(p0, k, l, 10 ** 7, SEED + 50 + i)
            tvs.append(sm.total_variation(cs, occ))
        ok = res < 1e-9 and geo < 1e-9 and max(tvs) < 0.01
        tv = ", ".join(f"{t:.4f}" for t in tvs)
        return ok, f"recurrence residual {res:.3g}, geometric law {geo:.3g}, TV [{tv}] (< 0.01)"
    return _timed(5, "coefficient law", 60.0, body)


def criterion_06() -> CriterionResult:
    def body():
        lo = sm.density_sup(sm.solve_b(0.6, 1, 1), 3, 2)
        hi = sm.density_sup(sm.solve_b(0.9, 1, 1), 3, 2)
        p_star = sm.boundedness_threshold(1, 1, 3, 2)
        ok = (not lo.bounded and not lo.boundary and hi.bounded and abs(p_star - 0.75) < 1e-9)
        return ok, (f"p0=0.6 bounded={lo.bounded}, p0=0.9 bounded={hi.bounded}, "
                    f"switch at {p_star:.12f}")
    return _timed(6, "boundedness threshold", 1.0, body)


def criterion_07() -> CriterionResult:
    def body():
        eps = 3.0 ** -np.arange(1, 7)
        rep = ex.divergence_experiment(make_system(3, 3, 0.6), eps, 10 ** 7, 20, SEED + 7)
        target = -math.log(2.0 / 3.0) / math.log(3.0)
        slope = rep.aggregates["slope"]
        return abs(slope - target) <= 0.05, f"slope {slope:.4f} vs {target:.4f} (+-0.05)"
    return _timed(7, "divergence scaling", 300.0, body)


def criterion_08() -> CriterionResult:
    def body():
        rep = ex.sync_experiment(make_system(3, 2, 0.5), 1000, 2000, SEED + 8)
        frac = rep.aggregates["frac_below_1e-06"]
        return frac >= 0.95, f"{frac:.3f} of 1000 pairs below 1e-6 at n=2000 (>= 0.95)"
    return _timed(8, "synchronization", 10.0, body)


def criterion_09() -> CriterionResult:
    def body():
        rep = ex.intermittency_experiment(make_system(2, 2, 0.5), 0.1, 0.5, 10 ** 7, SEED + 9,
                                          trials=100, checkpoints=[10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7])
        F = rep.aggregates["median_F"]
        frac = rep.aggregates["frac_with_excursion"]
        ok = F[10 ** 7] > F[10 ** 4] and frac >= 0.9
        return ok, (f"median F(1e4)={F[10 ** 4]:.5f}, F(1e7)={F[10 ** 7]:.5f}; "
                    f"{frac:.2f} of non-merged pairs with an excursion (>= 0.9); "
                    f"merged {rep.censored['merged']}")
    return _timed(9, "intermittency", 600.0, body)


def criterion_10() -> CriterionResult:
    def body():
        trials = 100_000
        K = 5.0
        fails = []
        worst_mart = 0.0
        idx = 0
        for p0 in (0.3, 0.5, 0.7):
            for alpha in (-0.05, -0.1, -0.2):
                wp = rw.WalkParams.from_drift(p0, 1.0, alpha)
                T = rw.first_passage_batch(wp, 0.0, trials, SEED + 100 + idx)
                mean_t = T.times.mean()
                se_t = T.times.std(ddof=1) / math.sqrt(trials)
                if T.censored.any() or mean_t < rw.wald_bound(wp) - 3 * se_t:
                    fails.append((p0, alpha, "wald"))
                r = rw.martingale_exponent(wp)
                z0 = K / 2
                B = rw.first_passage_batch(wp, z0, trials, SEED + 200 + idx, upperK=K)
                e = np.exp(r * B.z_exit)
                z = (e.mean() - math.exp(r * z0)) / (e.std(ddof=1) / math.sqrt(trials))
                worst_mart = max(worst_mart, abs(z))
                if B.censored.any() or abs(z) > 3:
                    fails.append((p0, alpha, "martingale"))
                idx += 1
        return not fails, f"9 walks, failures {fails}, max martingale |z| {worst_mart:.2f}"
    return _timed(10, "Wald and martingale", 120.0, body)


def criterion_11() -> CriterionResult:
    def body():
        trials = 100_000
        caps = (10 ** 3, 10 ** 4, 10 ** 5)
        sched = rw.LevelSchedule(10, 0.009)
        wz = rw.WalkParams.zero_drift(0.5, 2.0 * math.log(2.0))
        sys = make_system(2, 2, 0.5)
        xJ = rw.word_interval_midpoint(sys, [1, 2, 1, 2, 1, 2, 1])
        inc_s = inc_w = 0
        for c in range(20):
            ms = [rw.stop_S_timedep_batch(wz, sched, 0.0, trials, SEED + 11, cap, campaign=(0, c, j))[0].mean()
                  for j, cap in enumerate(caps)]
            mw = [rw.stop_W_batch(sys, 0.009, xJ, trials, SEED + 11, cap, campaign=(1, c, j))[0].mean()
                  for j, cap in enumerate(caps)]
            inc_s += ms[0] < ms[1] < ms[2]
            inc_w += mw[0] < mw[1] < mw[2]
        ok = inc_s >= 19 and inc_w >= 19
        return ok, f"increasing truncated means: S in {inc_s}/20, W in {inc_w}/20 campaigns (>= 19)"
    return _timed(11, "infinite expectation signature", 600.0, body)


def criterion_12() -> CriterionResult:
    def body():
        cs = sm.solve_b(0.5, 1, 1, 200)
        nondecreasing = bool(np.all(np.diff(cs.b) >= -1e-12))
        total = float(cs.partial_sums[-1])
        ok = cs.regime == "sigma_finite" and nondecreasing and total >= 0.4 * 200
        return ok, f"regime {cs.regime}, nondecreasing={nondecreasing}, partial sum {total:.1f} (>= 80)"
    return _timed(12, "sigma-finite regime", 1.0, body)


CRITERIA = {i: globals()[f"criterion_{i:02d}"] for i in range(1, 13)}


def run_all(only=None, out=print) -> list[CriterionResult]:
    warmup()
    results = []
    for i, fn in CRITERIA.items():
        if only and i not in only:
            continue
        r = fn()
        out(r.line)
        results.append(r)
    return results
