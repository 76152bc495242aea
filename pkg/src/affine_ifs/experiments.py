"""Seeded Monte Carlo campaigns for the two-point motion.

Pairs are stored as ``(x, d)`` with ``d = y - x`` rather than as two
independent doubles.  Plain doubles lose one bit per expansion by 2, so
orbits of ``f0`` collapse onto dyadic rationals within a few dozen steps and
distinct points merge exactly after contractions; the reported statistics
would then reflect arithmetic, not dynamics.  Here every expansion adds a
uniform dither of one ulp to ``x`` and a relative dither to ``d``, and
``|d|`` carries a separate power-of-two scale so that it never underflows.
A pair therefore only merges if it starts merged.

Symbols are drawn from the same per-trial stream as :class:`SymbolStream`;
dither and initial points use child streams of that key.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import DomainError, PreconditionError
from .ifs_core import DIVERGE, SYNC, ZERO, SystemParams, contract, dithered_expand, symbol_of
from .rng import child_key, derive_key, next_uniform, trial_keys
from .stationary_measures import cell_masses, delta_eps_mass, mult_dependence, solve_b

_TINY = 2.0 ** -600
_BIG = 2.0 ** 512
_INV_BIG = 2.0 ** -512
_LN2 = math.log(2.0)
_EPS53 = 2.0 ** -53


@dataclass
class ExperimentReport:
    """Output of one campaign.

    Attributes
    ----------
    name : str
    config : dict
        Echo of every input, including seeds and caps.
    tables : dict of str to ndarray
        Per-trial or per-checkpoint arrays.
    aggregates : dict
        Scalar summaries.
    censored : dict
        Counts of censored or degenerate trials by kind.
    wall_time : float
        Seconds; the only field not reproducible across runs.
    """

    name: str
    config: dict
    tables: dict = field(default_factory=dict)
    aggregates: dict = field(default_factory=dict)
    censored: dict = field(default_factory=dict)
    wall_time: float = 0.0


def geometric_checkpoints(n: int, per_decade: int = 4) -> np.ndarray:
    """Integers ``10^(i/per_decade)`` up to ``n``, always ending at ``n``."""
    if n < 1:
        return np.zeros(0, dtype=np.int64)
    top = math.log10(n) * per_decade
    pts = {int(round(10 ** (i / per_decade))) for i in range(int(top) + 1)}
    pts = sorted(p for p in pts if 1 <= p <= n)
    if not pts or pts[-1] != n:
        pts.append(n)
    return np.asarray(pts, dtype=np.int64)


def _sys_config(sys):
    return {"M": sys.M, "N": sys.N, "p0": sys.p0, "lyap": sys.lyap}


def _gate(sys, regime, label):
    if sys.regime != regime:
        want = {SYNC: "negative", ZERO: "zero", DIVERGE: "positive"}[regime]
        raise PreconditionError(f"{label} needs a {want} Lyapunov exponent, got {sys.lyap}")


# Kernels -------------------------------------------------------------------

@njit(cache=True, inline="always")
def _pair_step(x, d, sc, sym, M, N, dstate):
    """One step of the pair ``(x, x + d * 2^(-512 sc))``; returns the new state and
    whether the two points sat in different branches of ``f0``."""
    crossed = False
    if sym == 0:
        dstate, v1 = next_uniform(dstate)
        dstate, v2 = next_uniform(dstate)
        xn = x * N
        jx = math.floor(xn)
        if sc == 0 and d != 0.0:
            jy = math.floor((x + d) * N)
            k = jy - jx
            nd = N * d - k
            nd += N * abs(d) * _EPS53 * (v2 - 0.5)
            if k != 0:
                crossed = True
            d = nd
        else:
            d = N * d
        x = xn - jx + N * _EPS53 * v1
        if x >= 1.0:
            x = 0.9999999999999999
    else:
        x = contract(x, sym, M)
        d = d / M
    if d != 0.0:
        ad = abs(d)
        if ad < _TINY:
            d *= _BIG
            sc += 1
        elif sc > 0 and ad >= 1.0:
            d *= _INV_BIG
            sc -= 1
    return x, d, sc, crossed, dstate


@njit(cache=True, inline="always")
def _dist(d, sc):
    if sc > 0:
        return 0.0
    return abs(d)


@njit(cache=True, inline="always")
def _log_dist(d, sc):
    if d == 0.0:
        return -np.inf
    return math.log(abs(d)) - 512.0 * sc * 0.6931471805599453


@njit(cache=True)
def _initial_pair(key):
    s = child_key(key, np.uint64(2))
    s, x = next_uniform(s)
    s, y = next_uniform(s)
    return x, y - x


@njit(cache=True)
def _pair_campaign(keys, r, M, N, n, eps, checkpoints, beta, x0, d0, use_given):
    """Close counts at checkpoints plus per-trial diagnostics.

    ``close[t, c, e]`` counts steps ``i < checkpoints[c]`` whose distance is
    below ``eps[e]``.  The pair is armed for excursion counting the first
    time its distance drops below ``eps[0]``.
    """
    T = keys.shape[0]
    C = checkpoints.shape[0]
    E = eps.shape[0]
    close = np.zeros((T, C, E), dtype=np.int64)
    exc_steps = np.zeros(T, dtype=np.int64)
    exc_episodes = np.zeros(T, dtype=np.int64)
    merge_time = np.full(T, -1, dtype=np.int64)
    crossings = np.zeros(T, dtype=np.int64)
    max_jump = np.zeros(T)
    final_log = np.empty(T)
    first_close = np.full(T, -1, dtype=np.int64)
    cp_log = np.empty((T, C))
    for t in range(T):
        key = keys[t]
        if use_given:
            x = x0
            d = d0
        else:
            x, d = _initial_pair(key)
        sc = 0
        state = key
        dstate = child_key(key, np.uint64(1))
        cnt = np.zeros(E, dtype=np.int64)
        c = 0
        armed = False
        above = False
        if d == 0.0:
            merge_time[t] = 0
        for i in range(n):
            while c < C and checkpoints[c] == i:
                close[t, c, :] = cnt
                cp_log[t, c] = _log_dist(d, sc)
                c += 1
            dist = _dist(d, sc)
            for e in range(E):
                if dist < eps[e]:
                    cnt[e] += 1
            if not armed and dist < eps[0]:
                armed = True
                first_close[t] = i
            if armed:
                if dist > beta:
                    exc_steps[t] += 1
                    if not above:
                        exc_episodes[t] += 1
                    above = True
                else:
                    above = False
            state, u = next_uniform(state)
            sym = symbol_of(u, r)
            x, d, sc, crossed, dstate = _pair_step(x, d, sc, sym, M, N, dstate)
            if crossed:
                crossings[t] += 1
                if abs(d) > max_jump[t] and sc == 0:
                    max_jump[t] = abs(d)
            if d == 0.0 and merge_time[t] < 0:
                merge_time[t] = i + 1
        final_log[t] = _log_dist(d, sc)
        while c < C:
            close[t, c, :] = cnt
            cp_log[t, c] = final_log[t]
            c += 1
    return close, exc_steps, exc_episodes, merge_time, crossings, max_jump, final_log, first_close, cp_log


@njit(cache=True)
def _single_orbit_hist(key, r, M, N, n, bins):
    counts = np.zeros(bins, dtype=np.int64)
    s = child_key(key, np.uint64(2))
    s, x = next_uniform(s)
    state = key
    dstate = child_key(key, np.uint64(1))
    for _ in range(n):
        b = int(x * bins)
        if b >= bins:
            b = bins - 1
        counts[b] += 1
        state, u = next_uniform(state)
        sym = symbol_of(u, r)
        if sym == 0:
            dstate, v = next_uniform(dstate)
            x = dithered_expand(x, N, v)
            if x >= 1.0:
                x = 0.9999999999999999
        else:
            x = contract(x, sym, M)
    return counts


@njit(cache=True)
def _pair_hist(key, r, M, N, n, G):
    counts = np.zeros((G, G), dtype=np.int64)
    x, d = _initial_pair(key)
    sc = 0
    state = key
    dstate = child_key(key, np.uint64(1))
    for _ in range(n):
        y = x + d if sc == 0 else x
        i = int(x * G)
        j = int(y * G)
        if i >= G:
            i = G - 1
        if j >= G:
            j = G - 1
        if j < 0:
            j = 0
        counts[i, j] += 1
        state, u = next_uniform(state)
        sym = symbol_of(u, r)
        x, d, sc, crossed, dstate = _pair_step(x, d, sc, sym, M, N, dstate)
    return counts


def pair_campaign(sys, trials, n, seed, eps, checkpoints=None, beta=math.inf, pair=None):
    """Run the pair kernel; ``pair=(x, y)`` fixes the initial points of every trial."""
    eps = np.atleast_1d(np.asarray(eps, dtype=np.float64))
    cps = geometric_checkpoints(n) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if pair is None:
        x0, d0, given = 0.0, 0.0, False
    else:
        x, y = (float(v) for v in pair)
        if not (0.0 <= x < 1.0 and 0.0 <= y < 1.0):
            raise DomainError("initial points must lie in [0, 1)")
        x0, d0, given = x, y - x, True
    keys = trial_keys(seed, trials)
    out = _pair_campaign(keys, sys.breakpoint_array, sys.M, sys.N, int(n), eps, cps,
                         float(beta), x0, d0, given)
    names = ("close", "exc_steps", "exc_episodes", "merge_time", "crossings",
             "max_jump", "final_log", "first_close", "checkpoint_log")
    res = dict(zip(names, out))
    res["checkpoints"] = cps
    return res


# Experiments ---------------------------------------------------------------

def sync_experiment(sys: SystemParams, trials: int, n: int, seed: int,
                    thresholds: Sequence[float] = (1e-3, 1e-6, 1e-9),
                    pair: Optional[tuple] = None) -> ExperimentReport:
    """Distance of random pairs after ``n`` steps in the contracting regime.

    Tables: ``log10_distance`` at geometric checkpoints (running curve),
    ``final_log10_distance``, ``crossings`` and ``max_jump`` (largest
    distance produced by a step in which the points were separated by a
    discontinuity).
    """
    _gate(sys, SYNC, "sync_experiment")
    t0 = time.perf_counter()
    cps = geometric_checkpoints(n)
    res = pair_campaign(sys, trials, n, seed, [thresholds[0]], cps, pair=pair)
    final = res["final_log"] / math.log(10.0)
    logs = res["checkpoint_log"] / math.log(10.0)
    agg = {f"frac_below_{th:g}": float(np.mean(final < math.log10(th))) for th in thresholds}
    agg["median_final_log10"] = float(np.median(final))
    return ExperimentReport(
        "sync",
        {**_sys_config(sys), "trials": trials, "n": n, "seed": seed, "thresholds": list(thresholds)},
        {"checkpoints": cps, "log10_distance": logs, "final_log10_distance": final,
         "crossings": res["crossings"], "max_jump": res["max_jump"]},
        agg,
        {"merged": int(np.count_nonzero(res["merge_time"] >= 0))},
        time.perf_counter() - t0,
    )


def intermittency_experiment(sys: SystemParams, eps: float, beta: float, n: int, seed: int,
                             trials: int = 1, pair: Optional[tuple] = None,
                             checkpoints: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Close-fraction curves and excursions in the zero-exponent regime.

    ``F(m) = #{i < m : dist_i < eps} / m`` is recorded at checkpoints.  An
    excursion is a step with distance above ``beta`` after the pair first
    came within ``eps``; merged pairs (distance exactly 0) are counted
    separately.
    """
    _gate(sys, ZERO, "intermittency_experiment")
    if not (0.0 < eps <= beta):
        raise DomainError("need 0 < eps <= beta")
    t0 = time.perf_counter()
    cps = geometric_checkpoints(n) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    res = pair_campaign(sys, trials, n, seed, [eps], cps, beta=beta, pair=pair)
    with np.errstate(invalid="ignore", divide="ignore"):
        F = res["close"][:, :, 0] / np.where(cps > 0, cps, 1)[None, :]
    merged = res["merge_time"] >= 0
    live = ~merged
    has_exc = res["exc_episodes"] > 0
    agg = {
        "median_F": {int(c): float(np.median(F[:, i])) for i, c in enumerate(cps)},
        "frac_with_excursion": float(has_exc[live].mean()) if live.any() else float("nan"),
        "median_excursion_episodes": float(np.median(res["exc_episodes"])),
    }
    return ExperimentReport(
        "intermit",
        {**_sys_config(sys), "eps": eps, "beta": beta, "n": n, "trials": trials, "seed": seed},
        {"checkpoints": cps, "close_fraction": F, "excursion_steps": res["exc_steps"],
         "excursion_episodes": res["exc_episodes"], "merge_time": res["merge_time"],
         "first_close": res["first_close"], "crossings": res["crossings"]},
        agg,
        {"merged": int(merged.sum()), "never_close": int(np.count_nonzero(res["first_close"] < 0))},
        time.perf_counter() - t0,
    )


def loglog_slope(eps, P) -> float:
    """Least-squares slope of ``ln P`` against ``ln eps``."""
    return float(np.polyfit(np.log(eps), np.log(P), 1)[0])


def divergence_experiment(sys: SystemParams, epsGrid: Sequence[float], n: int, trials: int,
                          seed: int) -> ExperimentReport:
    """Time fraction ``P(eps)`` spent within ``eps`` in the expanding regime.

    For multiplicatively dependent systems the analytic mass of the strip
    ``|x - y| < eps`` is reported alongside, with per-threshold z-scores
    based on the spread across trials.
    """
    _gate(sys, DIVERGE, "divergence_experiment")
    eps = np.asarray(epsGrid, dtype=np.float64)
    if eps.size == 0 or np.any(eps <= 0):
        raise DomainError("epsGrid must contain positive thresholds")
    t0 = time.perf_counter()
    res = pair_campaign(sys, trials, n, seed, eps, np.array([n], dtype=np.int64))
    P = res["close"][:, -1, :] / n
    mean = P.mean(axis=0)
    se = P.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(eps.size, np.nan)
    tables = {"eps": eps, "P_trials": P, "P_mean": mean, "P_se": se}
    agg = {}
    fit = (eps < 1.0) & (mean > 0)
    if fit.sum() >= 2:
        agg["slope"] = loglog_slope(eps[fit], mean[fit])
    md = mult_dependence(sys.M, sys.N)
    if md is not None:
        cs = solve_b(sys.p0, md.k, md.l)
        analytic = np.array([delta_eps_mass(cs, md.kappa, min(e, 1.0)) for e in eps])
        tables["P_analytic"] = analytic
        with np.errstate(divide="ignore", invalid="ignore"):
            tables["z_score"] = (mean - analytic) / se
        agg["nu1"] = cs.ratio
        agg["exponent"] = -math.log(cs.ratio) / math.log(md.kappa)
        if fit.sum() >= 2:
            agg["analytic_slope"] = loglog_slope(eps[fit], analytic[fit])
    return ExperimentReport(
        "diverge",
        {**_sys_config(sys), "eps": eps.tolist(), "n": n, "trials": trials, "seed": seed},
        tables, agg, {"merged": int(np.count_nonzero(res["merge_time"] >= 0))},
        time.perf_counter() - t0,
    )


def equidistribution_test(sys: SystemParams, bins: int, n: int, seed: int) -> ExperimentReport:
    """Histogram of one orbit against Lebesgue measure.

    The gate is ``4 sqrt(w (1 - w) / n) sqrt(2 ln bins)`` with ``w = 1/bins``.
    """
    if bins < 2:
        raise DomainError("bins must be at least 2")
    if n < 1:
        raise DomainError("n must be positive")
    t0 = time.perf_counter()
    counts = _single_orbit_hist(np.uint64(derive_key(seed, 0)), sys.breakpoint_array, sys.M, sys.N, int(n), int(bins))
    w = 1.0 / bins
    dev = float(np.max(np.abs(counts / n - w)))
    gate = 4.0 * math.sqrt(w * (1.0 - w) / n) * math.sqrt(2.0 * math.log(bins))
    return ExperimentReport(
        "equi",
        {**_sys_config(sys), "bins": bins, "n": n, "seed": seed},
        {"counts": counts},
        {"sup_deviation": dev, "gate": gate, "passed": bool(dev < gate)},
        {},
        time.perf_counter() - t0,
    )


def two_point_histogram(sys: SystemParams, gridRes: int, n: int, seed: int) -> ExperimentReport:
    """Occupation of a ``gridRes x gridRes`` mesh by one long pair orbit.

    For multiplicatively dependent systems each cell is compared with its
    mass under the analytic pair measure.
    """
    _gate(sys, DIVERGE, "two_point_histogram")
    if gridRes < 1 or n < 1:
        raise DomainError("gridRes and n must be positive")
    t0 = time.perf_counter()
    counts = _pair_hist(np.uint64(derive_key(seed, 0)), sys.breakpoint_array, sys.M, sys.N, int(n), int(gridRes))
    tables = {"counts": counts}
    agg = {}
    md = mult_dependence(sys.M, sys.N)
    if md is not None:
        mass = cell_masses(solve_b(sys.p0, md.k, md.l), md.kappa, gridRes)
        tables["analytic"] = mass
        sel = mass > 1e-3
        rel = np.abs(counts / n - mass)[sel] / mass[sel]
        agg["max_rel_error"] = float(rel.max()) if rel.size else 0.0
        agg["cells_compared"] = int(sel.sum())
    return ExperimentReport(
        "hist2d",
        {**_sys_config(sys), "gridRes": gridRes, "n": n, "seed": seed},
        tables, agg, {}, time.perf_counter() - t0,
    )
