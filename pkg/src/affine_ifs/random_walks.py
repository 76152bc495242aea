"""Line walks with drift and the stopping times built on them.

A walk moves by ``stepL < 0`` with probability ``p0`` and by ``stepR > 0``
otherwise.  The derivative walk of an IFS (``z_n = -ln (f^n)'``) is the case
``stepL = -ln N``, ``stepR = ln M``.  Positions are recomputed from step
counts, ``z_n = z_0 + a stepL + b stepR``, so long paths carry no
accumulated rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit

from .errors import ConvergenceError, DomainError, PreconditionError
from .ifs_core import ZERO, SymbolStream, SystemParams, dithered_expand, contract, symbol_of
from .rng import child_key, derive_key, next_uniform, trial_keys

DEFAULT_CAP = 10 ** 6

BELOW, ABOVE, CENSORED = 0, 1, -1
REASON_CENSORED, REASON_DERIVATIVE, REASON_NEIGHBORHOOD = 0, 1, 2


@dataclass(frozen=True)
class WalkParams:
    """Two-step walk on the line.

    Attributes
    ----------
    stepL, stepR : float
        Negative and positive step.
    p0 : float
        Probability of ``stepL``.
    drift : float
        ``p0 stepL + (1 - p0) stepR``; computed from the fields unless
        supplied by an algebraic constructor that knows it exactly.
    """

    stepL: float
    stepR: float
    p0: float
    drift: Optional[float] = None

    def __post_init__(self):
        if not (self.stepL < 0.0 < self.stepR):
            raise DomainError("steps must satisfy stepL < 0 < stepR")
        if not (0.0 < self.p0 <= 1.0):
            raise DomainError("p0 must lie in (0, 1]")
        computed = self.p0 * self.stepL + (1.0 - self.p0) * self.stepR
        if self.drift is None:
            object.__setattr__(self, "drift", computed)
        elif abs(self.drift - computed) > 1e-12 * (abs(self.stepL) + abs(self.stepR)):
            raise DomainError(f"drift {self.drift} inconsistent with the steps ({computed})")

    @classmethod
    def from_drift(cls, p0: float, c: float, alpha: float) -> "WalkParams":
        """Steps ``-(1-p0) c + alpha`` and ``p0 c + alpha``, whose drift is ``alpha``."""
        return cls(-(1.0 - p0) * c + alpha, p0 * c + alpha, p0, float(alpha))

    @classmethod
    def zero_drift(cls, p0: float, c: float = 1.0) -> "WalkParams":
        return cls.from_drift(p0, c, 0.0)


@dataclass(frozen=True)
class LevelSchedule:
    """Levels ``K_n = 2 ln(n + p) + ln eps`` with ``1/(p+1)^2 < eps < 1/p^2``."""

    p: int
    eps: float

    def __post_init__(self):
        if self.p < 1:
            raise DomainError("p must be a positive integer")
        if not (1.0 / (self.p + 1) ** 2 < self.eps < 1.0 / self.p ** 2):
            raise DomainError(f"eps={self.eps} not in (1/(p+1)^2, 1/p^2) for p={self.p}")

    @classmethod
    def from_eps(cls, eps: float) -> "LevelSchedule":
        if not (0.0 < eps < 1.0):
            raise DomainError("eps must lie in (0, 1)")
        p = math.floor(1.0 / math.sqrt(eps))
        if p * p * eps >= 1.0:
            p -= 1
        return cls(max(p, 1), eps)

    def level(self, n):
        return 2.0 * np.log(np.asarray(n, dtype=np.float64) + self.p) + math.log(self.eps)


def derivative_walk(sys: SystemParams) -> WalkParams:
    """Walk of ``z_n = -ln (f^n)'``: down ``ln N`` with probability ``p0``, else up ``ln M``."""
    drift = 0.0 if sys.regime == ZERO else -sys.lyap
    return WalkParams(-math.log(sys.N), math.log(sys.M), sys.p0, drift)


# Kernels -------------------------------------------------------------------

@njit(cache=True)
def _walk_path(key, L, R, p0, z0, n):
    out = np.empty(n + 1)
    out[0] = z0
    state = key
    a = 0
    b = 0
    for t in range(n):
        state, u = next_uniform(state)
        if u < p0:
            a += 1
        else:
            b += 1
        out[t + 1] = z0 + a * L + b * R
    return out


@njit(cache=True)
def _first_passage(keys, L, R, p0, z0, K, cap):
    m = keys.shape[0]
    times = np.empty(m, dtype=np.int64)
    sides = np.empty(m, dtype=np.int8)
    zexit = np.empty(m)
    for i in range(m):
        state = keys[i]
        a = 0
        b = 0
        z = z0
        times[i] = cap
        sides[i] = -1
        for t in range(1, cap + 1):
            state, u = next_uniform(state)
            if u < p0:
                a += 1
            else:
                b += 1
            z = z0 + a * L + b * R
            if z < 0.0:
                times[i] = t
                sides[i] = 0
                break
            if z > K:
                times[i] = t
                sides[i] = 1
                break
        zexit[i] = z
    return times, sides, zexit


@njit(cache=True)
def _stop_S(keys, L, R, p0, z0, p, lneps, cap):
    m = keys.shape[0]
    times = np.empty(m, dtype=np.int64)
    cens = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        state = keys[i]
        a = 0
        b = 0
        times[i] = cap
        cens[i] = True
        for t in range(1, cap + 1):
            state, u = next_uniform(state)
            if u < p0:
                a += 1
            else:
                b += 1
            if z0 + a * L + b * R < 2.0 * math.log(t + p) + lneps:
                times[i] = t
                cens[i] = False
                break
    return times, cens


@njit(cache=True, inline="always")
def _dist_to_cuts(x, N):
    j = math.floor(x * N + 0.5)
    if j < 1:
        j = 1
    if j > N - 1:
        j = N - 1
    return abs(x - j / N)


@njit(cache=True)
def _w_core(word, use_word, start, key, r, M, N, lnN, lnM, p, eps, xJ, cap):
    """Stopping time W from position ``start`` of ``word`` (or of the stream ``key``).

    Returns ``(time, reason)``; reason 0 marks censoring at ``cap`` or at
    the end of the word.
    """
    state = key
    dstate = child_key(key, np.uint64(1))
    lneps = math.log(eps)
    x = xJ
    a = 0
    b = 0
    if use_word:
        if start >= word.shape[0]:
            return 0, 0
        s = word[start]
    else:
        state, u = next_uniform(state)
        s = symbol_of(u, r)
    for n in range(1, cap + 1):
        if s == 0:
            dstate, v = next_uniform(dstate)
            x = dithered_expand(x, N, v)
            a += 1
        else:
            x = contract(x, s, M)
            b += 1
        z = b * lnM - a * lnN
        if z < 2.0 * math.log(n + p) + lneps:
            return n, 1
        if use_word:
            if start + n >= word.shape[0]:
                return n, 0
            s = word[start + n]
        else:
            state, u = next_uniform(state)
            s = symbol_of(u, r)
        if s == 0:
            rad = 1.0 / ((p + n) * (p + n))
            if _dist_to_cuts(x, N) <= rad:
                return n, 2
    return cap, 0


@njit(cache=True)
def _stop_W_batch(keys, r, M, N, lnN, lnM, p, eps, xJ, cap):
    m = keys.shape[0]
    times = np.empty(m, dtype=np.int64)
    reasons = np.empty(m, dtype=np.int8)
    empty = np.zeros(0, dtype=np.int64)
    for i in range(m):
        t, why = _w_core(empty, False, 0, keys[i], r, M, N, lnN, lnM, p, eps, xJ, cap)
        times[i] = t
        reasons[i] = why
    return times, reasons


@njit(cache=True)
def _v_core(word, use_word, start, key, r, zeta, cap):
    D = zeta.shape[0]
    state = key
    run = np.empty(D, dtype=np.int64)
    for n in range(cap + 1):
        if use_word:
            if start + n >= word.shape[0]:
                return n, True
            s = word[start + n]
        else:
            state, u = next_uniform(state)
            s = symbol_of(u, r)
        run[n % D] = s
        if n >= D - 1:
            ok = True
            for j in range(D):
                if run[(n - D + 1 + j) % D] != zeta[j]:
                    ok = False
                    break
            if ok:
                return n, False
    return cap, True


@njit(cache=True)
def _stop_V_batch(keys, r, zeta, cap):
    m = keys.shape[0]
    times = np.empty(m, dtype=np.int64)
    cens = np.empty(m, dtype=np.bool_)
    empty = np.zeros(0, dtype=np.int64)
    for i in range(m):
        times[i], cens[i] = _v_core(empty, False, 0, keys[i], r, zeta, cap)
    return times, cens


@njit(cache=True)
def _composite(word, key, r, M, N, lnN, lnM, p, eps, xJ, zeta):
    n = word.shape[0]
    D = zeta.shape[0]
    starts = []
    ends = []
    pos = 0
    while pos < n:
        v, cens = _v_core(word, True, pos, key, r, zeta, n)
        if cens:
            break
        t0 = pos + v + 1
        w, why = _w_core(word, True, t0, key, r, M, N, lnN, lnM, p, eps, xJ, n)
        if why == 0:
            if t0 < n:
                starts.append(t0)
                ends.append(n)
            break
        starts.append(t0)
        ends.append(t0 + w)
        pos = t0 + w
    out = np.empty((len(starts), 2), dtype=np.int64)
    for i in range(len(starts)):
        out[i, 0] = starts[i]
        out[i, 1] = ends[i]
    return out


# Public API ----------------------------------------------------------------

def simulate_walk(wp: WalkParams, z0: float, n: int, seed: int, trial: int = 0) -> np.ndarray:
    """Path ``z_0 .. z_n``; step ``t`` is ``stepL`` iff uniform draw ``t`` is below ``p0``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    return _walk_path(np.uint64(derive_key(seed, trial)), wp.stepL, wp.stepR, wp.p0, float(z0), int(n))


@dataclass(frozen=True)
class FirstPassage:
    time: int
    side: str
    censored: bool
    z_exit: float


@dataclass(frozen=True)
class PassageBatch:
    times: np.ndarray
    sides: np.ndarray
    z_exit: np.ndarray

    @property
    def censored(self) -> np.ndarray:
        return self.sides == CENSORED


def _check_passage(z0, upperK):
    if z0 < 0.0:
        raise DomainError("z0 must be non-negative")
    if upperK is not None and z0 > upperK:
        raise DomainError("z0 must not exceed K")


def first_passage_batch(
    wp: WalkParams, z0: float, trials: int, seed: int, upperK: Optional[float] = None, cap: int = DEFAULT_CAP
) -> PassageBatch:
    """``trials`` independent exit times ``T`` (or ``T_K`` when ``upperK`` is set)."""
    _check_passage(z0, upperK)
    K = math.inf if upperK is None else float(upperK)
    t, s, z = _first_passage(trial_keys(seed, trials), wp.stepL, wp.stepR, wp.p0, float(z0), K, int(cap))
    return PassageBatch(t, s, z)


def first_passage(
    wp: WalkParams, z0: float, upperK: Optional[float] = None, seed: int = 0, trial: int = 0, cap: int = DEFAULT_CAP
) -> FirstPassage:
    """First ``n`` with ``z_n < 0`` (or ``z_n > K``), censored at ``cap``."""
    _check_passage(z0, upperK)
    K = math.inf if upperK is None else float(upperK)
    keys = np.array([derive_key(seed, trial)], dtype=np.uint64)
    t, s, z = _first_passage(keys, wp.stepL, wp.stepR, wp.p0, float(z0), K, int(cap))
    side = {BELOW: "below0", ABOVE: "aboveK", CENSORED: "censored"}[int(s[0])]
    return FirstPassage(int(t[0]), side, side == "censored", float(z[0]))


def _require_negative(wp):
    if not wp.drift < 0.0:
        raise PreconditionError(f"drift must be negative, got {wp.drift}")


def wald_bound(wp: WalkParams) -> float:
    """Lower bound ``-p0 stepL / |alpha|`` on the mean of ``T``."""
    _require_negative(wp)
    return -wp.p0 * wp.stepL / abs(wp.drift)


def martingale_exponent(wp: WalkParams, max_iter: int = 200) -> float:
    """Positive root ``r*`` of ``p0 e^(L r) + (1 - p0) e^(R r) = 1``.

    The function is convex, vanishes at 0 with slope ``alpha < 0`` and is
    positive at ``50 / R`` (bracket widened if ever needed).  Evaluation uses
    ``expm1`` to keep precision for small ``r*``.
    """
    _require_negative(wp)
    L, R, p0 = wp.stepL, wp.stepR, wp.p0
    if p0 >= 1.0:
        raise PreconditionError("p0 = 1 has no positive martingale exponent")

    def phi(r):
        return p0 * math.expm1(L * r) + (1.0 - p0) * math.expm1(R * r)

    def dphi(r):
        return p0 * L * math.exp(L * r) + (1.0 - p0) * R * math.exp(R * r)

    lo, hi = 0.0, 50.0 / R
    while phi(hi) <= 0.0:
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * hi:
            break
    r = hi
    for _ in range(max_iter):
        step = phi(r) / dphi(r)
        r -= step
        if abs(step) <= 4e-16 * r:
            break
    if not r > 0.0 or abs(phi(r)) >= 1e-13:
        raise ConvergenceError(f"r* residual {phi(r)} above 1e-13")
    return r


def escape_prob_bracket(wp: WalkParams, K: float, z0: float) -> tuple[float, float]:
    """Bounds on the probability that ``T_K`` exits below 0.

    Optional stopping of ``exp(r* z_n)`` gives
    ``A_K = (e^(c2 r) - e^(z0 r) e^(-K r)) / (e^(c2 r) - e^(c1 r) e^(-K r))`` where
    ``c1 in [L, 0]`` and ``c2 in [0, R]`` are the unknown overshoots.  ``A_K``
    is monotone in each of them, so the extremes sit at the corners.
    """
    if not (0.0 <= z0 <= K):
        raise DomainError("need 0 <= z0 <= K")
    r = martingale_exponent(wp)
    vals = []
    for c1 in (wp.stepL, 0.0):
        for c2 in (0.0, wp.stepR):
            num = math.exp(c2 * r) - math.exp((z0 - K) * r)
            den = math.exp(c2 * r) - math.exp((c1 - K) * r)
            if den != 0.0:  # only the corner c1 = c2 = 0 with K = 0 degenerates
                vals.append(num / den)
    return min(vals), max(vals)


@dataclass(frozen=True)
class StopResult:
    time: int
    censored: bool
    reason: int = REASON_CENSORED


def _check_S(wp, sched, z0):
    if wp.drift != 0.0:
        raise PreconditionError(f"stop_S_timedep needs exactly zero drift, got {wp.drift}")
    if not z0 > sched.level(0):
        raise PreconditionError(f"z0={z0} must exceed K_0={float(sched.level(0))}")


def stop_S_timedep_batch(
    wpZeroDrift: WalkParams, sched: LevelSchedule, z0: float, trials: int, seed: int,
    cap: int = DEFAULT_CAP, campaign: Sequence[int] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Times and censor flags of ``S = min{n > 0 : z_n < K_n}`` for many trials.

    ``campaign`` prefixes the stream path so that repeated campaigns use
    independent streams.
    """
    _check_S(wpZeroDrift, sched, z0)
    keys = trial_keys(seed, trials, *campaign)
    return _stop_S(keys, wpZeroDrift.stepL, wpZeroDrift.stepR, wpZeroDrift.p0, float(z0),
                   float(sched.p), math.log(sched.eps), int(cap))


def stop_S_timedep(wpZeroDrift: WalkParams, sched: LevelSchedule, z0: float, seed: int,
                   trial: int = 0, cap: int = DEFAULT_CAP) -> StopResult:
    _check_S(wpZeroDrift, sched, z0)
    keys = np.array([derive_key(seed, trial)], dtype=np.uint64)
    t, c = _stop_S(keys, wpZeroDrift.stepL, wpZeroDrift.stepR, wpZeroDrift.p0, float(z0),
                   float(sched.p), math.log(sched.eps), int(cap))
    return StopResult(int(t[0]), bool(c[0]))


@dataclass(frozen=True)
class TangentLine:
    intercept: float
    slope: float

    def __call__(self, n):
        return self.intercept + self.slope * np.asarray(n, dtype=np.float64)


def tangent_levels(sched: LevelSchedule, m: int) -> TangentLine:
    """Tangent at ``n = m`` to the concave level curve ``K_n``."""
    if m < 0:
        raise DomainError("m must be non-negative")
    slope = 2.0 / (m + sched.p)
    return TangentLine(float(sched.level(m)) - 2.0 * m / (m + sched.p), slope)


def word_interval_midpoint(sys: SystemParams, zeta: Sequence[int]) -> float:
    """Midpoint of ``f_zeta([0, 1))`` for a word of contractions."""
    if any(not (1 <= s <= sys.M) for s in zeta):
        raise DomainError("zeta must use contraction symbols 1..M")
    x = 0.0
    for s in zeta:
        x = (x + s - 1) / sys.M
    return x + 0.5 * sys.M ** -len(zeta)


def _w_args(sys, eps, xJ):
    sched = LevelSchedule.from_eps(eps)
    if not (0.0 <= xJ < 1.0):
        raise DomainError("xJ must lie in [0, 1)")
    return sched, (sys.breakpoint_array, sys.M, sys.N, math.log(sys.N), math.log(sys.M),
                   float(sched.p), float(eps), float(xJ))


def stop_W(sys: SystemParams, eps: float, xJ: float,
           omega: Union[SymbolStream, Sequence[int]], cap: int = DEFAULT_CAP) -> StopResult:
    """First ``n`` with ``(f^n)' > 1/((p+n)^2 eps)``, or with ``f^n(xJ)`` within
    ``1/(p+n)^2`` of a discontinuity of ``f0`` while ``omega_n = 0``.

    ``omega`` may be a stream or an explicit word; a word that runs out
    before either condition holds gives a censored result.
    """
    _, args = _w_args(sys, eps, xJ)
    if isinstance(omega, SymbolStream):
        t, why = _w_core(np.zeros(0, np.int64), False, 0, np.uint64(omega.key), *args, int(cap))
    else:
        w = np.asarray(omega, dtype=np.int64)
        t, why = _w_core(w, True, 0, np.uint64(derive_key(0)), *args, int(cap))
    return StopResult(int(t), why == REASON_CENSORED, int(why))


def stop_W_batch(sys: SystemParams, eps: float, xJ: float, trials: int, seed: int,
                 cap: int = DEFAULT_CAP, campaign: Sequence[int] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Times and reason codes of ``W`` over ``trials`` independent streams."""
    _, args = _w_args(sys, eps, xJ)
    return _stop_W_batch(trial_keys(seed, trials, *campaign), *args, int(cap))


def _zeta_array(sys, zeta):
    z = np.asarray(zeta, dtype=np.int64)
    if z.size < 1 or z.min() < 1 or z.max() > sys.M:
        raise DomainError("zeta must be a non-empty word over 1..M")
    return z


def stop_V(sys: SystemParams, zeta: Sequence[int],
           omega: Union[SymbolStream, Sequence[int]], cap: int = DEFAULT_CAP) -> StopResult:
    """Smallest ``n >= D - 1`` with ``omega_{n-D+1} .. omega_n = zeta``."""
    z = _zeta_array(sys, zeta)
    if isinstance(omega, SymbolStream):
        t, c = _v_core(np.zeros(0, np.int64), False, 0, np.uint64(omega.key), sys.breakpoint_array, z, int(cap))
    else:
        t, c = _v_core(np.asarray(omega, dtype=np.int64), True, 0, np.uint64(0), sys.breakpoint_array, z, int(cap))
    return StopResult(int(t), bool(c))


def stop_V_batch(sys: SystemParams, zeta: Sequence[int], trials: int, seed: int,
                 cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    return _stop_V_batch(trial_keys(seed, trials), sys.breakpoint_array, _zeta_array(sys, zeta), int(cap))


def composite_stops(sys: SystemParams, zeta: Sequence[int], eps: float,
                    omega: Union[SymbolStream, Sequence[int]], n: Optional[int] = None) -> np.ndarray:
    """Windows ``[t_i, t_i + W_i)`` during which ``f^t([0, 1))`` has length below ``eps``.

    Each window opens one step after an occurrence of ``zeta`` completes
    (the image then lies in ``J = f_zeta([0, 1))``) and lasts for the
    stopping time ``W`` started at the midpoint of ``J``; the next search
    for ``zeta`` begins when the window closes.  ``M^-|zeta|`` must be below
    ``eps``.

    Returns
    -------
    ndarray of shape (k, 2)
        Rows ``(start, end)`` with ``end`` exclusive; the last window may be
        cut at ``n``.
    """
    z = _zeta_array(sys, zeta)
    if sys.M ** -len(z) >= eps:
        raise DomainError("the interval of zeta must be shorter than eps")
    if isinstance(omega, SymbolStream):
        if n is None:
            raise DomainError("n is required for a stream")
        word, key = omega.word(int(n)), omega.key
    else:
        word, key = np.asarray(omega, dtype=np.int64), derive_key(0)
    _, args = _w_args(sys, eps, word_interval_midpoint(sys, z))
    return _composite(word, np.uint64(key), *args, z)
