"""Generating maps, symbol streams and orbit iteration.

The system consists of the expanding map ``f0(x) = N x mod 1`` and the
contractions ``f_i(x) = (x + i - 1) / M`` for ``i = 1..M``.  Symbol 0 is
drawn with probability ``p0`` and each contraction with ``(1 - p0) / M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Integral, Real
from typing import Sequence, Union

import numpy as np
from numba import njit

from .errors import DomainError
from .rng import derive_key, next_uniform, uniforms

ONE_MINUS = math.nextafter(1.0, 0.0)
EPS53 = 2.0 ** -53

# Regime codes
SYNC, ZERO, DIVERGE = -1, 0, 1


@dataclass(frozen=True)
class SystemParams:
    """Parameters ``(M, N, p0)`` of the IFS with derived quantities.

    Attributes
    ----------
    M, N : int
        Number of contractions and expansion factor.
    p0 : float
        Probability of the expanding map.
    probs : tuple of float
        ``(p0, (1 - p0)/M, ..., (1 - p0)/M)``.
    breakpoints : tuple of float
        ``r_0 = 0 < r_1 = p0 < ... < r_{M+1} = 1``.
    lyap : float
        Lyapunov exponent ``p0 ln N - (1 - p0) ln M``.
    """

    M: int
    N: int
    p0: float
    probs: tuple = field(repr=False)
    breakpoints: tuple = field(repr=False)
    lyap: float

    @property
    def regime(self) -> int:
        """Sign of the Lyapunov exponent, with exact cancellation mapped to 0.

        ``lyap`` is a difference of two rounded logarithms, so systems whose
        exponent vanishes in exact arithmetic can show residues of a few ulps.
        """
        tol = 64 * EPS53 * (math.log(self.N) + math.log(self.M))
        if abs(self.lyap) <= tol:
            return ZERO
        return SYNC if self.lyap < 0 else DIVERGE

    @property
    def breakpoint_array(self) -> np.ndarray:
        return np.asarray(self.breakpoints, dtype=np.float64)


def _check_int(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, Integral):
        raise DomainError(f"{name} must be an integer, got {v!r}")
    if v < lo:
        raise DomainError(f"{name} must be >= {lo}, got {v}")
    return int(v)


def make_system(M: int, N: int, p0: float) -> SystemParams:
    """Build a validated :class:`SystemParams`."""
    M = _check_int("M", M, 2)
    N = _check_int("N", N, 2)
    if isinstance(p0, bool) or not isinstance(p0, Real) or not (0.0 < p0 < 1.0):
        raise DomainError(f"p0 must lie in (0, 1), got {p0!r}")
    p0 = float(p0)
    q = (1.0 - p0) / M
    probs = (p0,) + (q,) * M
    r = [0.0, p0]
    for i in range(1, M):
        r.append(p0 + i * q)
    r.append(1.0)
    lyap = p0 * math.log(N) - (1.0 - p0) * math.log(M)
    return SystemParams(M, N, p0, probs, tuple(r), lyap)


def _check_unit(x, name="x"):
    if not (0.0 <= x < 1.0):
        raise DomainError(f"{name} must lie in [0, 1), got {x!r}")


@njit(cache=True, inline="always")
def _product_error(a, b):
    # exact a*b - fl(a*b) by Veltkamp splitting
    p = a * b
    t = 134217729.0 * a
    ah = t - (t - a)
    al = a - ah
    t = 134217729.0 * b
    bh = t - (t - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def branch_of(x, N):
    """Exact ``floor(N x)``; a product rounded up onto an integer is corrected."""
    y = x * N
    j = math.floor(y)
    if y == j and y > 0.0 and _product_error(x, float(N)) < 0.0:
        j -= 1
    return j


@njit(cache=True, inline="always")
def expand(x, N):
    j = branch_of(x, N)
    y = x * N - j
    if y >= 1.0:
        # exact value lies just below the integer j + 1
        y = 0.9999999999999999
    return y


@njit(cache=True, inline="always")
def contract(x, i, M):
    """``(x + i - 1)/M``, kept inside the exact image ``[(i-1)/M, i/M)``.

    Rounding can leave the quotient one ulp outside (``f2(0) = fl(1/3) < 1/3``
    for ``M = 3``), which the expanding map would then send to the wrong
    branch; the exact product error decides and one ulp repairs it.
    """
    y = (x + (i - 1)) / M
    p = y * M
    if p < i - 1 or (p == i - 1 and _product_error(y, float(M)) < 0.0):
        y = np.nextafter(y, 1.0)
    elif p > i or (p == i and _product_error(y, float(M)) >= 0.0):
        y = np.nextafter(y, 0.0)
    if y >= 1.0:
        y = 0.9999999999999999
    return y


@njit(cache=True, inline="always")
def step(x, s, M, N):
    if s == 0:
        return expand(x, N)
    return contract(x, s, M)


@njit(cache=True, inline="always")
def symbol_of(u, r):
    """Inverse CDF: the symbol ``i`` with ``r[i] <= u < r[i+1]``."""
    m = r.shape[0] - 2
    for i in range(m):
        if u < r[i + 1]:
            return i
    return m


@njit(cache=True, inline="always")
def dithered_expand(x, N, v):
    """``N x mod 1`` with the rounding error replaced by a uniform dither.

    ``v`` is a uniform draw; the perturbation is at most ``N`` ulps of 1.
    This keeps long orbits from collapsing onto dyadic or N-adic rationals,
    which plain doubles do after about 53 / log2(N) expansions.
    """
    y = x * N
    y = y - math.floor(y) + N * 1.1102230246251565e-16 * v
    if y >= 1.0:
        y -= 1.0
    return y


def apply_map(sys: SystemParams, i: int, x: float) -> float:
    """Apply ``f_i`` to ``x``.

    Examples
    --------
    >>> s = make_system(3, 2, 0.5)
    >>> apply_map(s, 0, 0.75), apply_map(s, 3, 0.5)
    (0.5, 0.8333333333333334)
    """
    if isinstance(i, bool) or not isinstance(i, Integral) or not (0 <= i <= sys.M):
        raise DomainError(f"symbol must be in 0..{sys.M}, got {i!r}")
    _check_unit(x)
    return float(step(float(x), int(i), sys.M, sys.N))


class SymbolStream:
    """I.i.d. symbols with law ``sys.probs`` from a seeded SplitMix64 stream.

    Draw ``t`` of the underlying uniform stream yields symbol ``t`` through
    the inverse CDF on the breakpoints, so ``word(n)`` is a prefix of
    ``word(n + m)`` and compiled kernels reproduce it exactly from ``key``.
    """

    def __init__(self, sys: SystemParams, seed: int, trial: int = 0):
        self.sys = sys
        self.seed = int(seed)
        self.trial = int(trial)
        self.key = derive_key(self.seed, self.trial)

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        return uniforms(self.key, n, start)

    def word(self, n: int, start: int = 0) -> np.ndarray:
        """Symbols ``start .. start+n-1`` as an int64 array."""
        u = self.uniforms(n, start)
        r = self.sys.breakpoint_array
        return np.searchsorted(r[1:-1], u, side="right").astype(np.int64)

    def __repr__(self):
        return f"SymbolStream(M={self.sys.M}, seed={self.seed}, trial={self.trial})"


@dataclass
class OrbitRecord:
    """Orbit of one start point.

    Attributes
    ----------
    points : ndarray, shape (n+1,)
    logDeriv : ndarray, shape (n+1,)
        ``logDeriv[t] = ln (f^t)'``.
    crossings : ndarray of bool, shape (n,)
        Step ``t`` applied ``f0`` while the tracked points sat in different
        branches of ``f0``.
    """

    points: np.ndarray
    logDeriv: np.ndarray
    crossings: np.ndarray


@njit(cache=True)
def _orbit_kernel(word, starts, M, N):
    n = word.shape[0]
    d = starts.shape[0]
    pts = np.empty((n + 1, d))
    cross = np.zeros(n, dtype=np.bool_)
    for j in range(d):
        pts[0, j] = starts[j]
    for t in range(n):
        s = word[t]
        if s == 0 and d > 1:
            b0 = branch_of(pts[t, 0], N)
            for j in range(1, d):
                if branch_of(pts[t, j], N) != b0:
                    cross[t] = True
                    break
        for j in range(d):
            pts[t + 1, j] = step(pts[t, j], s, M, N)
    return pts, cross


def _as_word(sys, omega, n):
    if isinstance(omega, SymbolStream):
        if n is None:
            raise DomainError("n is required when iterating a SymbolStream")
        return omega.word(int(n))
    w = np.asarray(omega, dtype=np.int64).reshape(-1)
    if w.size and (w.min() < 0 or w.max() > sys.M):
        raise DomainError(f"word symbols must be in 0..{sys.M}")
    if n is None:
        return w
    if n < 0 or n > w.size:
        raise DomainError(f"n={n} exceeds the word length {w.size}")
    return w[: int(n)]


def log_derivative(sys: SystemParams, word: np.ndarray) -> np.ndarray:
    """Cumulative ``ln (f^t)'`` as ``a ln N - b ln M`` with integer counts."""
    zeros = np.concatenate(([0], np.cumsum(word == 0)))
    steps = np.arange(word.size + 1)
    return zeros * math.log(sys.N) - (steps - zeros) * math.log(sys.M)


def iterate_orbit(
    sys: SystemParams,
    omega: Union[SymbolStream, Sequence[int]],
    starts: Union[float, Sequence[float]],
    n: int | None = None,
) -> list[OrbitRecord]:
    """Iterate every start under the same symbol sequence.

    Parameters
    ----------
    omega : SymbolStream or sequence of int
        Symbols; ``omega[0]`` is applied first.
    starts : float or sequence of float
        Initial points in [0, 1).
    n : int, optional
        Number of steps; defaults to the word length.

    Returns
    -------
    list of OrbitRecord
        One record per start; crossing flags are shared.
    """
    if n is not None and n < 0:
        raise DomainError("n must be non-negative")
    xs = np.atleast_1d(np.asarray(starts, dtype=np.float64))
    for x in xs:
        _check_unit(x, "start")
    word = _as_word(sys, omega, n)
    pts, cross = _orbit_kernel(word, xs, sys.M, sys.N)
    ld = log_derivative(sys, word)
    return [OrbitRecord(pts[:, j].copy(), ld, cross.copy()) for j in range(xs.size)]


def transfer_density_check(sys: SystemParams, xs, probs=None) -> float:
    """Maximal deviation from 1 of the transfer operator applied to Lebesgue density.

    For each ``x`` the preimages under every branch are enumerated: ``f0``
    has one preimage ``(x + j)/N`` per ``j`` with weight ``1/N``, and the
    contraction ``f_i`` has the preimage ``M x - (i - 1)`` with weight ``M``
    when ``x`` lies in its image.

    Parameters
    ----------
    probs : sequence of float, optional
        Override of ``sys.probs``; used to confirm the check detects
        miswired weights.
    """
    x = np.asarray(xs, dtype=np.float64).reshape(-1)
    if x.size and (x.min() < 0.0 or x.max() >= 1.0):
        raise DomainError("xs must lie in [0, 1)")
    p = np.asarray(sys.probs if probs is None else probs, dtype=np.float64)
    if p.size != sys.M + 1:
        raise DomainError(f"probs must have {sys.M + 1} entries")
    N, M = sys.N, sys.M
    # (x + j)/N lies in [0, 1) iff -j <= x < N - j; forming x + j first can round up to N
    j = np.arange(N, dtype=np.float64)[None, :]
    count0 = np.count_nonzero((x[:, None] >= -j) & (x[:, None] < N - j), axis=1)
    total = p[0] * count0 * (1.0 / N)
    branch = np.minimum(np.floor(x * M).astype(np.int64), M - 1) + 1
    for i in range(1, M + 1):
        total = total + np.where(branch == i, p[i] * M, 0.0)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(total - 1.0)))
