"""Stationary measures of the two-point motion for multiplicatively dependent systems.

When ``M = kappa**l`` and ``N = kappa**k``, the two-point motion started on
a diagonal square of side ``kappa**-h`` stays on diagonal squares, and the
level ``h`` performs the reflected walk that moves down ``k`` (with
probability ``p0``, never below 0) or up ``l``.  The weights ``b_h`` of its
stationary measure determine the stationary measure of pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConvergenceError, DomainError, NumericalError, PreconditionError
from .rng import derive_key, next_uniform

ON_CIRCLE_TOL = 1e-8
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class MultDepParams:
    kappa: int
    k: int
    l: int


def _int_log(n: int, base: int) -> Optional[int]:
    e = 0
    while n % base == 0:
        n //= base
        e += 1
    return e if n == 1 else None


def mult_dependence(M: int, N: int) -> Optional[MultDepParams]:
    """``(kappa, k, l)`` with ``N = kappa**k``, ``M = kappa**l`` and ``gcd(k, l) = 1``.

    Returns ``None`` when ``M`` and ``N`` are multiplicatively independent.

    Examples
    --------
    >>> mult_dependence(3, 9)
    MultDepParams(kappa=3, k=2, l=1)
    >>> mult_dependence(2, 3) is None
    True
    """
    if M < 2 or N < 2:
        raise DomainError("M and N must be at least 2")
    for kappa in range(2, min(M, N) + 1):
        l = _int_log(M, kappa)
        if l is None:
            continue
        k = _int_log(N, kappa)
        if k is not None and math.gcd(k, l) == 1:
            return MultDepParams(kappa, k, l)
    return None


def _check_kl(k, l):
    if k < 1 or l < 1 or math.gcd(k, l) != 1:
        raise DomainError(f"k and l must be coprime positive integers, got ({k}, {l})")


def drift_sign(p0: float, k: int, l: int, tol: float = 1e-12) -> int:
    """Sign of ``(k + l) p0 - l``, which has the sign of the Lyapunov exponent."""
    v = (k + l) * p0 - l
    if abs(v) <= tol * (k + l):
        return 0
    return 1 if v > 0 else -1


def char_poly(p0: float, k: int, l: int) -> np.ndarray:
    """Coefficients (highest degree first) of ``p0 z^(k+l) - z^l + 1 - p0``."""
    c = np.zeros(k + l + 1)
    c[0] = p0
    c[k] = -1.0
    c[-1] += 1.0 - p0
    return c


def _deflated(p0, k, l):
    # (p0 z^(k+l) - z^l + 1 - p0) / (z - 1) = p0 sum_{i<k+l} z^i - sum_{i<l} z^i
    return np.array([p0 - (1.0 if i < l else 0.0) for i in range(k + l - 1, -1, -1)])


def nu1(p0: float, k: int, l: int) -> float:
    """The unique root of the characteristic polynomial in ``(0, 1)``.

    Solved on the deflated polynomial ``q(r) = p0 (1 + ... + r^(k+l-1)) -
    (1 + ... + r^(l-1))``, which is negative at 0 and positive at 1 when
    ``p0 > l / (k + l)``: bisection to a tight bracket, then Newton.
    """
    _check_kl(k, l)
    if not (0.0 < p0 < 1.0) or drift_sign(p0, k, l, tol=0.0) <= 0:
        raise PreconditionError(f"nu1 requires l/(k+l) < p0 < 1, got p0={p0} with k={k}, l={l}")
    q = _deflated(p0, k, l)
    dq = np.polyder(q)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.polyval(q, mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    r = 0.5 * (lo + hi)
    for _ in range(50):
        dr = np.polyval(q, r) / np.polyval(dq, r)
        r -= dr
        if abs(dr) < 1e-17:
            break
    res = abs(p0 * r ** (k + l) - r ** l + 1.0 - p0)
    if not (0.0 < r < 1.0) or res >= 1e-13:
        raise ConvergenceError(f"nu1 did not converge (r={r}, residual={res})")
    return float(r)


@dataclass(frozen=True)
class RootClassification:
    """Roots of ``p0 z^(k+l) - z^l + 1 - p0`` sorted by decreasing modulus."""

    roots: np.ndarray = field(repr=False)
    inside: int
    on: int
    outside: int
    nu1: float

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.inside, self.on, self.outside


def char_roots(p0: float, k: int, l: int) -> RootClassification:
    """All roots of the characteristic polynomial, classified against the unit circle.

    The root 1 is divided out exactly; the remaining ``k + l - 1`` roots are
    eigenvalues of the companion matrix, polished by Newton steps on the
    deflated polynomial.  ``nu1`` is taken from the eigenvalue route, so it
    is an independent check on :func:`nu1`.
    """
    _check_kl(k, l)
    if not (0.0 < p0 < 1.0) or drift_sign(p0, k, l, tol=0.0) <= 0:
        raise PreconditionError(f"char_roots requires l/(k+l) < p0 < 1, got p0={p0}")
    q = _deflated(p0, k, l)
    dq = np.polyder(q)
    rest = np.roots(q).astype(np.complex128) if q.size > 1 else np.zeros(0, np.complex128)
    for idx in range(rest.size):
        z = rest[idx]
        fz = abs(np.polyval(q, z))
        for _ in range(3):
            d = np.polyval(dq, z)
            if d == 0:
                break
            z_new = z - np.polyval(q, z) / d
            f_new = abs(np.polyval(q, z_new))
            if f_new >= fz:
                break
            z, fz = z_new, f_new
        rest[idx] = z
    mod = np.abs(rest)
    if np.any(np.abs(mod - 1.0) <= ON_CIRCLE_TOL):
        raise NumericalError("a non-trivial root lies on the unit circle within tolerance")
    inside = rest[mod < 1.0]
    if inside.size == 0:
        raise NumericalError("no root inside the unit circle")
    lead = inside[np.argmax(np.abs(inside))]
    if abs(lead.imag) > 1e-12 or lead.real <= 0.0:
        raise NumericalError(f"leading inside root {lead} is not real and positive")
    roots = np.concatenate(([1.0 + 0.0j], rest))
    roots = roots[np.lexsort((roots.imag, -np.abs(roots)))]
    return RootClassification(
        roots=roots,
        inside=int(inside.size),
        on=1,
        outside=int(np.count_nonzero(mod > 1.0)),
        nu1=float(lead.real),
    )


@dataclass(frozen=True)
class CoefficientSequence:
    """Weights ``b_0 .. b_H`` of the diagonal-square measure.

    Attributes
    ----------
    regime : {"finite", "sigma_finite"}
        ``finite`` sequences sum to 1 including the geometric tail beyond
        ``H``; ``sigma_finite`` ones are normalized by ``b_0 = 1``.
    ratio : float
        Tail closure: ``b_{H+i} = b_H * ratio**i`` (``nu1`` or 1).
    """

    b: np.ndarray = field(repr=False)
    regime: str
    H: int
    p0: float
    k: int
    l: int
    ratio: float

    @property
    def kappa_free(self):
        return self.k, self.l

    @property
    def tail_mass(self) -> float:
        if self.regime != "finite":
            return math.inf
        return float(self.b[-1] * self.ratio / (1.0 - self.ratio))

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.b)

    def extended(self, h_max: int) -> np.ndarray:
        """``b_0 .. b_{h_max}`` with the tail closure applied past ``H``."""
        if h_max <= self.H:
            return self.b[: h_max + 1].copy()
        tail = self.b[-1] * self.ratio ** np.arange(1, h_max - self.H + 1)
        return np.concatenate((self.b, tail))


def default_H(p0: float, k: int, l: int) -> int:
    return max(100, math.ceil(60.0 / -math.log(nu1(p0, k, l))))


def solve_b(p0: float, k: int, l: int, H: Optional[int] = None) -> CoefficientSequence:
    """Stationary weights of the reflected level walk, from its balance equations.

    For ``j >= 1`` the balance equation is
    ``b_j = p0 b_{j+k} + (1 - p0) b_{j-l}`` (last term absent for ``j < l``);
    the equation at ``j = 0`` is implied by the others together with the
    normalization and is only checked, not imposed.  Equations ``1..H`` are
    closed by a tail ``b_{H+i} = b_H rho**i`` where ``rho = nu1`` if the walk
    is positive recurrent and ``rho = 1`` in the null-recurrent case.

    Raises
    ------
    PreconditionError
        If the walk drifts upward (``(k + l) p0 < l``).
    """
    _check_kl(k, l)
    if not (0.0 < p0 < 1.0):
        raise DomainError("p0 must lie in (0, 1)")
    sign = drift_sign(p0, k, l)
    if sign < 0:
        raise PreconditionError(
            f"p0={p0} < l/(k+l): the level walk is transient and only the diagonal measure is stationary"
        )
    finite = sign > 0
    rho = nu1(p0, k, l) if finite else 1.0
    if H is None:
        H = default_H(p0, k, l) if finite else 200
    if H < k + l:
        raise DomainError(f"H must be at least k + l = {k + l}")
    n = H + 1
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    for j in range(1, n):
        A[j, j] += 1.0
        if j >= l:
            A[j, j - l] -= 1.0 - p0
        t = j + k
        if t <= H:
            A[j, t] -= p0
        else:
            A[j, H] -= p0 * rho ** (t - H)
    if finite:
        A[0, :] = 1.0
        A[0, H] += rho / (1.0 - rho)
        rhs[0] = 1.0
    else:
        A[0, 0] = 1.0
        rhs[0] = 1.0
    b = np.linalg.solve(A, rhs)
    if np.any(b < -1e-12):
        raise NumericalError("balance solve produced negative weights")
    b = np.maximum(b, 0.0)
    return CoefficientSequence(b, "finite" if finite else "sigma_finite", H, p0, k, l, rho)


def recurrence_residual(cs: CoefficientSequence) -> float:
    """Max of ``|b_{j+k+l} - b_{j+l}/p0 + (1-p0)/p0 b_j|`` over ``j <= H-k-l``."""
    b, k, l, p0 = cs.b, cs.k, cs.l, cs.p0
    m = cs.H - k - l + 1
    if m <= 0:
        return 0.0
    j = np.arange(m)
    r = b[j + k + l] - b[j + l] / p0 + (1.0 - p0) / p0 * b[j]
    return float(np.max(np.abs(r)))


def boundary_residual(cs: CoefficientSequence) -> float:
    """Residual of ``b_k = (1-p0)/p0 b_0 - b_1 - ... - b_{k-1}``."""
    b, k, p0 = cs.b, cs.k, cs.p0
    return float(abs(b[k] - ((1.0 - p0) / p0 * b[0] - b[1:k].sum())))


def delta_eps_mass(cs: CoefficientSequence, kappa: int, eps: float) -> float:
    """Mass of the strip ``|x - y| < eps`` under the pair measure.

    A uniform point in a square of side ``s`` lies within ``eps`` of the
    diagonal with probability ``1 - (1 - eps/s)_+^2``; levels past ``H`` use
    the tail closure until ``eps kappa^h >= 1``, beyond which every term
    contributes its full weight.
    """
    if cs.regime != "finite":
        raise PreconditionError("delta_eps_mass needs a finite coefficient sequence")
    if not (0.0 < eps <= 1.0):
        raise DomainError("eps must lie in (0, 1]")
    h_full = max(cs.H, math.ceil(-math.log(eps) / math.log(kappa)) + 1)
    b = cs.extended(h_full)
    h = np.arange(b.size)
    frac = 1.0 - np.maximum(1.0 - eps * np.power(float(kappa), h), 0.0) ** 2
    tail = b[-1] * cs.ratio / (1.0 - cs.ratio)
    return float(np.dot(b, frac) + tail)


@dataclass(frozen=True)
class DensityVerdict:
    sup_estimate: float
    bounded: bool
    boundary: bool
    growth: float


def density_sup(cs: CoefficientSequence, kappa: int, d: int) -> DensityVerdict:
    """Supremum of the d-point density ``b_h kappa^(h(d-1))`` with the analytic verdict.

    The verdict uses ``growth = nu1 * kappa**(d-1)``: bounded below 1,
    unbounded above, and flagged as a boundary case within ``1e-9`` of 1.
    """
    if cs.regime != "finite":
        raise PreconditionError("density_sup needs a finite coefficient sequence")
    if d < 2:
        raise DomainError("d must be at least 2")
    h = np.arange(cs.b.size)
    with np.errstate(over="ignore"):
        logs = np.log(np.where(cs.b > 0, cs.b, np.nan)) + h * (d - 1) * math.log(kappa)
    sup = float(np.exp(np.nanmax(logs)))
    growth = nu1(cs.p0, cs.k, cs.l) * float(kappa) ** (d - 1)
    boundary = abs(growth - 1.0) <= BOUNDARY_TOL
    return DensityVerdict(sup, bool(growth < 1.0 and not boundary), bool(boundary), growth)


def boundedness_threshold(k: int, l: int, kappa: int, d: int = 2, tol: float = 1e-12) -> float:
    """``p0`` at which ``nu1(p0) kappa^(d-1) = 1``, by bisection.

    ``nu1`` decreases from 1 to 0 as ``p0`` runs over ``(l/(k+l), 1)``.
    """
    target = float(kappa) ** (1 - d)
    lo, hi = l / (k + l), 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if nu1(mid, k, l) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def _level_walk(key, p0, k, l, n, cap):
    occ = np.zeros(cap + 1, dtype=np.int64)
    state = key
    h = 0
    for _ in range(n):
        if h <= cap:
            occ[h] += 1
        else:
            occ[cap] += 1
        state, u = next_uniform(state)
        if u < p0:
            h = h - k if h >= k else 0
        else:
            h += l
    return occ


def level_walk_occupation(p0: float, k: int, l: int, n: int, seed: int, cap: int = 400) -> np.ndarray:
    """Occupation counts of the reflected level walk started at 0.

    Levels above ``cap`` are pooled into the last entry.
    """
    return _level_walk(np.uint64(derive_key(seed, 0)), p0, k, l, n, cap)


def total_variation(cs: CoefficientSequence, occupation: np.ndarray) -> float:
    """Total-variation distance between normalized occupation counts and ``b``."""
    cap = occupation.size - 1
    emp = occupation / occupation.sum()
    b = cs.extended(cap)
    model = b[: cap + 1].copy()
    model[cap] += max(0.0, 1.0 - model.sum())
    return float(0.5 * np.abs(emp - model).sum())


def cell_masses(cs: CoefficientSequence, kappa: int, G: int) -> np.ndarray:
    """Pair-measure mass of each cell of the ``G x G`` grid on the unit square.

    At level ``h`` the measure is uniform on the diagonal squares of side
    ``s = kappa**-h`` with total weight ``b_h``.  Its distribution function
    ``F_h(a, c)`` on ``[0, a) x [0, c)`` is ``j0 s + (a - j0 s)(c - j0 s)/s``
    with ``j0 = floor(min(a, c)/s)``, scaled by ``b_h``; cell masses follow
    by inclusion-exclusion.  Levels beyond ``H`` are summed with the limit
    ``F_inf(a, c) = min(a, c)``.
    """
    if cs.regime != "finite":
        raise PreconditionError("cell_masses needs a finite coefficient sequence")
    edges = np.arange(G + 1) / G
    a = edges[:, None]
    c = edges[None, :]
    t = np.minimum(a, c)
    F = np.zeros((G + 1, G + 1))
    h_stop = cs.H
    for h in range(h_stop + 1):
        s = float(kappa) ** (-h)
        j0 = np.floor(t / s + 1e-12)
        base = j0 * s
        part = np.clip(a - base, 0.0, s) * np.clip(c - base, 0.0, s) / s
        F += cs.b[h] * (base + part)
    F += cs.tail_mass * t
    return F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
