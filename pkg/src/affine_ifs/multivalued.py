"""Exact grid arithmetic for the multivalued maps F0 and F1.

Grid points are ``a / M**j`` with integer ``a``; the expanding map acts on
numerators as ``a -> N a mod M**j`` and the union of the contractions sends
level ``j`` onto the full grid of level ``j + 1``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError, ResourceError
from .ifs_core import SystemParams
from .stationary_measures import mult_dependence

ENUMERATION_CAP = 2 ** 24
MAX_WORD_LENGTH = 12


@dataclass(frozen=True, order=True)
class GridPoint:
    """The grid point ``numerator / M**level`` in ``S_level``."""

    level: int
    numerator: int
    M: int

    def __post_init__(self):
        if self.level < 0 or not (0 <= self.numerator < self.M ** self.level):
            raise DomainError(f"invalid grid point {self.numerator}/{self.M}^{self.level}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.M ** self.level)


def project_word(word: Sequence[int]) -> tuple[int, ...]:
    """Image under the projection collapsing symbols ``1..M`` to 1."""
    return tuple(0 if s == 0 else 1 for s in word)


def grid_image(sys: SystemParams, level: int, symbolClass: int) -> Counter:
    """Multiset image of the grid ``S_level`` under ``F0`` or ``F1``.

    Returns
    -------
    collections.Counter
        Maps each :class:`GridPoint` to its multiplicity.
    """
    if level < 0:
        raise DomainError("level must be non-negative")
    M, N = sys.M, sys.N
    size = M ** level
    if symbolClass == 1:
        return Counter(GridPoint(level + 1, a, M) for a in range(M * size))
    if symbolClass == 0:
        return Counter(GridPoint(level, (N * a) % size, M) for a in range(size))
    raise DomainError("symbolClass must be 0 or 1")


def fiber_distribution(
    sys: SystemParams,
    eta: Sequence[int],
    cap: int = ENUMERATION_CAP,
    max_length: int = MAX_WORD_LENGTH,
) -> Counter:
    """Endpoints ``f^n_omega(0)`` over every word ``omega`` projecting to ``eta``.

    The ``M**gamma`` words (``gamma`` = number of ones in ``eta``) are
    enumerated exhaustively.  Numerators are tracked at the level reached so
    far; a contraction ``i`` maps ``a / M**j`` to ``(a + (i-1) M**j) / M**(j+1)``
    and ``f0`` maps it to ``(N a mod M**j) / M**j``.

    Returns
    -------
    collections.Counter
        Multiplicity of each :class:`GridPoint` at level ``gamma``.
    """
    eta = [int(s) for s in eta]
    if any(s not in (0, 1) for s in eta):
        raise DomainError("eta must be a word over {0, 1}")
    if len(eta) > max_length:
        raise ResourceError(f"|eta| = {len(eta)} exceeds the brute-force bound {max_length}")
    M, N = sys.M, sys.N
    gamma_ = sum(eta)
    if M ** gamma_ > cap:
        raise ResourceError(f"{M}^{gamma_} words exceed the enumeration cap {cap}")
    if M ** gamma_ >= 2 ** 62:
        raise ResourceError("numerators would overflow int64")
    a = np.zeros(1, dtype=np.int64)
    j = 0
    for s in eta:
        size = M ** j
        if s == 1:
            a = (a[:, None] + np.arange(M, dtype=np.int64)[None, :] * size).reshape(-1)
            j += 1
        else:
            a = (a % size) * (N % size) % size if size > 1 else np.zeros_like(a)
    counts = np.bincount(a, minlength=M ** j)
    return Counter({GridPoint(j, int(v), M): int(c) for v, c in enumerate(counts) if c})


def fiber_is_uniform(dist: Counter) -> bool:
    """True when all counts agree and the support is an arithmetic grid ``{i/D}``."""
    if not dist:
        return False
    counts = set(dist.values())
    if len(counts) != 1:
        return False
    values = sorted(p.value for p in dist)
    D = len(values)
    return all(v == Fraction(i, D) for i, v in enumerate(values))


@dataclass(frozen=True)
class KAdicInterval:
    """The interval ``[index / kappa**level, (index + 1) / kappa**level)``."""

    kappa: int
    index: int
    level: int

    @property
    def bounds(self) -> tuple[Fraction, Fraction]:
        s = self.kappa ** self.level
        return Fraction(self.index, s), Fraction(self.index + 1, s)

    def contains(self, x: float) -> bool:
        lo, hi = self.bounds
        return lo <= Fraction(x) < hi


def strip_interval(sys: SystemParams, word: Sequence[int]) -> KAdicInterval:
    """κ-adic interval containing ``f^n_omega([0, 1))``.

    A contraction ``s`` refines by ``l`` levels; ``f0`` coarsens by ``k``
    levels, or resets to ``[0, 1)`` when the current strip is wider than
    one branch of ``f0``.
    """
    md = mult_dependence(sys.M, sys.N)
    if md is None:
        raise PreconditionError(f"(M, N) = ({sys.M}, {sys.N}) is not multiplicatively dependent")
    kappa, k, l = md.kappa, md.k, md.l
    i, j = 0, 0
    for s in word:
        s = int(s)
        if not (0 <= s <= sys.M):
            raise DomainError(f"symbols must be in 0..{sys.M}")
        if s == 0:
            if j >= k:
                i, j = i % kappa ** (j - k), j - k
            else:
                i, j = 0, 0
        else:
            i, j = i + (s - 1) * kappa ** j, j + l
    return KAdicInterval(kappa, i, j)
