"""The interval map L, the planar map G, the invertible extension Gamma
and the coding map h.

All maps accept scalars or numpy arrays; array inputs are processed
elementwise so that round-trip checks over many points stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .ifs_core import ONE_MINUS, SystemParams


@dataclass(frozen=True)
class Point3:
    w: float
    x: float
    y: float

    def __post_init__(self):
        for name in ("w", "x", "y"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise DomainError(f"{name} must lie in [0, 1), got {v!r}")


def _arr(v, name):
    a = np.asarray(v, dtype=np.float64)
    if a.size and (np.any(a < 0.0) or np.any(a >= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1)")
    return a


def _out(a, scalar):
    a = np.where(a >= 1.0, ONE_MINUS, a)
    return float(a) if scalar else a


def _branch(sys: SystemParams, w):
    """Index ``i`` with ``r_i <= w < r_{i+1}`` (half-open, as printed)."""
    r = sys.breakpoint_array
    return np.searchsorted(r[1:-1], w, side="right")


def L_map(sys: SystemParams, w):
    """Piecewise linear expanding map conjugate to the shift.

    ``w / p0`` on ``[0, p0)`` and ``M (w - r_i) / (1 - p0)`` on
    ``[r_i, r_{i+1})``.
    """
    scalar = np.ndim(w) == 0
    w = _arr(w, "w")
    r = sys.breakpoint_array
    i = _branch(sys, w)
    out = np.where(i == 0, w / sys.p0, sys.M * (w - r[i]) / (1.0 - sys.p0))
    return _out(np.maximum(out, 0.0), scalar)


def G_map(sys: SystemParams, w, x):
    """Skew product ``(w, x) -> (L(w), f_{i(w)}(x))``."""
    scalar = np.ndim(w) == 0 and np.ndim(x) == 0
    w = _arr(w, "w")
    x = _arr(x, "x")
    i = _branch(sys, w)
    xe = x * sys.N
    xe = xe - np.floor(xe)
    xe = np.where(xe >= 1.0, 0.0, xe)
    xn = np.where(i == 0, xe, (x + i - 1) / sys.M)
    return L_map(sys, w), _out(xn, scalar)


def _cut_index(cuts, v):
    # cuts are computed with the forward map's own float operations; rounding is
    # monotone, so the branch is recovered exactly instead of via a rounded floor
    return np.searchsorted(cuts, v, side="right") - 1


def _gamma_forward(sys, w, x, y):
    p0, N, M = sys.p0, sys.N, sys.M
    r = sys.breakpoint_array
    i = _branch(sys, w)
    first = i == 0
    j = np.minimum(np.floor(N * x), N - 1)
    w1 = np.where(first, w / p0, M * (w - r[i]) / (1.0 - p0))
    x1 = np.where(first, N * x - j, (x + i - 1) / M)
    y1 = np.where(first, np.minimum(p0 * (y + j) / N, np.nextafter(p0, 0.0)), (1.0 - p0) * y + p0)
    return np.maximum(w1, 0.0), np.maximum(x1, 0.0), y1


def _gamma_inverse(sys, w, x, y):
    p0, N, M = sys.p0, sys.N, sys.M
    first = y < p0
    j = _cut_index(p0 * np.arange(N, dtype=np.float64) / N, y)
    i = _cut_index(np.arange(M, dtype=np.float64) / M, x)
    w1 = np.where(first, p0 * w, (1.0 - p0) * (w + i) / M + p0)
    x1 = np.where(first, (x + j) / N, M * x - i)
    y1 = np.where(first, N * y / p0 - j, (y - p0) / (1.0 - p0))
    return w1, np.maximum(x1, 0.0), np.maximum(y1, 0.0)


def gamma(sys: SystemParams, p, direction: str = "forward"):
    """Invertible extension of ``G`` on the unit cube.

    Parameters
    ----------
    p : Point3 or array_like of shape (..., 3)
    direction : {"forward", "inverse"}

    Returns
    -------
    Point3 or ndarray
        Same kind as ``p``.

    Examples
    --------
    >>> from affine_ifs.ifs_core import make_system
    >>> gamma(make_system(2, 2, 0.5), Point3(0.25, 0.6, 0.2))
    Point3(w=0.5, x=0.19999999999999996, y=0.3)
    """
    if direction not in ("forward", "inverse"):
        raise DomainError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    is_point = isinstance(p, Point3)
    if is_point:
        w, x, y = (np.asarray(v, dtype=np.float64) for v in (p.w, p.x, p.y))
    else:
        a = np.asarray(p, dtype=np.float64)
        if a.shape[-1:] != (3,):
            raise DomainError("array input must have a trailing axis of length 3")
        w, x, y = (_arr(a[..., k], "coordinate") for k in range(3))
    f = _gamma_forward if direction == "forward" else _gamma_inverse
    w1, x1, y1 = (np.where(c >= 1.0, ONE_MINUS, c) for c in f(sys, w, x, y))
    if is_point:
        return Point3(float(w1), float(x1), float(y1))
    return np.stack([w1, x1, y1], axis=-1)


def gamma_jacobians(sys: SystemParams) -> tuple[float, float]:
    """Jacobian determinants of the two kinds of Gamma branches."""
    p0, N, M = sys.p0, sys.N, sys.M
    return (1.0 / p0) * N * (p0 / N), (M / (1.0 - p0)) * (1.0 / M) * (1.0 - p0)


def encode_h(sys: SystemParams, word: Sequence[int], tailSymbol: int) -> float:
    """Coding map ``h(omega) = sum_i (prod_{j<i} p_{omega_j}) r_{omega_i}``.

    ``omega`` is ``word`` followed by ``tailSymbol`` repeated forever.  The
    tail contributes ``P r_t / (1 - p_t)``, where ``P`` is the weight of the
    finite prefix; summing it in closed form is exact and terminates once
    the running weight underflows below ``1e-17``.
    """
    if not (0 <= tailSymbol <= sys.M):
        raise DomainError(f"tail symbol must be in 0..{sys.M}")
    p = sys.probs
    r = sys.breakpoints
    total = 0.0
    weight = 1.0
    for s in word:
        if not (0 <= s <= sys.M):
            raise DomainError(f"symbols must be in 0..{sys.M}")
        total += weight * r[s]
        weight *= p[s]
        if weight < 1e-17:
            return min(total, 1.0)
    total += weight * r[tailSymbol] / (1.0 - p[tailSymbol])
    return min(total, 1.0)
