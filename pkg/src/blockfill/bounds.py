"""Closed-form fills and proven lower bounds for every batch-size regime.

All regime dispatch happens on the exact rational r/B; only the returned fill
values are floating point.  Harmonic numbers use compensated summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import OutOfRangeError, ParameterError

SEVEN_TWELFTHS = 7.0 / 12.0

# dispatch thresholds on r/B, taken as exact
_T_TINY = Fraction(58, 10000)
_T_MODERATE = Fraction(21, 100)
_T_EVEN_MAX = Fraction(7, 18)
_T_HALF = Fraction(1, 2)
_T_TWO_THIRDS = Fraction(2, 3)


def harmonic(k: int) -> float:
    """k-th harmonic number 1 + 1/2 + ... + 1/k by compensated summation."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ParameterError(f"harmonic number needs an integer k >= 1, got {k!r}")
    return math.fsum(1.0 / i for i in range(1, k + 1))


@dataclass(frozen=True)
class BoundResult:
    regime: str        # human-readable regime label
    fill: float        # proven fill, as a fraction of B
    formula: str       # identifier of the closed form used
    strategy: str      # splitting strategy the guarantee is for


def guaranteed_fill(B: int, r: int) -> BoundResult:
    """Best proven fill for batch size r, dispatched on the ratio r/B.

    Covers the whole range r >= 1; the harmonic closed form for deferred even
    splitting (see :func:`deferred_even_fill`) is exposed separately because it
    only exists on part of the range.
    """
    if B < 3 or r < 1:
        raise ParameterError(f"need B >= 3 and r >= 1, got B={B}, r={r}")
    alpha = Fraction(r, B)
    a = float(alpha)
    if alpha <= _T_TINY:
        return BoundResult("even split, tiny batches", math.log(2) - 5 * a,
                           "ln2 - 5r/B", "even")
    if alpha <= _T_MODERATE:
        return BoundResult("even split, moderate batches", 2 * (B + 1) / (3 * B + 1 + 2 * r),
                           "2(B+1)/(3B+1+2r)", "even")
    if alpha <= _T_EVEN_MAX:
        return BoundResult("even split, large batches", SEVEN_TWELFTHS,
                           "7/12", "even")
    if alpha <= _T_HALF:
        return BoundResult("two-size uneven split", 1.5 * a,
                           "3r/2B", "uneven_regime1")
    if alpha <= _T_TWO_THIRDS:
        return BoundResult("three-size uneven split", 10 * a / 9,
                           "10r/9B", "uneven_regime2")
    if alpha <= 1:
        return BoundResult("deferred even split, r <= B", a,
                           "r/B", "deferred_even")
    fill = max(float((Fraction(1, 2) + alpha) / math.ceil(1 + alpha)), 2 / 3)
    return BoundResult("deferred even split, r > B", fill,
                       "max{(1/2+r/B)/ceil(1+r/B), 2/3}", "deferred_even")


@dataclass(frozen=True)
class DeferredFill:
    """Exact stationary fill of deferred even splitting on a batch-multiple lattice."""

    i: int                 # every block holds between i and 2i-1 full batches
    fill: float            # (2 i r / B) (H_{2i} - H_i)
    unit_sizes: tuple      # j = i .. 2i-1, block size in batches
    fractions: tuple       # stationary fraction of blocks at each unit size


def deferred_index(B: int, r: int) -> int | None:
    """The i with B/(2i) < r <= B/(2i-1), or None when r falls in a gap."""
    if r > B:
        return None
    i = B // (2 * r) + 1
    return i if (2 * i - 1) * r <= B else None


def deferred_even_fill(B: int, r: int) -> DeferredFill:
    """Stationary fill and block-size distribution of deferred even splitting.

    Requires an integer i with B/(2i) < r <= B/(2i-1): block sizes then stay
    multiples of r forever, at j batches per block for j in [i, 2i-1], with
    stationary fractions u_j = 2i / (j (j+1)).
    """
    if B < 3 or r < 1:
        raise ParameterError(f"need B >= 3 and r >= 1, got B={B}, r={r}")
    i = deferred_index(B, r)
    if i is None:
        raise OutOfRangeError(
            f"no integer i satisfies B/(2i) < r <= B/(2i-1) for B={B}, r={r}; "
            "use guaranteed_fill for the general bound"
        )
    js = tuple(range(i, 2 * i))
    exact = [Fraction(2 * i, j * (j + 1)) for j in js]
    assert sum(exact) == 1  # telescoping: 2i (1/i - 1/2i)
    fill = (2 * i * r / B) * (harmonic(2 * i) - harmonic(i))
    return DeferredFill(i=i, fill=fill, unit_sizes=js,
                        fractions=tuple(float(f) for f in exact))


def even_split_lower_bound(B: int, r: int) -> float:
    """Best of the three proven even-splitting fills that apply to this (B, r).

    The three candidates hold for r/B up to 0.0058, 0.21, and 5/12
    respectively; past 5/12 none applies.
    """
    if B < 3 or r < 1:
        raise ParameterError(f"need B >= 3 and r >= 1, got B={B}, r={r}")
    alpha = Fraction(r, B)
    candidates = []
    if alpha <= _T_TINY:
        candidates.append(math.log(2) - 5 * float(alpha))
    if alpha <= _T_MODERATE:
        candidates.append(2 * (B + 1) / (3 * B + 1 + 2 * r))
    if alpha <= Fraction(5, 12):
        candidates.append(SEVEN_TWELFTHS)
    if not candidates:
        raise OutOfRangeError(
            f"even-splitting bounds cover r <= 5B/12 only, got r={r}, B={B}"
        )
    return max(candidates)


def pair_class_fill(x, y, alpha):
    """Normalized average size of a two-block class at relative sizes x and y.

    f(x, y, a) = x y (x + y + 2a) / (x^2 + y^2 + a (x + y)); at least 7/12 over
    the feasible region, with equality at (1/2, 3/4, 1/4).
    """
    return x * y * (x + y + 2 * alpha) / (x * x + y * y + alpha * (x + y))


@dataclass(frozen=True)
class PairClassScan:
    min_value: float
    argmin: tuple          # (x, y, alpha)
    resolution: int
    value_at_known_min: float  # f(1/2, 3/4, 1/4)

    @property
    def ok(self) -> bool:
        return self.min_value >= SEVEN_TWELFTHS - 1e-9


def pair_class_fill_scan(resolution: int = 200) -> PairClassScan:
    """Grid-scan f over {1/2 <= x <= 1, 0 < a < 1/2, max(1-a, x+a) <= y <= 1}.

    The coarse grid is refined locally around the analytic minimizer
    (1/2, 3/4, 1/4), which the refined grid contains exactly.
    """
    if resolution < 100:
        raise ParameterError(f"need at least 100 points per axis, got {resolution}")
    best = np.inf
    arg = (np.nan, np.nan, np.nan)

    def scan(xs, ys, alphas):
        nonlocal best, arg
        X = xs[:, None]
        Y = ys[None, :]
        for a in alphas:
            feas = (Y >= 1 - a) & (Y - X >= a) & (Y <= 1) & (X >= 0.5) & (X <= 1)
            if not feas.any():
                continue
            vals = np.where(feas, pair_class_fill(X, Y, a), np.inf)
            i, j = np.unravel_index(np.argmin(vals), vals.shape)
            if vals[i, j] < best:
                best = float(vals[i, j])
                arg = (float(xs[i]), float(ys[j]), float(a))

    interior = np.linspace(0.0, 0.5, resolution + 2)[1:-1]
    scan(np.linspace(0.5, 1.0, resolution), np.linspace(0.5, 1.0, resolution), interior)
    # refinement box around (1/2, 3/4, 1/4); linspace endpoints hit it exactly
    scan(np.linspace(0.5, 0.52, 41), np.linspace(0.73, 0.77, 81), np.linspace(0.24, 0.26, 41))
    return PairClassScan(
        min_value=best,
        argmin=arg,
        resolution=resolution,
        value_at_known_min=float(pair_class_fill(0.5, 0.75, 0.25)),
    )
