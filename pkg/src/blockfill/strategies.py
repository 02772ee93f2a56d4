"""Pure transition rules: (hit block size, params) -> multiset of replacement sizes.

Four block-splitting strategies are implemented.  "even" processes the batch
key by key and halves any block that overflows to B+1, continuing insertion in
the upper half.  "deferred_even" replaces the overfull run of l+r keys by the
minimum number of near-equal blocks.  The two "uneven" strategies keep every
block size inside a small fixed set by splitting to prescribed target sizes
(realized key-level by :func:`target_split`).
"""
from __future__ import annotations

from enum import Enum
from fractions import Fraction

from .core import (
    InvariantViolationError,
    Outcome,
    ParameterError,
    SplitParams,
)


class StrategyKind(str, Enum):
    EVEN = "even"
    DEFERRED_EVEN = "deferred_even"
    UNEVEN_REGIME1 = "uneven_regime1"
    UNEVEN_REGIME2 = "uneven_regime2"
    RECOMMENDED = "recommended"


def _even_growth(k: int, r: int, B: int) -> Outcome:
    # Closed form of the key-by-key process: grow from k; at B+1 emit the
    # lower half floor((B+1)/2) and continue from ceil((B+1)/2).
    t = k + r
    if t <= B:
        return (t,)
    lower = (B + 1) // 2
    cont = (B + 2) // 2
    splits, rest = divmod(r - (B + 1 - k), B + 1 - cont)
    return (lower,) * (1 + splits) + (cont + rest,)


def even_split_outcome(k: int, params: SplitParams) -> Outcome:
    """Result of r key-by-key insertions into a size-k block under even splitting.

    Valid for every B (odd or even) and every r, including r > B.
    """
    if not 1 <= k <= params.B:
        raise ParameterError(f"hit size must be in [1, {params.B}], got {k}")
    return _even_growth(k, params.r, params.B)


def deferred_even_outcome(ell: int, params: SplitParams) -> Outcome:
    """Spread l + r keys over ceil((l+r)/B) blocks whose sizes differ by at most 1."""
    if not 0 <= ell <= params.B:
        raise ParameterError(f"hit size must be in [0, {params.B}], got {ell}")
    t = ell + params.r
    m = -(-t // params.B)
    lo, n_hi = divmod(t, m)
    return (lo + 1,) * n_hi + (lo,) * (m - n_hi)


def _require(cond: bool, msg: str):
    if not cond:
        raise ParameterError(msg)


def uneven1_outcome(k: int, params: SplitParams) -> Outcome:
    """Splitting rule keeping every block at size r or 2r; needs B/3 < r <= B/2."""
    B, r = params.B, params.r
    _require(3 * r > B and 2 * r <= B,
             f"size-doubling regime needs B/3 < r <= B/2, got B={B}, r={r}")
    if k == r:
        return (2 * r,)
    if k == 2 * r:
        return (r, 2 * r)
    raise InvariantViolationError(f"block of size {k} cannot occur; expected r={r} or 2r={2*r}")


def uneven2_outcome(k: int, params: SplitParams, exact: bool = True) -> Outcome:
    """Splitting rule keeping block sizes in {r/2, r, 3r/2}; needs 2B/5 < r <= 2B/3.

    Exact mode requires even r.  The relaxed mode rounds the half-size targets
    down and tolerates sizes within 1 of each target.
    """
    B, r = params.B, params.r
    _require(5 * r > 2 * B and 3 * r <= 2 * B,
             f"three-size regime needs 2B/5 < r <= 2B/3, got B={B}, r={r}")
    if exact:
        if r % 2:
            raise ParameterError(
                f"three-size regime with exact targets needs even r (got r={r}); "
                "pass exact=False to round targets down"
            )
        if k == r // 2:
            return (3 * r // 2,)
        if k == r:
            return (r // 2, 3 * r // 2)
        if k == 3 * r // 2:
            return (r, 3 * r // 2)
        raise InvariantViolationError(
            f"block of size {k} cannot occur; expected one of {{{r//2}, {r}, {3*r//2}}}"
        )
    half, sesqui = r // 2, 3 * r // 2
    if abs(k - half) <= 1 and k != r:
        return (k + r,)
    if k == r:
        return (half, r + k - half)
    if abs(k - sesqui) <= 1:
        return (r, k)
    raise InvariantViolationError(
        f"block of size {k} is more than 1 away from every target in "
        f"{{{half}, {r}, {sesqui}}}"
    )


def target_split(keys: list, new_key, f_l: int, f_r: int, remaining_batch: list):
    """Split a full block so the two children end with exactly f_l and f_r keys.

    ``keys`` is the block's sorted content (length B), ``new_key`` the key whose
    insertion overflows it, and ``remaining_batch`` the ascending keys still to
    be inserted right after ``new_key``.  Exactly f_l + f_r - B - 1 of them are
    consumed.  All batch keys must fall strictly between two adjacent existing
    keys (or beyond either end).
    """
    B = len(keys)
    if f_l + f_r <= B:
        raise ParameterError(f"targets must satisfy f_l + f_r > B, got {f_l}+{f_r} <= {B}")
    if f_l > B or f_r > B:
        raise ParameterError(f"targets must each be <= B={B}, got f_l={f_l}, f_r={f_r}")
    need = f_l + f_r - B - 1
    if len(remaining_batch) < need:
        raise ParameterError(
            f"batch exhausted: need {need} keys after the overflowing one, "
            f"have {len(remaining_batch)}"
        )
    batch = [new_key] + list(remaining_batch[:need])
    j = sum(1 for x in keys if x < new_key)
    if j >= f_l:
        # the whole insertion run lies inside the right child
        left = list(keys[:f_l])
        right = sorted(keys[f_l:] + batch)
    elif j <= B - f_r:
        left = sorted(keys[: B - f_r] + batch)
        right = list(keys[B - f_r:])
    else:
        take_l = f_l - j  # new_key plus f_l - j - 1 more go left
        left = list(keys[:j]) + batch[:take_l]
        right = batch[take_l:] + list(keys[j:])
    return left, right


# Table of proven regimes, dispatched on r/B.
_EVEN_MAX = Fraction(7, 18)
_U1_MAX = Fraction(1, 2)
_U2_MAX = Fraction(2, 3)


def recommended_strategy(params: SplitParams) -> StrategyKind:
    """Strategy achieving the best proven fill for this r/B ratio."""
    alpha = Fraction(params.r, params.B)
    if alpha <= _EVEN_MAX:
        return StrategyKind.EVEN
    if alpha <= _U1_MAX:
        return StrategyKind.UNEVEN_REGIME1
    if alpha <= _U2_MAX:
        return StrategyKind.UNEVEN_REGIME2
    return StrategyKind.DEFERRED_EVEN


def resolve_strategy(strategy, params: SplitParams) -> StrategyKind:
    try:
        kind = StrategyKind(strategy)
    except ValueError:
        raise ParameterError(f"unknown strategy {strategy!r}") from None
    if kind is StrategyKind.RECOMMENDED:
        kind = recommended_strategy(params)
    return kind


def outcome_fn(strategy, params: SplitParams, exact: bool = True):
    """Bind a strategy to params, validating the (B, r) combination up front."""
    kind = resolve_strategy(strategy, params)
    if kind is StrategyKind.EVEN:
        return lambda k: even_split_outcome(k, params)
    if kind is StrategyKind.DEFERRED_EVEN:
        return lambda k: deferred_even_outcome(k, params)
    if kind is StrategyKind.UNEVEN_REGIME1:
        uneven1_outcome(params.r, params)  # raises ParameterError on a bad (B, r)
        return lambda k: uneven1_outcome(k, params)
    uneven2_outcome(params.r, params, exact=exact)  # range / parity validation
    return lambda k: uneven2_outcome(k, params, exact=exact)


def invariant_sizes(strategy, params: SplitParams):
    """Exact set of block sizes an uneven strategy allows at batch boundaries, else None."""
    kind = resolve_strategy(strategy, params)
    r = params.r
    if kind is StrategyKind.UNEVEN_REGIME1:
        return {r, 2 * r}
    if kind is StrategyKind.UNEVEN_REGIME2 and r % 2 == 0:
        return {r // 2, r, 3 * r // 2}
    return None


def default_seeding(strategy, params: SplitParams) -> str:
    """Sentinel-key seeding for even splitting; key-less start for lattice strategies.

    Deferred and uneven splitting keep all block sizes on an exact lattice only
    when the structure starts with no keys at all; a sentinel key would offset
    every size by one for the rest of the run.
    """
    kind = resolve_strategy(strategy, params)
    return "dummy" if kind is StrategyKind.EVEN else "empty"


def warmup_outcome(strategy, params: SplitParams) -> Outcome:
    """First batch of an "empty"-seeded run: it lands in the lone key-less block."""
    kind = resolve_strategy(strategy, params)
    if kind is StrategyKind.EVEN:
        return _even_growth(0, params.r, params.B)
    if kind is StrategyKind.DEFERRED_EVEN:
        return deferred_even_outcome(0, params)
    return (params.r,)  # both uneven regimes have r <= 2B/3 < B
