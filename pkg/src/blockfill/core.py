"""Block-population state and size-weighted sampling shared by all splitting strategies.

The simulator state is a histogram: how many blocks currently hold each
number of keys, plus the total key count.  Every strategy in this package
maps (hit block size, batch size) to a multiset of replacement sizes, so a
histogram is all the state a run needs; no keys are ever stored.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Arguments outside the admissible range for the requested operation."""


class OutOfRangeError(ParameterError):
    """A formula was requested outside the regime where it is defined."""


class StateError(RuntimeError):
    """Operation applied to a histogram state that cannot support it."""


class ContractViolationError(RuntimeError):
    """A strategy outcome failed key conservation."""


class InvariantViolationError(RuntimeError):
    """A block size escaped the set the active strategy guarantees."""


class SpectralAssumptionError(RuntimeError):
    """The transition matrix violated a structural property the solver relies on."""


#: Multiset of block sizes replacing the hit block after one batch.
Outcome = tuple


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic PCG64 stream; run k of a multi-run config uses seed base_seed + k."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SplitParams:
    """Block capacity B and batch length r."""

    B: int
    r: int

    def __post_init__(self):
        if self.B < 3:
            raise ParameterError(f"block capacity must be >= 3, got {self.B}")
        if self.r < 1:
            raise ParameterError(f"batch size must be >= 1, got {self.r}")

    @property
    def d(self) -> int:
        """Half capacity (B+1)/2, the smallest size a split can produce. Odd B only."""
        if self.B % 2 == 0:
            raise ParameterError(f"half capacity requires odd block capacity, got B={self.B}")
        return (self.B + 1) // 2

    @property
    def alpha(self) -> float:
        return self.r / self.B


SEEDING_MODES = ("empty", "dummy", "paper")


class BlockHistogram:
    """Counts of blocks per size, the total key count, and the block count.

    ``total_keys`` includes the sentinel key when the "dummy" seeding is used.
    Sizes are bounded by the capacity given at construction; a size-0 entry is
    allowed only for the single starting block of an "empty"-seeded run.
    """

    __slots__ = ("capacity", "_counts", "_mass", "total_keys", "num_blocks")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._counts = np.zeros(capacity + 1, dtype=np.int64)
        self._mass = np.zeros(capacity + 1, dtype=np.int64)  # size * count per size
        self.total_keys = 0
        self.num_blocks = 0

    @property
    def counts(self) -> dict:
        """Sparse view {size: count} of the nonzero entries."""
        idx = np.flatnonzero(self._counts)
        return {int(s): int(self._counts[s]) for s in idx}

    def sizes_present(self) -> list:
        return [int(s) for s in np.flatnonzero(self._counts)]

    def count(self, size: int) -> int:
        return int(self._counts[size])

    def add_block(self, size: int):
        if not 0 <= size <= self.capacity:
            raise StateError(f"block size {size} outside [0, {self.capacity}]")
        self._counts[size] += 1
        self._mass[size] += size
        self.total_keys += size
        self.num_blocks += 1

    def copy(self) -> "BlockHistogram":
        other = BlockHistogram(self.capacity)
        other._counts[:] = self._counts
        other._mass[:] = self._mass
        other.total_keys = self.total_keys
        other.num_blocks = self.num_blocks
        return other


def new_histogram(mode: str, params: SplitParams) -> BlockHistogram:
    """Seed a run.

    "dummy": one size-1 block holding only the sentinel key, so that a block
    with i keys is hit with probability exactly i/n.
    "paper": one half-full block of size d (sentinel plus (B-1)/2 keys), the
    starting state of the expected-value recurrence; odd B, r <= (B-1)/2 only.
    "empty": one key-less block; the first batch lands in it unconditionally.
    Splitting strategies whose block sizes stay in an exact lattice need this
    start, since a sentinel key would shift every size by one.
    """
    hist = BlockHistogram(params.B)
    if mode == "dummy":
        hist.add_block(1)
    elif mode == "paper":
        if params.B % 2 == 0:
            raise ParameterError("the half-full seeding requires odd B")
        if params.r > (params.B - 1) // 2:
            raise ParameterError(
                f"the half-full seeding requires r <= (B-1)/2, got r={params.r}, B={params.B}"
            )
        hist.add_block(params.d)
    elif mode == "empty":
        hist.add_block(0)
    else:
        raise ParameterError(f"unknown seeding mode {mode!r}, expected one of {SEEDING_MODES}")
    return hist


def sample_hit(hist: BlockHistogram, rng: np.random.Generator) -> int:
    """Size of the block receiving the next batch, drawn with probability size*count/n.

    Draws one uniform integer u in [1, n] and walks the cumulative size mass
    in ascending size order, so the result is a deterministic function of the
    stream state.
    """
    n = hist.total_keys
    if n < 1 or hist.num_blocks < 1:
        raise StateError("cannot sample from a histogram with no key mass")
    u = int(rng.integers(1, n + 1))
    cum = np.cumsum(hist._mass)
    return int(np.searchsorted(cum, u, side="left"))


def apply_outcome(hist: BlockHistogram, hit: int, out: Outcome, expected_gain: int | None = None):
    """Replace one block of size ``hit`` by the blocks in ``out``, in place.

    ``expected_gain`` (the batch size, when known) turns key conservation into
    a hard per-batch check: sum(out) - hit must equal it exactly.
    """
    if hist.count(hit) < 1:
        raise StateError(f"no block of size {hit} present")
    if not out:
        raise ContractViolationError("outcome must contain at least one block")
    total = 0
    for s in out:
        if not 1 <= s <= hist.capacity:
            raise ContractViolationError(f"outcome size {s} outside [1, {hist.capacity}]")
        total += s
    if expected_gain is not None and total - hit != expected_gain:
        raise ContractViolationError(
            f"outcome mass {total} != hit {hit} + batch {expected_gain}"
        )
    counts, mass = hist._counts, hist._mass
    counts[hit] -= 1
    mass[hit] -= hit
    for s in out:
        counts[s] += 1
        mass[s] += s
    hist.total_keys += total - hit
    hist.num_blocks += len(out) - 1


def fullness(hist: BlockHistogram, B: int) -> float:
    """Average over blocks of (keys in block)/B, i.e. n / (B * number of blocks)."""
    if hist.num_blocks < 1:
        raise StateError("fullness undefined without blocks")
    return hist.total_keys / (B * hist.num_blocks)


@dataclass
class FullnessSummary:
    """Cross-run fullness statistics for one (strategy, B, r) configuration."""

    batch_size: int
    per_run_final_fullness: list
    mean_fullness: float
    min_fullness: float
    max_fullness: float
    series: list | None = None  # per run: (n array, fullness array), when recorded

    @classmethod
    def from_runs(cls, r: int, finals: list, series=None) -> "FullnessSummary":
        return cls(
            batch_size=r,
            per_run_final_fullness=list(finals),
            mean_fullness=float(np.mean(finals)),
            min_fullness=float(np.min(finals)),
            max_fullness=float(np.max(finals)),
            series=series,
        )
