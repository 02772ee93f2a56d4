"""Workload drivers: Monte Carlo on the histogram, the deterministic expected-value
recurrence, and a key-level simulator used to cross-validate the histogram path.

All three run the same workload: batches of r consecutive keys landing at a
uniformly random rank.  The histogram simulator is the production path (O(B)
state, O(B) per batch).  The key-level simulator keeps the actual block list
with insertion positions and is deliberately independent code, kept for
oracle-style comparisons at moderate scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FullnessSummary,
    InvariantViolationError,
    ParameterError,
    SplitParams,
    apply_outcome,
    fullness,
    make_rng,
    new_histogram,
    sample_hit,
)
from .spectral import build_matrix, restrict
from .strategies import (
    StrategyKind,
    default_seeding,
    deferred_even_outcome,
    invariant_sizes,
    outcome_fn,
    resolve_strategy,
    uneven1_outcome,
    uneven2_outcome,
    warmup_outcome,
)

KEY_LEVEL_MAX_INSERTIONS = 1_000_000


@dataclass
class RunConfig:
    strategy: StrategyKind | str
    params: SplitParams
    total_insertions: int
    runs: int = 10
    base_seed: int = 0
    seeding: str | None = None   # None: per-strategy default
    record_series: bool = False
    series_stride: int = 1

    def validate(self):
        if self.total_insertions < self.params.r:
            raise ParameterError(
                f"need at least one batch: total_insertions={self.total_insertions} < r={self.params.r}"
            )
        if self.runs < 1:
            raise ParameterError(f"need runs >= 1, got {self.runs}")


def run_single(strategy, params: SplitParams, total_insertions: int, seed: int,
               seeding: str | None = None, record_series: bool = False,
               series_stride: int = 1, check_sizes: bool = False):
    """One seeded run to the first batch boundary at or past ``total_insertions``.

    Returns (final histogram, series) where series is (n array, fullness array)
    or None.  With ``check_sizes`` every batch boundary is checked against the
    strategy's exact block-size set (uneven regimes only).
    """
    kind = resolve_strategy(strategy, params)
    outcome = outcome_fn(kind, params)
    hist = new_histogram(seeding or default_seeding(kind, params), params)
    rng = make_rng(seed)
    allowed = invariant_sizes(kind, params) if check_sizes else None
    r = params.r
    B = params.B
    ns, fs = [], []
    batches = 0
    while hist.total_keys < total_insertions:
        if hist.total_keys == 0:
            k, out = 0, warmup_outcome(kind, params)
        else:
            k = sample_hit(hist, rng)
            out = outcome(k)
        apply_outcome(hist, k, out, expected_gain=r)
        batches += 1
        if allowed is not None:
            stray = set(hist.sizes_present()) - allowed
            if stray:
                raise InvariantViolationError(
                    f"sizes {sorted(stray)} outside {sorted(allowed)} after batch {batches}"
                )
        if record_series and batches % series_stride == 0:
            ns.append(hist.total_keys)
            fs.append(fullness(hist, B))
    series = (np.asarray(ns), np.asarray(fs)) if record_series else None
    return hist, series


def run_monte_carlo(cfg: RunConfig) -> FullnessSummary:
    """Independent runs with seeds base_seed + k; final-snapshot fullness per run."""
    cfg.validate()
    kind = resolve_strategy(cfg.strategy, cfg.params)
    outcome_fn(kind, cfg.params)  # strategy/parameter mismatch fails before any work
    finals = []
    series = [] if cfg.record_series else None
    for k in range(cfg.runs):
        hist, ser = run_single(
            kind, cfg.params, cfg.total_insertions, cfg.base_seed + k,
            seeding=cfg.seeding, record_series=cfg.record_series,
            series_stride=cfg.series_stride,
        )
        finals.append(fullness(hist, cfg.params.B))
        if series is not None:
            series.append(ser)
    return FullnessSummary.from_runs(cfg.params.r, finals, series)


@dataclass
class RecurrenceResult:
    """Trajectory of the normalized expected block counts v_n / n."""

    params: SplitParams
    sizes: np.ndarray          # index set of v (support sizes, or all of d..B)
    n0: int
    n: int
    v: np.ndarray              # final expected counts
    ratio: np.ndarray          # v / n
    fullness: float            # n / (B * sum(v))
    ns: np.ndarray             # n after every step
    fullness_series: np.ndarray
    ratios: list | None        # per-step v/n when requested


def run_expected_recurrence(params: SplitParams, steps: int,
                            full_space: bool = False,
                            keep_ratios: bool = False) -> RecurrenceResult:
    """Iterate v_{n+r} = (I + A/n) v_n from a single half-full block, m steps.

    Runs on the support restriction by default (dimension d / gcd(d, r));
    ``full_space`` iterates all of d..B instead, which is useful for checking
    that the support never grows.
    """
    if params.B % 2 == 0:
        raise ParameterError("the expected-value recurrence is defined for odd B only")
    if 2 * params.r >= params.B:
        raise ParameterError(f"recurrence requires r <= (B-1)/2, got r={params.r}, B={params.B}")
    if steps < 1:
        raise ParameterError(f"need steps >= 1, got {steps}")
    tm = build_matrix(params)
    if not full_space:
        tm = restrict(tm)
    A = tm.entries.astype(float)
    sizes = tm.sizes
    d, r, B = params.d, params.r, params.B
    v = np.zeros(len(sizes))
    v[int(np.searchsorted(sizes, d))] = 1.0
    n = d
    ns = np.empty(steps + 1, dtype=np.int64)
    fs = np.empty(steps + 1)
    ns[0] = n
    fs[0] = n / (B * v.sum())
    ratios = [v / n] if keep_ratios else None
    for m in range(1, steps + 1):
        v = v + (A @ v) / n
        n += r
        ns[m] = n
        fs[m] = n / (B * v.sum())
        if keep_ratios:
            ratios.append(v / n)
    return RecurrenceResult(
        params=params, sizes=sizes, n0=d, n=n, v=v, ratio=v / n,
        fullness=float(fs[-1]), ns=ns, fullness_series=fs, ratios=ratios,
    )


class _Fenwick:
    """Prefix sums over block weights with O(log n) update and weighted search.

    Capacity doubles (with an O(n) rebuild) when blocks are appended past it.
    """

    def __init__(self, weights=()):
        self._cap = 1
        self._tree = [0, 0]
        self._weights = []
        for w in weights:
            self.append(w)

    def _rebuild(self):
        self._cap *= 2
        tree = [0] * (self._cap + 1)
        for i, w in enumerate(self._weights, start=1):
            tree[i] += w
        for i in range(1, self._cap + 1):  # propagate through the zero tail too
            j = i + (i & -i)
            if j <= self._cap:
                tree[j] += tree[i]
        self._tree = tree

    def append(self, w: int):
        self._weights.append(w)
        if len(self._weights) > self._cap:
            self._rebuild()
        else:
            i = len(self._weights)
            while i <= self._cap:
                self._tree[i] += w
                i += i & -i

    def add(self, i: int, delta: int):
        self._weights[i] += delta
        i += 1
        while i <= self._cap:
            self._tree[i] += delta
            i += i & -i

    @property
    def mass(self) -> int:
        return sum(self._weights)  # O(n); assertions only

    def find(self, u: int):
        """Smallest block index whose cumulative weight reaches u, and the offset
        of u inside that block (1-based).  Requires 1 <= u <= total weight."""
        pos = 0
        rest = u
        step = self._cap  # capacity is always a power of two
        while step:
            nxt = pos + step
            if nxt <= self._cap and self._tree[nxt] < rest:
                rest -= self._tree[nxt]
                pos = nxt
            step >>= 1
        return pos, rest  # pos is a 0-based block index


class KeyLevelSim:
    """Explicit block list driven key by key; the oracle for the histogram path.

    Keys are never materialized: under the uniform-rank model only each
    block's size and the insertion rank inside the hit block matter.  A batch
    lands at a uniform key gap (the sentinel semantics of the histogram path),
    then inserts its r keys consecutively.

    ``continuation`` applies to even splitting only: "paper-rule" always keeps
    inserting into the upper half after a split; "gap-following" continues in
    whichever half physically contains the insertion gap.
    """

    def __init__(self, params: SplitParams, strategy, continuation: str = "paper-rule",
                 seeding: str | None = None, seed: int = 0, initial_blocks=None):
        if continuation not in ("paper-rule", "gap-following"):
            raise ParameterError(f"unknown continuation rule {continuation!r}")
        self.params = params
        self.kind = resolve_strategy(strategy, params)
        outcome_fn(self.kind, params)  # validate (B, r) up front
        self.continuation = continuation
        self.rng = make_rng(seed)
        if initial_blocks is not None:
            self.blocks = list(initial_blocks)
        else:
            mode = seeding or default_seeding(self.kind, params)
            seeds = {"dummy": 1, "paper": None, "empty": 0}
            if mode not in seeds:
                raise ParameterError(f"unknown seeding mode {mode!r}")
            self.blocks = [params.d if mode == "paper" else seeds[mode]]
        self.fen = _Fenwick(self.blocks)
        self.n = sum(self.blocks)

    # -- helpers ----------------------------------------------------------
    def _set_size(self, b: int, size: int):
        self.fen.add(b, size - self.blocks[b])
        self.blocks[b] = size

    def _append_block(self, size: int):
        self.blocks.append(size)
        self.fen.append(size)
        return len(self.blocks) - 1

    def _replace_with(self, b: int, parts):
        self._set_size(b, parts[0])
        for s in parts[1:]:
            self._append_block(s)

    # -- batch execution ---------------------------------------------------
    def run_batch(self, u: int | None = None):
        """Insert one batch of r keys; u forces the global gap draw (tests)."""
        params = self.params
        r = params.r
        if self.n == 0:
            b, p = 0, 0
        else:
            if u is None:
                u = int(self.rng.integers(1, self.n + 1))
            b, p = self.fen.find(u)
        if self.kind is StrategyKind.EVEN:
            self._even_batch(b, p)
        elif self.kind is StrategyKind.DEFERRED_EVEN:
            ell = self.blocks[b]
            self._replace_with(b, deferred_even_outcome(ell, params))
        else:
            ell = self.blocks[b]
            if ell == 0:
                parts = (r,)
            elif self.kind is StrategyKind.UNEVEN_REGIME1:
                parts = uneven1_outcome(ell, params)
            else:
                parts = uneven2_outcome(ell, params)
            self._replace_with(b, parts)
        self.n += r

    def _even_batch(self, b: int, p: int):
        B, r = self.params.B, self.params.r
        lower = (B + 1) // 2
        upper = (B + 2) // 2
        size = self.blocks[b]
        for _ in range(r):
            size += 1
            p += 1
            if size == B + 1:
                self._set_size(b, lower)
                nb = self._append_block(upper)
                if self.continuation == "gap-following" and p <= lower:
                    size = lower  # keep filling the lower half, p already valid
                else:
                    b, size = nb, upper
                    p = p - lower if p > lower else p
        self._set_size(b, size)

    # -- run loop ----------------------------------------------------------
    def fullness(self) -> float:
        return self.n / (self.params.B * len(self.blocks))

    def run_until(self, total_insertions: int, record_series: bool = False):
        ns, fs = [], []
        while self.n < total_insertions:
            self.run_batch()
            if record_series:
                ns.append(self.n)
                fs.append(self.fullness())
        return (np.asarray(ns), np.asarray(fs)) if record_series else None


def run_key_level(cfg: RunConfig, continuation: str = "paper-rule") -> FullnessSummary:
    """Key-level oracle runs, aggregated exactly like :func:`run_monte_carlo`."""
    cfg.validate()
    if cfg.total_insertions > KEY_LEVEL_MAX_INSERTIONS:
        raise ParameterError(
            f"key-level oracle is capped at {KEY_LEVEL_MAX_INSERTIONS} insertions, "
            f"got {cfg.total_insertions}"
        )
    finals = []
    series = [] if cfg.record_series else None
    for k in range(cfg.runs):
        sim = KeyLevelSim(cfg.params, cfg.strategy, continuation=continuation,
                          seeding=cfg.seeding, seed=cfg.base_seed + k)
        ser = sim.run_until(cfg.total_insertions, record_series=cfg.record_series)
        finals.append(sim.fullness())
        if series is not None:
            series.append(ser)
    return FullnessSummary.from_runs(cfg.params.r, finals, series)
