"""Named self-checks behind the ``verify`` CLI command.

Each check re-derives a property from scratch (exact integer identities,
independent closed forms, cross-simulator comparisons) and reports one
pass/fail line.  "quick" runs everything that finishes in seconds; "full" adds
the 200k-insertion Monte Carlo comparisons.
"""
from __future__ import annotations

import numpy as np

from . import bounds, simulate, spectral, strategies
from .core import SplitParams, fullness


def _fill_formula_r1(B: int) -> float:
    # single-key insertions: u_k proportional to 1/(k(k+1)) gives this fill
    d = (B + 1) // 2
    return (bounds.harmonic(B + 1) - bounds.harmonic(d)) * (B + 1) / B


def check_left_identity(full: bool):
    """w^T A = r w^T exactly, w = (d..B), over every odd B in [5, 255], every r."""
    pairs = 0
    for B in range(5, 256, 2):
        for r in range(1, (B - 1) // 2 + 1):
            tm = spectral.build_matrix(SplitParams(B, r))
            res = spectral.left_weight_residual(tm)
            if res.any():
                return False, f"nonzero residual at B={B}, r={r}"
            pairs += 1
    return True, f"{pairs} (B, r) pairs, exact integer arithmetic"


def check_column_coherence(full: bool):
    """Column k of A equals k * (block-count change of one batch into a size-k block)."""
    b_max = 255 if full else 127
    pairs = 0
    for B in range(5, b_max + 1, 2):
        d = (B + 1) // 2
        for r in range(1, (B - 1) // 2 + 1):
            params = SplitParams(B, r)
            tm = spectral.build_matrix(params)
            A = tm.entries
            for k in range(d, B + 1):
                expected = {k: -k}
                for s in strategies.even_split_outcome(k, params):
                    expected[s] = expected.get(s, 0) + k
                col = A[:, k - d]
                actual = {int(i) + d: int(col[i]) for i in np.flatnonzero(col)}
                if actual != {s: v for s, v in expected.items() if v}:
                    return False, f"column mismatch at B={B}, r={r}, k={k}"
            pairs += 1
    return True, f"{pairs} (B, r) pairs against the key-by-key outcome rule"


def check_eigen_contract(full: bool):
    """Positivity, residual, and closed-form cross-checks of the eigen solve."""
    sol = spectral.principal_eigenvector(
        spectral.restrict(spectral.build_matrix(SplitParams(15, 4))))
    if abs(sol.predicted_fullness - 28 / 45) > 1e-12:
        return False, f"(B=15, r=4) fullness {sol.predicted_fullness} != 28/45"
    if not np.allclose(sol.u, [2 / 3, 1 / 3], rtol=1e-12):
        return False, "(B=15, r=4) eigenvector is not proportional to (2, 1)"
    for B in (63, 127, 239):
        got = spectral.predicted_fullness(SplitParams(B, 1))
        want = _fill_formula_r1(B)
        if abs(got - want) > 1e-12:
            return False, f"r=1 closed form off by {abs(got - want):.2e} at B={B}"
    grid = [(B, r) for B in (63, 127, 181, 239) for r in range(1, (B - 1) // 2 + 1)]
    for B, r in grid:
        spectral.principal_eigenvector(
            spectral.restrict(spectral.build_matrix(SplitParams(B, r))))
    return True, f"closed forms exact; positivity+residual on {len(grid) + 1} restrictions"


def check_intra_class(full: bool):
    for B, r in ((15, 4), (63, 2), (63, 10), (239, 17)):
        sol = spectral.principal_eigenvector(
            spectral.restrict(spectral.build_matrix(SplitParams(B, r))))
        report = spectral.intra_class_check(sol)
        if not report.ok:
            return False, f"chain ratio off by {report.max_rel_error:.2e} at B={B}, r={r}"
    return True, "u_k (k+r) = u_(k-r) (k-r) along every chain, rel 1e-9"


def check_projection(full: bool):
    for B, r in ((15, 4), (63, 1), (63, 10), (127, 4)):
        tm = spectral.restrict(spectral.build_matrix(SplitParams(B, r)))
        sol = spectral.principal_eigenvector(tm)
        P = spectral.spectral_projection(sol)
        A = tm.entries.astype(float)
        scale = np.abs(A).max()
        if np.abs(P @ P - P).max() > 1e-9:
            return False, f"P^2 != P at B={B}, r={r}"
        if np.abs(P @ A - r * P).max() > 1e-9 * scale or np.abs(A @ P - r * P).max() > 1e-9 * scale:
            return False, f"P does not commute with A at B={B}, r={r}"
    return True, "idempotent and commuting with A_S at 1e-9"


def check_perron_margins(full: bool):
    for B in (15, 63, 127):
        for r in (1, 2, 4, (B - 1) // 2):
            tm = spectral.restrict(spectral.build_matrix(SplitParams(B, r)))
            rep = spectral.perron_margin(tm)
            if not rep.ok:
                return False, f"no certified margin at B={B}, r={r} (gap={rep.gap:.3e})"
    rep = spectral.perron_margin(spectral.restrict(spectral.build_matrix(SplitParams(15, 4))))
    if abs(rep.rho2_upper - 9.0) > 1e-6:
        return False, f"(15, 4) deflated radius {rep.rho2_upper} != 9"
    return True, "positive gap on the whole margin grid; (15,4) radius 9 recovered"


def check_bound_dominance(full: bool):
    pairs = 0
    for B in (63, 127, 239):
        for r in range(1, 7 * B // 18 + 1):
            p = spectral.predicted_fullness(SplitParams(B, r))
            tb = bounds.guaranteed_fill(B, r).fill
            lb = bounds.even_split_lower_bound(B, r)
            if not (p >= tb and p >= lb - 1e-9 and 0.5 < p <= 1.0):
                return False, f"prediction {p:.4f} below bound at B={B}, r={r}"
            pairs += 1
    return True, f"prediction dominates both bounds at {pairs} (B, r) points"


def check_deferred_closed_form(full: bool):
    df = bounds.deferred_even_fill(240, 80)
    if df.i != 2 or abs(df.fill - 7 / 9) > 1e-12:
        return False, f"(240, 80) gave i={df.i}, fill={df.fill}"
    for i in range(1, 65):
        B, r = (3, 2) if i == 1 else (2 * i - 1, 1)
        fr = bounds.deferred_even_fill(B, r)
        if fr.i != i or abs(sum(fr.fractions) - 1.0) > 1e-12:
            return False, f"stationary fractions inconsistent at i={i}"
    return True, "harmonic fills and stationary distributions consistent for i <= 64"


def check_pair_class_minimum(full: bool):
    scan = bounds.pair_class_fill_scan(200 if full else 120)
    if abs(scan.value_at_known_min - 7 / 12) > 1e-9:
        return False, f"f(1/2, 3/4, 1/4) = {scan.value_at_known_min}, expected 7/12"
    if not scan.ok:
        return False, f"grid minimum {scan.min_value} below 7/12 at {scan.argmin}"
    return True, f"grid minimum {scan.min_value:.8f} >= 7/12 - 1e-9"


def check_recurrence_identities(full: bool):
    params = SplitParams(15, 4)
    res = simulate.run_expected_recurrence(params, 2000, full_space=True, keep_ratios=True)
    S = set(spectral.support_set(params))
    off = [i for i, s in enumerate(res.sizes) if int(s) not in S]
    if any(res.v[off] != 0.0):
        return False, "mass leaked outside the support set"
    w = res.sizes.astype(float)
    for m, ratio in enumerate(res.ratios[:: len(res.ratios) // 20 + 1]):
        if abs(ratio @ w - 1.0) > 1e-12:
            return False, "size-weighted mass identity <v, w> = n violated"
    if abs(res.fullness - 28 / 45) > 1e-9:
        return False, f"recurrence limit {res.fullness} != 28/45"
    return True, "support containment, mass identity, and the (15,4) limit"


def check_recurrence_convergence(full: bool):
    # distance of v_n/n from its projection limit after 1e5 steps
    for r, tol in ((1, 1e-5), (2, 1e-6), (4, 1e-6), (10, 1e-6)):
        params = SplitParams(63, r)
        tm = spectral.restrict(spectral.build_matrix(params))
        sol = spectral.principal_eigenvector(tm)
        P = spectral.spectral_projection(sol)
        target = P @ (np.eye(len(tm.sizes))[0] / params.d)
        res = simulate.run_expected_recurrence(params, 100_000)
        err = float(np.abs(res.ratio - target).max())
        if err > tol:
            return False, f"norm {err:.2e} > {tol:.0e} at r={r} after 1e5 steps"
        if r == 1:  # slowest case: verify the norm is still shrinking
            err_early = float(np.abs(
                simulate.run_expected_recurrence(params, 10_000).ratio - target).max())
            if not err < err_early:
                return False, f"norm not decreasing at r=1 ({err_early:.2e} -> {err:.2e})"
    return True, "projection distance below tolerance and decreasing at m=1e5"


def check_monte_carlo_smoke(full: bool):
    cfg = simulate.RunConfig(strategies.StrategyKind.EVEN, SplitParams(15, 4),
                             total_insertions=30_000, runs=3, base_seed=11)
    s = simulate.run_monte_carlo(cfg)
    if abs(s.mean_fullness - 28 / 45) > 0.03:
        return False, f"(15,4) Monte Carlo mean {s.mean_fullness:.4f} far from 28/45"
    for strat, r in (("uneven_regime1", 100), ("uneven_regime2", 120)):
        hist, _ = simulate.run_single(strat, SplitParams(240, r), 30_000, seed=3,
                                      check_sizes=True)
        if fullness(hist, 240) <= 0.5:
            return False, f"{strat} fill not above 1/2"
    return True, "histogram sampler tracks the spectral prediction; uneven size sets exact"


def check_monte_carlo_closed_forms(full: bool):
    for r in (80, 121, 180, 240):
        cfg = simulate.RunConfig("deferred_even", SplitParams(240, r), 200_000,
                                 runs=10, base_seed=0)
        s = simulate.run_monte_carlo(cfg)
        want = bounds.deferred_even_fill(240, r).fill
        if abs(s.mean_fullness - want) > 0.01:
            return False, f"deferred r={r}: {s.mean_fullness:.4f} vs closed form {want:.4f}"
    for strat, r, target in (("uneven_regime1", 100, 150.0), ("uneven_regime2", 120, 400 / 3)):
        cfg = simulate.RunConfig(strat, SplitParams(240, r), 200_000, runs=10, base_seed=1)
        s = simulate.run_monte_carlo(cfg)
        got = s.mean_fullness * 240
        if abs(got - target) > 0.01 * target:
            return False, f"{strat} mean block size {got:.2f} vs {target:.2f}"
    # the half-full dip of both base strategies sits at r = ceil((B+1)/2)
    for strat in ("even", "deferred_even"):
        cfg = simulate.RunConfig(strat, SplitParams(240, 121), 200_000, runs=10, base_seed=2)
        s = simulate.run_monte_carlo(cfg)
        if abs(s.mean_fullness - 121 / 240) > 0.01:
            return False, f"{strat} at the dip: {s.mean_fullness:.4f} vs {121 / 240:.4f}"
    return True, ("deferred harmonic fills, uneven mean sizes, and the half-full dip "
                  "reproduced at 200k insertions")


def check_key_level_agreement(full: bool):
    params = SplitParams(15, 4)
    mc = simulate.run_monte_carlo(simulate.RunConfig("even", params, 100_000, runs=3, base_seed=5))
    kl = simulate.run_key_level(simulate.RunConfig("even", params, 100_000, runs=3, base_seed=105))
    if abs(mc.mean_fullness - kl.mean_fullness) > 0.01:
        return False, (f"histogram {mc.mean_fullness:.4f} vs key-level "
                       f"{kl.mean_fullness:.4f}")
    return True, "independent simulators agree within 0.01"


QUICK_CHECKS = [
    ("transition-matrix-left-identity", check_left_identity),
    ("column-outcome-coherence", check_column_coherence),
    ("principal-eigenvector-contract", check_eigen_contract),
    ("intra-class-ratios", check_intra_class),
    ("spectral-projection-identities", check_projection),
    ("perron-margins", check_perron_margins),
    ("bound-dominance", check_bound_dominance),
    ("deferred-closed-form", check_deferred_closed_form),
    ("pair-class-minimum", check_pair_class_minimum),
    ("recurrence-identities", check_recurrence_identities),
    ("monte-carlo-smoke", check_monte_carlo_smoke),
]

FULL_CHECKS = QUICK_CHECKS + [
    ("recurrence-convergence", check_recurrence_convergence),
    ("monte-carlo-closed-forms", check_monte_carlo_closed_forms),
    ("key-level-agreement", check_key_level_agreement),
]


def run_verification(level: str = "quick", out=print) -> bool:
    checks = FULL_CHECKS if level == "full" else QUICK_CHECKS
    all_ok = True
    is_full = level == "full"
    for name, fn in checks:
        try:
            ok, detail = fn(is_full)
        except Exception as exc:  # a crash is a failure with the check's name attached
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    out(f"verification {'passed' if all_ok else 'FAILED'} ({len(checks)} checks, level={level})")
    return all_ok
