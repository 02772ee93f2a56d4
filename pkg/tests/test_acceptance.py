"""Acceptance suite: one test per criterion, each printing its own PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` (or via ``blockfill verify``
for the subset that is expected to hold; see the project README for the three
criteria that measure known model-level gaps and fail by design).
"""
import math
import time

import numpy as np
import pytest

from blockfill import (
    KeyLevelSim,
    RunConfig,
    SplitParams,
    build_matrix,
    even_split_outcome,
    fullness,
    pair_class_fill,
    pair_class_fill_scan,
    perron_margin,
    predicted_fullness,
    principal_eigenvector,
    restrict,
    run_expected_recurrence,
    run_key_level,
    run_monte_carlo,
    run_single,
    spectral_projection,
)
from blockfill.bounds import (
    deferred_even_fill,
    deferred_index,
    even_split_lower_bound,
    guaranteed_fill,
    harmonic,
)
from blockfill.cli import main as cli_main
from blockfill.plotting import read_sweep_csv
from blockfill.spectral import left_weight_residual


def report(criterion, ok, detail):
    print(f"\nacceptance criterion {criterion:>2}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def r1_fill(B):
    return (harmonic(B + 1) - harmonic((B + 1) // 2)) * (B + 1) / B


def test_c01_left_eigenvector_identity_exact():
    t0 = time.monotonic()
    pairs = 0
    for B in range(5, 256, 2):
        for r in range(1, (B - 1) // 2 + 1):
            res = left_weight_residual(build_matrix(SplitParams(B, r)))
            assert not res.any(), f"identity violated at B={B}, r={r}"
            pairs += 1
    elapsed = time.monotonic() - t0
    ok = elapsed < 10
    assert report(1, ok, f"{pairs} pairs exact in {elapsed:.1f}s"), "runtime budget exceeded"


def test_c02_columns_equal_scaled_outcome_deltas():
    pairs = 0
    for B in range(5, 256, 2):
        d = (B + 1) // 2
        for r in range(1, (B - 1) // 2 + 1):
            params = SplitParams(B, r)
            A = build_matrix(params).entries
            for k in range(d, B + 1):
                expected = {k - d: -k}
                for s in even_split_outcome(k, params):
                    expected[s - d] = expected.get(s - d, 0) + k
                col = A[:, k - d]
                actual = {int(i): int(col[i]) for i in np.flatnonzero(col)}
                assert actual == {i: v for i, v in expected.items() if v}, (B, r, k)
            pairs += 1
    assert report(2, True, f"{pairs} pairs, zero tolerance")


def test_c03_spectral_matches_single_key_closed_form():
    worst = 0.0
    for B in (63, 127, 239):
        got = predicted_fullness(SplitParams(B, 1))
        worst = max(worst, abs(got - r1_fill(B)))
    near_ln2 = abs(predicted_fullness(SplitParams(239, 1)) - math.log(2))
    ok = worst <= 1e-12 and near_ln2 <= 0.01
    assert report(3, ok, f"max |closed-form gap| {worst:.2e}; |fill(239,1) - ln 2| = {near_ln2:.4f}")


def test_c04_single_key_simulation_reproduces_asymptotic_fill():
    t0 = time.monotonic()
    target = r1_fill(239)
    summary = run_monte_carlo(RunConfig("even", SplitParams(239, 1), 200_000,
                                        runs=10, base_seed=0))
    elapsed = time.monotonic() - t0
    diff = abs(summary.mean_fullness - target)
    ok = diff <= 0.01 and elapsed < 60
    report(4, ok, f"mean {summary.mean_fullness:.4f} vs limit {target:.4f} "
                  f"(|diff| = {diff:.4f}) in {elapsed:.0f}s")
    assert ok, (
        f"mean fullness {summary.mean_fullness:.4f} is {diff:.4f} from the asymptotic "
        f"{target:.4f}; the expected-count recurrence itself gives ~0.730 after 200k "
        "insertions at B=239 because the second-largest eigenvalue (re 0.752) makes the "
        "transient decay like m^-0.248 - roughly 2.8e7 insertions would be needed for "
        "0.01 accuracy. See the Known gaps section of the README."
    )


@pytest.mark.parametrize("strategy", ["even", "deferred_even"])
def test_c05_half_capacity_batches_give_half_fill(strategy):
    summary = run_monte_carlo(RunConfig(strategy, SplitParams(240, 120), 200_000,
                                        runs=10, base_seed=0))
    diff = abs(summary.mean_fullness - 0.50)
    ok = diff <= 0.01
    report(5, ok, f"{strategy}: mean {summary.mean_fullness:.4f} (|diff from 0.5| = {diff:.4f})")
    assert ok, (
        f"{strategy} at B=240, r=120 settles at {summary.mean_fullness:.4f}, not 0.50. "
        "With splitting triggered at B+1 keys (the definition used throughout), even "
        "splitting lets size-120 blocks refill to exactly 240 and stay, and deferred even "
        "splitting contracts toward size 120 only slowly; the 0.50 dip in fact sits at "
        "r=121, where both strategies measure 0.504. See the Known gaps section of the README."
    )


def test_c06_deferred_harmonic_fills_and_stationary_histogram():
    B = 240
    details = []
    ok = True
    for r in (65, 80, 121, 180, 240):
        info = deferred_even_fill(B, r)
        finals = []
        pooled = np.zeros(B + 1, dtype=np.int64)
        blocks = 0
        for k in range(10):
            hist, _ = run_single("deferred_even", SplitParams(B, r), 200_000, seed=k)
            finals.append(fullness(hist, B))
            if r == 80:
                for size, c in hist.counts.items():
                    pooled[size] += c
                blocks += hist.num_blocks
        diff = abs(float(np.mean(finals)) - info.fill)
        details.append(f"r={r}: {diff:.4f}")
        ok &= diff <= 0.01
        if r == 80:
            sizes = set(int(s) for s in np.flatnonzero(pooled))
            ok &= sizes <= {160, 240}
            for j, want in zip(info.unit_sizes, info.fractions):
                frac = pooled[j * r] / blocks
                ok &= abs(frac - want) <= 0.02
                details.append(f"frac[{j * r}] err {abs(frac - want):.4f}")
    assert report(6, ok, "; ".join(details))


def test_c07_uneven_regimes_hit_target_sizes_with_exact_size_sets():
    checks = []
    ok = True
    for strategy, r, target in (("uneven_regime1", 100, 150.0),
                                ("uneven_regime2", 120, 400 / 3)):
        finals = []
        for k in range(10):
            hist, _ = run_single(strategy, SplitParams(240, r), 200_000, seed=k,
                                 check_sizes=True)  # raises on any stray size
            finals.append(fullness(hist, 240) * 240)
        mean_size = float(np.mean(finals))
        rel = abs(mean_size - target) / target
        ok &= rel <= 0.01
        checks.append(f"{strategy}: mean size {mean_size:.2f} vs {target:.2f} ({rel:.2%})")
    assert report(7, ok, "; ".join(checks))


def test_c08_large_batch_deferred_fill_beats_bound():
    B = 240
    details = []
    ok = True
    for r in (300, 500, 1000):
        bound = max((0.5 + r / B) / math.ceil(1 + r / B), 2 / 3) - 1 / B
        s = run_monte_carlo(RunConfig("deferred_even", SplitParams(B, r), 200_000,
                                      runs=10, base_seed=0))
        ok &= s.mean_fullness >= bound
        details.append(f"r={r}: {s.mean_fullness:.4f} >= {bound:.4f}")
    assert report(8, ok, "; ".join(details))


def test_c09_prediction_dominates_proven_bounds():
    points = 0
    for B in (63, 127, 239):
        for r in range(1, 7 * B // 18 + 1):
            p = predicted_fullness(SplitParams(B, r))
            tb = guaranteed_fill(B, r).fill
            lb = even_split_lower_bound(B, r)
            assert p >= tb, f"prediction below dispatch bound at B={B}, r={r}"
            assert p >= lb - 1e-9, f"prediction below direct bound at B={B}, r={r}"
            points += 1
    assert report(9, True, f"{points} (B, r) points")


@pytest.mark.parametrize("r", [1, 2, 4, 10])
def test_c10_normalized_recurrence_converges_to_projection(r):
    t0 = time.monotonic()
    params = SplitParams(63, r)
    tm_s = restrict(build_matrix(params))
    sol = principal_eigenvector(tm_s)
    P = spectral_projection(sol)
    v0 = np.zeros(len(tm_s.sizes))
    v0[0] = 1.0
    target = P @ (v0 / params.d)
    res = run_expected_recurrence(params, 100_000)
    err = float(np.abs(res.ratio - target).max())
    elapsed = time.monotonic() - t0
    ok = err <= 1e-6 and elapsed < 30
    report(10, ok, f"r={r}: norm {err:.2e} at m=1e5 in {elapsed:.0f}s")
    assert ok, (
        f"projection distance {err:.2e} exceeds 1e-6 at m=1e5 for r={r}. The limit "
        "itself is correct (the norm keeps shrinking), but at r=1 the subdominant "
        "eigenvalue 0.067 yields decay ~ m^-0.93, which reaches 1e-6 only near "
        "m=5e5. See the Known gaps section of the README."
    )


def test_c11_deflated_spectrum_stays_strictly_below_dominant():
    details = []
    ok = True
    for B in (15, 63, 127):
        for r in (1, 2, 4, (B - 1) // 2):
            rep = perron_margin(restrict(build_matrix(SplitParams(B, r))))
            ok &= rep.ok and rep.rho2_upper < rep.expected_dominant
            ok &= abs(rep.dominant_high - (B + r)) <= 1e-7
    tm_s = restrict(build_matrix(SplitParams(15, 4)))
    tr = int(np.trace(tm_s.entries))
    det = int(round(np.linalg.det(tm_s.entries.astype(float))))
    ok &= (tr, det) == (-20, -96)  # roots 4 and -24
    rep = perron_margin(tm_s)
    ok &= abs(rep.rho2_upper - 9.0) <= 1e-6 and abs(rep.gap - 10.0) <= 1e-6
    details.append(f"(15,4): rho2 {rep.rho2_upper:.6f}, gap {rep.gap:.6f}")
    assert report(11, ok, "; ".join(details))


def test_c12_pair_class_fill_minimum():
    scan = pair_class_fill_scan(200)
    at_min = abs(pair_class_fill(0.5, 0.75, 0.25) - 7 / 12)
    ok = scan.min_value >= 7 / 12 - 1e-9 and at_min <= 1e-9
    assert report(12, ok, f"grid min {scan.min_value:.10f}, |f(1/2,3/4,1/4) - 7/12| = {at_min:.1e}")


def test_c13_key_level_oracle_equivalence():
    params = SplitParams(15, 4)
    mc = run_monte_carlo(RunConfig("even", params, 100_000, runs=5, base_seed=0))
    kl = run_key_level(RunConfig("even", params, 100_000, runs=5, base_seed=500))
    diff = abs(mc.mean_fullness - kl.mean_fullness)
    combos = 0
    for B in range(3, 32):
        for k in range(1, B + 1):
            for r in range(1, 3 * B + 1):
                want = tuple(sorted(even_split_outcome(k, SplitParams(B, r))))
                for u in {1, (k + 1) // 2, k}:
                    sim = KeyLevelSim(SplitParams(B, r), "even", initial_blocks=[k])
                    sim.run_batch(u=u)
                    assert tuple(sorted(sim.blocks)) == want, (B, k, r, u)
                combos += 1
    ok = diff < 0.01
    assert report(13, ok, f"mean gap {diff:.4f}; {combos} single-batch combos identical")


def test_c14_figure_sweeps_reproduce_reported_features(tmp_path):
    t0 = time.monotonic()
    B = 240
    csvs = {}
    for name, strategy, rng in (("fig1_even", "even", "1:240"),
                                ("fig1_deferred", "deferred", "1:240"),
                                ("fig2_even", "even", "240:1200"),
                                ("fig2_deferred", "deferred", "240:1200")):
        out = tmp_path / f"{name}.csv"
        assert cli_main(["simulate", "--strategy", strategy, "--block-size", str(B),
                         "--batch-range", rng, "--insertions", "200000", "--runs", "10",
                         "--seed", "0", "--jobs", "2", "--out", str(out)]) == 0
        csvs[name] = read_sweep_csv(out)
    for fig, panels, overlay in (("figure1.svg", ("fig1_even", "fig1_deferred"), "lemma61"),
                                 ("figure2.svg", ("fig2_even", "fig2_deferred"), "none")):
        assert cli_main(["plot", str(tmp_path / f"{panels[0]}.csv"),
                         str(tmp_path / f"{panels[1]}.csv"), "--block-size", str(B),
                         "--out", str(tmp_path / fig), "--overlay", overlay,
                         "--title", "even splitting", "--title", "deferred even splitting"]) == 0
        assert (tmp_path / fig).exists()
    elapsed = time.monotonic() - t0

    def mean_at(data, r):
        idx = int(np.searchsorted(data["hammer_h"], r))
        assert data["hammer_h"][idx] == r
        return data["mean_fullness"][idx]

    problems = []
    # even splitting dips to ~0.5 just past every multiple of B/2
    for data, dips in ((csvs["fig1_even"], (120,)),
                       (csvs["fig2_even"], (240, 360, 480, 600, 720, 840, 960, 1080))):
        for base in dips:
            window = [mean_at(data, base + off) for off in range(0, 4)]
            if min(window) > 0.52:
                problems.append(f"even: no dip near r={base} (min {min(window):.3f})")
    # deferred even splitting peaks at full blocks at every multiple of B
    if mean_at(csvs["fig1_deferred"], 240) < 0.99:
        problems.append("deferred: no full-fill peak at r=B")
    for r in (240, 480, 720, 960, 1200):
        if mean_at(csvs["fig2_deferred"], r) < 0.99:
            problems.append(f"deferred: no full-fill peak at r={r}")
    # deferred mean matches the harmonic closed form wherever it exists
    worst = 0.0
    checked = 0
    for r in range(1, 241):
        if deferred_index(B, r) is None:
            continue
        gap = abs(mean_at(csvs["fig1_deferred"], r) - deferred_even_fill(B, r).fill)
        worst = max(worst, gap)
        checked += 1
        if gap > 0.01:
            problems.append(f"deferred: r={r} off closed form by {gap:.4f}")
    ok = not problems and elapsed < 1800
    assert report(14, ok, f"sweeps in {elapsed:.0f}s; {checked} closed-form points, "
                          f"worst gap {worst:.4f}; {problems or 'all features present'}")
