import numpy as np
import pytest

from blockfill import (
    ParameterError,
    SplitParams,
    build_matrix,
    even_split_outcome,
    intra_class_check,
    perron_margin,
    predicted_fullness,
    principal_eigenvector,
    restrict,
    spectral_projection,
    support_set,
)
from blockfill.bounds import harmonic
from blockfill.spectral import (
    dump_matrix_csv,
    is_strongly_connected,
    left_weight_residual,
)


def solve(B, r):
    return principal_eigenvector(restrict(build_matrix(SplitParams(B, r))))


class TestBuildMatrix:
    def test_hand_entries_15_4(self):
        tm = build_matrix(SplitParams(15, 4))
        row8 = {s: tm.entry(8, s) for s in range(8, 16)}
        assert row8 == {8: -8, 9: 0, 10: 0, 11: 0, 12: 24, 13: 13, 14: 14, 15: 15}
        assert tm.entry(9, 13) == 13
        assert tm.entry(12, 8) == 8

    def test_single_key_structure(self):
        # r=1: pure birth chain with a doubled top-size feedback entry
        B = 15
        tm = build_matrix(SplitParams(B, 1))
        d = 8
        expected = np.zeros((d, d), dtype=np.int64)
        for k in range(d, B + 1):
            expected[k - d, k - d] = -k
            if k < B:
                expected[k + 1 - d, k - d] = k
        expected[0, B - d] = 2 * B
        assert (tm.entries == expected).all()

    def test_column_weight_identity(self):
        for B in (5, 15, 63, 127):
            for r in range(1, (B - 1) // 2 + 1):
                tm = build_matrix(SplitParams(B, r))
                w = tm.sizes
                for k in tm.sizes:
                    assert int(w @ tm.column(int(k))) == r * int(k)

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            build_matrix(SplitParams(240, 4))
        with pytest.raises(ParameterError):
            build_matrix(SplitParams(15, 8))  # r >= B/2

    def test_csv_dump_roundtrip(self, tmp_path):
        tm = build_matrix(SplitParams(15, 4))
        path = tmp_path / "matrix.csv"
        dump_matrix_csv(tm, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "size," + ",".join(str(s) for s in range(8, 16))
        first = lines[1].split(",")
        assert first[0] == "8" and first[1] == "-8"


class TestSupportSet:
    def test_two_element_orbit(self):
        assert support_set(SplitParams(15, 4)) == [8, 12]

    def test_four_element_orbit(self):
        assert support_set(SplitParams(15, 2)) == [8, 10, 12, 14]

    def test_full_orbit_when_coprime(self):
        assert support_set(SplitParams(15, 3)) == list(range(8, 16))

    def test_orbit_size_formula(self):
        from math import gcd
        for B in (15, 63, 255):
            d = (B + 1) // 2
            for r in range(1, (B - 1) // 2 + 1):
                S = support_set(SplitParams(B, r))
                assert len(S) == d // gcd(d, r)
                assert S[0] == d
                assert all(d + (s - d + r) % d in S for s in S)  # closed under the shift


class TestRestrict:
    def test_hand_case(self):
        tm_s = restrict(build_matrix(SplitParams(15, 4)))
        assert tm_s.sizes.tolist() == [8, 12]
        assert tm_s.entries.tolist() == [[-8, 24], [8, -12]]

    def test_strongly_connected(self):
        for B, r in ((15, 4), (63, 10), (239, 34)):
            tm_s = restrict(build_matrix(SplitParams(B, r)))
            assert is_strongly_connected(tm_s.entries)

    def test_left_identity_survives_restriction(self):
        for B, r in ((15, 4), (63, 6), (127, 12)):
            tm_s = restrict(build_matrix(SplitParams(B, r)))
            assert not left_weight_residual(tm_s).any()


class TestPrincipalEigenvector:
    def test_hand_case_15_4(self):
        sol = solve(15, 4)
        assert np.allclose(sol.u, [2 / 3, 1 / 3], rtol=0, atol=1e-15)
        assert sol.predicted_fullness == pytest.approx(28 / 45, abs=1e-15)

    def test_single_key_closed_form(self):
        # u_k proportional to 1/(k(k+1))
        B = 63
        sol = solve(B, 1)
        expected = np.array([1 / (k * (k + 1)) for k in range(32, 64)])
        expected /= expected.sum()
        assert np.allclose(sol.u, expected, rtol=1e-13)
        want = (harmonic(B + 1) - harmonic((B + 1) // 2)) * (B + 1) / B
        assert sol.predicted_fullness == pytest.approx(want, abs=1e-13)

    def test_solver_contract_full_grid(self):
        # positivity and residual for every odd capacity up to 255, every batch size
        for B in range(5, 256, 2):
            for r in range(1, (B - 1) // 2 + 1):
                sol = solve(B, r)
                assert (sol.u > 0).all()
                assert sol.residual <= 1e-10 * sol.u.max()

    def test_prediction_range(self):
        for B, r in ((63, 10), (127, 40), (239, 92), (255, 127)):
            p = solve(B, r).predicted_fullness
            assert 0.5 < p <= 1.0


class TestIntraClass:
    def test_hand_ratio(self):
        sol = solve(15, 4)
        # u_12 * 16 == u_8 * 8 given u proportional to (2, 1)
        assert sol.u[1] * 16 == pytest.approx(sol.u[0] * 8, rel=1e-14)
        assert intra_class_check(sol).ok

    def test_chains_across_grid(self):
        for B, r in ((63, 2), (63, 10), (127, 3), (239, 17)):
            report = intra_class_check(solve(B, r))
            assert report.ok, (B, r, report.max_rel_error)
            assert report.n_classes >= 1

    def test_single_link_classes_trivially_pass(self):
        report = intra_class_check(solve(15, 7))
        assert report.ok


class TestSpectralProjection:
    def test_hand_projection(self):
        sol = solve(15, 4)
        P = spectral_projection(sol)
        assert np.allclose(P, np.array([[16, 24], [8, 12]]) / 28, atol=1e-14)

    def test_idempotent_and_commuting(self):
        for B, r in ((15, 4), (63, 1), (63, 10), (127, 4)):
            tm_s = restrict(build_matrix(SplitParams(B, r)))
            sol = principal_eigenvector(tm_s)
            P = spectral_projection(sol)
            A = tm_s.entries.astype(float)
            assert np.abs(P @ P - P).max() < 1e-12
            scale = np.abs(A).max()
            assert np.abs(P @ A - r * P).max() < 1e-9 * scale
            assert np.abs(A @ P - r * P).max() < 1e-9 * scale

    def test_projection_is_recurrence_limit(self):
        from blockfill.simulate import run_expected_recurrence
        params = SplitParams(15, 4)
        tm_s = restrict(build_matrix(params))
        sol = principal_eigenvector(tm_s)
        P = spectral_projection(sol)
        v0 = np.zeros(len(tm_s.sizes))
        v0[0] = 1.0
        target = P @ (v0 / params.d)
        res = run_expected_recurrence(params, 3000)
        assert np.abs(res.ratio - target).max() < 1e-9


class TestPerronMargin:
    def test_hand_eigenvalues_15_4(self):
        tm_s = restrict(build_matrix(SplitParams(15, 4)))
        tr = int(np.trace(tm_s.entries))
        det = int(round(np.linalg.det(tm_s.entries.astype(float))))
        assert (tr, det) == (-20, -96)  # characteristic roots 4 and -24
        disc = tr * tr - 4 * det
        roots = sorted(((tr + disc**0.5) / 2, (tr - disc**0.5) / 2))
        assert roots == [-24.0, 4.0]

    def test_hand_margin_15_4(self):
        rep = perron_margin(restrict(build_matrix(SplitParams(15, 4))))
        assert rep.converged
        assert rep.expected_dominant == 19
        assert abs(rep.dominant_high - 19) < 1e-7 and abs(rep.dominant_low - 19) < 1e-7
        assert rep.rho2_upper == pytest.approx(9.0, abs=1e-6)
        assert rep.gap == pytest.approx(10.0, abs=1e-6)

    def test_dominant_matches_shifted_eigenvalue(self):
        for r in (1, 2, 4):
            rep = perron_margin(restrict(build_matrix(SplitParams(63, r))))
            assert rep.converged
            assert abs(rep.dominant_high - (63 + r)) < 1e-7

    def test_gap_positive_across_grid(self):
        for B in (15, 63):
            for r in (1, 2, (B - 1) // 2):
                rep = perron_margin(restrict(build_matrix(SplitParams(B, r))))
                assert rep.ok and rep.gap > 0


class TestExactIdentityGrid:
    def test_left_identity_small_grid(self):
        for B in range(5, 64, 2):
            for r in range(1, (B - 1) // 2 + 1):
                assert not left_weight_residual(build_matrix(SplitParams(B, r))).any()

    def test_column_outcome_coherence_small_grid(self):
        for B in range(5, 64, 2):
            d = (B + 1) // 2
            for r in range(1, (B - 1) // 2 + 1):
                params = SplitParams(B, r)
                tm = build_matrix(params)
                for k in range(d, B + 1):
                    delta = np.zeros(d, dtype=np.int64)
                    delta[k - d] -= 1
                    for s in even_split_outcome(k, params):
                        delta[s - d] += 1
                    assert (tm.column(k) == k * delta).all()


def test_predicted_fullness_convenience():
    assert predicted_fullness(SplitParams(15, 4)) == pytest.approx(28 / 45, abs=1e-15)
