import numpy as np
import pytest

from spbandit import (
    ExtractOrderFailed,
    NotPSP,
    asp_delta,
    extract_order,
    peaks_of,
    project_to_sp,
)

from conftest import DEMO_ORDER, DEMO_THETA, asp_delta_bruteforce, random_unimodal_row


def random_sp_matrix(rng, users, arms):
    """(theta, hidden SP order): unimodal rows, columns shuffled."""
    base = np.stack([random_unimodal_row(rng, arms, 0.05, 0.95)[0] for _ in range(users)])
    perm = rng.permutation(arms)
    return base[:, perm], np.argsort(perm)


class TestPeaks:
    def test_demo_under_its_order(self):
        peaks = peaks_of(DEMO_THETA, DEMO_ORDER)
        # users peak at arms 0, 1, 4 = positions 0, 1, 2 of the order
        assert peaks.tolist() == [0, 1, 2]

    def test_demo_identity_not_unimodal(self):
        with pytest.raises(NotPSP) as exc:
            peaks_of(DEMO_THETA)
        user, (i, j, l) = exc.value.user, exc.value.triple
        row = DEMO_THETA[user]
        assert i < j < l and min(row[i], row[l]) > row[j]

    def test_constant_matrix_peaks_leftmost(self):
        assert peaks_of(np.full((3, 4), 0.6)).tolist() == [0, 0, 0]

    def test_monotone_rows(self):
        theta = np.array([[0.1, 0.2, 0.9], [0.9, 0.5, 0.1]])
        assert peaks_of(theta).tolist() == [2, 0]


class TestAspDelta:
    def test_bounded_matrices_are_one_asp(self):
        rng = np.random.default_rng(0)
        theta = rng.random((4, 6))
        assert asp_delta(theta).delta <= 1.0

    def test_single_valley_row(self):
        report = asp_delta(np.array([[0.5, 0.4, 0.6]]))
        assert report.delta == pytest.approx(0.1, abs=1e-12)
        assert report.delta == pytest.approx(
            asp_delta_bruteforce([[0.5, 0.4, 0.6]], [0, 1, 2]), abs=1e-15)

    def test_psp_matrix_is_zero_asp(self):
        assert asp_delta(DEMO_THETA, DEMO_ORDER).delta == 0.0

    def test_matches_bruteforce_scan(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            theta = rng.random((3, 6))
            order = rng.permutation(6)
            assert asp_delta(theta, order).delta == pytest.approx(
                asp_delta_bruteforce(theta, order), abs=1e-12)

    def test_zero_delta_iff_unimodal(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            if rng.random() < 0.5:
                theta, order = random_sp_matrix(rng, 3, 5)
            else:
                theta = rng.random((3, 5))
                order = rng.permutation(5)
            is_zero = asp_delta(theta, order).delta == 0.0
            try:
                peaks_of(theta, order)
                unimodal = True
            except NotPSP:
                unimodal = False
            assert is_zero == unimodal

    def test_noise_robustness_two_delta(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            theta, order = random_sp_matrix(rng, 4, 6)
            delta = 0.04
            noisy = np.clip(theta + (2 * rng.random(theta.shape) - 1) * delta, 0, 1)
            assert asp_delta(noisy, order).delta <= 2 * delta + 1e-12


class TestExtractOrder:
    def test_demo_matrix_recovers_valid_order(self):
        order = extract_order(DEMO_THETA, 0.0)
        peaks_of(DEMO_THETA, order)  # must not raise

    def test_large_eps_returns_unconstrained_frontier(self):
        theta = np.random.default_rng(5).random((3, 4))
        assert extract_order(theta, 0.5).tolist() == [0, 1, 2, 3]

    def test_random_shuffled_psp_recovered(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            theta, _ = random_sp_matrix(rng, 4, 6)
            order = extract_order(theta, 0.0)
            peaks_of(theta, order)  # must not raise

    def test_noisy_sp_is_2keps_asp(self):
        rng = np.random.default_rng(51)
        arms = 6
        for eps in (0.01, 0.05):
            for _ in range(30):
                theta, _ = random_sp_matrix(rng, 4, arms)
                noisy = np.clip(theta + (2 * rng.random(theta.shape) - 1) * eps, 0, 1)
                order = extract_order(noisy, eps)
                report = asp_delta(noisy, order)
                assert report.delta <= 2 * arms * eps + 1e-12
                _, dist = project_to_sp(noisy, order)
                assert dist <= report.delta + 1e-12

    def test_conflicting_rows_fail(self):
        # Two users with opposite strict preferences over 4 arms force
        # incompatible prefix constraints.
        theta = np.array([
            [0.9, 0.1, 0.8, 0.2],
            [0.1, 0.9, 0.2, 0.8],
            [0.8, 0.2, 0.1, 0.9],
        ])
        with pytest.raises(ExtractOrderFailed) as exc:
            extract_order(theta, 0.0)
        assert len(exc.value.constraint) >= 2

    def test_negative_eps_rejected(self):
        with pytest.raises(ValueError):
            extract_order(DEMO_THETA, -0.1)


class TestProjectToSP:
    def test_single_valley_row(self):
        out, dist = project_to_sp(np.array([[0.5, 0.4, 0.6]]))
        assert out.tolist() == [[0.5, 0.5, 0.6]]
        assert dist == pytest.approx(0.1, abs=1e-12)

    def test_already_unimodal_unchanged(self):
        row = np.array([[0.1, 0.4, 0.9, 0.3]])
        out, dist = project_to_sp(row)
        assert np.array_equal(out, row) and dist == 0.0

    def test_constant_row_unchanged(self):
        row = np.full((1, 5), 0.42)
        out, dist = project_to_sp(row)
        assert np.array_equal(out, row) and dist == 0.0

    def test_output_unimodal_and_distance_bounded_by_asp(self):
        rng = np.random.default_rng(61)
        for _ in range(50):
            theta = rng.random((3, 6))
            order = rng.permutation(6)
            out, dist = project_to_sp(theta, order)
            peaks_of(out, order)  # must not raise
            assert dist <= asp_delta(theta, order).delta + 1e-12
            assert dist == pytest.approx(np.abs(out - theta).max(), abs=1e-15)
