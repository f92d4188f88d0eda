import math

import numpy as np
import pytest

from fockbell.exact import sequence_probability
from fockbell.model import ExperimentConfig, OutcomeSequence, PhaseDistribution
from fockbell.phase import (
    ConditioningError,
    _chain_generator,
    _sample_exact_batch,
    _sample_exact_grouped,
    next_outcome_probability,
    peak_statistics,
    phase_posterior,
    sample_sequence,
    sample_sequences,
)

TWO_PI = 2 * math.pi


class TestPosterior:
    def test_empty_history_is_uniform(self):
        dist = phase_posterior([], [])
        assert np.allclose(dist.values, 1.0 / TWO_PI)
        assert dist.integral() == pytest.approx(1.0, abs=1e-12)

    def test_normalized_after_every_update(self):
        rng = np.random.default_rng(0)
        angles = rng.uniform(-np.pi, np.pi, 40)
        etas = rng.choice([-1, 1], 40)
        for m in (1, 7, 40):
            dist = phase_posterior(angles[:m], etas[:m])
            assert dist.integral() == pytest.approx(1.0, abs=1e-10)

    def test_single_angle_history_symmetric(self):
        etas = [1, 1, -1, 1, 1, 1, -1, 1, 1, 1]
        dist = phase_posterior([0.0] * 10, etas)
        # cosine parity: g(delta) = g(-delta) on the mirrored grid nodes
        flipped = dist.values[::-1]
        np.testing.assert_allclose(dist.values[1:], flipped[:-1], rtol=1e-10)

    def test_contradictory_history_keeps_positive_mass(self):
        # +1 then -1 at one angle is classically allowed; the posterior
        # concentrates on sin^2 rather than vanishing
        dist = phase_posterior([0.0, 0.0], [1, -1])
        assert dist.integral() == pytest.approx(1.0, abs=1e-12)
        assert dist.values.max() > 0.0


class TestNextOutcome:
    def test_uniform_prior_is_even(self):
        cfg = ExperimentConfig(2, 2, (0.3, 0.7))
        assert next_outcome_probability(cfg, []) == pytest.approx(0.5, abs=1e-12)
        assert next_outcome_probability(cfg, [], mode="classical") == pytest.approx(0.5, abs=1e-12)

    def test_triplet_perfect_correlation(self):
        cfg = ExperimentConfig(1, 1, (1.1, 1.1))
        assert next_outcome_probability(cfg, [1]) == pytest.approx(1.0, abs=1e-12)
        assert next_outcome_probability(cfg, [-1]) == pytest.approx(0.0, abs=1e-12)

    def test_classical_mode_matches_dense_grid_oracle(self):
        # long single-angle history of +1: the conditional is the posterior
        # mean of (1 + cos)/2, computed here on an independent dense grid
        m = 30
        cfg = ExperimentConfig(500, 500, (0.0,) * (m + 1))
        got = next_outcome_probability(cfg, [1] * m, mode="classical")
        lam = np.linspace(-np.pi, np.pi, 200001)[:-1]
        g = (1 + np.cos(lam)) ** m
        want = float(np.sum(g * (1 + np.cos(lam)) / 2) / np.sum(g))
        assert got == pytest.approx(want, abs=1e-9)
        assert got > 0.9  # rising toward certainty

    def test_chain_rule_reconstructs_joint(self):
        rng = np.random.default_rng(3)
        for n_plus, n_minus, m in [(2, 2, 4), (3, 3, 6), (5, 3, 5), (6, 6, 7)]:
            angles = tuple(rng.uniform(-np.pi, np.pi, m))
            cfg = ExperimentConfig(n_plus, n_minus, angles)
            etas = tuple(int(e) for e in rng.choice([-1, 1], m))
            prob = 1.0
            for j in range(m):
                p_plus = next_outcome_probability(cfg, etas[:j])
                prob *= p_plus if etas[j] == 1 else 1.0 - p_plus
            joint = sequence_probability(cfg, OutcomeSequence(etas))
            assert prob == pytest.approx(joint, abs=1e-10)

    def test_history_must_leave_room(self):
        cfg = ExperimentConfig(1, 1, (0.0, 0.1))
        with pytest.raises(ValueError):
            next_outcome_probability(cfg, [1, 1])


class TestSampling:
    def test_fixed_seed_reproduces(self):
        cfg = ExperimentConfig(3, 3, (0.1, 0.5, 0.5, 1.0, 1.0, 1.0))
        a = sample_sequence(cfg, seed=42)
        b = sample_sequence(cfg, seed=42)
        assert a.etas == b.etas

    def test_chains_independent_of_batching(self):
        cfg = ExperimentConfig(2, 2, (0.2, 0.2, 1.0, 1.0))
        whole = sample_sequences(cfg, 40, seed=9)
        pieces = sample_sequences(cfg, 40, seed=9, batch_size=7)
        np.testing.assert_array_equal(whole, pieces)

    def test_single_chain_matches_first_batch_row(self):
        cfg = ExperimentConfig(2, 2, (0.2, 0.9, 1.4, -0.3))
        single = sample_sequence(cfg, seed=5)
        block = sample_sequences(cfg, 3, seed=5)
        assert tuple(int(e) for e in block[0]) == single.etas

    def test_triplet_equal_angles_always_correlated(self):
        cfg = ExperimentConfig(1, 1, (0.77, 0.77))
        rows = sample_sequences(cfg, 200, seed=1)
        assert np.all(rows[:, 0] == rows[:, 1])

    def test_grouped_and_general_exact_paths_agree(self):
        cfg = ExperimentConfig(3, 3, (0.3,) * 2 + (1.2,) * 4)
        u = np.empty((64, 6))
        for c in range(64):
            u[c] = _chain_generator(11, c).random(6)
        np.testing.assert_array_equal(
            _sample_exact_grouped(cfg, u), _sample_exact_batch(cfg, u))

    def test_many_distinct_angles_takes_general_path(self):
        rng = np.random.default_rng(21)
        cfg = ExperimentConfig(4, 4, tuple(rng.uniform(-np.pi, np.pi, 8)))
        rows = sample_sequences(cfg, 32, seed=2)
        assert rows.shape == (32, 8)
        assert set(np.unique(rows)) <= {-1, 1}

    def test_exact_sampler_tracks_product_correlation(self):
        # coarse 3-sigma consistency on a small run; the acceptance suite
        # runs the full-size version
        phi_a, phi_b = 0.4, -0.4
        cfg = ExperimentConfig(5, 5, (phi_a,) + (phi_b,) * 9)
        rows = sample_sequences(cfg, 4000, seed=13)
        emp = float(np.prod(rows.astype(float), axis=1).mean())
        target = math.cos(phi_a - phi_b)
        sigma = math.sqrt((1 - target ** 2) / 4000)
        assert abs(emp - target) < 3 * sigma

    def test_classical_sampler_two_peak_statistics(self):
        cfg = ExperimentConfig(200, 200, (0.0,) * 12)
        rows = sample_sequences(cfg, 50, seed=3, mode="classical")
        # classical single-angle outcomes are exchangeable, +/- symmetric
        means = rows.astype(float).mean(axis=1)
        assert abs(means.mean()) < 0.35


class TestPeakStatistics:
    def test_uniform_has_no_peaks(self):
        dist = phase_posterior([], [])
        stats = peak_statistics(dist)
        assert stats.count == 0

    def test_two_symmetric_peaks_from_single_angle(self):
        etas = [1, 1, -1, 1, 1, 1, -1, 1, 1, 1]
        dist = phase_posterior([0.0] * 10, etas)
        stats = peak_statistics(dist)
        assert stats.count == 2
        lam0 = math.acos((sum(etas)) / len(etas))
        assert sorted(stats.locations) == pytest.approx([-lam0, lam0], abs=0.02)
        assert stats.widths[0] == pytest.approx(stats.widths[1], rel=1e-6)

    def test_second_angle_suppresses_one_peak(self):
        angles = [0.0] * 10 + [math.pi / 2] * 5
        etas = [1, 1, -1, 1, 1, 1, -1, 1, 1, 1] + [1] * 5
        dist = phase_posterior(angles, etas)
        stats = peak_statistics(dist)
        heights = sorted(
            dist.values[np.argmin(np.abs(dist.grid - l))] for l in stats.locations)
        assert stats.count == 1 or heights[-2] < 0.2 * heights[-1]

    def test_widths_narrow_with_more_measurements(self):
        cfg = ExperimentConfig(400, 400, tuple([0.0, math.pi / 2] * 150))
        rows = sample_sequences(cfg, 1, seed=8, mode="classical")
        history = [int(e) for e in rows[0]]
        widths = []
        for m in (10, 150, 300):
            dist = phase_posterior(cfg.angles[:m], history[:m])
            stats = peak_statistics(dist)
            assert stats.count >= 1
            idx = int(np.argmax([dist.values[np.argmin(np.abs(dist.grid - l))]
                                 for l in stats.locations]))
            widths.append(stats.widths[idx])
        assert widths[2] < widths[1] < widths[0]

    def test_width_scaling_statistics(self):
        # dominant-peak width shrinks between M=40 and M=120 in nearly all
        # sampled classical histories
        cfg = ExperimentConfig(400, 400, tuple([0.0, math.pi / 2] * 60))
        rows = sample_sequences(cfg, 100, seed=17, mode="classical")
        good = 0
        for row in rows:
            history = [int(e) for e in row]
            w = []
            for m in (40, 120):
                dist = phase_posterior(cfg.angles[:m], history[:m])
                stats = peak_statistics(dist)
                heights = [dist.values[np.argmin(np.abs(dist.grid - l))]
                           for l in stats.locations]
                w.append(stats.widths[int(np.argmax(heights))])
            if w[1] < w[0]:
                good += 1
        assert good >= 95
