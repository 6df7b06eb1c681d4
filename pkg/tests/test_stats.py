import math
import random

import numpy as np
import pytest

from paf.stats import (
    EmptyInput,
    LengthMismatch,
    TooFewPairs,
    aggregate,
    paired_t_one_sided,
    student_t_sf,
)


def t_pdf(x, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def t_sf_oracle(t, df, steps=20000):
    """Upper-tail probability by trapezoidal integration of the density.

    Uses symmetry: sf(t) = 0.5 - integral_0^t pdf, so no infinite tail is needed.
    """
    if t == 0:
        return 0.5
    xs = np.linspace(0.0, abs(t), steps + 1)
    ys = np.array([t_pdf(x, df) for x in xs])
    integral = np.trapezoid(ys, xs)
    return 0.5 - integral if t > 0 else 0.5 + integral


class TestAggregate:
    def test_worked_example(self):
        summary = aggregate([0.98, 0.85, 0.40])
        assert summary.total_hits == 1
        assert summary.count_above_0_8 == 2
        assert summary.mean == pytest.approx(0.7433333333333333, abs=1e-12)
        assert summary.median == 0.85
        assert summary.n == 3

    def test_strict_thresholds(self):
        summary = aggregate([0.97, 0.8])
        assert summary.total_hits == 0
        assert summary.count_above_0_8 == 1  # 0.97 > 0.8, 0.8 is not

    def test_even_median(self):
        assert aggregate([0.1, 0.2, 0.6, 0.4]).median == pytest.approx(0.3)

    def test_constant_list(self):
        summary = aggregate([0.5] * 7)
        assert summary.mean == summary.median == 0.5
        assert summary.total_hits == 0
        summary = aggregate([0.99] * 4)
        assert summary.total_hits == 4

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            aggregate([])

    def test_permutation_invariance(self):
        rng = random.Random(0)
        for _ in range(200):
            scores = [rng.random() for _ in range(rng.randint(1, 30))]
            shuffled = scores[:]
            rng.shuffle(shuffled)
            assert aggregate(scores) == aggregate(shuffled)

    def test_counts_monotone_in_threshold(self):
        rng = random.Random(1)
        for _ in range(200):
            scores = [rng.random() for _ in range(rng.randint(1, 40))]
            summary = aggregate(scores)
            assert summary.total_hits <= summary.count_above_0_8 <= summary.n


class TestStudentTSf:
    def test_symmetry_at_zero(self):
        assert student_t_sf(0.0, 5) == 0.5

    def test_matches_integration_oracle_grid(self):
        for df in (2, 3, 5, 10, 30, 50, 99):
            for t in np.linspace(-10, 10, 21):
                assert student_t_sf(float(t), df) == pytest.approx(
                    t_sf_oracle(float(t), df), abs=1e-6
                )

    def test_exact_complement(self):
        for df in (2, 10, 99):
            for t in (0.3, 1.7, 4.2):
                assert student_t_sf(t, df) + student_t_sf(-t, df) == pytest.approx(
                    1.0, abs=1e-15
                )


class TestPairedT:
    def test_worked_example(self):
        result = paired_t_one_sided([0.0, 0.0, 0.0], [0.1, 0.2, 0.3])
        assert result.t_statistic == pytest.approx(0.2 / (0.1 / math.sqrt(3)), rel=1e-12)
        assert result.t_statistic == pytest.approx(3.4641016151, abs=1e-9)
        assert result.degrees_of_freedom == 2
        assert result.p_value == pytest.approx(t_sf_oracle(result.t_statistic, 2), abs=1e-6)
        assert result.p_value == pytest.approx(0.0371, abs=5e-4)
        assert result.significant

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            paired_t_one_sided([1.0, 2.0], [1.0])

    def test_too_few_pairs(self):
        with pytest.raises(TooFewPairs):
            paired_t_one_sided([1.0], [2.0])

    def test_identical_samples_degenerate(self):
        result = paired_t_one_sided([0.4, 0.6, 0.5], [0.4, 0.6, 0.5])
        assert result.degenerate == "identical"
        assert result.p_value == 0.5
        assert not result.significant

    def test_zero_variance_positive(self):
        result = paired_t_one_sided([0.0, 0.0], [0.1, 0.1])
        assert result.degenerate == "zero_variance"
        assert result.t_statistic == math.inf
        assert result.p_value == 0.0
        assert result.significant

    def test_zero_variance_negative(self):
        result = paired_t_one_sided([0.1, 0.1], [0.0, 0.0])
        assert result.t_statistic == -math.inf
        assert result.p_value == 1.0
        assert not result.significant

    def test_antisymmetry(self):
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(3, 50)
            a = [rng.gauss(0, 1) for _ in range(n)]
            b = [rng.gauss(0.2, 1) for _ in range(n)]
            fwd = paired_t_one_sided(a, b)
            rev = paired_t_one_sided(b, a)
            assert fwd.t_statistic == pytest.approx(-rev.t_statistic, rel=1e-12)
            assert fwd.p_value + rev.p_value == pytest.approx(1.0, abs=1e-12)
            assert fwd.degrees_of_freedom == rev.degrees_of_freedom == n - 1

    def test_random_samples_match_oracle(self):
        rng = random.Random(9)
        for n in range(3, 51):
            a = [rng.gauss(0, 1) for _ in range(n)]
            b = [rng.gauss(0.3, 1) for _ in range(n)]
            result = paired_t_one_sided(a, b)
            d = [y - x for x, y in zip(a, b)]
            mean = sum(d) / n
            sd = math.sqrt(sum((x - mean) ** 2 for x in d) / (n - 1))
            assert result.t_statistic == pytest.approx(mean / (sd / math.sqrt(n)), rel=1e-12)
            assert result.degrees_of_freedom == n - 1
            assert result.p_value == pytest.approx(
                t_sf_oracle(result.t_statistic, n - 1), abs=1e-6
            )

    def test_significance_flag_matches_alpha(self):
        result = paired_t_one_sided([0.0, 0.0, 0.0], [0.1, 0.2, 0.3], alpha=0.01)
        assert not result.significant  # p ~ 0.0371 >= 0.01
