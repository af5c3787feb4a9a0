"""
Tests for the gradcheck module
"""

import numpy as np
import pytest

from drank.drloss import LOSS_NAMES, LossSpec, dr_loss, loss_function
from drank.errors import StepOutOfRangeError
from drank.gradcheck import (
    check,
    check_vector,
    corrupt,
    random_instance,
    relative_errors,
)
from drank.scores import ImageScores


class TestCheck:
    """Test the score-gradient oracle"""

    def test_dr_loss_passes(self, rng):
        """DR gradient passes on a random instance"""
        scores = random_instance(rng, max_pos=5, max_neg=50)
        report = check(dr_loss, scores)
        assert report.passed
        assert report.max_rel_error < report.threshold

    @pytest.mark.parametrize("name", LOSS_NAMES)
    def test_every_loss_passes(self, name):
        """All losses pass on a few seeded instances"""
        rng = np.random.default_rng(42)
        fn = loss_function(LossSpec(name=name))
        for _ in range(3):
            scores = random_instance(rng, max_pos=8, max_neg=60, min_gap=1e-3)
            assert check(fn, scores).passed

    def test_corruption_detected_at_target(self, random_scores):
        """A 10% error on one entry fails at that entry"""
        grads = dr_loss(random_scores).grad_pos
        target = ("pos", int(np.argmax(np.abs(grads))))
        report = check(corrupt(dr_loss, 1.1, target), random_scores)
        assert report.passed is False
        assert report.worst_index == target

    def test_default_corruption_hits_largest_entry(self, random_scores):
        """Without a target the largest-magnitude entry is corrupted"""
        result = dr_loss(random_scores)
        grads = np.concatenate([result.grad_pos, result.grad_neg])
        flat = int(np.argmax(np.abs(grads)))
        expected = ("pos", flat) if flat < 7 else ("neg", flat - 7)

        report = check(corrupt(dr_loss), random_scores)
        assert report.passed is False
        assert report.worst_index == expected
        assert report.max_rel_error == pytest.approx(0.1 / 1.1, rel=1e-3)

    def test_step_out_of_range(self):
        """A step that leaves (0, 1) raises StepOutOfRangeError"""
        scores = ImageScores(positives=[0.999995], negatives=[0.2])
        with pytest.raises(StepOutOfRangeError):
            check(dr_loss, scores, step=1e-5)

    def test_empty_positive_image(self):
        """Images without positives only check negatives"""
        scores = ImageScores(positives=[], negatives=[0.2, 0.5, 0.7])
        report = check(dr_loss, scores)
        assert report.passed
        assert report.worst_index[0] == "neg"


class TestCheckVector:
    """Test the unconstrained vector oracle"""

    def test_cubic(self):
        """Exact gradient of sum(x^3) passes"""
        x = np.array([0.5, -1.0, 2.0])
        report = check_vector(lambda v: float(np.sum(v**3)), x, 3 * x**2)
        assert report.passed

    def test_wrong_gradient(self):
        """A wrong gradient fails and names the bad coordinate"""
        x = np.array([0.5, -1.0, 2.0])
        wrong = 3 * x**2
        wrong[1] *= 2
        report = check_vector(lambda v: float(np.sum(v**3)), x, wrong)
        assert report.passed is False
        assert report.worst_index == ("param", 1)


class TestRelativeErrors:
    """Test the relative error measure"""

    def test_zero_gradients(self):
        """Matching zeros give zero error"""
        errors = relative_errors(np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(errors, np.zeros(3))

    def test_tiny_entries_use_floor(self):
        """Round-off on near-zero entries is measured against the floor"""
        analytic = np.array([1.0, 1e-13])
        numeric = np.array([1.0, 3e-12])
        assert relative_errors(analytic, numeric)[1] < 1e-8


class TestRandomInstance:
    """Test random instance generation"""

    def test_sizes_and_range(self, rng):
        """Counts and values stay within bounds"""
        for _ in range(20):
            scores = random_instance(rng, max_pos=20, max_neg=500)
            assert 1 <= scores.n_pos <= 20
            assert 1 <= scores.n_neg <= 500
            assert scores.negatives.min() >= 0.02
            assert scores.negatives.max() <= 0.98

    def test_min_gap(self, rng):
        """Extremes are separated by at least min_gap"""
        for _ in range(20):
            scores = random_instance(rng, max_neg=200, min_gap=1e-3)
            top = np.sort(scores.negatives)[-2:]
            if top.size == 2:
                assert top[1] - top[0] >= 1e-3

    def test_seed_determinism(self):
        """Same seed, same instance"""
        a = random_instance(np.random.default_rng(5))
        b = random_instance(np.random.default_rng(5))
        np.testing.assert_array_equal(a.positives, b.positives)
        np.testing.assert_array_equal(a.negatives, b.negatives)
