import numpy as np
import pytest

from repex.metrics import log_noise_rmse, proper_score, rmse


class TestRmse:
    def test_zero_when_equal(self, rng):
        v = rng.normal(size=20)
        assert rmse(v, v) == 0.0

    def test_unit_shift(self, rng):
        v = rng.normal(size=20)
        assert rmse(v + 1.0, v) == pytest.approx(1.0, rel=1e-12)

    def test_hand_value(self):
        assert rmse([0.0, 2.0], [0.0, 0.0]) == pytest.approx(np.sqrt(2.0))

    def test_permutation_invariant(self, rng):
        a, b = rng.normal(size=15), rng.normal(size=15)
        perm = rng.permutation(15)
        assert rmse(a, b) == pytest.approx(rmse(a[perm], b[perm]), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])


class TestLogNoiseRmse:
    def test_zero_when_equal(self, rng):
        r = np.exp(rng.normal(size=10))
        assert log_noise_rmse(r, r) == 0.0

    def test_constant_factor_e(self, rng):
        r = np.exp(rng.normal(size=10))
        assert log_noise_rmse(np.e * r, r) == pytest.approx(1.0, rel=1e-12)

    def test_finite_under_fuzz(self, rng):
        for _ in range(50):
            a = np.abs(rng.normal(size=8)) * 10 ** rng.integers(-14, 3)
            b = np.abs(rng.normal(size=8))
            assert np.isfinite(log_noise_rmse(a, b))


class TestProperScore:
    def test_perfect_unit_variance(self, rng):
        y = rng.normal(size=12)
        assert proper_score(y, np.ones(12), y) == 0.0

    def test_unit_error(self, rng):
        y = rng.normal(size=12)
        assert proper_score(y + 1.0, np.ones(12), y) == pytest.approx(-1.0)

    def test_propriety_by_simulation(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=100_000)
        mu = np.zeros_like(y)
        truth = proper_score(mu, np.ones_like(y), y)
        wide = proper_score(mu, 4.0 * np.ones_like(y), y)
        narrow = proper_score(mu, 0.25 * np.ones_like(y), y)
        assert truth > wide and truth > narrow

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            proper_score([0.0], [0.0], [0.0])
