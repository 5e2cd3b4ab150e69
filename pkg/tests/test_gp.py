import numpy as np
import pytest

from repex import gp, kernels as kn
from repex.gp import SurrogateState, UniqueDesign, ingest
from repex.kernels import KernelSpec


def _random_replicated(rng, n=8, max_rep=5, d=1):
    Xu = rng.uniform(0, 1, (n, d))
    a = rng.integers(1, max_rep + 1, n)
    X = np.repeat(Xu, a, axis=0)
    Y = np.sin(5 * X[:, 0]) + rng.normal(0, 0.4, X.shape[0])
    return X, Y


class TestIngest:
    def test_hand_example(self):
        des = ingest(np.array([[0.1], [0.1], [0.9]]), [1.0, 3.0, 5.0])
        assert des.n == 2 and des.total == 3
        i = int(np.argmin(des.xbar[:, 0]))
        assert des.a[i] == 2 and des.ybar[i] == 2.0 and des.s2[i] == 1.0
        j = 1 - i
        assert des.a[j] == 1 and des.ybar[j] == 5.0 and des.s2[j] == 0.0

    def test_no_duplicates(self, rng):
        X = rng.uniform(0, 1, (12, 2))
        des = ingest(X, rng.normal(size=12))
        assert des.n == 12 and np.all(des.a == 1) and np.all(des.s2 == 0)

    def test_grid_with_replicates(self):
        X = np.repeat(np.linspace(0, 1, 21)[:, None], 5, axis=0)
        des = ingest(X, np.zeros(105))
        assert des.n == 21 and des.total == 105 and np.all(des.a == 5)

    def test_mean_preserved(self, rng):
        X, Y = _random_replicated(rng)
        des = ingest(X, Y)
        assert np.sum(des.a * des.ybar) == pytest.approx(Y.sum(), rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            ingest(np.empty((0, 1)), [])
        with pytest.raises(ValueError):
            ingest(np.array([[0.1]]), [np.nan])

    def test_expand_roundtrip(self, rng):
        X, Y = _random_replicated(rng)
        des = ingest(X, Y)
        X2, Y2 = des.expand()
        back = ingest(X2, Y2)
        assert back.n == des.n and np.array_equal(back.a, des.a)
        assert np.allclose(back.ybar, des.ybar, rtol=1e-12)
        assert np.allclose(back.s2, des.s2, rtol=1e-9, atol=1e-12)

    def test_tolerance_merge(self):
        X = np.array([[0.3], [0.3 + 5e-11], [0.8]])
        des = ingest(X, [1.0, 2.0, 3.0], tol=1e-10)
        assert des.n == 2

    def test_serialization(self, rng):
        X, Y = _random_replicated(rng)
        des = ingest(X, Y)
        back = UniqueDesign.from_dict(des.to_dict())
        assert np.allclose(back.xbar, des.xbar) and np.array_equal(back.a, des.a)


class TestPredict:
    def test_noiseless_interpolates(self, rng):
        spec = KernelSpec("gaussian", [0.1], nu=2.0)
        X = rng.uniform(0, 1, (6, 1))
        y = np.cos(4 * X[:, 0])
        des = ingest(X, y)
        st = SurrogateState(spec, des, np.zeros(6))
        for i in range(6):
            mu, _, sd = st.predict(des.xbar[i])
            assert mu == pytest.approx(des.ybar[i], abs=1e-7)
            assert sd == pytest.approx(0.0, abs=1e-7)

    @pytest.mark.parametrize("fam", list(kn.FAMILIES))
    def test_unique_equals_full(self, fam, rng):
        spec = KernelSpec(fam, [0.15], nu=1.7)
        X, Y = _random_replicated(rng)
        rfun = lambda x: 0.05 + 0.2 * float(np.cos(np.ravel(x)[0]) ** 2)
        des = ingest(X, Y)
        st = SurrogateState(spec, des, [rfun(x) for x in des.xbar])
        for _ in range(8):
            xt = rng.uniform(0, 1, 1)
            mu, s2, _ = st.predict(xt, rfun(xt))
            mu2, s22, _ = gp.full_data_predict(spec, X, Y, rfun, xt)
            assert mu == pytest.approx(mu2, rel=1e-9, abs=1e-12)
            assert s2 == pytest.approx(s22, rel=1e-9, abs=1e-12)

    def test_reverts_to_prior_far_away(self):
        spec = KernelSpec("gaussian", [0.001], nu=3.0)
        des = ingest(np.array([[0.05]]), [4.0])
        st = SurrogateState(spec, des, [0.0])
        mu, _, sd = st.predict([0.95])
        assert mu == pytest.approx(0.0, abs=1e-8)
        assert sd == pytest.approx(3.0, rel=1e-8)

    def test_trend_restored(self, rng):
        spec = KernelSpec("matern52", [0.2], nu=1.0)
        des = ingest(np.array([[0.05]]), [10.0])
        st = SurrogateState(spec, des, [0.0], trend=10.0)
        mu, _, _ = st.predict([0.95])
        assert mu == pytest.approx(10.0, rel=1e-6)  # far field reverts to trend


class TestUpdates:
    def _state(self, rng, fam="matern32"):
        spec = KernelSpec(fam, [0.12], nu=1.5)
        X, Y = _random_replicated(rng)
        des = ingest(X, Y)
        noise = 0.1 + 0.2 * rng.uniform(size=des.n)
        return SurrogateState(spec, des, noise)

    def test_extend_matches_rebuild(self, rng):
        st = self._state(rng)
        x, r, y = rng.uniform(0, 1, 1), 0.3, 0.7
        st2 = st.extend_new_location(x, r, y)
        ref = st2.rebuilt()
        assert np.allclose(st2.Kinv, ref.Kinv, rtol=1e-8, atol=1e-10)
        assert np.allclose(st2.W, ref.W, rtol=1e-12)

    def test_extend_keeps_interpolation(self, rng):
        spec = KernelSpec("gaussian", [0.1], nu=1.0)
        X = rng.uniform(0, 1, (5, 1))
        y = np.sin(3 * X[:, 0])
        st = SurrogateState(spec, ingest(X, y), np.zeros(5))
        st2 = st.extend_new_location(rng.uniform(0, 1, 1), 0.2, 0.0)
        mu, _, _ = st2.predict(X[2])
        assert mu == pytest.approx(y[2], abs=1e-6)

    def test_extend_uninformative_noise(self, rng):
        st = self._state(rng)
        preds = [st.predict(x)[0] for x in st.design.xbar]
        st2 = st.extend_new_location(rng.uniform(0, 1, 1), 1e12, 0.0)
        preds2 = [st2.predict(x)[0] for x in st.design.xbar]
        assert np.allclose(preds, preds2, atol=1e-6)

    def test_replicate_matches_rebuild(self, rng):
        st = self._state(rng)
        for k in (0, st.design.n - 1):
            st2 = st.add_replicate(k, 0.4)
            ref = st2.rebuilt()
            assert np.allclose(st2.Kinv, ref.Kinv, rtol=1e-8, atol=1e-10)
            for _ in range(5):
                xt = rng.uniform(0, 1, 1)
                assert st2.predict(xt)[0] == pytest.approx(
                    ref.predict(xt)[0], rel=1e-8, abs=1e-10)

    def test_replicate_at_mean_shrinks_variance(self, rng):
        st = self._state(rng)
        k = 2
        xk = st.design.xbar[k]
        mu0, s0, _ = st.predict(xk)
        st2 = st.add_replicate(k, st.design.ybar[k])
        mu1, s1, _ = st2.predict(xk)
        # a replicate equal to the running mean leaves the location means
        # unchanged, so the entire mean shift is the rank-one reweighting
        assert np.allclose(st2.design.ybar, st.design.ybar, rtol=1e-12)
        kv = st._k_vec(xk)
        B = st.replicate_update_matrix(k)
        assert mu1 - mu0 == pytest.approx(float(kv @ (B @ st.design.ybar)),
                                          rel=1e-8, abs=1e-10)
        assert s1 < s0

    def test_replicate_never_inflates_variance(self, rng):
        st = self._state(rng)
        B = st.replicate_update_matrix(3)
        ev = np.linalg.eigvalsh(0.5 * (B + B.T))
        assert ev.min() >= -1e-10  # PSD; variance shift -k' B k <= 0
        for _ in range(5):
            xt = rng.uniform(0, 1, 1)
            k = st._k_vec(xt)
            assert float(k @ (B @ k)) >= -1e-9

    def test_interleaved_updates_commute_with_rebuild(self, rng):
        st = self._state(rng)
        st = st.add_replicate(1, 0.2)
        st = st.extend_new_location(rng.uniform(0, 1, 1), 0.3, -0.1)
        st = st.add_replicate(st.design.n - 1, 0.5)
        st = st.extend_new_location(rng.uniform(0, 1, 1), 0.2, 0.9)
        ref = st.rebuilt()
        assert np.allclose(st.Kinv, ref.Kinv, rtol=1e-8, atol=1e-9)
        for _ in range(6):
            xt = rng.uniform(0, 1, 1)
            assert st.predict(xt)[1] == pytest.approx(ref.predict(xt)[1],
                                                      rel=1e-8, abs=1e-10)

    def test_monotone_information(self, rng):
        st = self._state(rng)
        tests = rng.uniform(0, 1, (10, 1))
        before = [st.predict(x)[2] for x in tests]
        st_r = st.add_replicate(0, 0.1)
        st_e = st.extend_new_location(rng.uniform(0, 1, 1), 0.2, 0.0)
        for stx in (st_r, st_e):
            after = [stx.predict(x)[2] for x in tests]
            assert all(a <= b + 1e-9 for a, b in zip(after, before))

    def test_replace_noise_matches_rebuild(self, rng):
        st = self._state(rng)
        st2 = st.replace_noise(2, 0.9)
        ref = st2.rebuilt()
        assert np.allclose(st2.Kinv, ref.Kinv, rtol=1e-8, atol=1e-10)

    def test_periodic_reinversion_bounds_drift(self, rng):
        st = self._state(rng)
        for i in range(30):
            st = st.add_replicate(i % st.design.n, float(rng.normal()))
        ref = st.rebuilt()
        assert np.allclose(st.Kinv, ref.Kinv, rtol=1e-7, atol=1e-9)

    def test_kinv_identity(self, rng):
        st = self._state(rng)
        assert np.allclose(st.Kinv @ st._cov_matrix(), np.eye(st.design.n),
                           atol=1e-8)

    def test_serialization_roundtrip(self, rng):
        st = self._state(rng)
        back = SurrogateState.from_dict(st.to_dict())
        assert np.allclose(back.Kinv, st.rebuilt().Kinv)
        assert back.trend == st.trend
