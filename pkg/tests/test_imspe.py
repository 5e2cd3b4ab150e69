import numpy as np
import pytest

from repex import gp, imspe, kernels as kn
from repex.gp import SurrogateState, UniqueDesign, ingest
from repex.imspe import CallableNoise, ConstantNoise, ImspeWorkspace, SearchOptions, optimize_next
from repex.kernels import KernelSpec

FAMS = list(kn.FAMILIES)


def _workspace(rng, fam="gaussian", n=7, nu=2.0, theta=0.08):
    spec = KernelSpec(fam, [theta], nu=nu)
    Xu = rng.uniform(0, 1, (n, 1))
    a = rng.integers(1, 5, n)
    X = np.repeat(Xu, a, axis=0)
    Y = np.sin(6 * X[:, 0]) + rng.normal(0, 0.3, X.shape[0])
    des = ingest(X, Y)
    noise = 0.05 + 0.3 * rng.uniform(size=des.n)
    return ImspeWorkspace(SurrogateState(spec, des, noise))


class TestImspeFull:
    def test_matches_monte_carlo(self, rng):
        ws = _workspace(rng)
        st = ws.state
        xs = rng.uniform(0, 1, (120_000, 1))
        kx = st.kernel.nu * kn.cross_correlation(st.kernel, xs, st.design.xbar)
        sdn = st.kernel.nu - np.einsum("ij,jk,ik->i", kx, st.Kinv, kx)
        mc, se = sdn.mean(), sdn.std() / np.sqrt(len(xs))
        assert abs(ws.imspe - mc) < 3 * se + 1e-8

    def test_empty_design_equals_prior_mass(self):
        # with no data the integrated de-noised variance is the scale nu
        spec = KernelSpec("matern52", [0.3], nu=4.2)
        assert kn.e_constant(spec) == 4.2

    def test_cached_trace_consistent_after_update(self, rng):
        ws = _workspace(rng)
        st2 = ws.state.add_replicate(1, 0.3)
        ws2 = ImspeWorkspace(st2)
        fresh = float(np.sum(st2.Kinv * st2.W))
        assert ws2.trace == pytest.approx(fresh, abs=1e-10)


class TestImspeNext:
    @pytest.mark.parametrize("fam", FAMS)
    def test_matches_extension_oracle(self, fam, rng):
        ws = _workspace(rng, fam)
        for _ in range(12):
            x = rng.uniform(0, 1, 1)
            r = float(rng.uniform(0.01, 1.0))
            got = ws.imspe_next(x, r)
            ref = ImspeWorkspace(ws.state.extend_new_location(x, r).rebuilt()).imspe
            assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)
            assert got <= ws.imspe + 1e-9

    def test_coincidence_limit_equals_replicate(self, rng):
        # a candidate at an existing site with that site's noise carries the
        # same information as one more replicate there
        ws = _workspace(rng)
        st = ws.state
        for k in (0, st.design.n - 1):
            xk = st.design.xbar[k].copy()
            got = ws.imspe_next(xk + 1e-9, st.noise[k])
            ref = ws.imspe_replicate(k)
            assert got == pytest.approx(ref, rel=1e-6)

    def test_uninformative_candidate(self, rng):
        ws = _workspace(rng)
        got = ws.imspe_next(rng.uniform(0, 1, 1), 1e12)
        assert got == pytest.approx(ws.imspe, rel=1e-9)


class TestImspeReplicate:
    @pytest.mark.parametrize("fam", FAMS)
    def test_matches_rebuild_oracle(self, fam, rng):
        ws = _workspace(rng, fam)
        for k in range(ws.state.design.n):
            got = ws.imspe_replicate(k)
            ref = ImspeWorkspace(ws.state.add_replicate(k).rebuilt()).imspe
            assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_gain_nonnegative(self, rng):
        ws = _workspace(rng)
        gains = ws.replicate_gains()
        assert np.all(gains >= -1e-12)
        assert ws.best_replicate()[1] == pytest.approx(
            min(ws.imspe_replicate(k) for k in range(ws.state.design.n)), abs=1e-12)

    def test_saturated_location_no_gain(self, rng):
        spec = KernelSpec("gaussian", [0.1], nu=1.0)
        des = UniqueDesign(np.array([[0.3], [0.7]]), np.array([10 ** 9, 1]),
                           np.zeros(2), np.zeros(2))
        ws = ImspeWorkspace(SurrogateState(spec, des, [0.5, 0.5]))
        assert ws.imspe_replicate(0) == pytest.approx(ws.imspe, rel=1e-9)


class TestImspeGrad:
    @pytest.mark.parametrize("fam", FAMS)
    def test_finite_differences(self, fam, rng):
        ws = _workspace(rng, fam)
        nf = CallableNoise(lambda x: 0.1 + 0.2 * float(np.sin(3 * x[0]) ** 2),
                           lambda x: np.array([0.6 * np.sin(6 * x[0])]))
        for _ in range(30):
            x = rng.uniform(0.02, 0.98, 1)
            g = ws.imspe_grad(x, nf.value(x), nf.grad(x))[0]
            h = 1e-6
            ref = (ws.imspe_next(x + h, nf.value(x + h))
                   - ws.imspe_next(x - h, nf.value(x - h))) / (2 * h)
            # the abs floor covers the finite-difference noise of the
            # closed-form criterion at this step size
            assert g == pytest.approx(ref, rel=1e-4, abs=5e-5)

    def test_symmetric_design_zero_gradient_at_center(self):
        spec = KernelSpec("gaussian", [0.05], nu=1.0)
        xd = np.array([[0.1], [0.3], [0.7], [0.9]])
        des = UniqueDesign(xd, np.ones(4, int), np.zeros(4), np.zeros(4))
        ws = ImspeWorkspace(SurrogateState(spec, des, 0.2 * np.ones(4)))
        g = ws.imspe_grad([0.5], 0.2, np.zeros(1))
        assert g[0] == pytest.approx(0.0, abs=1e-10)

    def test_two_dim_finite_differences(self, rng):
        spec = KernelSpec("matern52", [0.3, 0.5], nu=1.3)
        X = rng.uniform(0, 1, (9, 2))
        des = UniqueDesign(X, rng.integers(1, 4, 9), rng.normal(size=9),
                           np.zeros(9))
        ws = ImspeWorkspace(SurrogateState(spec, des, 0.3 * np.ones(9)))
        for _ in range(8):
            x = rng.uniform(0.05, 0.95, 2)
            g = ws.imspe_grad(x, 0.3, np.zeros(2))
            for p in range(2):
                xp, xm = x.copy(), x.copy()
                xp[p] += 1e-6
                xm[p] -= 1e-6
                ref = (ws.imspe_next(xp, 0.3) - ws.imspe_next(xm, 0.3)) / 2e-6
                assert g[p] == pytest.approx(ref, rel=1e-4, abs=5e-6)


class TestReplicationCondition:
    def test_agrees_with_direct_comparison(self, rng):
        ws = _workspace(rng)
        for _ in range(200):
            x = rng.uniform(0, 1, 1)
            r = float(rng.uniform(0, 4))
            pref, thr, kstar = ws.replication_condition(x, r)
            direct = ws.imspe_replicate(kstar) <= ws.imspe_next(x, r)
            assert pref == direct

    def test_zero_noise_far_candidate_explores(self):
        spec = KernelSpec("gaussian", [0.01], nu=1.0)
        des = UniqueDesign(np.array([[0.1], [0.9]]), np.ones(2, int),
                           np.zeros(2), np.zeros(2))
        ws = ImspeWorkspace(SurrogateState(spec, des, [0.3, 0.3]))
        pref, _, _ = ws.replication_condition([0.5], 0.0)
        assert not pref


class TestOptimizeNext:
    def test_deterministic_under_seed(self, rng):
        ws = _workspace(rng)
        nf = ConstantNoise(0.2)
        r1 = optimize_next(ws, nf, rng=np.random.default_rng(5))
        r2 = optimize_next(ws, nf, rng=np.random.default_rng(5))
        assert r1.value == r2.value and np.array_equal(r1.x, r2.x)

    def test_value_not_worse_than_samples(self, rng):
        ws = _workspace(rng)
        nf = ConstantNoise(0.2)
        res = optimize_next(ws, nf, rng=np.random.default_rng(1))
        cands = [ws.imspe_next(np.array([x]), 0.2)
                 for x in np.linspace(0.0, 1.0, 101)]
        cands += [ws.imspe_replicate(k) for k in range(ws.state.design.n)]
        assert res.value <= min(cands) + 1e-6 * abs(min(cands))

    def test_epsilon_rule_avoids_near_duplicates(self, rng):
        for trial in range(5):
            ws = _workspace(rng, n=6)
            res = optimize_next(ws, ConstantNoise(0.3),
                                rng=np.random.default_rng(trial))
            if not res.is_replicate:
                _, dist = ws.state.design.nearest(res.x)
                assert dist >= 1e-6

    def test_pure_continuous_ignores_tie_rule(self, rng):
        ws = _workspace(rng)
        res = optimize_next(ws, ConstantNoise(0.3),
                            rng=np.random.default_rng(0), pure_continuous=True)
        assert not res.is_replicate
