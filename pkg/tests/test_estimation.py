import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psinar.distributions import PoissonLindley, pl_moments, pl_sample
from psinar.estimation import (
    FitResult,
    cls_asymptotics,
    fit,
    fit_cls,
    fit_cmle,
    fit_moment,
    fit_yw,
    information_criteria,
    invert_theta,
)
from psinar.exceptions import DegenerateSeriesError, EstimationError, InputError
from psinar.process import InarModel, log_likelihood, simulate

FAMILY_NAMES = ["bernoulli", "geometric", "poisson"]


def lstsq_cls(x):
    """Minimise S_n as a linear regression of x_t on (x_{t-1}, 1)."""
    x = np.asarray(x, dtype=float)
    design = np.column_stack([x[:-1], np.ones(x.size - 1)])
    (alpha, beta), *_ = np.linalg.lstsq(design, x[1:], rcond=None)
    return alpha, beta / (1.0 - alpha)


def sandwich_covariance(x, alpha, theta, delta):
    """Delta-method covariance of (alpha_cls, theta_cls) from empirical influence terms."""
    x = np.asarray(x, dtype=float)
    mu1, mu2 = x.mean(), np.mean(x**2)
    var = mu2 - mu1**2
    v = delta * x + pl_moments(theta)[1]
    u = np.stack([x - mu1, mu2 - mu1 * x])
    meat = (u[:, None, :] * u[None, :, :] * v).mean(axis=2) / var**2
    t = theta
    jac = -(t**2 * (t + 1) ** 2) / (t**2 + 4 * t + 2)
    J = np.diag([1.0, jac])
    return J @ meat @ J.T / (x.size - 1)


class TestCls:
    def test_hand_example(self):
        est = fit_cls([1, 1, 2, 2, 3, 3])
        assert est.alpha == pytest.approx(11 / 14, abs=1e-12)
        assert est.mu == pytest.approx(11 / 3, abs=1e-12)

    def test_constant_series(self):
        with pytest.raises(DegenerateSeriesError):
            fit_cls([4, 4, 4, 4, 4])

    def test_negative_alpha_flagged(self):
        est = fit_cls([1, 2, 1, 2])
        assert est.alpha == pytest.approx(-1.0)
        assert est.boundary
        res = fit_moment([1, 2, 1, 2], method="cls")
        assert res.boundary and not res.converged and not res.ok
        with pytest.raises(EstimationError):
            res.model()

    def test_too_short(self):
        with pytest.raises(InputError):
            fit_cls([1, 2])

    def test_matches_least_squares_on_random_series(self):
        rng = np.random.default_rng(314)
        for i in range(50):
            family = FAMILY_NAMES[i % 3]
            alpha = rng.uniform(0.1, 0.9)
            theta = rng.uniform(0.3, 3.0)
            x = simulate(InarModel.psinarpl(family, alpha, theta), int(rng.integers(30, 300)), rng=rng)
            a_ref, mu_ref = lstsq_cls(x.values)
            est = fit_cls(x)
            assert est.alpha == pytest.approx(a_ref, abs=1e-8)
            assert est.mu == pytest.approx(mu_ref, abs=1e-8)

    def test_recovers_parameters_on_long_series(self):
        x = simulate(InarModel.psinarpl("bernoulli", 0.5, 1.0), 20_000, rng=3)
        res = fit_moment(x, method="cls")
        assert res.alpha == pytest.approx(0.5, abs=0.03)
        assert res.param == pytest.approx(1.0, abs=0.05)


class TestYw:
    def test_hand_example(self):
        est = fit_yw([1, 1, 2, 2, 3, 3])
        assert est.mu == 2.0 and est.alpha == pytest.approx(0.5)
        assert invert_theta(est.mu, est.alpha) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_constant_series(self):
        with pytest.raises(DegenerateSeriesError):
            fit_yw([2, 2, 2])

    def test_white_noise(self):
        x = pl_sample(1.0, np.random.default_rng(8), 10_000)
        assert abs(fit_yw(x).alpha) < 0.05


class TestInvertTheta:
    def test_unit_innovation_mean(self):
        assert invert_theta(2.0, 0.5) == pytest.approx(math.sqrt(2.0), rel=1e-12)
        assert PoissonLindley(math.sqrt(2.0)).mean == pytest.approx(1.0, rel=1e-14)

    def test_innovation_mean_two(self):
        assert invert_theta(4.0, 0.5) == pytest.approx((-1 + math.sqrt(17)) / 4, rel=1e-12)

    @pytest.mark.parametrize("theta", [0.2878, 1.6850, 2.3490])
    def test_round_trip_probes(self, theta):
        alpha = 0.6
        mu = pl_moments(theta)[0] / (1 - alpha)
        assert invert_theta(mu, alpha) == pytest.approx(theta, rel=1e-10)

    @pytest.mark.parametrize("alpha, mu", [(0.0, 1.0), (1.0, 1.0), (1.3, 2.0), (0.5, 0.0), (0.5, -1.0)])
    def test_rejects(self, alpha, mu):
        with pytest.raises(EstimationError):
            invert_theta(mu, alpha)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50.0), st.floats(0.01, 0.99))
def test_invert_theta_round_trip(theta, alpha):
    mu = pl_moments(theta)[0] / (1 - alpha)
    assert invert_theta(mu, alpha) == pytest.approx(theta, rel=1e-9)


class TestInformationCriteria:
    def test_values(self):
        aic, bic = information_criteria(-100.0, 2, 99)
        assert aic == pytest.approx(204.0)
        assert bic == pytest.approx(200.0 + 2 * math.log(99))

    def test_fit_result_consistent(self):
        x = simulate(InarModel.psinarpl("poisson", 0.4, 1.0), 150, rng=5)
        for method in ("cls", "yw", "cmle"):
            r = fit(x, "poisson", method=method)
            assert r.aic == pytest.approx(-2 * r.loglik + 4)
            assert r.bic == pytest.approx(-2 * r.loglik + 2 * math.log(149))
            assert r.loglik == pytest.approx(log_likelihood(r.model(), x))


@pytest.fixture(scope="module")
def series():
    rng = np.random.default_rng(77)
    out = []
    for i in range(12):
        fam = FAMILY_NAMES[i % 3]
        model = InarModel.psinarpl(fam, rng.uniform(0.15, 0.85), rng.uniform(0.4, 2.5))
        out.append((fam, simulate(model, 150, rng=rng)))
    return out


class TestCmle:
    def test_dominates_moment_estimators(self, series):
        for fam, x in series:
            ml = fit_cmle(x, fam, std_errors=False)
            for method in ("cls", "yw"):
                r = fit_moment(x, fam, method=method, std_errors=False)
                if r.ok:
                    assert ml.loglik >= r.loglik - 1e-9

    def test_local_optimum(self, series):
        for fam, x in series[:6]:
            ml = fit_cmle(x, fam, std_errors=False)
            base = ml.loglik
            for da, dt in [(1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)]:
                m = InarModel.psinarpl(fam, ml.alpha + da, ml.param + dt)
                assert log_likelihood(m, x) < base

    def test_diagnostics(self, series):
        fam, x = series[0]
        ml = fit_cmle(x, fam)
        assert ml.converged and ml.ok and not ml.boundary
        assert ml.n_iter > 0
        assert ml.grad_norm is not None and ml.grad_norm < 1e-2
        assert len(ml.std_errors) == 2 and all(s > 0 for s in ml.std_errors)

    def test_deterministic(self, series):
        fam, x = series[1]
        assert fit_cmle(x, fam).to_dict() == fit_cmle(x, fam).to_dict()

    @pytest.mark.parametrize("innovation, truth", [("poisson", 2.0), ("geometric", 0.4)])
    def test_baseline_innovations(self, innovation, truth):
        from psinar.distributions import innovation_class

        model = InarModel("bernoulli", 0.5, innovation_class(innovation)(truth))
        x = simulate(model, 2000, rng=21)
        ml = fit_cmle(x, "bernoulli", innovation)
        assert ml.param_name == innovation_class(innovation).param_name
        assert ml.alpha == pytest.approx(0.5, abs=0.05)
        assert ml.param == pytest.approx(truth, rel=0.1)
        mom = fit_moment(x, "bernoulli", innovation, "cls")
        # moment inversion matches the innovation mean
        assert mom.model().innovation.mean == pytest.approx((1 - mom.alpha) * mom.mu, rel=1e-12)

    def test_init_respected(self):
        x = simulate(InarModel.psinarpl("bernoulli", 0.3, 1.0), 200, rng=4)
        a = fit_cmle(x, init=(0.3, 1.0), std_errors=False)
        b = fit_cmle(x, std_errors=False)
        assert a.loglik == pytest.approx(b.loglik, abs=1e-7)

    def test_fit_dispatch_rejects_unknown(self):
        with pytest.raises(ValueError):
            fit([1, 2, 3, 4], method="gmm")


class TestClsAsymptotics:
    def test_matches_sandwich_oracle(self):
        x = simulate(InarModel.psinarpl("bernoulli", 0.5, 1.0), 300, rng=10)
        res = fit_moment(x, method="cls")
        asym = cls_asymptotics(x, res.alpha, res.param)
        ref = sandwich_covariance(x.values, res.alpha, res.param, asym_delta("bernoulli", res.alpha))
        np.testing.assert_allclose(asym.covariance, ref, rtol=1e-10)
        assert res.std_errors == pytest.approx(asym.std_errors)

    def test_symmetry_and_psd_random_inputs(self):
        rng = np.random.default_rng(2718)
        for i in range(100):
            fam = FAMILY_NAMES[i % 3]
            x = simulate(InarModel.psinarpl(fam, rng.uniform(0.1, 0.9), rng.uniform(0.2, 5.0)), 60, rng=rng)
            if np.all(x.values == x.values[0]):
                continue
            a, t = rng.uniform(0.05, 0.95), rng.uniform(0.05, 20.0)
            asym = cls_asymptotics(x, a, t, fam)
            assert asym.r12 == asym.r21
            np.testing.assert_array_equal(asym.covariance, asym.covariance.T)
            eig = np.linalg.eigvalsh(asym.covariance)
            assert eig.min() >= -1e-12 * max(1.0, eig.max())
            ref = sandwich_covariance(x.values, a, t, asym_delta(fam, a))
            np.testing.assert_allclose(asym.covariance, ref, rtol=1e-8, atol=1e-300)

    def test_rejects_bad_input(self):
        with pytest.raises(EstimationError):
            cls_asymptotics([1, 2, 3, 4], 1.2, 1.0)
        with pytest.raises(DegenerateSeriesError):
            cls_asymptotics([3, 3, 3, 3], 0.5, 1.0)


def asym_delta(family, alpha):
    return {"bernoulli": alpha * (1 - alpha), "geometric": alpha * (1 + alpha), "poisson": alpha}[family]


def test_fit_result_dict_round_trip():
    x = simulate(InarModel.psinarpl("bernoulli", 0.5, 1.0), 100, rng=1)
    d = fit(x, method="cls").to_dict()
    assert d["model"] == "BINARPL"
    assert set(FitResult.__dataclass_fields__) <= set(d)


def test_cmle_flags_vanishing_innovation_mean():
    # replicate 16 of the NBINARPL(0.9, 2) T=100 study drives theta to infinity
    from psinar.analysis import McConfig

    cfg = McConfig("geometric", 0.9, 2.0, lengths=(100,), replicates=17, seed=20240601)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(100, 16)))
    res = fit_cmle(simulate(cfg.model, 100, cfg.burn_in, rng), "geometric")
    assert res.param > 1e8
    assert res.boundary
