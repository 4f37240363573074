import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import expnn
from expnn.errors import ConfigError, DataError, DimensionError

from conftest import fd_gradient, random_instance, ref_risk, ref_risk_flat

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                   allow_infinity=False)
taus = st.floats(min_value=1e-3, max_value=1.0 - 1e-3)


class TestLossTau:
    def test_hand_values(self):
        assert expnn.loss_tau(0.9, 2.0, 1.0) == 0.9
        assert expnn.loss_tau(0.9, 1.0, 2.0) == pytest.approx(0.1, abs=1e-15)
        assert expnn.loss_tau_df(0.9, 1.0, 2.0) == pytest.approx(0.2, abs=1e-15)

    def test_zero_at_equality(self):
        assert expnn.loss_tau(0.3, 4.0, 4.0) == 0.0
        assert expnn.loss_tau_df(0.3, 4.0, 4.0) == 0.0

    def test_rejects_tau_outside_open_interval(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ConfigError):
                expnn.loss_tau(bad, 1.0, 2.0)
            with pytest.raises(ConfigError):
                expnn.loss_tau_df(bad, 1.0, 2.0)

    @given(tau=taus, y=finite, f=finite)
    @settings(max_examples=200)
    def test_non_negative(self, tau, y, f):
        assert expnn.loss_tau(tau, y, f) >= 0.0

    @given(tau=taus, y=finite, f=finite)
    @settings(max_examples=200)
    def test_derivative_sign_tracks_overshoot(self, tau, y, f):
        d = expnn.loss_tau_df(tau, y, f)
        if f > y:
            assert d > 0.0
        elif f < y:
            assert d < 0.0
        else:
            assert d == 0.0

    @given(y=finite, f=finite)
    @settings(max_examples=200)
    def test_symmetric_case_is_half_squared_error(self, y, f):
        assert expnn.loss_tau(0.5, y, f) == 0.5 * (y - f) ** 2

    @given(tau=taus, y=finite, f=finite)
    @settings(max_examples=100)
    def test_matches_central_difference(self, tau, y, f):
        h = 1e-6 * max(1.0, abs(f))
        if abs(y - f) < 10 * h:  # keep clear of the kink
            return
        num = (expnn.loss_tau(tau, y, f + h) - expnn.loss_tau(tau, y, f - h)) / (2 * h)
        ana = expnn.loss_tau_df(tau, y, f)
        assert ana == pytest.approx(num, rel=1e-4, abs=1e-4 * max(1.0, abs(ana)))


class TestRisk:
    def _single_point(self):
        params = expnn.ModelParams(w1=np.array([[2.0]]), b1=np.array([-1.0]),
                                   w2=np.array([3.0]), b2=0.0)
        cfg = expnn.EnnConfig(hidden_units=1)
        return params, cfg

    def test_hand_value_single_sample(self):
        params, cfg = self._single_point()
        value = expnn.risk(params, cfg, np.array([[1.0]]), np.array([5.0]))
        assert value.empirical == 2.0
        assert value.penalty == 0.0
        assert value.total == 2.0

    def test_penalty_covers_weights_not_biases(self):
        params = expnn.ModelParams(w1=np.array([[1.0]]), b1=np.array([100.0]),
                                   w2=np.array([2.0]), b2=-50.0)
        cfg = expnn.EnnConfig(hidden_units=1, lam=10.0)
        value = expnn.risk(params, cfg, np.zeros((1, 1)), np.array([0.0]))
        assert value.penalty == 50.0

    def test_matches_reference(self, rng):
        for hidden in expnn.HIDDEN_ACTIVATIONS:
            for output in expnn.OUTPUT_ACTIVATIONS:
                params, cfg, X, y = random_instance(
                    rng, n=11, p=4, q=3, hidden=hidden, output=output,
                    tau=0.3, lam=0.7)
                got = expnn.risk(params, cfg, X, y).total
                want = ref_risk(params.w1, params.b1, params.w2, params.b2,
                                0.3, 0.7, hidden, output, X, y)
                assert got == pytest.approx(want, rel=1e-12)

    def test_empirical_is_mean_not_sum(self, rng):
        params, cfg, X, y = random_instance(rng, n=6, tau=0.4)
        X2 = np.vstack([X, X])
        y2 = np.concatenate([y, y])
        a = expnn.risk(params, cfg, X, y).empirical
        b = expnn.risk(params, cfg, X2, y2).empirical
        assert a == pytest.approx(b, rel=1e-12)

    def test_input_validation(self, rng):
        params, cfg, X, y = random_instance(rng)
        with pytest.raises(DataError):
            expnn.risk(params, cfg, X[:0], y[:0])
        with pytest.raises(DimensionError):
            expnn.risk(params, cfg, X, y[:-1])
        with pytest.raises(DimensionError):
            expnn.risk(params, cfg, X[:, :-1], y)


class TestGradient:
    def test_matches_independent_finite_differences(self, rng):
        for hidden in ("sigmoid", "tanh"):
            for output in ("identity", "sigmoid"):
                params, cfg, X, y = random_instance(
                    rng, n=9, p=3, q=4, hidden=hidden, output=output,
                    tau=0.7, lam=0.4)
                grad = expnn.risk_gradient(params, cfg, X, y)
                flat = np.concatenate([grad.d_w1.ravel(), grad.d_b1,
                                       grad.d_w2, [grad.d_b2]])
                numeric = fd_gradient(
                    lambda t: ref_risk_flat(t, 3, 4, 0.7, 0.4, hidden, output, X, y),
                    expnn.flatten_params(params))
                npt.assert_allclose(flat, numeric, rtol=2e-5, atol=1e-8)

    def test_risk_and_gradient_consistent(self, rng):
        params, cfg, X, y = random_instance(rng, tau=0.2, lam=1.5)
        value, grad = expnn.risk_and_gradient(params, cfg, X, y)
        assert value.total == expnn.risk(params, cfg, X, y).total
        only = expnn.risk_gradient(params, cfg, X, y)
        npt.assert_array_equal(grad.d_w1, only.d_w1)
        npt.assert_array_equal(grad.d_b1, only.d_b1)

    def test_penalty_gradient_term(self, rng):
        params, cfg, X, y = random_instance(rng, lam=0.0, tau=0.4)
        cfg_pen = expnn.EnnConfig(tau=0.4, lam=3.0, hidden_units=cfg.hidden_units,
                                  hidden_activation=cfg.hidden_activation,
                                  output_activation=cfg.output_activation)
        g0 = expnn.risk_gradient(params, cfg, X, y)
        g1 = expnn.risk_gradient(params, cfg_pen, X, y)
        npt.assert_allclose(g1.d_w1 - g0.d_w1, 2.0 * 3.0 * params.w1, rtol=1e-12)
        npt.assert_allclose(g1.d_w2 - g0.d_w2, 2.0 * 3.0 * params.w2, rtol=1e-12)
        npt.assert_array_equal(g1.d_b1, g0.d_b1)
        assert g1.d_b2 == g0.d_b2

    def test_max_abs(self):
        g = expnn.Gradient(d_w1=np.array([[1.0, -7.0]]), d_b1=np.array([2.0]),
                           d_w2=np.array([3.0]), d_b2=-4.0)
        assert g.max_abs() == 7.0


class TestCheckGradient:
    def test_passes_on_smooth_instance(self, rng):
        params, cfg, X, y = random_instance(rng, hidden="tanh", output="sigmoid",
                                            tau=0.6, lam=0.2)
        report = expnn.check_gradient(params, cfg, X, y)
        assert report.passed
        assert report.max_rel_error < 1e-5
        assert "PASS" in report.summary()

    def test_reports_deliberate_mismatch(self, rng):
        # A coarse step on a curved objective inflates the mismatch.
        params, cfg, X, y = random_instance(rng, hidden="sigmoid", tau=0.9)
        report = expnn.check_gradient(params, cfg, X, y, step=1e-1, tol=1e-12)
        assert not report.passed
        assert "FAIL" in report.summary()

    def test_does_not_mutate_inputs(self, rng):
        params, cfg, X, y = random_instance(rng)
        w1_before = params.w1.copy()
        X_before = X.copy()
        expnn.check_gradient(params, cfg, X, y)
        npt.assert_array_equal(params.w1, w1_before)
        npt.assert_array_equal(X, X_before)

    def test_rejects_bad_step(self, rng):
        params, cfg, X, y = random_instance(rng)
        with pytest.raises(ConfigError):
            expnn.check_gradient(params, cfg, X, y, step=0.0)
