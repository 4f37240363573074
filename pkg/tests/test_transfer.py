import numpy as np
import numpy.testing as npt
import pytest

import expnn
from expnn.errors import ConfigError
from expnn.transfer import TransferPlan, fit_source, transfer_fit


@pytest.fixture
def tasks(rng):
    n, p = 80, 4
    X = rng.normal(size=(n, p))
    w = np.array([1.5, -1.0, 0.5, 0.0])
    signal = X @ w
    y_source = signal + 0.1 * rng.normal(size=n)
    y_target = 0.8 * signal + 0.3 + 0.1 * rng.normal(size=n)
    return X, y_source, y_target


def _cfg(**kw):
    base = dict(tau=0.5, lam=0.01, hidden_units=4, seed=3, max_epochs=150)
    base.update(kw)
    return expnn.EnnConfig(**base)


class TestTransferPlan:
    def test_defaults(self):
        plan = TransferPlan("y_source", "y_target")
        assert plan.freeze.freeze_w1 and plan.freeze.freeze_b1
        assert not plan.freeze.freeze_w2 and not plan.freeze.freeze_b2
        assert plan.reuse_as_warm_start

    def test_same_phenotype_rejected(self):
        with pytest.raises(ConfigError, match="must differ"):
            TransferPlan("y", "y")

    def test_empty_name_rejected(self):
        with pytest.raises(ConfigError):
            TransferPlan("", "y")


class TestTransferFit:
    def test_frozen_first_layer_is_bitwise_source(self, tasks):
        X, y_source, y_target = tasks
        cfg = _cfg()
        source = fit_source(cfg, X, y_source)
        report = transfer_fit(cfg, X, y_target, source.params,
                              TransferPlan("y_source", "y_target"))
        npt.assert_array_equal(report.params.w1, source.params.w1)
        npt.assert_array_equal(report.params.b1, source.params.b1)
        assert not np.array_equal(report.params.w2, source.params.w2)
        start_risk = expnn.risk(source.params, cfg, X, y_target).total
        assert report.risk.total <= start_risk

    def test_cold_start_without_freeze_matches_scratch(self, tasks):
        X, _, y_target = tasks
        cfg = _cfg(seed=7)
        plan = TransferPlan("y_source", "y_target",
                            freeze=expnn.FreezeSpec.none(),
                            reuse_as_warm_start=False)
        donor = expnn.init_params(X.shape[1], _cfg(seed=99))
        via_transfer = transfer_fit(cfg, X, y_target, donor, plan)
        scratch = expnn.minimize(cfg, X, y_target)
        npt.assert_array_equal(via_transfer.params.w1, scratch.params.w1)
        npt.assert_array_equal(via_transfer.params.b1, scratch.params.b1)
        npt.assert_array_equal(via_transfer.params.w2, scratch.params.w2)
        assert via_transfer.params.b2 == scratch.params.b2
        assert via_transfer.risk.total == scratch.risk.total
        assert via_transfer.iterations == scratch.iterations

    def test_freeze_everything_returns_source_unchanged(self, tasks):
        X, y_source, y_target = tasks
        cfg = _cfg()
        source = fit_source(cfg, X, y_source)
        report = transfer_fit(cfg, X, y_target, source.params,
                              TransferPlan("y_source", "y_target",
                                           freeze=expnn.FreezeSpec.everything()))
        assert report.iterations == 0
        npt.assert_array_equal(report.params.w1, source.params.w1)
        npt.assert_array_equal(report.params.w2, source.params.w2)
        assert report.params.b2 == source.params.b2
        assert report.risk.total == expnn.risk(source.params, cfg, X, y_target).total

    def test_warm_start_without_freeze_still_moves_everything(self, tasks):
        X, y_source, y_target = tasks
        cfg = _cfg()
        source = fit_source(cfg, X, y_source)
        report = transfer_fit(cfg, X, y_target, source.params,
                              TransferPlan("y_source", "y_target",
                                           freeze=expnn.FreezeSpec.none()))
        assert not np.array_equal(report.params.w1, source.params.w1)
        assert report.risk.total <= expnn.risk(source.params, cfg, X, y_target).total

    def test_hidden_unit_mismatch(self, tasks):
        X, y_source, y_target = tasks
        source = fit_source(_cfg(hidden_units=3, max_epochs=5), X, y_source)
        with pytest.raises(ConfigError, match="hidden units"):
            transfer_fit(_cfg(hidden_units=4), X, y_target, source.params,
                         TransferPlan("y_source", "y_target"))
