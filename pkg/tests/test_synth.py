import numpy as np
import numpy.testing as npt
import pytest

from expnn.errors import ConfigError
from expnn.synth import SyntheticSpec, generate_synthetic


def reconstruct_source_signal(ds, truth):
    """Rebuild the noiseless y_source signal from the truth record."""
    sig = np.zeros(ds.n)
    parts = [truth["shared"], truth["source_own"]]
    for part in parts:
        for j, basis, c in zip(part["indices"], part["bases"], part["coefs"]):
            g = ds.X[:, j]
            if basis == "linear":
                v = g
            elif basis == "dominant":
                v = (g >= 1.0).astype(float)
            else:
                v = (g - 1.0) ** 2
            sd = v.std()
            sig = sig + (c * (v - v.mean()) / sd if sd > 1e-8 else 0.0)
    std = truth["signal_standardization"]["source"]
    return (sig - std["center"]) / std["scale"]


class TestSpec:
    @pytest.mark.parametrize("p,k", [(6, 2), (9, 3), (12, 4), (30, 8), (100, 8),
                                     (2, 2), (5, 2)])
    def test_k_causal(self, p, k):
        # Full sharing keeps the causal sets inside p for every listed case.
        spec = SyntheticSpec(n=50, p_snps=p, shared_signal_fraction=1.0)
        assert spec.k_causal == k

    def test_n_shared_rounds(self):
        assert SyntheticSpec(n=50, p_snps=30, shared_signal_fraction=0.5).n_shared == 4
        assert SyntheticSpec(n=50, p_snps=30, shared_signal_fraction=1.0).n_shared == 8
        assert SyntheticSpec(n=50, p_snps=30, shared_signal_fraction=0.0).n_shared == 0

    def test_causal_sets_must_fit(self):
        # k=2, fraction 0 needs 4 distinct SNPs but only 3 exist
        with pytest.raises(ConfigError, match="increase p_snps"):
            SyntheticSpec(n=50, p_snps=3, shared_signal_fraction=0.0)

    @pytest.mark.parametrize("kw", [
        dict(n=1),
        dict(p_snps=1),
        dict(maf_range=(0.0, 0.5)),
        dict(maf_range=(0.4, 0.2)),
        dict(maf_range=(0.1, 0.6)),
        dict(link="mystery"),
        dict(shared_signal_fraction=1.5),
        dict(noise="cauchy"),
        dict(noise_scale_source=0.0),
    ])
    def test_validation(self, kw):
        base = dict(n=50, p_snps=12)
        base.update(kw)
        with pytest.raises(ConfigError):
            SyntheticSpec(**base)

    def test_from_dict_round_trip(self):
        d = {"n": 40, "p_snps": 12, "maf_range": [0.1, 0.4],
             "shared_signal_fraction": 0.25, "noise": "skewed", "seed": 9}
        spec = SyntheticSpec.from_dict(d)
        assert spec.n == 40 and spec.maf_range == (0.1, 0.4)
        assert spec.noise == "skewed"

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(ConfigError, match="unknown synthetic spec fields"):
            SyntheticSpec.from_dict({"n": 40, "p_snps": 12, "sample_size": 40})


class TestGenerate:
    def test_deterministic(self):
        spec = SyntheticSpec(n=60, p_snps=15, seed=4)
        ds_a, truth_a = generate_synthetic(spec)
        ds_b, truth_b = generate_synthetic(spec)
        npt.assert_array_equal(ds_a.X, ds_b.X)
        npt.assert_array_equal(ds_a.phenotype("y_source"), ds_b.phenotype("y_source"))
        npt.assert_array_equal(ds_a.phenotype("y_target"), ds_b.phenotype("y_target"))
        assert truth_a == truth_b

    def test_seed_sensitivity(self):
        ds_a, _ = generate_synthetic(SyntheticSpec(n=60, p_snps=15, seed=4))
        ds_b, _ = generate_synthetic(SyntheticSpec(n=60, p_snps=15, seed=5))
        assert not np.array_equal(ds_a.X, ds_b.X)

    def test_genotypes_are_dosages(self):
        ds, _ = generate_synthetic(SyntheticSpec(n=100, p_snps=20, seed=1))
        assert set(np.unique(ds.X)) <= {0.0, 1.0, 2.0}
        assert ds.X.shape == (100, 20)
        assert [c.name for c in ds.columns] == [f"snp{j}" for j in range(1, 21)]

    def test_no_constant_columns_even_when_tiny(self):
        # Small n with low mafs makes all-zero columns likely on a first draw.
        ds, _ = generate_synthetic(
            SyntheticSpec(n=6, p_snps=25, maf_range=(0.05, 0.08), seed=0))
        for j in range(ds.p):
            assert len(np.unique(ds.X[:, j])) > 1

    def test_truth_structure(self):
        spec = SyntheticSpec(n=80, p_snps=30, shared_signal_fraction=0.5, seed=2)
        _, truth = generate_synthetic(spec)
        assert len(truth["mafs"]) == 30
        assert all(0.05 <= m <= 0.5 for m in truth["mafs"])
        shared = truth["shared"]
        source = truth["source_own"]
        target = truth["target_own"]
        assert len(shared["indices"]) == spec.n_shared == 4
        assert len(source["indices"]) == len(target["indices"]) == 4
        all_idx = shared["indices"] + source["indices"] + target["indices"]
        assert len(set(all_idx)) == len(all_idx)
        assert all(0 <= j < 30 for j in all_idx)
        assert len(shared["coefs"]) == 4
        assert all(0.7 <= abs(c) <= 1.3 for c in
                   shared["coefs"] + source["coefs"] + target["coefs"])

    def test_bases_cycle_down_the_causal_list(self):
        spec = SyntheticSpec(n=80, p_snps=30, shared_signal_fraction=0.5, seed=2)
        _, truth = generate_synthetic(spec)
        full = truth["shared"]["bases"] + truth["source_own"]["bases"]
        cycle = ["linear", "dominant", "quadratic"]
        assert full == [cycle[i % 3] for i in range(len(full))]
        target_full = truth["shared"]["bases"] + truth["target_own"]["bases"]
        assert target_full == [cycle[i % 3] for i in range(len(target_full))]

    def test_noise_kind_changes_y_not_genotypes(self):
        a, _ = generate_synthetic(SyntheticSpec(n=60, p_snps=15, seed=3,
                                                noise="homoscedastic-normal"))
        b, _ = generate_synthetic(SyntheticSpec(n=60, p_snps=15, seed=3,
                                                noise="skewed"))
        npt.assert_array_equal(a.X, b.X)
        assert not np.array_equal(a.phenotype("y_source"), b.phenotype("y_source"))

    def test_noise_seed_override(self):
        base = SyntheticSpec(n=60, p_snps=15, seed=3)
        a, truth_a = generate_synthetic(base)
        b, truth_b = generate_synthetic(
            SyntheticSpec(n=60, p_snps=15, seed=3, noise_seed_source=12345))
        npt.assert_array_equal(a.X, b.X)
        assert truth_b["noise"]["seed_source"] == 12345
        assert truth_a["noise"]["seed_source"] != 12345
        assert not np.array_equal(a.phenotype("y_source"), b.phenotype("y_source"))
        # The target stream is independent of the source override.
        npt.assert_array_equal(a.phenotype("y_target"), b.phenotype("y_target"))

    def test_heteroscedastic_spreads_with_signal(self):
        spec = SyntheticSpec(n=20000, p_snps=12, noise="heteroscedastic",
                             noise_scale_source=1.0, seed=8,
                             shared_signal_fraction=1.0)
        ds, truth = generate_synthetic(spec)
        # Residual spread should grow between low-signal and high-signal rows.
        sig = reconstruct_source_signal(ds, truth)
        resid = ds.phenotype("y_source") - sig
        low = np.abs(sig) < 0.5
        high = np.abs(sig) > 1.5
        assert resid[high].std() > 1.5 * resid[low].std()

    def test_homoscedastic_noise_matches_scale(self):
        spec = SyntheticSpec(n=20000, p_snps=12, noise_scale_source=0.4, seed=8,
                             shared_signal_fraction=1.0)
        ds, truth = generate_synthetic(spec)
        resid = ds.phenotype("y_source") - reconstruct_source_signal(ds, truth)
        assert resid.std() == pytest.approx(0.4, rel=0.05)

    def test_skewed_noise_is_skewed(self):
        spec = SyntheticSpec(n=20000, p_snps=12, noise="skewed", seed=8,
                             shared_signal_fraction=1.0)
        ds, truth = generate_synthetic(spec)
        resid = ds.phenotype("y_source") - reconstruct_source_signal(ds, truth)
        centered = resid - resid.mean()
        skew = np.mean(centered ** 3) / np.mean(centered ** 2) ** 1.5
        assert skew > 1.0

    def test_shared_fraction_controls_task_correlation(self):
        full, _ = generate_synthetic(
            SyntheticSpec(n=2000, p_snps=30, shared_signal_fraction=1.0,
                          noise_scale_source=0.3, noise_scale_target=0.3, seed=6))
        none, _ = generate_synthetic(
            SyntheticSpec(n=2000, p_snps=30, shared_signal_fraction=0.0,
                          noise_scale_source=0.3, noise_scale_target=0.3, seed=6))
        corr_full = np.corrcoef(full.phenotype("y_source"),
                                full.phenotype("y_target"))[0, 1]
        corr_none = np.corrcoef(none.phenotype("y_source"),
                                none.phenotype("y_target"))[0, 1]
        assert corr_full > 0.5
        assert abs(corr_none) < 0.3
