import numpy as np
import pytest

from crosspop.errors import ValidationError
from crosspop.simulate import SimConfig, generate_multisource, tau, true_effects


def test_same_seed_bit_identical():
    cfg = SimConfig(n_per_source=(50, 60), n_external=40, seed=123)
    ds1, ext1 = generate_multisource(cfg)
    ds2, ext2 = generate_multisource(cfg)
    assert np.array_equal(ds1.y, ds2.y)
    assert np.array_equal(ds1.treat, ds2.treat)
    assert np.array_equal(ds1.source_idx, ds2.source_idx)
    for c1, c2 in zip(ext1.covariates.columns, ext2.covariates.columns):
        assert np.array_equal(c1.values, c2.values)


def test_constant_effect_recovered_by_raw_contrast():
    cfg = SimConfig(
        n_per_source=(100_000,),
        n_covariates=1,
        source_slopes=0.0,
        treat_slopes=0.0,
        baseline_slopes=0.0,
        effect_base=3.0,
        seed=4,
        exact_sizes=False,
    )
    ds, _ = generate_multisource(cfg)
    diff = ds.y[ds.treat == 1].mean() - ds.y[ds.treat == 0].mean()
    assert abs(diff - 3.0) < 0.05


def test_exact_sizes_match_example_shape():
    cfg = SimConfig(n_per_source=(2312, 1147, 592), n_external=10_083, seed=2)
    ds, ext = generate_multisource(cfg)
    assert ds.source_counts().tolist() == [2312, 1147, 592]
    assert ext.n == 10_083


def test_true_effects_constant():
    cfg = SimConfig(n_per_source=(100, 100), n_external=50, effect_base=3.0, seed=1)
    truth = true_effects(cfg)
    assert truth["ate"] == {"s0": 3.0, "s1": 3.0, "external": 3.0}
    assert all(m == "exact" for m in truth["method"].values())


def test_true_effects_linear_closed_form_external():
    cfg = SimConfig(
        n_per_source=(100,),
        n_external=50,
        source_slopes=0.0,
        effect_base=2.0,
        effect_slope=1.0,
        external_shift=0.5,
        seed=1,
    )
    truth = true_effects(cfg, oracle_n=50_000)
    assert abs(truth["ate"]["external"] - 2.5) < 1e-12
    assert truth["method"][("ate", "external")] == "closed-form"
    assert abs(truth["ate"]["s0"] - 2.0) < 1e-12  # null selection: E[X|s]=0


def test_true_effects_mc_stable_across_oracle_seeds():
    cfg = SimConfig(
        n_per_source=(100, 100),
        n_external=50,
        effect_base=2.0,
        effect_slope=0.7,
        source_slopes=0.6,
        seed=1,
    )
    t1 = true_effects(cfg, oracle_n=1_000_000, oracle_seed=1)
    t2 = true_effects(cfg, oracle_n=1_000_000, oracle_seed=2)
    for pop in ("s0", "s1"):
        assert abs(t1["ate"][pop] - t2["ate"][pop]) < 5e-3
        assert t1["method"][("ate", pop)] == "mc"


def test_subgroup_truths_exact_per_level():
    cfg = SimConfig(
        n_per_source=(100, 100),
        n_external=50,
        em_levels=3,
        effect_em=(0.0, 1.0, -0.5),
        effect_base=3.0,
        seed=1,
    )
    truth = true_effects(cfg)
    assert truth["ste"][("s0", 1)] == 4.0
    assert truth["ste"][("external", 2)] == 2.5


def test_treatment_assignment_recoverable(rng):
    cfg = SimConfig(
        n_per_source=(60_000,),
        n_covariates=2,
        source_slopes=0.0,
        treat_slopes=0.4,
        seed=8,
        exact_sizes=False,
    )
    ds, _ = generate_multisource(cfg)
    from crosspop.learners import fit_glm
    from crosspop.nuisance import build_workspace

    ws = build_workspace(ds)
    fit = fit_glm(ws.X, ds.treat.astype(float), "binomial")
    truth = cfg.treat_coef()[0]
    se_scale = 3.0 / np.sqrt(len(ds.y))  # crude 3-SE band with unit-ish information
    assert np.max(np.abs(fit.coef - truth)) < 6 * se_scale


def test_external_shift_applied():
    cfg = SimConfig(n_per_source=(4000,), n_external=30_000, external_shift=0.4,
                    source_slopes=0.0, seed=3, exact_sizes=False)
    ds, ext = generate_multisource(cfg)
    means = [c.values.mean() for c in ext.covariates.columns]
    assert np.allclose(means, 0.4, atol=0.03)
    int_means = [c.values.mean() for c in ds.covariates.columns]
    assert np.allclose(int_means, 0.0, atol=0.05)


def test_misspec_toggle_changes_outcome_only():
    base = SimConfig(n_per_source=(500,), seed=6, exact_sizes=False)
    tweaked = SimConfig(n_per_source=(500,), seed=6, exact_sizes=False,
                        misspec=frozenset({"outcome"}))
    ds0, _ = generate_multisource(base)
    ds1, _ = generate_multisource(tweaked)
    assert np.array_equal(ds0.treat, ds1.treat)
    assert np.array_equal(ds0.source_idx, ds1.source_idx)
    assert not np.allclose(ds0.y, ds1.y)


def test_unknown_misspec_rejected():
    with pytest.raises(ValidationError, match="misspecification"):
        SimConfig(misspec=frozenset({"bogus"}))


def test_written_csv_round_trips_bit_for_bit(tmp_path):
    from crosspop.data import read_csv_columns
    from crosspop.simulate import write_simulated

    cfg = SimConfig(n_per_source=(40, 30), n_external=25, em_levels=2,
                    effect_em=(0.0, 1.0), seed=11)
    paths = write_simulated(cfg, tmp_path, stem="rt")
    ds, ext = generate_multisource(cfg)
    cols = read_csv_columns(paths["multisource"])
    assert np.array_equal(np.array([float(v) for v in cols["Y"]]), ds.y)
    assert np.array_equal(
        np.array([float(v) for v in cols["X1"]]), ds.covariates.column("X1").values
    )
    ecols = read_csv_columns(paths["external"])
    assert np.array_equal(
        np.array([float(v) for v in ecols["X2"]]), ext.covariates.column("X2").values
    )


def test_tau_constant_by_level():
    cfg = SimConfig(em_levels=2, effect_em=(0.5, -0.5), effect_base=1.0)
    X = np.zeros((4, 2))
    em = np.array([0, 1, 0, 1])
    assert tau(cfg, X, em).tolist() == [1.5, 0.5, 1.5, 0.5]
