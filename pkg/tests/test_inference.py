import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosspop.errors import ValidationError
from crosspop.estimators import TargetDescriptor
from crosspop.inference import (
    EstimateRow,
    assemble_rows,
    correlation_from_if,
    norm_quantile,
    scb_critical_value,
    simultaneous_bands,
    wald_ci,
)

# frozen reference quantiles (inverse normal CDF, independently computed)
Z_975 = 1.959963984540054
Z_95 = 1.6448536269514722
Z_995 = 2.5758293035489004
# solves (2*Phi(c)-1)^2 = 0.95: critical value for two independent targets
C_TWO_INDEP = 2.2364766445577904


def test_quantile_against_frozen_references():
    assert abs(norm_quantile(0.975) - Z_975) < 1e-9
    assert abs(norm_quantile(0.95) - Z_95) < 1e-9
    assert abs(norm_quantile(0.995) - Z_995) < 1e-9
    assert abs(norm_quantile(0.025) + Z_975) < 1e-9
    assert abs(norm_quantile(1e-6) + 4.753424308822899) < 1e-8


def test_wald_ci_standard_case():
    lo, hi = wald_ci(0.0, 1.0, 0.95)
    assert abs(lo + 1.959964) < 1e-6
    assert abs(hi - 1.959964) < 1e-6


def test_wald_ci_degenerate_se():
    assert wald_ci(5.0, 0.0, 0.95) == (5.0, 5.0)


def test_wald_ci_reported_row():
    lo, hi = wald_ci(6.6294, 0.1535, 0.95)
    assert abs(lo - 6.3285) < 5e-5
    assert abs(hi - 6.9303) < 5e-5


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-50, 50),
    st.floats(0.0, 10.0),
    st.floats(0.5, 0.99),
)
def test_wald_ci_symmetric_and_linear_in_se(est, se, level):
    lo, hi = wald_ci(est, se, level)
    assert abs((est - lo) - (hi - est)) < 1e-9 * (1 + se)
    lo2, hi2 = wald_ci(est, 2 * se, level)
    assert abs((hi2 - lo2) - 2 * (hi - lo)) < 1e-7 * (1 + se)


def test_scb_two_independent_targets():
    corr = np.eye(2)
    c = scb_critical_value(corr, 0.95, draws=100_000, seed=42)
    assert abs(c - C_TWO_INDEP) < 0.01


def test_scb_singleton_matches_wald():
    est = np.array([2.0])
    se = np.array([0.5])
    if_matrix = np.random.default_rng(0).normal(size=(50, 1))
    lo, hi, c = simultaneous_bands(est, if_matrix, level=0.95, draws=100_000, seed=3, ses=se)
    # sup over a singleton: band equals the pointwise interval within MC error
    assert abs(c - Z_975) <= 0.005 * 1.96
    assert lo[0] <= 2.0 - 0.5 * Z_975 + 1e-12
    assert hi[0] >= 2.0 + 0.5 * Z_975 - 1e-12


def test_scb_contains_pointwise_ci():
    rng = np.random.default_rng(5)
    if_matrix = rng.normal(size=(200, 4))
    est = np.array([1.0, 2.0, 3.0, 4.0])
    se = np.array([0.1, 0.2, 0.3, 0.4])
    lo, hi, c = simultaneous_bands(est, if_matrix, draws=20_000, seed=9, ses=se)
    assert c >= Z_975
    assert np.all(lo <= est - Z_975 * se)
    assert np.all(hi >= est + Z_975 * se)


def test_scb_deterministic():
    corr = np.array([[1.0, 0.4], [0.4, 1.0]])
    c1 = scb_critical_value(corr, 0.95, draws=30_000, seed=11)
    c2 = scb_critical_value(corr, 0.95, draws=30_000, seed=11)
    assert c1 == c2


def test_scb_perfect_correlation_collapses_to_pointwise():
    corr = np.ones((3, 3))
    c = scb_critical_value(corr, 0.95, draws=100_000, seed=13)
    assert abs(c - Z_975) < 0.02


def test_non_psd_correlation_projected():
    corr = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    with pytest.warns(UserWarning, match="not PSD"):
        c = scb_critical_value(corr, 0.95, draws=5_000, seed=1)
    assert np.isfinite(c)


def test_correlation_from_if():
    rng = np.random.default_rng(2)
    base = rng.normal(size=300)
    W = np.column_stack([base, base, rng.normal(size=300)])
    corr = correlation_from_if(W)
    assert abs(corr[0, 1] - 1.0) < 1e-12
    assert abs(corr[0, 2]) < 0.2
    assert np.allclose(np.diag(corr), 1.0)


def test_assemble_rows_shapes():
    targets = [TargetDescriptor("internal", source=s) for s in ("A", "B", "C")]
    points = np.arange(9, dtype=float).reshape(3, 3)
    variances = np.full((3, 3), 0.04)
    tables = assemble_rows(targets, points, variances)
    assert set(tables) == {"arm0", "arm1", "diff"}
    assert len(tables["diff"]) == 3
    row = tables["diff"][0]
    assert row.scb_lower is None
    assert row.ci_lower <= row.estimate <= row.ci_upper
    assert abs((row.ci_upper - row.estimate) - Z_975 * 0.2) < 1e-9


def test_assemble_rows_empty():
    tables = assemble_rows([], np.zeros((0, 3)), np.zeros((0, 3)))
    assert tables == {"arm0": [], "arm1": [], "diff": []}


def test_estimate_row_invariants_enforced():
    t = TargetDescriptor("external")
    with pytest.raises(ValidationError):
        EstimateRow(t, "diff", 1.0, 0.1, ci_lower=1.2, ci_upper=1.4)
    with pytest.raises(ValidationError):
        EstimateRow(t, "diff", 1.0, 0.1, ci_lower=0.8, ci_upper=1.2,
                    scb_lower=0.9, scb_upper=1.3)


def test_quantile_rejects_bad_levels():
    with pytest.raises(ValidationError):
        norm_quantile(0.0)
    with pytest.raises(ValidationError):
        norm_quantile(1.0)
