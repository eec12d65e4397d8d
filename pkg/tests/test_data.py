import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosspop.data import (
    CovariateTable,
    build_design,
    encode_design,
    make_column,
    read_csv_columns,
    stack_with_external,
    validate_dataset,
    validate_external,
    write_csv_columns,
)
from crosspop.errors import ValidationError


def table(**cols):
    return CovariateTable(tuple(make_column(k, v) for k, v in cols.items()))


def test_minimal_valid_dataset():
    ds = validate_dataset([1.0, 2.0], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))
    assert ds.n == 2
    assert ds.n_sources == 1
    assert ds.source_labels == ("A",)


def test_treatment_not_01():
    with pytest.raises(ValidationError, match="treatment not coded 0/1"):
        validate_dataset([1.0, 2.0], ["A", "A"], [0, 2], table(x=[0.5, 1.5]))


def test_length_mismatch():
    with pytest.raises(ValidationError, match="column length mismatch"):
        validate_dataset([1.0, 2.0, 3.0], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))


def test_missing_values_rejected():
    with pytest.raises(ValidationError, match="missing or non-finite"):
        validate_dataset([1.0, np.nan], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))


def test_em_duplicated_in_x():
    with pytest.raises(ValidationError, match="duplicated inside X"):
        validate_dataset(
            [1.0, 2.0, 3.0],
            ["A", "A", "B"],
            [0, 1, 0],
            CovariateTable((make_column("g", ["u", "v", "u"], kind="categorical"),)),
            effect_modifier=["u", "v", "u"],
        )


def test_source_labels_canonical_sorted():
    ds = validate_dataset([1.0, 2.0, 3.0], ["b", "a", "b"], [0, 1, 0], table(x=[1, 2, 3]))
    assert ds.source_labels == ("a", "b")
    assert ds.source_idx.tolist() == [1, 0, 1]


def test_encode_single_continuous():
    ds = validate_dataset([1.0, 2.0, 3.0], ["A"] * 3, [0, 1, 0], table(x=[1.0, 2.0, 3.0]))
    d = build_design(ds.covariates)
    assert d.values.shape == (3, 2)
    assert np.allclose(d.values[:, 0], 1.0)
    assert np.allclose(d.values[:, 1], [1.0, 2.0, 3.0])


def test_encode_categorical_drops_reference():
    tab = CovariateTable((make_column("g", ["a", "b", "c", "a"], kind="categorical"),))
    d = build_design(tab)
    assert d.values.shape == (4, 3)  # intercept + 2 indicators
    assert d.column_map == (("(intercept)", None), ("g", "b"), ("g", "c"))


def test_encode_include_source_three_levels():
    ds = validate_dataset(
        [1.0, 2.0, 3.0], ["s1", "s2", "s3"], [0, 1, 0], table(x=[1.0, 2.0, 3.0])
    )
    d = encode_design(ds, include_source=True)
    assert d.values.shape[1] == 2 + 2  # intercept, x, 2 source indicators


def test_encode_include_treatment():
    ds = validate_dataset([1.0, 2.0], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))
    d = encode_design(ds, include_treatment=True)
    assert d.column_map[-1] == ("(treatment)", None)
    assert d.values[:, -1].tolist() == [0.0, 1.0]


def test_stack_counts_and_labels():
    ds = validate_dataset([1.0, 2.0], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))
    ext = validate_external(table(x=[1.0, 2.0, 3.0]), ds)
    stacked = stack_with_external(ds, ext)
    assert stacked.n_total == 5
    assert stacked.is_external.sum() == 3
    assert stacked.source_idx.tolist() == [0, 0, -1, -1, -1]
    assert np.isnan(stacked.y[2:]).all()


def test_stack_schema_mismatch_on_permuted_columns():
    ds = validate_dataset(
        [1.0, 2.0], ["A", "A"], [0, 1], table(x1=[0.5, 1.5], x2=[1.0, 0.0])
    )
    with pytest.raises(ValidationError, match="schema mismatch"):
        validate_external(table(x2=[1.0], x1=[2.0]), ds)


def test_external_unseen_level_errors():
    tab = CovariateTable((make_column("g", ["a", "b"], kind="categorical"),))
    ds = validate_dataset([1.0, 2.0], ["A", "A"], [0, 1], tab)
    d = build_design(ds.covariates)
    bad = CovariateTable((make_column("g", ["a", "z"], kind="categorical"),))
    with pytest.raises(ValidationError, match="unseen categorical levels"):
        d.encode_like(bad)


def test_external_encoding_keeps_column_map():
    tab = CovariateTable((make_column("g", ["a", "b", "c"], kind="categorical"),))
    ds = validate_dataset([1.0, 2.0, 3.0], ["A"] * 3, [0, 0, 1], tab)
    d = build_design(ds.covariates)
    sub = CovariateTable((make_column("g", ["a", "a"], kind="categorical"),))
    enc = d.encode_like(sub)
    assert enc.shape == (2, d.values.shape[1])


@settings(max_examples=25, deadline=None)
@given(st.permutations(list(range(6))))
def test_encode_row_order_equivariant(perm):
    tab = table(x=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], z=[1, 0, 0, 1, 1, 0])
    d0 = build_design(tab)
    perm = np.array(perm)
    d1 = build_design(tab.take(perm))
    assert np.array_equal(d0.values[perm], d1.values)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "ds.csv"
    vals = [1.0, 0.1234567890123456, -3.5e-12]
    write_csv_columns(path, {"Y": vals, "S": ["a", "b", "a"], "A": [0, 1, 0]})
    cols = read_csv_columns(path)
    assert [float(v) for v in cols["Y"]] == vals
    assert cols["S"] == ["a", "b", "a"]


def test_csv_ragged_row_reports_row_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="row 3"):
        read_csv_columns(path)


def test_non_numeric_outcome_rejected():
    with pytest.raises(ValidationError, match="non-numeric"):
        validate_dataset(["1.0", "oops"], ["A", "A"], [0, 1], table(x=[0.5, 1.5]))


def test_empty_treatment_cell_rejected():
    with pytest.raises(ValidationError, match="column 'A'"):
        validate_dataset([1.0, 2.0], ["A", "A"], ["0", ""], table(x=[0.5, 1.5]))


def test_binary_kind_inference():
    col = make_column("t", ["0", "1", "0"])
    assert col.kind == "binary"
    col2 = make_column("x", ["0.5", "1", "0"])
    assert col2.kind == "continuous"
    col3 = make_column("g", ["u", "v", "u"])
    assert col3.kind == "categorical"
