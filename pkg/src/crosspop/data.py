"""Canonical in-memory representation of multi-source and external datasets.

Datasets are validated once at construction and frozen (arrays are made
read-only) so they can be shared across workers without copies.  Covariate
encoding produces an intercept-first design matrix whose categorical
dictionary is learned from the multi-source data and reused verbatim for
external rows.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"

_KINDS = (CONTINUOUS, BINARY, CATEGORICAL)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Column:
    """One covariate column: float64 values for continuous/binary, str for categorical."""

    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown column kind {self.kind!r} for {self.name!r}")
        object.__setattr__(self, "values", _freeze(self.values))


@dataclass(frozen=True)
class CovariateTable:
    columns: tuple

    @property
    def n(self) -> int:
        return 0 if not self.columns else len(self.columns[0].values)

    @property
    def names(self) -> tuple:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def take(self, idx) -> "CovariateTable":
        return CovariateTable(
            tuple(Column(c.name, c.kind, c.values[idx]) for c in self.columns)
        )

    def schema(self) -> tuple:
        return tuple((c.name, c.kind) for c in self.columns)


def _as_float_column(name, raw):
    try:
        values = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(f"non-numeric values in column {name!r}") from None
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"missing or non-finite values in column {name!r}")
    return values


def make_column(name: str, raw, kind: str | None = None) -> Column:
    """Build a typed column, inferring the kind when not declared.

    Values that all parse as floats become continuous (binary when the value
    set is a subset of {0, 1}); anything else is categorical.
    """
    arr = np.asarray(raw)
    if kind is None:
        if arr.dtype.kind in "fiub":
            values = _as_float_column(name, arr)
            kind = BINARY if set(np.unique(values)) <= {0.0, 1.0} else CONTINUOUS
            return Column(name, kind, values)
        try:
            values = np.array([float(v) for v in arr], dtype=np.float64)
        except (TypeError, ValueError):
            return Column(name, CATEGORICAL, _string_column(name, arr))
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"missing or non-finite values in column {name!r}")
        kind = BINARY if set(np.unique(values)) <= {0.0, 1.0} else CONTINUOUS
        return Column(name, kind, values)
    if kind == CATEGORICAL:
        return Column(name, kind, _string_column(name, arr))
    return Column(name, kind, _as_float_column(name, arr))


def _string_column(name, raw):
    values = np.array([str(v) for v in raw], dtype=object)
    if any(v == "" for v in values):
        raise ValidationError(f"missing values in column {name!r}")
    return values


@dataclass(frozen=True)
class MultiSourceDataset:
    """Pooled individual-level data: outcome, source, treatment, covariates.

    Source labels are canonicalized to sorted order; `source_idx` indexes into
    `source_labels`.  The optional effect modifier is a categorical vector kept
    outside the covariate table.
    """

    y: np.ndarray
    source_idx: np.ndarray
    treat: np.ndarray
    covariates: CovariateTable
    source_labels: tuple
    effect_modifier_idx: np.ndarray | None = None
    em_levels: tuple | None = None
    outcome_kind: str = CONTINUOUS

    def __post_init__(self):
        for name in ("y", "source_idx", "treat"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if self.effect_modifier_idx is not None:
            object.__setattr__(
                self, "effect_modifier_idx", _freeze(self.effect_modifier_idx)
            )

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_sources(self) -> int:
        return len(self.source_labels)

    def source_counts(self) -> np.ndarray:
        return np.bincount(self.source_idx, minlength=self.n_sources)

    def take(self, idx) -> "MultiSourceDataset":
        em = None if self.effect_modifier_idx is None else self.effect_modifier_idx[idx]
        return MultiSourceDataset(
            y=self.y[idx],
            source_idx=self.source_idx[idx],
            treat=self.treat[idx],
            covariates=self.covariates.take(idx),
            source_labels=self.source_labels,
            effect_modifier_idx=em,
            em_levels=self.em_levels,
            outcome_kind=self.outcome_kind,
        )


def validate_dataset(
    y,
    source,
    treat,
    covariates: CovariateTable,
    effect_modifier=None,
    outcome_kind: str | None = None,
) -> MultiSourceDataset:
    """Validate raw columns and return the canonical dataset.

    Raises ValidationError on length mismatch, non-0/1 treatment, missing
    values, an empty source stratum, or an effect modifier duplicated inside
    the covariate table.
    """
    y = _as_float_column("Y", y)
    n = len(y)
    if n < 1:
        raise ValidationError("dataset is empty")

    source = np.array([str(v) for v in np.asarray(source)], dtype=object)
    if len(source) != n:
        raise ValidationError(
            f"column length mismatch: S has {len(source)} rows, Y has {n}"
        )
    if any(v == "" for v in source):
        raise ValidationError("missing values in column 'S'")

    treat_f = _as_float_column("A", treat)
    if len(treat_f) != n:
        raise ValidationError(
            f"column length mismatch: A has {len(treat_f)} rows, Y has {n}"
        )
    if not set(np.unique(treat_f)) <= {0.0, 1.0}:
        raise ValidationError("treatment not coded 0/1")
    treat_i = treat_f.astype(np.int8)

    if covariates.n != n:
        raise ValidationError(
            f"column length mismatch: X has {covariates.n} rows, Y has {n}"
        )
    for c in covariates.columns:
        if len(c.values) != n:
            raise ValidationError(
                f"column length mismatch: {c.name!r} has {len(c.values)} rows, Y has {n}"
            )

    labels = tuple(sorted(set(source)))
    label_to_idx = {lab: i for i, lab in enumerate(labels)}
    source_idx = np.array([label_to_idx[v] for v in source], dtype=np.int64)
    counts = np.bincount(source_idx, minlength=len(labels))
    if np.any(counts < 1):
        raise ValidationError("empty source stratum")

    em_idx = None
    em_levels = None
    if effect_modifier is not None:
        em = np.array([str(v) for v in np.asarray(effect_modifier)], dtype=object)
        if len(em) != n:
            raise ValidationError(
                f"column length mismatch: EM has {len(em)} rows, Y has {n}"
            )
        if any(v == "" for v in em):
            raise ValidationError("missing values in column 'EM'")
        for c in covariates.columns:
            if c.kind == CATEGORICAL and np.array_equal(c.values, em):
                raise ValidationError(
                    f"effect modifier duplicated inside X (column {c.name!r})"
                )
        em_levels = tuple(sorted(set(em)))
        lvl_to_idx = {lab: i for i, lab in enumerate(em_levels)}
        em_idx = np.array([lvl_to_idx[v] for v in em], dtype=np.int64)

    if outcome_kind is None:
        outcome_kind = BINARY if set(np.unique(y)) <= {0.0, 1.0} else CONTINUOUS
    if outcome_kind == BINARY and not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValidationError("binary outcome must be coded 0/1")

    return MultiSourceDataset(
        y=y,
        source_idx=source_idx,
        treat=treat_i,
        covariates=covariates,
        source_labels=labels,
        effect_modifier_idx=em_idx,
        em_levels=em_levels,
        outcome_kind=outcome_kind,
    )


@dataclass(frozen=True)
class ExternalSample:
    """Covariate-only sample from the external target population."""

    covariates: CovariateTable
    effect_modifier_idx: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.covariates.n


def validate_external(
    covariates: CovariateTable, dataset: MultiSourceDataset, effect_modifier=None
) -> ExternalSample:
    """Check the external sample against the paired multi-source schema."""
    if covariates.schema() != dataset.covariates.schema():
        raise ValidationError(
            "external covariate schema mismatch: expected columns "
            f"{dataset.covariates.schema()}, got {covariates.schema()}"
        )
    if covariates.n < 1:
        raise ValidationError("external sample is empty")
    em_idx = None
    if effect_modifier is not None:
        if dataset.em_levels is None:
            raise ValidationError("external effect modifier supplied without one in the dataset")
        em = np.array([str(v) for v in np.asarray(effect_modifier)], dtype=object)
        if len(em) != covariates.n:
            raise ValidationError("column length mismatch in external effect modifier")
        unseen = sorted(set(em) - set(dataset.em_levels))
        if unseen:
            raise ValidationError(f"unseen effect modifier levels in external data: {unseen}")
        lvl_to_idx = {lab: i for i, lab in enumerate(dataset.em_levels)}
        em_idx = np.array([lvl_to_idx[v] for v in em], dtype=np.int64)
    return ExternalSample(covariates=covariates, effect_modifier_idx=em_idx)


@dataclass(frozen=True)
class StackedDataset:
    """Multi-source rows followed by external rows (N = n + n0).

    External rows carry the synthetic source index -1; their outcome and
    treatment slots hold NaN / -1 and must never be read.
    """

    dataset: MultiSourceDataset
    external: ExternalSample

    @property
    def n_internal(self) -> int:
        return self.dataset.n

    @property
    def n_total(self) -> int:
        return self.dataset.n + self.external.n

    @property
    def is_external(self) -> np.ndarray:
        flags = np.zeros(self.n_total, dtype=bool)
        flags[self.dataset.n :] = True
        return flags

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.dataset.y, np.full(self.external.n, np.nan)])

    @property
    def treat(self) -> np.ndarray:
        return np.concatenate(
            [self.dataset.treat.astype(np.int64), np.full(self.external.n, -1, dtype=np.int64)]
        )

    @property
    def source_idx(self) -> np.ndarray:
        return np.concatenate(
            [self.dataset.source_idx, np.full(self.external.n, -1, dtype=np.int64)]
        )

    @property
    def effect_modifier_idx(self) -> np.ndarray | None:
        if self.dataset.effect_modifier_idx is None:
            return None
        if self.external.effect_modifier_idx is None:
            raise ValidationError("external effect modifier required for subgroup analyses")
        return np.concatenate(
            [self.dataset.effect_modifier_idx, self.external.effect_modifier_idx]
        )

    @property
    def covariates(self) -> CovariateTable:
        cols = []
        for c_int, c_ext in zip(self.dataset.covariates.columns, self.external.covariates.columns):
            cols.append(Column(c_int.name, c_int.kind, np.concatenate([c_int.values, c_ext.values])))
        return CovariateTable(tuple(cols))


def stack_with_external(dataset: MultiSourceDataset, external: ExternalSample) -> StackedDataset:
    if external.covariates.schema() != dataset.covariates.schema():
        raise ValidationError("external covariate schema mismatch")
    return StackedDataset(dataset=dataset, external=external)


@dataclass(frozen=True)
class DesignMatrix:
    """Encoded design: intercept first, one-hot categoricals with the reference
    level (lexicographically smallest) dropped.

    `column_map` pairs each column with (term, level-or-None); `levels` holds
    the dictionary learned from the multi-source data so external rows encode
    identically.  Standardization stats cover non-intercept columns and are
    consumed by penalized fits only.
    """

    values: np.ndarray
    column_map: tuple
    levels: dict
    center: np.ndarray = field(repr=False, default=None)
    scale: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(np.asarray(self.values, dtype=np.float64)))
        if self.center is None:
            vals = self.values
            center = vals.mean(axis=0)
            scale = vals.std(axis=0)
            center[0] = 0.0
            scale[0] = 1.0
            scale[scale == 0.0] = 1.0
            object.__setattr__(self, "center", _freeze(center))
            object.__setattr__(self, "scale", _freeze(scale))

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def encode_like(self, covariates: CovariateTable, effect_modifier_idx=None,
                    em_levels=None, source_idx=None, source_labels=None,
                    treat=None) -> np.ndarray:
        """Encode new rows with this design's dictionary (unseen levels error)."""
        return _encode(
            self.column_map, self.levels, covariates, effect_modifier_idx,
            em_levels, source_idx, source_labels, treat,
        )


def _categorical_terms(name, values):
    return sorted(set(values))


def build_design(
    covariates: CovariateTable,
    effect_modifier_idx=None,
    em_levels=None,
    source_idx=None,
    source_labels=None,
    treat=None,
) -> DesignMatrix:
    """Learn the encoding dictionary from these rows and encode them.

    Flags mirror the columns appended after covariates: the effect modifier
    (always included when present), the source as a categorical predictor, and
    the raw treatment indicator.
    """
    column_map = [("(intercept)", None)]
    levels = {}
    for c in covariates.columns:
        if c.kind == CATEGORICAL:
            levs = _categorical_terms(c.name, c.values)
            levels[c.name] = levs
            column_map.extend((c.name, lv) for lv in levs[1:])
        else:
            column_map.append((c.name, None))
    if effect_modifier_idx is not None:
        levels["(em)"] = list(range(len(em_levels)))
        column_map.extend(("(em)", i) for i in range(1, len(em_levels)))
    if source_idx is not None:
        levels["(source)"] = list(range(len(source_labels)))
        column_map.extend(("(source)", i) for i in range(1, len(source_labels)))
    if treat is not None:
        column_map.append(("(treatment)", None))
    column_map = tuple(column_map)
    values = _encode(
        column_map, levels, covariates, effect_modifier_idx, em_levels,
        source_idx, source_labels, treat,
    )
    return DesignMatrix(values=values, column_map=column_map, levels=levels)


def encode_design(dataset: MultiSourceDataset, include_treatment=False,
                  include_source=False) -> DesignMatrix:
    """Encode a dataset's covariates (and effect modifier, when present),
    optionally appending the source as a categorical predictor and the raw
    treatment column."""
    return build_design(
        dataset.covariates,
        effect_modifier_idx=dataset.effect_modifier_idx,
        em_levels=dataset.em_levels,
        source_idx=dataset.source_idx if include_source else None,
        source_labels=dataset.source_labels if include_source else None,
        treat=dataset.treat if include_treatment else None,
    )


def _encode(column_map, levels, covariates, effect_modifier_idx, em_levels,
            source_idx, source_labels, treat):
    n = covariates.n
    cols = np.empty((n, len(column_map)), dtype=np.float64)
    for j, (term, level) in enumerate(column_map):
        if term == "(intercept)":
            cols[:, j] = 1.0
        elif term == "(em)":
            if effect_modifier_idx is None:
                raise ValidationError("design expects an effect modifier column")
            cols[:, j] = (effect_modifier_idx == level).astype(np.float64)
        elif term == "(source)":
            if source_idx is None:
                raise ValidationError("design expects a source column")
            cols[:, j] = (source_idx == level).astype(np.float64)
        elif term == "(treatment)":
            if treat is None:
                raise ValidationError("design expects a treatment column")
            cols[:, j] = np.asarray(treat, dtype=np.float64)
        else:
            c = covariates.column(term)
            if level is None:
                cols[:, j] = c.values.astype(np.float64)
            else:
                cols[:, j] = (c.values == level).astype(np.float64)
    # unseen-level check for categoricals encoded against a learned dictionary
    for c in covariates.columns:
        if c.kind == CATEGORICAL:
            known = set(levels.get(c.name, ()))
            seen = set(c.values)
            unseen = sorted(seen - known)
            if unseen:
                raise ValidationError(
                    f"unseen categorical levels in column {c.name!r}: {unseen}"
                )
    return cols


def read_csv_columns(path) -> dict:
    """Read a UTF-8 CSV with a header row into name -> list-of-strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        columns = {name: [] for name in header}
        if len(columns) != len(header):
            raise ValidationError(f"{path}: duplicate column names in header")
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            for name, value in zip(header, row):
                columns[name].append(value)
    return columns


def write_csv_columns(path, columns: dict) -> None:
    names = list(columns)
    n = len(columns[names[0]]) if names else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            writer.writerow([_csv_cell(columns[name][i]) for name in names])


def _csv_cell(v):
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return v
