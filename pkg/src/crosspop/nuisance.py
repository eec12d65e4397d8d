"""The four nuisance functions: outcome, source, treatment, external.

Fits consume a `Workspace` of pre-encoded design rows so the per-fold work in
cross-fitting is pure row slicing.  Predictions are exposed in the exact form
the estimators consume (`NuisancePredictions`).
"""

from dataclasses import dataclass

import numpy as np

from ._rng import child_seed
from .data import MultiSourceDataset, StackedDataset, build_design
from .errors import FitError, ValidationError
from .learners import (
    BINOMIAL,
    GAUSSIAN,
    LearnerSpec,
    fit_multinomial,
    fit_multinomial_cv,
    fit_nnet,
    fit_super_learner,
)

JOINT = "joint"
SEPARATE = "separate"


@dataclass(frozen=True)
class SourceModelSpec:
    """Source-model choice: penalized multinomial logit (default) or the
    multinomial network analogue."""

    kind: str = "multinomial"  # multinomial | multinomial-nnet
    penalty: float | str = "cv"
    cv_folds: int = 5
    hidden_units: int = 3
    iters: int = 2000

    def __post_init__(self):
        if self.kind not in ("multinomial", "multinomial-nnet"):
            raise ValidationError(f"unknown source model {self.kind!r}")


@dataclass(frozen=True)
class Workspace:
    """Pre-encoded rows for one analysis: internal rows first, then external.

    `X` is the covariate(+EM) design shared by the outcome, source, separate
    treatment, and external models; the joint treatment model appends source
    indicator columns.
    """

    y: np.ndarray
    treat: np.ndarray
    source_idx: np.ndarray
    em_idx: np.ndarray | None
    is_external: np.ndarray
    X: np.ndarray
    source_block: np.ndarray  # (n_rows, m-1) indicators for the joint model
    n_sources: int
    source_labels: tuple
    em_levels: tuple | None
    outcome_family: str
    row_keys: np.ndarray | None  # canonical per-row content keys for ordering

    @property
    def n_rows(self) -> int:
        return len(self.y)


def build_workspace(dataset: MultiSourceDataset, external=None,
                    with_row_keys=True) -> Workspace:
    """Encode once; the categorical dictionary comes from the multi-source data."""
    design = build_design(
        dataset.covariates,
        effect_modifier_idx=dataset.effect_modifier_idx,
        em_levels=dataset.em_levels,
    )
    X_int = design.values
    m = dataset.n_sources
    if external is None:
        X = X_int
        y = dataset.y.astype(np.float64)
        treat = dataset.treat.astype(np.int64)
        source_idx = dataset.source_idx
        em_idx = dataset.effect_modifier_idx
        is_external = np.zeros(dataset.n, dtype=bool)
    else:
        stacked = StackedDataset(dataset, external)
        X_ext = design.encode_like(
            external.covariates,
            effect_modifier_idx=external.effect_modifier_idx,
            em_levels=dataset.em_levels,
        )
        X = np.vstack([X_int, X_ext])
        y = stacked.y
        treat = stacked.treat
        source_idx = stacked.source_idx
        em_idx = stacked.effect_modifier_idx
        is_external = stacked.is_external

    source_block = np.zeros((len(y), max(m - 1, 0)))
    for s in range(1, m):
        source_block[:, s - 1] = (source_idx == s).astype(np.float64)

    return Workspace(
        y=y,
        treat=treat,
        source_idx=source_idx,
        em_idx=em_idx,
        is_external=is_external,
        X=X,
        source_block=source_block,
        n_sources=m,
        source_labels=dataset.source_labels,
        em_levels=dataset.em_levels,
        outcome_family=GAUSSIAN if dataset.outcome_kind == "continuous" else BINOMIAL,
        row_keys=_row_keys(y, source_idx, treat, X, em_idx) if with_row_keys else None,
    )


def _row_keys(y, source_idx, treat, X, em_idx):
    """Content-derived sort keys making fold assignment row-order invariant."""
    import hashlib

    n = len(y)
    em = np.full(n, -1, dtype=np.int64) if em_idx is None else em_idx
    keys = np.empty(n, dtype=object)
    for i in range(n):
        h = hashlib.sha256()
        h.update(np.float64(y[i]).tobytes())
        h.update(np.int64(source_idx[i]).tobytes())
        h.update(np.int64(treat[i]).tobytes())
        h.update(np.int64(em[i]).tobytes())
        h.update(np.ascontiguousarray(X[i]).tobytes())
        keys[i] = h.hexdigest()
    return keys


@dataclass
class TreatmentModel:
    model_type: str
    joint_fit: object | None = None
    per_source: dict | None = None

    def predict_by_source(self, ws: Workspace, rows) -> np.ndarray:
        """P(A=1 | X, S=s) for every source s at each requested row."""
        m = ws.n_sources
        out = np.empty((len(rows), m))
        if self.model_type == SEPARATE:
            for s in range(m):
                out[:, s] = self.per_source[s].predict(ws.X[rows])
        else:
            for s in range(m):
                block = np.zeros((len(rows), max(m - 1, 0)))
                if s >= 1:
                    block[:, s - 1] = 1.0
                out[:, s] = self.joint_fit.predict(np.hstack([ws.X[rows], block]))
        return out


@dataclass
class NuisanceFits:
    """Fitted nuisances plus the row counts each fit actually saw."""

    outcome0: object
    outcome1: object
    source: object
    treatment: TreatmentModel
    external: object | None
    treatment_model_type: str
    row_counts: dict

    def predict(self, ws: Workspace, rows) -> "NuisancePredictions":
        rows = np.asarray(rows)
        X = ws.X[rows]
        q = self.source.predict(X)
        return NuisancePredictions(
            g0=np.asarray(self.outcome0.predict(X), dtype=np.float64),
            g1=np.asarray(self.outcome1.predict(X), dtype=np.float64),
            q=np.asarray(q, dtype=np.float64),
            e1=self.treatment.predict_by_source(ws, rows),
            p0=None if self.external is None
            else np.asarray(self.external.predict(X), dtype=np.float64),
        )


@dataclass
class NuisancePredictions:
    """Per-row nuisance values aligned to one set of evaluation rows."""

    g0: np.ndarray
    g1: np.ndarray
    q: np.ndarray   # (n, m) source probabilities over the internal sources
    e1: np.ndarray  # (n, m) P(A=1 | X, S=s) per source
    p0: np.ndarray | None  # P(S=external | X), stacked analyses only

    def outcome(self, a: int) -> np.ndarray:
        return self.g1 if a == 1 else self.g0


def marginal_propensity(preds: NuisancePredictions, a: int, renormalize=False) -> np.ndarray:
    """P(A=a | X) composed over sources: sum_s P(A=a|S=s,X) P(S=s|X).

    With `renormalize` the source weights are rescaled to condition on the
    internal sources (used by the external-population estimator, where
    treatment is undefined on external rows).
    """
    e_a = preds.e1 if a == 1 else 1.0 - preds.e1
    q = preds.q
    if renormalize:
        q = q / q.sum(axis=1, keepdims=True)
    return np.sum(e_a * q, axis=1)


def fit_outcome_models(ws: Workspace, rows, spec: LearnerSpec, seed: int):
    """Per-arm outcome fits on internal rows: regress Y on X within A=a."""
    rows = np.asarray(rows)
    rows = rows[~ws.is_external[rows]]
    fits = []
    for a in (0, 1):
        arm = rows[ws.treat[rows] == a]
        if len(arm) < 2:
            raise FitError(f"empty arm (A={a} has {len(arm)} rows in the outcome fold)")
        fits.append(
            fit_super_learner(spec, ws.X[arm], ws.y[arm], ws.outcome_family,
                              seed=child_seed(seed, "outcome", a))
        )
    return fits[0], fits[1]


def fit_source_model(ws: Workspace, rows, spec: SourceModelSpec, seed: int):
    """P(S=s | X) over the internal sources; every source must appear."""
    rows = np.asarray(rows)
    rows = rows[~ws.is_external[rows]]
    labels = ws.source_idx[rows]
    classes = tuple(range(ws.n_sources))
    if ws.n_sources == 1:
        return _SingleSourceFit()
    if spec.kind == "multinomial-nnet":
        return fit_nnet(ws.X[rows], labels, "multinomial", hidden_units=spec.hidden_units,
                        seed=child_seed(seed, "source"), iters=spec.iters, classes=classes)
    if spec.penalty == "cv":
        return fit_multinomial_cv(ws.X[rows], labels, cv_folds=spec.cv_folds,
                                  seed=child_seed(seed, "source"), classes=classes)
    return fit_multinomial(ws.X[rows], labels, penalty=float(spec.penalty), classes=classes)


class _SingleSourceFit:
    """Degenerate source model when m=1: P(S=s|X) = 1."""

    learner_id = "constant"

    def predict(self, values):
        return np.ones((len(values), 1))


def fit_treatment_model(ws: Workspace, rows, spec: LearnerSpec, model_type: str,
                        seed: int) -> TreatmentModel:
    """P(A=1 | X, S=s): one joint fit with source indicators, or per-source fits."""
    if model_type not in (JOINT, SEPARATE):
        raise ValidationError(f"unknown treatment_model_type {model_type!r}")
    rows = np.asarray(rows)
    rows = rows[~ws.is_external[rows]]
    if model_type == SEPARATE:
        per_source = {}
        for s in range(ws.n_sources):
            sub = rows[ws.source_idx[rows] == s]
            arms = set(ws.treat[sub].tolist())
            if arms != {0, 1}:
                raise FitError(
                    f"single-arm source stratum (source {ws.source_labels[s]!r} "
                    f"in the treatment fold has arms {sorted(arms)})"
                )
            per_source[s] = fit_super_learner(
                spec, ws.X[sub], ws.treat[sub].astype(np.float64), BINOMIAL,
                seed=child_seed(seed, "treatment", s))
        return TreatmentModel(model_type=SEPARATE, per_source=per_source)
    design = np.hstack([ws.X[rows], ws.source_block[rows]])
    fit = fit_super_learner(spec, design, ws.treat[rows].astype(np.float64), BINOMIAL,
                            seed=child_seed(seed, "treatment"))
    return TreatmentModel(model_type=JOINT, joint_fit=fit)


def fit_external_model(ws: Workspace, rows, spec: LearnerSpec, seed: int):
    """P(S=external | X) on stacked rows; the fold must contain both kinds."""
    rows = np.asarray(rows)
    flags = ws.is_external[rows].astype(np.float64)
    if flags.sum() == 0 or flags.sum() == len(rows):
        raise FitError("external-model fold lacks internal or external rows")
    return fit_super_learner(spec, ws.X[rows], flags, BINOMIAL,
                             seed=child_seed(seed, "external"))


@dataclass(frozen=True)
class NuisanceConfig:
    outcome: LearnerSpec
    treatment: LearnerSpec
    treatment_model_type: str = SEPARATE
    source: SourceModelSpec = SourceModelSpec()
    external: LearnerSpec | None = None


def fit_all(ws: Workspace, role_rows: dict, config: NuisanceConfig, seed: int) -> NuisanceFits:
    """Fit every nuisance on its role rows (roles may share rows when not
    cross-fitting)."""
    out0, out1 = fit_outcome_models(ws, role_rows["outcome"], config.outcome, seed)
    source = fit_source_model(ws, role_rows["source"], config.source, seed)
    treatment = fit_treatment_model(ws, role_rows["treatment"], config.treatment,
                                    config.treatment_model_type, seed)
    external = None
    if "external" in role_rows:
        if config.external is None:
            raise ValidationError("external learner spec required for external targets")
        external = fit_external_model(ws, role_rows["external"], config.external, seed)
    counts = {name: int(len(rows)) for name, rows in role_rows.items()}
    orows = np.asarray(role_rows["outcome"])
    orows = orows[~ws.is_external[orows]]
    counts["outcome_arm0"] = int(np.sum(ws.treat[orows] == 0))
    counts["outcome_arm1"] = int(np.sum(ws.treat[orows] == 1))
    return NuisanceFits(
        outcome0=out0,
        outcome1=out1,
        source=source,
        treatment=treatment,
        external=external,
        treatment_model_type=config.treatment_model_type,
        row_counts=counts,
    )
