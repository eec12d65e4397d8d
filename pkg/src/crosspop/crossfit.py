"""Stratified sample splitting, nuisance-role rotation, replications, and
median aggregation.

One replication: split rows into K stratified folds, and for each estimation
fold k fit each nuisance on its own rotated fold, evaluate the estimator on
fold k, then average the K split estimates (variances scaled by 1/K^2).
Replications are aggregated by medians; all randomness is keyed by
(seed, replication, stratum) so results are independent of scheduling and of
input row order.
"""

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from ._rng import child_rng, child_seed
from .errors import CrosspopError, ValidationError
from .estimators import (
    EvalBlock,
    effect_from_arms,
    estimate_arm_external,
    estimate_arm_internal,
)
from .nuisance import NuisanceConfig, Workspace, fit_all

FOLDS_INTERNAL = 4
FOLDS_EXTERNAL = 5

ROLE_ORDER = ("outcome", "treatment", "source", "external")

QUANTITIES = ("arm0", "arm1", "diff")


@dataclass(frozen=True)
class CrossFitPlan:
    folds: int
    replications: int
    seed: int
    strata: np.ndarray  # one label per row

    def __post_init__(self):
        if self.folds not in (FOLDS_INTERNAL, FOLDS_EXTERNAL):
            raise ValidationError("fold count must be 4 (internal) or 5 (external)")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        counts = {}
        for lab in self.strata.tolist():
            counts[lab] = counts.get(lab, 0) + 1
        small = sorted(lab for lab, c in counts.items() if c < self.folds)
        if small:
            raise ValidationError(
                f"strata smaller than the fold count: {small}; "
                "set cross_fitting to false for small samples"
            )


@dataclass(frozen=True)
class Target:
    """One estimation cell: an internal source (by index) or the external
    population, optionally restricted to an effect-modifier level."""

    source_idx: int | None  # None = external population
    em_level: int | None


def build_strata(ws: Workspace, by_subgroup: bool) -> np.ndarray:
    """Stratum labels: source index (external rows get their own stratum),
    crossed with the effect-modifier level for subgroup analyses."""
    n = ws.n_rows
    labels = np.empty(n, dtype=object)
    for i in range(n):
        base = "ext" if ws.is_external[i] else f"s{ws.source_idx[i]}"
        if by_subgroup:
            base += f"|em{ws.em_idx[i]}"
        labels[i] = base
    return labels


def stratified_split(strata, folds, seed, replication, order_keys=None) -> np.ndarray:
    """Fold labels 1..K: a seeded uniform permutation within each stratum,
    dealt round-robin.

    The permutation stream is keyed by (seed, replication, stratum label), and
    rows are pre-ordered by `order_keys` (canonical content keys) when given,
    so the assignment does not depend on input row order.
    """
    strata = np.asarray(strata, dtype=object)
    n = len(strata)
    fold_of = np.empty(n, dtype=np.int64)
    for lab in sorted(set(strata.tolist())):
        rows = np.flatnonzero(strata == lab)
        if len(rows) < folds:
            raise ValidationError(
                f"stratum {lab!r} has {len(rows)} rows < {folds} folds; "
                "set cross_fitting to false for small samples"
            )
        if order_keys is not None:
            rows = rows[np.argsort(order_keys[rows], kind="stable")]
        rng = child_rng(seed, "split", replication, lab)
        rows = rows[rng.permutation(len(rows))]
        fold_of[rows] = np.arange(len(rows)) % folds + 1
    return fold_of


def assign_nuisance_roles(folds: int, estimation_fold: int) -> dict:
    """Cyclic rotation: outcome <- k+1, treatment <- k+2, source <- k+3,
    external <- k+4 (1-based, wrapping)."""
    if folds not in (FOLDS_INTERNAL, FOLDS_EXTERNAL):
        raise ValidationError("fold count must be 4 or 5")
    roles = {}
    names = ROLE_ORDER[: folds - 1]
    for j, name in enumerate(names, start=1):
        roles[name] = (estimation_fold - 1 + j) % folds + 1
    return roles


@dataclass(frozen=True)
class EstimationTask:
    """Everything one replication needs; immutable and picklable."""

    ws: Workspace
    config: NuisanceConfig
    targets: tuple
    seed: int
    eps: float
    external_population: bool
    plan: CrossFitPlan | None = None  # None when cross-fitting is disabled
    want_correlation: bool = False


@dataclass
class ReplicationResult:
    points: np.ndarray  # (n_targets, 3) for arm0/arm1/diff
    variances: np.ndarray  # (n_targets, 3)
    correlations: dict | None  # quantity -> (J, J) correlation of estimates


def _eval_block(ws: Workspace, rows, preds) -> EvalBlock:
    return EvalBlock(
        y=ws.y[rows],
        treat=ws.treat[rows],
        source_idx=ws.source_idx[rows],
        em_idx=None if ws.em_idx is None else ws.em_idx[rows],
        is_external=ws.is_external[rows],
        preds=preds,
        source_labels=ws.source_labels,
        em_levels=ws.em_levels,
    )


def _estimate_cell(block: EvalBlock, target: Target, eps: float):
    if target.source_idx is None:
        arm0 = estimate_arm_external(block, 0, em_level=target.em_level, eps=eps)
        arm1 = estimate_arm_external(block, 1, em_level=target.em_level, eps=eps)
    else:
        arm0 = estimate_arm_internal(block, target.source_idx, 0,
                                     em_level=target.em_level, eps=eps)
        arm1 = estimate_arm_internal(block, target.source_idx, 1,
                                     em_level=target.em_level, eps=eps)
    return arm0, arm1, effect_from_arms(arm1, arm0)


def run_replication(task: EstimationTask, replication: int) -> ReplicationResult:
    """One cross-fitting replication: K splits, role-rotated fits, averaged
    split estimates with 1/K^2-scaled variances."""
    ws, plan = task.ws, task.plan
    K = plan.folds
    fold_of = stratified_split(plan.strata, K, plan.seed, replication,
                               order_keys=ws.row_keys)
    J = len(task.targets)
    points = np.zeros((J, 3))
    variances = np.zeros((J, 3))
    if_weights = np.zeros((ws.n_rows, J, 3)) if task.want_correlation else None

    for k in range(1, K + 1):
        roles = assign_nuisance_roles(K, k)
        role_rows = {name: np.flatnonzero(fold_of == fold) for name, fold in roles.items()}
        if not task.external_population:
            role_rows.pop("external", None)
        try:
            fits = fit_all(ws, role_rows, task.config, child_seed(plan.seed, "rep", replication, "split", k))
        except CrosspopError as exc:
            raise type(exc)(f"replication {replication}, split {k}: {exc}") from exc
        eval_rows = np.flatnonzero(fold_of == k)
        block = _eval_block(ws, eval_rows, fits.predict(ws, eval_rows))
        for j, target in enumerate(task.targets):
            try:
                ests = _estimate_cell(block, target, task.eps)
            except CrosspopError as exc:
                raise type(exc)(f"replication {replication}, split {k}: {exc}") from exc
            for qi, est in enumerate(ests):
                contrib = est.if_contributions
                var_k = float(np.sum(np.square(contrib))) / est.denom_count ** 2
                points[j, qi] += est.point / K
                variances[j, qi] += var_k / K ** 2
                if if_weights is not None:
                    if_weights[eval_rows, j, qi] = contrib / (est.denom_count * K)

    correlations = None
    if if_weights is not None:
        correlations = {}
        for qi, name in enumerate(QUANTITIES):
            correlations[name] = _correlation_from_weights(if_weights[:, :, qi])
    return ReplicationResult(points=points, variances=variances, correlations=correlations)


def _correlation_from_weights(W: np.ndarray) -> np.ndarray:
    cov = W.T @ W
    sd = np.sqrt(np.diag(cov))
    sd[sd == 0.0] = 1.0
    return cov / np.outer(sd, sd)


def aggregate_replications(points, variances):
    """Median point and median of (variance + squared deviation), per target.

    Even replication counts use the mean of the two central order statistics.
    """
    points = np.asarray(points, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    point = np.median(points, axis=0)
    variance = np.median(variances + np.square(points - point), axis=0)
    return point, variance


def run_replications(task: EstimationTask, workers: int = 1):
    """All replications, optionally across processes; reduction order is
    canonical (by replication index) so output is scheduling-independent."""
    L = task.plan.replications
    if workers > 1 and L > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replication_star, ((task, l) for l in range(1, L + 1))))
    else:
        results = [run_replication(task, l) for l in range(1, L + 1)]

    points = np.stack([r.points for r in results])
    variances = np.stack([r.variances for r in results])
    point, variance = aggregate_replications(points, variances)
    correlations = None
    if task.want_correlation:
        correlations = {}
        for name in QUANTITIES:
            stack = np.stack([r.correlations[name] for r in results])
            corr = np.median(stack, axis=0)
            np.fill_diagonal(corr, 1.0)
            correlations[name] = corr
    return point, variance, correlations


def _replication_star(args):
    task, l = args
    return run_replication(task, l)


def run_no_crossfit(task: EstimationTask):
    """Fit every nuisance on the full sample and evaluate on the full sample."""
    ws = task.ws
    all_rows = np.arange(ws.n_rows)
    role_rows = {"outcome": all_rows, "treatment": all_rows, "source": all_rows}
    if task.external_population:
        role_rows["external"] = all_rows
    fits = fit_all(ws, role_rows, task.config, child_seed(task.seed, "nocf"))
    block = _eval_block(ws, all_rows, fits.predict(ws, all_rows))
    J = len(task.targets)
    points = np.zeros((J, 3))
    variances = np.zeros((J, 3))
    if_weights = np.zeros((ws.n_rows, J, 3))
    for j, target in enumerate(task.targets):
        for qi, est in enumerate(_estimate_cell(block, target, task.eps)):
            points[j, qi] = est.point
            variances[j, qi] = float(np.sum(np.square(est.if_contributions))) / est.denom_count ** 2
            if_weights[:, j, qi] = est.if_contributions / est.denom_count
    correlations = {name: _correlation_from_weights(if_weights[:, :, qi])
                    for qi, name in enumerate(QUANTITIES)}
    return points, variances, correlations, fits
