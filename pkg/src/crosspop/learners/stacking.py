"""Cross-validation stacking over candidate learners.

Two policies: `convex-stack` minimizes cross-validated risk over the weight
simplex (exponentiated-gradient descent); `discrete-select` puts weight one on
the risk minimizer.  CV folds, candidate fits, and the weight solve are all
pure functions of (inputs, seed), and candidates are always combined in the
order listed, so results are independent of scheduling.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .._rng import child_seed, child_rng
from ..errors import FitError, ValidationError
from .families import BINOMIAL, GAUSSIAN, canonical_family
from .glm import fit_glm
from .lasso import fit_lasso
from .nnet import fit_nnet

CONVEX_STACK = "convex-stack"
DISCRETE_SELECT = "discrete-select"

EG_MAX_ITER = 10_000
EG_TOL = 1e-8
GAP_TOL = 1e-12


@dataclass(frozen=True)
class CandidateSpec:
    kind: str  # glm | lasso | nnet
    params: dict = field(default_factory=dict)
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class LearnerSpec:
    candidates: tuple
    policy: str = CONVEX_STACK
    cv_folds: int = 5

    def __post_init__(self):
        if not self.candidates:
            raise ValidationError("candidate list must be non-empty")
        if self.policy not in (CONVEX_STACK, DISCRETE_SELECT):
            raise ValidationError(f"unknown stacking policy {self.policy!r}")
        if self.cv_folds < 2:
            raise ValidationError("cv_folds must be >= 2")

    @staticmethod
    def single(kind: str, **params) -> "LearnerSpec":
        return LearnerSpec(candidates=(CandidateSpec(kind, params),))


@dataclass
class StackFit:
    family: str
    candidate_labels: tuple
    weights: np.ndarray
    fits: tuple
    cv_risks: np.ndarray
    stack_risk: float
    policy: str
    learner_id: str = "stack"

    def predict(self, values: np.ndarray) -> np.ndarray:
        out = None
        for w, fit in zip(self.weights, self.fits):
            if w == 0.0:
                continue
            contrib = w * fit.predict(values)
            out = contrib if out is None else out + contrib
        return out


def fit_super_learner(spec: LearnerSpec, values, response, family, seed=0,
                      weights=None) -> StackFit:
    """Fit all candidates with cross-validation and combine per the policy.

    A candidate that fails on any fold (or on the final refit) is dropped
    with a warning; if every candidate fails the stack fails.
    """
    family = canonical_family(family)
    if family not in (GAUSSIAN, BINOMIAL):
        raise ValidationError("stacking supports gaussian and binomial responses")
    X = np.asarray(values, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    n = len(y)

    if len(spec.candidates) == 1:
        fit = _fit_candidate(spec.candidates[0], X, y, family, child_seed(seed, "cand", 0, "full"))
        risk = _risk(y, fit.predict(X), family)
        return StackFit(family, (spec.candidates[0].label,), np.array([1.0]),
                        (fit,), np.array([risk]), risk, spec.policy)

    if n < spec.cv_folds:
        raise ValidationError(f"need n >= cv_folds, got n={n}, folds={spec.cv_folds}")

    fold_of = _cv_folds(y, family, spec.cv_folds, seed)
    held_out = np.full((n, len(spec.candidates)), np.nan)
    alive = [True] * len(spec.candidates)
    for ci, cand in enumerate(spec.candidates):
        for f in range(spec.cv_folds):
            test = fold_of == f
            try:
                fit = _fit_candidate(cand, X[~test], y[~test], family,
                                     child_seed(seed, "cand", ci, "fold", f))
                held_out[test, ci] = fit.predict(X[test])
            except FitError as exc:
                warnings.warn(f"candidate {cand.label!r} dropped: {exc}")
                alive[ci] = False
                break

    final_fits = {}
    for ci, cand in enumerate(spec.candidates):
        if not alive[ci]:
            continue
        try:
            final_fits[ci] = _fit_candidate(cand, X, y, family,
                                            child_seed(seed, "cand", ci, "full"))
        except FitError as exc:
            warnings.warn(f"candidate {cand.label!r} dropped: {exc}")
            alive[ci] = False

    keep = [ci for ci in range(len(spec.candidates)) if alive[ci]]
    if not keep:
        raise FitError("all stacking candidates failed")

    P = held_out[:, keep]
    cv_risks = np.array([_risk(y, P[:, j], family) for j in range(len(keep))])
    if spec.policy == DISCRETE_SELECT:
        w = np.zeros(len(keep))
        w[int(np.argmin(cv_risks))] = 1.0
        stack_risk = float(cv_risks.min())
    else:
        w = _simplex_weights(P, y, family)
        stack_risk = _risk(y, P @ w, family)

    return StackFit(
        family=family,
        candidate_labels=tuple(spec.candidates[ci].label for ci in keep),
        weights=w,
        fits=tuple(final_fits[ci] for ci in keep),
        cv_risks=cv_risks,
        stack_risk=float(stack_risk),
        policy=spec.policy,
    )


def _fit_candidate(cand: CandidateSpec, X, y, family, seed):
    params = dict(cand.params)
    if cand.kind == "glm":
        return fit_glm(X, y, family, **params)
    if cand.kind == "lasso":
        params.setdefault("seed", seed)
        return fit_lasso(X, y, family, **params)
    if cand.kind == "nnet":
        params.setdefault("seed", seed)
        return fit_nnet(X, y, family, **params)
    raise ValidationError(f"unknown candidate kind {cand.kind!r}")


def _cv_folds(y, family, cv_folds, seed):
    """Fold labels; binomial folds are stratified by response class."""
    n = len(y)
    rng = child_rng(seed, "sl-folds")
    fold_of = np.empty(n, dtype=np.int64)
    if family == BINOMIAL:
        for cls in (0.0, 1.0):
            rows = np.flatnonzero(y == cls)
            rows = rows[rng.permutation(len(rows))]
            fold_of[rows] = np.arange(len(rows)) % cv_folds
    else:
        perm = rng.permutation(n)
        fold_of[perm] = np.arange(n) % cv_folds
    return fold_of


def _risk(y, pred, family):
    if family == GAUSSIAN:
        return float(np.mean((y - pred) ** 2))
    p = np.clip(pred, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _stack_objective(P, y, family):
    """(risk, gradient) closures; the gaussian risk collapses to a C x C
    quadratic form so EG iterations cost O(C^2), not O(n C)."""
    if family == GAUSSIAN:
        n = len(y)
        A = P.T @ P / n
        b = P.T @ y / n
        const = float(y @ y) / n

        def risk(w):
            return float(w @ A @ w - 2.0 * b @ w + const)

        def grad(w):
            return 2.0 * (A @ w - b)

        return risk, grad

    def risk(w):
        return _risk(y, P @ w, family)

    def grad(w):
        pw = np.clip(P @ w, 1e-12, 1.0 - 1e-12)
        return -(P.T @ (y / pw - (1.0 - y) / (1.0 - pw))) / len(y)

    return risk, grad


def _simplex_weights(P, y, family):
    """Exponentiated-gradient descent for min risk(P w) over the simplex.

    Steps are normalized by the gradient spread (scale-free), accepted under
    an Armijo test, and iteration stops once the linearization gap
    sum(g*w) - min(g) -- an upper bound on the suboptimality -- is negligible,
    so the returned weights beat every vertex (every single candidate).
    """
    C = P.shape[1]
    risk_fn, grad_fn = _stack_objective(P, y, family)
    w = np.full(C, 1.0 / C)
    risk = risk_fn(w)
    eta = 1.0
    stagnant = 0
    for _ in range(EG_MAX_ITER):
        g = grad_fn(w)
        rel = g - g.min()
        gap = float(np.dot(rel, w))
        spread = float(rel.max())
        if gap < GAP_TOL * (1.0 + abs(risk)) or spread <= 0.0:
            break
        improved = False
        while eta > 1e-18:
            cand = w * np.exp((-eta / spread) * rel)
            cand /= cand.sum()
            cand_risk = risk_fn(cand)
            # Armijo: demand a fixed fraction of the linearized decrease
            if cand_risk <= risk + 1e-4 * float(g @ (cand - w)):
                stagnant = stagnant + 1 if risk - cand_risk < 1e-15 * (1.0 + abs(risk)) else 0
                w, risk = cand, cand_risk
                improved = True
                eta = min(eta * 1.5, 64.0)
                break
            eta *= 0.5
        if not improved or stagnant >= 3:
            break
    return w
