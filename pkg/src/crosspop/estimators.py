"""One-step influence-function estimators of arm means and effects.

Each arm estimate solves an estimating equation of the form

    sum_i [ M_i (ghat_a(X_i) - psi) + R_i w_i (Y_i - ghat_a(X_i)) ] = 0

where M marks target membership and R marks the augmentation rows, so the
reported contributions are self-centering by construction.  Probabilities are
clipped to [eps, 1-eps] at the point of consumption.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CrosspopError, NumericalError
from .nuisance import NuisancePredictions, marginal_propensity

DEFAULT_CLIP = 0.01


class EmptyTargetError(CrosspopError):
    """The requested target cell has no evaluation rows."""


@dataclass(frozen=True)
class TargetDescriptor:
    population: str  # "internal" | "external"
    source: str | None = None  # source label for internal targets
    subgroup: str | None = None  # effect-modifier level, subgroup targets only

    def same_cell(self, other: "TargetDescriptor") -> bool:
        return self == other


@dataclass
class ArmEstimate:
    target: TargetDescriptor
    arm: int
    point: float
    if_contributions: np.ndarray  # aligned to the evaluation rows
    denom_count: int

    def __post_init__(self):
        total = float(self.if_contributions.sum())
        bound = 1e-8 * (1.0 + abs(self.point)) * self.denom_count
        if not np.isfinite(self.point) or abs(total) > bound:
            raise NumericalError(
                f"estimating equation not solved: sum(IF)={total:.3e} for {self.target}"
            )

    @property
    def se(self) -> float:
        return variance_from_if(self.if_contributions, self.denom_count)


@dataclass
class EffectEstimate:
    arm1: ArmEstimate
    arm0: ArmEstimate
    point: float
    se: float

    @property
    def target(self) -> TargetDescriptor:
        return self.arm1.target

    @property
    def denom_count(self) -> int:
        return self.arm1.denom_count

    @property
    def if_contributions(self) -> np.ndarray:
        return self.arm1.if_contributions - self.arm0.if_contributions


@dataclass(frozen=True)
class EvalBlock:
    """Evaluation rows plus the nuisance predictions aligned to them."""

    y: np.ndarray
    treat: np.ndarray
    source_idx: np.ndarray
    em_idx: np.ndarray | None
    is_external: np.ndarray
    preds: NuisancePredictions
    source_labels: tuple
    em_levels: tuple | None


def _clip(p, eps):
    if eps <= 0.0:
        return np.asarray(p, dtype=np.float64)
    return np.clip(p, eps, 1.0 - eps)


def estimate_arm_internal(block: EvalBlock, s_idx: int, a: int, em_level=None,
                          eps=DEFAULT_CLIP) -> ArmEstimate:
    """Arm mean in the population of source s (optionally within one subgroup).

    The augmentation runs over all internal rows matching the subgroup and
    arm, weighted by P(S=s|X) / P(A=a|X) with the marginal propensity composed
    across sources.
    """
    g = block.preds.outcome(a)
    member = (block.source_idx == s_idx) & ~block.is_external
    in_cell = np.ones(len(block.y), dtype=bool)
    if em_level is not None:
        in_cell = block.em_idx == em_level
        member = member & in_cell
    denom = int(member.sum())
    target = TargetDescriptor(
        "internal",
        source=block.source_labels[s_idx],
        subgroup=None if em_level is None else block.em_levels[em_level],
    )
    if denom < 1:
        raise EmptyTargetError(f"empty target cell for {target}")

    aug = in_cell & (block.treat == a) & ~block.is_external
    q_s = _clip(block.preds.q[:, s_idx], eps)
    e_a = _clip(marginal_propensity(block.preds, a), eps)
    weight = q_s / e_a
    resid = np.where(aug, block.y - g, 0.0)

    total = float(np.sum(np.where(member, g, 0.0)) + np.sum(np.where(aug, weight, 0.0) * resid))
    point = total / denom
    contrib = np.where(member, g - point, 0.0) + np.where(aug, weight, 0.0) * resid
    return ArmEstimate(target=target, arm=a, point=point,
                       if_contributions=contrib, denom_count=denom)


def estimate_arm_external(block: EvalBlock, a: int, em_level=None,
                          eps=DEFAULT_CLIP) -> ArmEstimate:
    """Arm mean in the external population (optionally within one subgroup).

    Augmented transport form: internal rows with A=a are weighted by the
    external-membership odds P(S=0|X)/(1-P(S=0|X)) and the inverse propensity
    conditioned on the internal sources.
    """
    if block.preds.p0 is None:
        raise CrosspopError("external estimate requires an external-membership model")
    g = block.preds.outcome(a)
    member = block.is_external.copy()
    in_cell = np.ones(len(block.y), dtype=bool)
    if em_level is not None:
        in_cell = block.em_idx == em_level
        member = member & in_cell
    denom = int(member.sum())
    target = TargetDescriptor(
        "external",
        subgroup=None if em_level is None else block.em_levels[em_level],
    )
    if denom < 1:
        raise EmptyTargetError(f"empty target cell for {target}")

    aug = in_cell & (block.treat == a) & ~block.is_external
    p0 = _clip(block.preds.p0, eps)
    odds = p0 / (1.0 - p0)
    e_a = _clip(marginal_propensity(block.preds, a, renormalize=True), eps)
    weight = odds / e_a
    resid = np.where(aug, block.y - g, 0.0)  # aug never marks external rows

    total = float(np.sum(np.where(member, g, 0.0)) + np.sum(np.where(aug, weight, 0.0) * resid))
    point = total / denom
    contrib = np.where(member, g - point, 0.0) + np.where(aug, weight, 0.0) * resid
    return ArmEstimate(target=target, arm=a, point=point,
                       if_contributions=contrib, denom_count=denom)


def effect_from_arms(arm1: ArmEstimate, arm0: ArmEstimate) -> EffectEstimate:
    """Difference of arm means with SE from the contribution-wise difference."""
    if not arm1.target.same_cell(arm0.target) or (arm1.arm, arm0.arm) != (1, 0):
        raise CrosspopError(f"target mismatch: {arm1.target} vs {arm0.target}")
    diff = arm1.if_contributions - arm0.if_contributions
    return EffectEstimate(
        arm1=arm1,
        arm0=arm0,
        point=arm1.point - arm0.point,
        se=variance_from_if(diff, arm1.denom_count),
    )


def variance_from_if(if_contributions: np.ndarray, denom_count: int) -> float:
    """SE of a solved estimating equation: sqrt(sum D_i^2) / denom."""
    return float(np.sqrt(np.sum(np.square(if_contributions))) / denom_count)
