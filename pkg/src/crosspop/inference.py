"""Wald confidence intervals and simultaneous (sup-t) confidence bands."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import child_rng
from .errors import ValidationError
from .estimators import TargetDescriptor

DEFAULT_LEVEL = 0.95
DEFAULT_DRAWS = 100_000
_CHUNK = 1 << 16

# rational approximation coefficients for the inverse normal CDF (Acklam)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def norm_quantile(p: float) -> float:
    """Standard-normal quantile: rational approximation plus Newton polish."""
    if not 0.0 < p < 1.0:
        raise ValidationError("quantile level must be in (0, 1)")
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    for _ in range(2):
        err = norm_cdf(x) - p
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf > 0.0:
            x -= err / pdf
    return x


def wald_ci(estimate: float, se: float, level: float = DEFAULT_LEVEL):
    """estimate +- z_{(1+level)/2} * se."""
    if se < 0.0:
        raise ValidationError("se must be >= 0")
    z = norm_quantile(0.5 + level / 2.0)
    return estimate - z * se, estimate + z * se


def correlation_from_if(if_matrix: np.ndarray) -> np.ndarray:
    """Correlation of the target estimates from per-row influence columns."""
    W = np.asarray(if_matrix, dtype=np.float64)
    cov = W.T @ W
    sd = np.sqrt(np.diag(cov))
    sd[sd == 0.0] = 1.0
    return cov / np.outer(sd, sd)


def scb_critical_value(corr: np.ndarray, level: float, draws: int, seed: int) -> float:
    """sup-t multiplier: the level-quantile of max_j |Z_j| for Z ~ N(0, corr).

    Draws are generated in fixed-size chunks with per-chunk seeded streams, so
    the value is deterministic given (seed, draws) under any scheduling.
    """
    corr = np.asarray(corr, dtype=np.float64)
    J = corr.shape[0]
    transform = _correlation_transform(corr)
    maxabs = np.empty(draws)
    done = 0
    chunk_idx = 0
    while done < draws:
        take = min(_CHUNK, draws - done)
        rng = child_rng(seed, "scb", chunk_idx)
        g = rng.standard_normal(size=(take, J))
        z = g @ transform.T
        maxabs[done : done + take] = np.max(np.abs(z), axis=1)
        done += take
        chunk_idx += 1
    return float(np.quantile(maxabs, level))


def _correlation_transform(corr: np.ndarray) -> np.ndarray:
    """Matrix T with T T' = corr (projected to the nearest PSD correlation
    when estimation noise makes it indefinite)."""
    vals, vecs = np.linalg.eigh(corr)
    if vals.min() < -1e-10:
        warnings.warn("correlation matrix not PSD; clipping eigenvalues")
    clipped = np.clip(vals, 1e-10, None)
    T = vecs * np.sqrt(clipped)
    # renormalize so the implied diagonal is exactly 1
    row_norm = np.sqrt(np.sum(T * T, axis=1))
    row_norm[row_norm == 0.0] = 1.0
    return T / row_norm[:, None]


def simultaneous_bands(estimates, if_matrix, level=DEFAULT_LEVEL,
                       draws=DEFAULT_DRAWS, seed=0, ses=None):
    """sup-t bands across targets: estimate +- c * se with a shared c.

    `if_matrix` holds per-row influence contributions per target, already
    scaled so each column's sum of squares is that target's variance; `ses`
    defaults to exactly those column norms.
    """
    W = np.asarray(if_matrix, dtype=np.float64)
    if ses is None:
        ses = np.sqrt(np.sum(W * W, axis=0))
    corr = correlation_from_if(W)
    return simultaneous_bands_from_corr(estimates, ses, corr, level, draws, seed)


def simultaneous_bands_from_corr(estimates, ses, corr, level=DEFAULT_LEVEL,
                                 draws=DEFAULT_DRAWS, seed=0):
    estimates = np.asarray(estimates, dtype=np.float64)
    ses = np.asarray(ses, dtype=np.float64)
    if len(estimates) < 1:
        raise ValidationError("at least one target required")
    c = scb_critical_value(corr, level, draws, seed)
    # the true multiplier dominates the pointwise quantile; clamp away the
    # Monte Carlo dip so the bands always contain the intervals
    c = max(c, norm_quantile(0.5 + level / 2.0))
    return estimates - c * ses, estimates + c * ses, c


@dataclass
class EstimateRow:
    target: TargetDescriptor
    quantity: str  # arm0 | arm1 | diff
    estimate: float
    se: float
    ci_lower: float
    ci_upper: float
    scb_lower: float | None = None
    scb_upper: float | None = None

    def __post_init__(self):
        if not (self.ci_lower <= self.estimate <= self.ci_upper):
            raise ValidationError("confidence interval does not bracket the estimate")
        if self.scb_lower is not None and (
            self.scb_lower > self.ci_lower or self.scb_upper < self.ci_upper
        ):
            raise ValidationError("simultaneous band must contain the pointwise interval")


def assemble_rows(targets, points, variances, level=DEFAULT_LEVEL, scb=None) -> dict:
    """EstimateRow tables keyed by quantity (arm0 / arm1 / diff).

    `points` and `variances` are (n_targets, 3); `scb`, when given, maps a
    quantity to its per-target (lower, upper) band arrays.
    """
    tables = {}
    for qi, quantity in enumerate(("arm0", "arm1", "diff")):
        rows = []
        for j, target in enumerate(targets):
            est = float(points[j, qi])
            se = float(np.sqrt(variances[j, qi]))
            lo, hi = wald_ci(est, se, level)
            scb_lo = scb_hi = None
            if scb is not None:
                scb_lo = float(scb[quantity][0][j])
                scb_hi = float(scb[quantity][1][j])
            rows.append(EstimateRow(target=target, quantity=quantity, estimate=est,
                                    se=se, ci_lower=lo, ci_upper=hi,
                                    scb_lower=scb_lo, scb_upper=scb_hi))
        tables[quantity] = rows
    return tables
