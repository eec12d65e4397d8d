"""Response families shared by all learners."""

import numpy as np

from ..errors import ValidationError

GAUSSIAN = "gaussian-identity"
BINOMIAL = "binomial-logit"
MULTINOMIAL = "multinomial-softmax"

_ALIASES = {
    "gaussian": GAUSSIAN,
    "continuous": GAUSSIAN,
    GAUSSIAN: GAUSSIAN,
    "binomial": BINOMIAL,
    "binary": BINOMIAL,
    BINOMIAL: BINOMIAL,
    "multinomial": MULTINOMIAL,
    MULTINOMIAL: MULTINOMIAL,
}


def canonical_family(family: str) -> str:
    try:
        return _ALIASES[family]
    except KeyError:
        raise ValidationError(f"unknown family {family!r}") from None


def check_response(family: str, response: np.ndarray) -> None:
    """Range-check the response against the family."""
    family = canonical_family(family)
    response = np.asarray(response)
    if family == BINOMIAL:
        if not set(np.unique(response.astype(np.float64))) <= {0.0, 1.0}:
            raise ValidationError("binomial response must be coded 0/1")
    elif family == GAUSSIAN:
        if not np.all(np.isfinite(response.astype(np.float64))):
            raise ValidationError("gaussian response must be finite")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
