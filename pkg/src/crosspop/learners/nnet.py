"""Single-hidden-layer network trained by full-batch gradient descent.

Deterministic given the seed: weight initialization, the fixed iteration
budget, and the input/response standardization leave no scheduling freedom.
Training runs in the compiled kernel when available.
"""

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .._rng import child_rng
from ..errors import FitError, NumericalError, ValidationError
from .families import BINOMIAL, GAUSSIAN, MULTINOMIAL, canonical_family, check_response

DEFAULT_ITERS = 2000
DEFAULT_LR = 0.05
INIT_HALF_WIDTH = 0.5


@dataclass
class NNetFit:
    family: str
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: float
    y_scale: float
    loss: float
    n_train: int
    classes: tuple | None = None
    learner_id: str = "nnet"

    def predict(self, values: np.ndarray) -> np.ndarray:
        X = self._standardize(values)
        out = _kernels.nnet_forward(X, _family_code(self.family), self.w1, self.b1,
                                    self.w2, self.b2)
        if self.family == GAUSSIAN:
            return out[:, 0] * self.y_scale + self.y_center
        if self.family == BINOMIAL:
            return out[:, 0]
        return out

    def _standardize(self, values):
        X = np.asarray(values, dtype=np.float64)[:, 1:]
        return np.ascontiguousarray((X - self.x_center) / self.x_scale)


def _family_code(family):
    return {GAUSSIAN: _kernels.FAMILY_GAUSSIAN,
            BINOMIAL: _kernels.FAMILY_BINOMIAL,
            MULTINOMIAL: _kernels.FAMILY_MULTINOMIAL}[family]


def fit_nnet(values, response, family, hidden_units=3, seed=0, *,
             iters=DEFAULT_ITERS, lr=DEFAULT_LR, classes=None) -> NNetFit:
    """Train on a design whose first column is the intercept (dropped here;
    the network has its own biases).  Inputs are standardized internally, and
    a gaussian response is standardized and mapped back at prediction time.
    """
    family = canonical_family(family)
    if hidden_units < 1:
        raise ValidationError("hidden_units must be >= 1")
    X_full = np.asarray(values, dtype=np.float64)
    X = X_full[:, 1:]
    n, p = X.shape

    x_center = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    Xs = np.ascontiguousarray((X - x_center) / x_scale)

    y_center, y_scale = 0.0, 1.0
    if family == MULTINOMIAL:
        labels = np.asarray(response)
        present = sorted(set(labels.tolist()))
        if classes is None:
            classes = tuple(present)
        else:
            classes = tuple(classes)
            missing = sorted(set(classes) - set(present))
            if missing:
                raise FitError(f"classes absent from training labels: {missing}")
        C = len(classes)
        idx = {c: k for k, c in enumerate(classes)}
        T = np.zeros((n, C))
        T[np.arange(n), [idx[v] for v in labels.tolist()]] = 1.0
    else:
        y = np.asarray(response, dtype=np.float64)
        check_response(family, y)
        classes = None
        C = 1
        if family == GAUSSIAN:
            y_center = float(y.mean())
            y_scale = float(y.std()) or 1.0
            T = ((y - y_center) / y_scale)[:, None].copy()
        else:
            T = y[:, None].copy()

    rng = child_rng(seed, "nnet-init")
    h = int(hidden_units)
    raw = rng.uniform(-INIT_HALF_WIDTH, INIT_HALF_WIDTH, size=p * h + h + h * C + C)
    w1 = np.ascontiguousarray(raw[: p * h].reshape(p, h))
    b1 = raw[p * h: p * h + h].copy()
    w2 = np.ascontiguousarray(raw[p * h + h: p * h + h + h * C].reshape(h, C))
    b2 = raw[p * h + h + h * C:].copy()

    loss = _kernels.nnet_train(Xs, np.ascontiguousarray(T), _family_code(family),
                               w1, b1, w2, b2, float(lr), int(iters))
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss in network training")
    return NNetFit(family=family, w1=w1, b1=b1, w2=w2, b2=b2,
                   x_center=x_center, x_scale=x_scale,
                   y_center=y_center, y_scale=y_scale,
                   loss=float(loss), n_train=n, classes=classes)
