"""Treatment effect estimation in internal and external target populations
from multi-source individual-participant data.

Doubly robust influence-function estimators with pluggable nuisance learners,
stratified cross-fitting, and influence-function-based inference.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

_API_NAMES = {"ate_internal", "ate_external", "ste_internal", "ste_external"}

__all__ = sorted(_API_NAMES | {"kernel_backend", "__version__"})


def __getattr__(name):
    if name in _API_NAMES:
        from . import api

        return getattr(api, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
