"""Kernel backend selection.

The compiled extension is preferred when importable; CROSSPOP_KERNEL=python
forces the numpy fallback (used by the benchmark and equivalence tests).
"""

import os

from . import _pure

if os.environ.get("CROSSPOP_KERNEL", "").lower() == "python":
    _impl = _pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND

FAMILY_GAUSSIAN = _pure.FAMILY_GAUSSIAN
FAMILY_BINOMIAL = _pure.FAMILY_BINOMIAL
FAMILY_MULTINOMIAL = _pure.FAMILY_MULTINOMIAL

cd_enet = _impl.cd_enet
nnet_train = _impl.nnet_train
nnet_forward = _pure.nnet_forward
