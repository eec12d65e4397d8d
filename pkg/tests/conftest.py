import numpy as np
import pytest

from crosspop.data import CovariateTable, make_column, validate_dataset, validate_external


def make_dataset(y, s, a, xcols: dict, em=None, kinds=None):
    kinds = kinds or {}
    tab = CovariateTable(
        tuple(make_column(k, v, kind=kinds.get(k)) for k, v in xcols.items())
    )
    return validate_dataset(y, s, a, tab, effect_modifier=em)


def make_external(dataset, xcols: dict, em=None, kinds=None):
    kinds = kinds or {}
    tab = CovariateTable(
        tuple(make_column(k, v, kind=kinds.get(k)) for k, v in xcols.items())
    )
    return validate_external(tab, dataset, effect_modifier=em)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
