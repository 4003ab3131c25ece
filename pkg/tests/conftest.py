import numpy as np
import pytest

from ldpfair.schema import CategoricalDomain, Dataset, DatasetSchema
from ldpfair.synthetic import make_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(20231019)


@pytest.fixture
def tiny_schema():
    return DatasetSchema(
        attributes=(
            CategoricalDomain("g", ("m", "f")),
            CategoricalDomain("r", ("a", "b", "c")),
            CategoricalDomain("x", ("lo", "hi")),
            CategoricalDomain("y", ("no", "yes")),
        ),
        sensitive=("g", "r"),
        protected="g",
        target="y",
        privileged_value="m",
        positive_label="yes",
    )


@pytest.fixture
def tiny_dataset(tiny_schema):
    codes = [
        [0, 0, 0, 1],
        [1, 1, 1, 0],
        [0, 2, 1, 1],
        [1, 0, 0, 0],
        [0, 1, 1, 1],
        [1, 2, 0, 1],
    ]
    return Dataset(tiny_schema, np.array(codes))


@pytest.fixture(scope="session")
def synthetic_small():
    return make_synthetic(n=1200, seed=3)
