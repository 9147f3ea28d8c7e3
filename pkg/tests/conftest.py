import numpy as np
import pytest

from svjump.benchmarks import bates_test_model, bhw_test_model
from svjump.model import OptionContract


@pytest.fixture
def bates_model():
    return bates_test_model()


@pytest.fixture
def bhw_model():
    return bhw_test_model()


@pytest.fixture
def call_eu():
    return OptionContract(100.0, 0.5, "call", "european")


@pytest.fixture
def call_am():
    return OptionContract(100.0, 0.5, "call", "american")


@pytest.fixture
def put_am():
    return OptionContract(100.0, 0.5, "put", "american")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
