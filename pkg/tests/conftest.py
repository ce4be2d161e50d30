import numpy as np
import pytest

from seeds_sde import DataDistribution, ScoreModel, VpLinear


@pytest.fixture(scope="session")
def vp():
    return VpLinear()


@pytest.fixture(scope="session")
def gauss_model(vp):
    return ScoreModel(DataDistribution.standard_normal(1), vp)


@pytest.fixture(scope="session")
def mixture_model(vp):
    data = DataDistribution(
        weights=np.array([0.5, 0.5]),
        means=np.array([[1.5], [-1.5]]),
        variances=np.array([[1.0], [1.0]]),
    )
    return ScoreModel(data, vp)


class ConstantModel:
    """Stub network returning fixed values; used by degeneration tests."""

    def __init__(self, d, noise_value=0.0, data_value=0.0):
        self._d = d
        self.noise_value = noise_value
        self.data_value = data_value
        self.nfe = 0

    @property
    def dim(self):
        return self._d

    def noise_pred(self, x, t):
        self.nfe += 1
        return np.full_like(np.asarray(x, dtype=float), self.noise_value)

    def data_pred(self, x, t):
        self.nfe += 1
        return np.full_like(np.asarray(x, dtype=float), self.data_value)

    def score_from_model(self, x, t):
        self.nfe += 1
        return np.full_like(np.asarray(x, dtype=float), self.noise_value)


@pytest.fixture
def constant_model():
    return ConstantModel
