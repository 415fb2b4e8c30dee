import hypothesis
import numpy as np
import pytest

from mfbia.electromech import ElectromechParams
from mfbia.probabilistic import TruncatedNormalPrior

hypothesis.settings.register_profile(
    "suite", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("suite")


@pytest.fixture
def truth_params() -> ElectromechParams:
    return ElectromechParams(youngs_modulus=11e3, poisson_ratio=0.35)


@pytest.fixture
def material_prior() -> TruncatedNormalPrior:
    return TruncatedNormalPrior(mean=np.array([10e3, 0.3]),
                                variance=np.array([2e3, 0.15]) ** 2,
                                lower=np.array([0.0, 0.0]),
                                upper=np.array([np.inf, 0.5]))
