import numpy as np
import pytest

from nsmpc.bench import ExperimentConfig, run_experiment
from nsmpc.plant import example_plant


@pytest.fixture(scope="session")
def plant():
    return example_plant()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def conventional_run():
    result = run_experiment(ExperimentConfig(method="conventional", epsilon=1e-2, record_wall_time=False))
    assert result.exit_code == 0, result.message
    return result.trace
