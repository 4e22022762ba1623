import numpy as np
import pytest

from config import TestConfig
from lsmlab import create_app
from lsmlab.contracts import basis_family, make_payoff
from lsmlab.market import generate_paths
from lsmlab.models import ExerciseSchedule, GbmModel


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run full-scale acceptance tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def app(tmp_path):
    class LocalConfig(TestConfig):
        LSM_OUTPUT_DIR = str(tmp_path / 'output')

    return create_app(LocalConfig)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def put_model():
    return GbmModel.uniform(1, 100.0, 0.05, 0.02, 0.2)


@pytest.fixture
def put_schedule():
    return ExerciseSchedule.uniform(5, 1.0)


@pytest.fixture
def put_paths(put_model, put_schedule):
    return generate_paths(put_model, put_schedule, 4000, seed=11)


@pytest.fixture
def put_setup(put_paths):
    return put_paths, make_payoff('put', 100.0), basis_family('put', 5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
