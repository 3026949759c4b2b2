import numpy as np
import pytest

from fss_bpso.em_oracle import HFOracle
from fss_bpso.surrogate import generate_dataset, save_ensemble, train_ensemble

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def train_set():
    return generate_dataset(2000, 1)


@pytest.fixture(scope="session")
def test_set():
    return generate_dataset(1000, 2)


@pytest.fixture(scope="session")
def ensemble(train_set):
    return train_ensemble(train_set, 10, 0)


@pytest.fixture(scope="session")
def model(ensemble):
    return ensemble.primary


@pytest.fixture(scope="session")
def model_file(tmp_path_factory, ensemble):
    path = tmp_path_factory.mktemp("models") / "ensemble.msur"
    save_ensemble(ensemble, path)
    return path


@pytest.fixture
def oracle():
    return HFOracle()
