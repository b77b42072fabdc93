import numpy as np
import pytest

from embryonet.synthdata import SyntheticConfig, generate_dataset


@pytest.fixture(scope="session")
def tiny_config():
    return SyntheticConfig(n_unlabeled=12, n_graded=10, n_kid=14, frames_per_video=4,
                           frame_size=16, seed=3)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_config):
    return generate_dataset(tiny_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_experiment_config():
    from embryonet.config import ExperimentConfig
    return ExperimentConfig(n_unlabeled=20, n_graded=30, n_kid=40, frames_per_video=4, frame_size=16,
                            embedding_dim=8, ae_epochs=1, ae_frames_per_video=2, hidden_dim=8,
                            grade_epochs=2, binary_epochs=2, folds=3, bootstrap_repetitions=20, seed=1)


@pytest.fixture(scope="session")
def small_report(small_experiment_config):
    from embryonet.experiment import run_experiment
    cfg = small_experiment_config
    return run_experiment(generate_dataset(cfg.synthetic()), cfg)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
