import numpy as np
import pytest

from wtrak import SynthSpec, generate_label_noise_dataset, generate_spectrum_features


@pytest.fixture(scope="session")
def logistic_fixture():
    """Seeded 100-point, 2-d logistic problem shared by kernel and coverage tests."""
    spec = SynthSpec("two_cluster", 100, 2, separation=2.0, seed=7)
    train = generate_label_noise_dataset(spec, stream=0)
    test = generate_label_noise_dataset(SynthSpec("two_cluster", 10, 2, separation=2.0, seed=7), stream=1)
    return train, test


@pytest.fixture(scope="session")
def kappa4_fixture():
    """kappa = 1e4 spectrum fixture: 400 training rows and 20 test rows in 20 dimensions."""
    train = generate_spectrum_features(SynthSpec("spectrum", 400, 20, kappa=1e4, seed=0), stream=0)
    test = generate_spectrum_features(SynthSpec("spectrum", 20, 20, kappa=1e4, seed=0), stream=1)
    return train, test


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    """Print and keep one pass/fail line for the acceptance summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
