import numpy as np
import pytest

from impact_curve.model import (
    ControllerModel,
    PlantModel,
    attack_map_for,
    closed_loop_under_attack,
    example1_system,
    spectral_radius,
)


def make_random_loop(rng, n, m, q=1, rho=0.9):
    """Random plant/controller pair satisfying all stability assumptions."""
    while True:
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.2, rho) / max(spectral_radius(A), 1e-9)
        B = rng.standard_normal((n, q))
        C = rng.standard_normal((m, n))
        K = 0.3 * rng.standard_normal((q, n))
        L = 0.3 * rng.standard_normal((n, m))
        if spectral_radius(A - B @ K) < rho and spectral_radius(A - L @ C) < rho:
            plant = PlantModel(A=A, B=B, C=C)
            ctrl = ControllerModel(K=K, L=L, Sigma_r=np.eye(m))
            return plant, ctrl


@pytest.fixture
def random_loop():
    return make_random_loop


@pytest.fixture(scope="session")
def example1():
    return example1_system()


@pytest.fixture(scope="session")
def example1_map(example1):
    return attack_map_for(*example1, N=10)


@pytest.fixture(scope="session")
def example1_loop(example1):
    return closed_loop_under_attack(*example1)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
