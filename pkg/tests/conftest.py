import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SQRT2 = np.sqrt(2.0)
PSI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / SQRT2
PSI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / SQRT2


def grid_triples(n_p=50, n_theta=50, n_phi=8):
    """Cell-centre (p, θ) and φ = 2πk/K, flattened."""
    p = (np.arange(n_p) + 0.5) / n_p
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    P, T, F = np.meshgrid(p, theta, phi, indexing="ij")
    return P.ravel(), T.ravel(), F.ravel()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One "PASS/FAIL criterion N ..." line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
