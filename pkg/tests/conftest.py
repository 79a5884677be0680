import numpy as np
import pytest
from hypothesis import settings

from dewet.params import PhysicalParams
from dewet.profile import Profile, cosine_bump, normalize_area
from dewet.stepper import StepOptions, run_minimizing_movements

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

STD = PhysicalParams()  # gamma=1, gamma0=0.5, sigma0=1, nu0=0.05, lam=mu=1, e0=0.2, A0=1, L0=2


def random_profile(rng, n=41, params=STD, amp=0.15):
    """Admissible, strictly positive, asymmetric profile near a cosine bump."""
    base = cosine_bump(n, params.A0, 2.0 + 0.4 * rng.uniform(-1, 1), rng.uniform(-0.3, 0.3))
    s = np.linspace(0, 1, n)
    wiggle = 1 + amp * (np.sin(np.pi * s * rng.integers(1, 4)) * rng.uniform(-1, 1) + rng.uniform(-0.3, 0.3) * s)
    h = base.h * wiggle
    h[0] = h[-1] = 0.0
    return normalize_area(Profile(base.alpha, base.beta, h), params.A0)


@pytest.fixture(scope="session")
def params():
    return STD


@pytest.fixture(scope="session")
def std_traj():
    """The standard fixture: cosine bump, n=201, ny=8, k=50, T=0.2."""
    return run_minimizing_movements(cosine_bump(201, STD.A0, 2.0), 50, 0.2, STD, StepOptions(ny=8))


@pytest.fixture(scope="session")
def short_traj():
    return run_minimizing_movements(cosine_bump(61, STD.A0, 2.0), 20, 0.1, STD, StepOptions(ny=3))


# one line per acceptance criterion, repeated in the terminal summary so it shows without -s
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
