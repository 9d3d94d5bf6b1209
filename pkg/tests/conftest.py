import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uvnlos.geometry.scene import ObstacleBox, SystemGeometry, range_scaled_obstacle  # noqa: E402
from uvnlos.reflection import ReflectionSurface  # noqa: E402
from uvnlos.scattering import Atmosphere, QuadratureSpec  # noqa: E402

DEG = math.pi / 180.0


def table3_geometry(theta_t=25.0, theta_r=25.0, r=100.0):
    return SystemGeometry(beta_t=math.pi / 6, beta_r=math.pi / 6, theta_t=theta_t * DEG,
                          theta_r=theta_r * DEG, alpha_t=19 * math.pi / 36,
                          alpha_r=-19 * math.pi / 36, range_r=r, aperture_area=1.92e-4)


def table4_geometry(r=200.0):
    return SystemGeometry(beta_t=math.pi / 12, beta_r=math.pi / 12, theta_t=math.pi / 9,
                          theta_r=math.pi / 9, alpha_t=2 * math.pi / 3, alpha_r=-2 * math.pi / 3,
                          range_r=r, aperture_area=1.92e-4)


def table4_obstacle(center_x=-45.0, r=200.0):
    return ObstacleBox(thickness=30.0, width=40.0, height=80.0, center_x=center_x, center_y=r / 2)


TABLE3_ATM = Atmosphere(ks_ray=0.24e-3, ks_mie=0.25e-3, ka=0.9e-3)
SURFACE = ReflectionSurface(r_r=0.1, m_s=5.0, eta=0.5)
# coarse rule for tests that check structure rather than digits
COARSE = QuadratureSpec(n_vartheta=24, n_varpi=24, n_tau=48, n_facade_y=24, n_facade_z=24)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def t3():
    return table3_geometry()


@pytest.fixture
def t3_obstacle():
    return range_scaled_obstacle(100.0)


@pytest.fixture
def t4():
    return table4_geometry()


@pytest.fixture
def t4_obstacle():
    return table4_obstacle()


# --- acceptance reporting ----------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion, printed in the terminal summary."""
    table = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(label: str, passed: bool, detail: str) -> None:
        table[label] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_ACCEPTANCE, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(table, key=lambda s: int(s.split()[0][1:])):
        passed, detail = table[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
