import numpy as np
import pytest

from gkt4.deform import joyce_deform
from gkt4.fields import ScalarField
from gkt4.flow import FlowConfig, run
from gkt4.grid import PeriodicGrid
from gkt4.state import flat_hyperkahler

# Reference configuration: grid (32,32,1,1), f = 0.1 cos x0, RK4, cfl 0.5.


@pytest.fixture(scope="session")
def grid32():
    return PeriodicGrid((32, 32, 1, 1))


@pytest.fixture(scope="session")
def flat32(grid32):
    return flat_hyperkahler(grid32)


@pytest.fixture(scope="session")
def cos_generator(grid32):
    return ScalarField(grid32, 0.1 * np.cos(grid32.coordinate(0)))


@pytest.fixture(scope="session")
def joyce_ref(flat32, cos_generator):
    """Reference Joyce deformation: eps = 0.1, t = 0.2, dt = 1e-3."""
    return joyce_deform(flat32, cos_generator, 0.2, 1e-3)


@pytest.fixture(scope="session")
def flow_trace_t2(joyce_ref):
    """Reference GKRF run to t = 2 (serves the t = 1 criteria as a prefix)."""
    return run(
        joyce_ref,
        FlowConfig(dt_mode="cfl", cfl_safety=0.5, t_end=2.0, diagnostic_stride=1),
    )


def rows_until(records, t_max):
    return [r for r in records if r.t <= t_max + 1e-12]
