import numpy as np
import pytest

from dampwave import kernels
from dampwave.model import (
    Bump, Case, DampingProfile, Grid2D, InitSpec, LameParams, SimConfig, VectorField2,
)

BACKENDS = kernels.backends()

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


def make_config(res=10.0, T=5.0, V0=4.0, case=Case.STRONG, a=0.6, b=1.0, L=1.0,
                cfl=0.5, stride=10, **extra) -> SimConfig:
    damping = DampingProfile.zero() if V0 == 0 else DampingProfile.critical(V0)
    init = InitSpec(
        L=L,
        u0=(Bump((0.0, 0.0), 1.0 * L, (1.0, 0.5)),),
        u1=(Bump((0.2 * L, 0.0), 0.6 * L, (0.0, 1.0)),),
    )
    return SimConfig(lame=LameParams(a, b), damping=damping, init=init, T=T, resolution=res,
                     case=case, cfl_safety=cfl, output_stride=stride, **extra)


def small_grid(n=32, dx=0.1) -> Grid2D:
    return Grid2D(R=n * dx / 2.0, dx=dx, n=n)


def random_field(grid: Grid2D, seed=0) -> VectorField2:
    rng = np.random.default_rng(seed)
    return VectorField2(rng.standard_normal((2, grid.n, grid.n)), grid)
