import numpy as np
import pytest

from footkit import kernels
from footkit.core import RasterMask

ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def box(width, height, x0, y0, x1, y1):
    """Mask with pixels ``x0 <= x < x1``, ``y0 <= y < y1`` set."""
    bits = np.zeros((height, width), dtype=bool)
    bits[y0:y1, x0:x1] = True
    return RasterMask(bits)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
