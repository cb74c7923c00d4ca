import numpy as np
import pytest

from tweezergates.atoms import load_dataset
from tweezergates.beams import make_beam
from tweezergates.coupling import GAUSS, frame_preset
from tweezergates.potentials import expansion_for_rabi

LAM = 729e-9
TWO_PI = 2 * np.pi
MHZ = TWO_PI * 1e6


@pytest.fixture(scope="session")
def ds():
    return load_dataset()


@pytest.fixture(scope="session")
def beam():
    return make_beam("TEM00", LAM, LAM, 10e-6, (0, 1))


@pytest.fixture(scope="session")
def frame_y():
    return frame_preset("B||y", 5 * GAUSS)


@pytest.fixture(scope="session")
def expansion(ds, beam, frame_y):
    """Omega0 = 2pi 1 MHz, B = 5 G, w0 = lambda, trap 2pi 0.5 MHz."""
    ex, _ = expansion_for_rabi(beam, ds, frame_y, 1 * MHZ, 0.5 * MHZ)
    return ex


@pytest.fixture(scope="session")
def expansion_02(ds, beam, frame_y):
    """Omega0 = 2pi 0.2 MHz, B = 5 G."""
    ex, _ = expansion_for_rabi(beam, ds, frame_y, 0.2 * MHZ, 0.5 * MHZ)
    return ex


FIG3_PANELS = [(0.2, 2.5), (0.2, 5.0), (1.0, 2.5), (1.0, 5.0)]  # (Omega0 / 2pi MHz, B / G)


@pytest.fixture(scope="session")
def fig3_expansions(ds, beam):
    out = {}
    for w, b in FIG3_PANELS:
        ex, _ = expansion_for_rabi(beam, ds, frame_preset("B||y", b * GAUSS), w * MHZ, 0.5 * MHZ)
        out[(w, b)] = ex
    return out


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
