from dataclasses import replace

import numpy as np
import pytest

from tweezergates.dynamics import TruncationError
from tweezergates.ionchain import normal_modes
from tweezergates.msgate import (
    MSGateConfig,
    bell_rabi_frequency,
    bell_state_infidelity,
    implied_radial_frequency,
    ms_delta_fidelity,
    ms_gate_simulate,
    ms_phase,
    ms_unitary,
)

from .conftest import MHZ

MU = 2 * np.pi * 50e3
ETA = 0.056
SMALL = (8, 5, 8)


@pytest.fixture(scope="module")
def chain2(ds):
    return normal_modes(2, 3.0 * MHZ, 0.5 * MHZ, ds.mass)


@pytest.fixture(scope="module")
def ms_expansion(ds, beam, frame_y):
    from tweezergates.coupling import frame_preset
    from tweezergates.potentials import expansion_for_rabi

    ex, _ = expansion_for_rabi(beam, ds, frame_preset("B||y", 2.5e-4), 2 * np.pi * 228e3, 0.5 * MHZ)
    return ex


def test_ms_unitary_properties():
    U = ms_unitary(np.pi / 4)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(4), atol=1e-15)
    np.testing.assert_allclose(ms_unitary(0.0), np.eye(4))


def test_bell_state_from_ideal_loop(chain2):
    cfg = MSGateConfig(omega0=1.0, mu=MU, eta=ETA, cutoffs=SMALL, n_steps=100)
    cfg = replace(cfg, omega0=bell_rabi_frequency(cfg, chain2), gradients=())
    assert ms_phase(cfg, chain2) == pytest.approx(np.pi / 4, rel=1e-12)
    res = ms_gate_simulate(chain2, cfg, nbars=[0.0], check_convergence=False)
    assert bell_state_infidelity(res) <= 1e-3


def test_gradients_off_gives_zero_delta(chain2, ms_expansion):
    cfg = MSGateConfig.from_expansion(ms_expansion, MU, ETA, cutoffs=SMALL, n_steps=60, gradients=())
    dF, real, ideal = ms_delta_fidelity(chain2, cfg, nbars=[0.0, 1.0], check_convergence=False)
    assert np.all(dF == 0.0)


def test_gradients_reduce_fidelity(chain2, ms_expansion):
    cfg = MSGateConfig.from_expansion(ms_expansion, MU, ETA, cutoffs=SMALL, n_steps=60)
    dF, real, ideal = ms_delta_fidelity(chain2, cfg, nbars=[0.0, 0.5, 1.0], check_convergence=False)
    assert np.all(dF > 0)
    assert np.all(np.diff(dF[0]) > 0)
    assert 1 - ideal.fidelity[0, 0] < 1e-6


def test_step_convergence(chain2, ms_expansion):
    cfg = MSGateConfig.from_expansion(ms_expansion, MU, ETA, cutoffs=SMALL, n_steps=50, tol=1e-8)
    res = ms_gate_simulate(chain2, cfg, nbars=[0.0])
    assert res.step_delta < 1e-8
    assert res.steps > 50


def test_implied_radial_frequency_roundtrip(ds):
    from tweezergates.constants import HBAR

    w = implied_radial_frequency(ETA, 729e-9, ds.mass)
    eta = 2 * np.pi / 729e-9 * np.sqrt(HBAR / (2 * ds.mass * w))
    assert eta == pytest.approx(ETA, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        MSGateConfig(omega0=1.0, mu=MU, eta=ETA, cutoffs=(3, 5, 5))
    with pytest.raises(ValueError):
        MSGateConfig(omega0=1.0, mu=0.0, eta=ETA)
    with pytest.raises(ValueError):
        MSGateConfig(omega0=1.0, mu=MU, eta=ETA, radial_mode="stretch")
    with pytest.raises(ValueError):
        MSGateConfig(omega0=1.0, mu=MU, eta=ETA, gradients=("delta3",))


def test_truncation_guards(chain2, ms_expansion):
    cfg = MSGateConfig.from_expansion(ms_expansion, MU, ETA, cutoffs=(5, 4, 5), n_steps=20)
    with pytest.raises(TruncationError):
        ms_gate_simulate(chain2, cfg, nbars=[2.0], check_convergence=False)
    with pytest.raises(TruncationError):
        ms_gate_simulate(chain2, cfg, nbars=[0.0], presets=[(2, 2)], check_convergence=False)


def test_three_ion_chain_rejected(ds, ms_expansion):
    ch = normal_modes(3, 3.0 * MHZ, 0.5 * MHZ, ds.mass)
    cfg = MSGateConfig.from_expansion(ms_expansion, MU, ETA, cutoffs=SMALL)
    with pytest.raises(ValueError):
        ms_phase(cfg, ch)
