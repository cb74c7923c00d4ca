"""Axial qubit-qubit coupling of a 10-ion chain versus modulation frequency."""

import numpy as np

from tweezergates.atoms import load_dataset
from tweezergates.beams import make_beam
from tweezergates.coupling import GAUSS, frame_preset
from tweezergates.ionchain import gax_scan, normal_modes
from tweezergates.potentials import expansion_for_rabi

MHZ = 2 * np.pi * 1e6
ds = load_dataset()
chain = normal_modes(10, 3 * MHZ, 0.5 * MHZ, ds.mass)
beam = make_beam("TEM00", 729e-9, 729e-9, 10e-6, (0, 1))
ex, _ = expansion_for_rabi(beam, ds, frame_preset("B||y", 2.5 * GAUSS), 0.228 * MHZ, 0.5 * MHZ)

print("axial modes / 2pi MHz:", np.round(chain.axial_freqs / MHZ, 4))
nus = np.linspace(0.3, 3.5, 33) * MHZ
g, pole = gax_scan(chain, ex.delta1, nus)
for nu, v in zip(nus, g):
    print(f"nu = 2pi*{nu / MHZ:.2f} MHz  |g_ax| = 2pi*{abs(v) / (2 * np.pi):.3e} Hz")
