"""Expansion coefficients, error parameters and single-qubit infidelities at w0 = 729 nm."""

import numpy as np

from tweezergates.atoms import load_dataset
from tweezergates.beams import make_beam
from tweezergates.coupling import GAUSS, frame_preset
from tweezergates.dynamics import simulate_single_qubit
from tweezergates.gatemodel import compensated_infidelity, error_params, thermal_rabi
from tweezergates.potentials import expansion_for_rabi

MHZ = 2 * np.pi * 1e6
ds = load_dataset()
beam = make_beam("TEM00", 729e-9, 729e-9, 10e-6, (0, 1))
omega = 0.5 * MHZ
nbars = [0.05, 0.5, 2.0]

for w, b in [(0.2, 2.5), (0.2, 5.0), (1.0, 2.5), (1.0, 5.0)]:
    ex, _ = expansion_for_rabi(beam, ds, frame_preset("B||y", b * GAUSS), w * MHZ, omega)
    p = error_params(ex, omega, ds.mass)
    print(f"Omega0 = 2pi*{w} MHz, B = {b} G: x0 = {ex.x0 * 1e9:.1f} nm, "
          f"kappa_x/Omega0 = {p.kappa_x / ex.omega0:.2e}, kappa_z/Omega0 = {p.kappa_z / ex.omega0:.2e}")
    tg = simulate_single_qubit(ex, omega, ds.mass, nbars, "tg")
    tb = simulate_single_qubit(ex, omega, ds.mass, nbars, "tbar")
    for nb, a, c in zip(nbars, tg, tb):
        ana = compensated_infidelity(p, ex.omega0, thermal_rabi(ex, p, nb), nb)
        print(f"  nbar {nb:4}: 1-F(t_g) {a.infidelity:.2e}  1-F(t_bar) {c.infidelity:.2e}  analytic {ana:.2e}")
