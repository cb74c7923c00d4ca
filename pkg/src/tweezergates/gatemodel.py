"""Analytic single-qubit error model of the displaced tweezer.

After a qubit-dependent squeeze ``S(s sz)`` and displacement ``D(zeta sz)``
the Fock-diagonal part of the Hamiltonian reads

    H = w (n + 1/2) + W0 sx + kz (n + 1/2) sz + kx (2n + 1) sx,

with ``zeta = d1 l / w``, ``s = d2 l^2 / w``, ``kz = 2 d2 l^2`` and
``kx = W2 l^2 - 2 W0 zeta^2``. Conjugating ``sx`` by the displacement gives
``<n|D(2 zeta)|n> ~ 1 - 2 zeta^2 (2n + 1)``, hence the minus sign on the
Stark-gradient part of ``kx``. Both parts are kept separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .potentials import ExpansionCoefficients


@dataclass(frozen=True)
class GateErrorParams:
    omega: float  # trap frequency, rad/s
    mass: float  # kg
    l_ho: float  # m
    zeta: float
    s: float
    kappa_z: float  # rad/s
    kappa_x_curvature: float  # W2 l^2, rad/s
    kappa_x_gradient: float  # -2 W0 zeta^2, rad/s
    cross_term: float  # s zeta / 2 diagnostic, rad/s

    @property
    def kappa_x(self) -> float:
        return self.kappa_x_curvature + self.kappa_x_gradient


def error_params(expansion: ExpansionCoefficients, omega: float, mass: float, omega0: float | None = None) -> GateErrorParams:
    """Dimensionless error ledger of the transformed Hamiltonian."""
    if omega <= 0:
        raise ValueError("trap frequency must be positive")
    if mass <= 0:
        raise ValueError("mass must be positive")
    w0 = expansion.omega0 if omega0 is None else omega0
    l_ho = float(np.sqrt(HBAR / (2.0 * mass * omega)))
    zeta = expansion.delta1 * l_ho / omega
    s = expansion.delta2 * l_ho**2 / omega
    return GateErrorParams(
        omega=float(omega),
        mass=float(mass),
        l_ho=l_ho,
        zeta=float(zeta),
        s=float(s),
        kappa_z=float(2.0 * expansion.delta2 * l_ho**2),
        kappa_x_curvature=float(expansion.omega2 * l_ho**2),
        kappa_x_gradient=float(-2.0 * w0 * zeta**2),
        cross_term=float(s * zeta / 2.0 * omega),
    )


def thermal_weights(nbar: float, n_max: int) -> np.ndarray:
    """Bose-Einstein weights ``nbar^n / (1 + nbar)^(n+1)`` for ``n = 0..n_max``."""
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    n = np.arange(n_max + 1)
    if nbar == 0:
        w = np.zeros(n.size)
        w[0] = 1.0
        return w
    return np.exp(n * np.log(nbar / (1.0 + nbar)) - np.log1p(nbar))


def thermal_tail(nbar: float, n_max: int) -> float:
    """Weight beyond ``n_max``: ``(nbar / (1 + nbar))^(n_max + 1)``."""
    if nbar == 0:
        return 0.0
    return float((nbar / (1.0 + nbar)) ** (n_max + 1))


def analytic_infidelity(params: GateErrorParams, omega0: float, nbar: float) -> float:
    """``(1 + 8 nbar (nbar + 1)) (pi^2 kx^2 + kz^2) / (6 W0^2)`` at ``t_g = pi / 2 W0``."""
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    kx, kz = params.kappa_x, params.kappa_z
    return float((1 + 8 * nbar * (nbar + 1)) * (np.pi**2 * kx**2 + kz**2) / (6 * omega0**2))


def thermal_rabi(expansion: ExpansionCoefficients, params: GateErrorParams, nbar: float, omega0: float | None = None) -> float:
    """Thermally averaged Rabi frequency ``W0 + kx (2 nbar + 1)``."""
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    w0 = expansion.omega0 if omega0 is None else omega0
    return float(w0 + params.kappa_x * (2 * nbar + 1))


def compensated_infidelity(params: GateErrorParams, omega0: float, omega_bar: float, nbar: float) -> float:
    """Infidelity of the gate timed with ``t = pi / 2 W_bar``, ``gamma = W0 / W_bar``."""
    if omega_bar <= 0:
        raise ValueError("thermal Rabi frequency must be positive")
    g = omega0 / omega_bar
    kx, kz = params.kappa_x, params.kappa_z
    n = nbar
    cg = np.cos(np.pi * g)
    sg = np.sin(np.pi * g)
    val = (
        (2.0 / 3.0) * np.cos(np.pi * g / 2) ** 2
        - (1 + 2 * n) * (np.pi * kx / (3 * omega_bar)) * sg
        - (1 + 8 * n * (n + 1))
        / (6 * omega0**2)
        * (np.pi**2 * kx**2 * g**2 * cg + kz**2 / 2 * (cg - 1) + np.pi * kz**2 * g / 4 * sg)
    )
    return float(val)


def gate_time(omega: float) -> float:
    """Duration of the pi/2 rotation ``exp(-i W t sx)`` with ``W t = pi / 2``."""
    return float(np.pi / (2.0 * omega))
