"""Tightly focused Gaussian and Laguerre-Gaussian beams with a longitudinal field.

The transverse field follows the usual paraxial envelope; the first-order
non-paraxial correction adds a longitudinal component

    E_z = -i (eps_x x + eps_y y) / z0 * f(r) e^{ikz} E0,

which is what drives the displaced quadrupole couplings downstream. Fields are
complex phasors with the convention ``E_phys = Re[E exp(-i w t)]``.

All functions accept points with shape ``(..., 3)`` and broadcast.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constants import C, EPS0


class Profile(str, enum.Enum):
    TEM00 = "TEM00"
    LG01 = "LG01"


@dataclass(frozen=True)
class BeamModel:
    """Immutable description of a focused beam.

    Use :func:`make_beam` to construct one; it validates the inputs and fills
    in the derived quantities.
    """

    profile: Profile
    w0: float
    wavelength: float
    power: float
    polarization: tuple[complex, complex]
    k: float
    z0: float
    e0: float

    @property
    def eps(self) -> np.ndarray:
        return np.array(self.polarization, dtype=complex)

    def with_power(self, power: float) -> "BeamModel":
        return make_beam(self.profile, self.w0, self.wavelength, power, self.polarization)


def peak_amplitude(power: float, w0: float) -> float:
    """Peak field amplitude (V/m) of a TEM00 beam carrying ``power`` watts."""
    return float(np.sqrt(4.0 * power / (np.pi * w0**2 * C * EPS0)))


def make_beam(profile, w0, wavelength, power, polarization=(0.0, 1.0)) -> BeamModel:
    """Validate parameters and build a :class:`BeamModel`.

    Parameters
    ----------
    profile : str or Profile
        ``"TEM00"`` or ``"LG01"`` (p=0, l=1).
    w0, wavelength : float
        Waist and wavelength in metres.
    power : float
        Optical power in watts. The LG01 mode is normalised to the same total
        power as a TEM00 beam with the same waist.
    polarization : sequence of two complex
        Transverse polarization (eps_x, eps_y); normalised here.
    """
    profile = Profile(profile)
    if not (np.isfinite(w0) and w0 > 0):
        raise ValueError(f"waist must be positive, got {w0!r}")
    if not (np.isfinite(wavelength) and wavelength > 0):
        raise ValueError(f"wavelength must be positive, got {wavelength!r}")
    if not (np.isfinite(power) and power >= 0):
        raise ValueError(f"power must be non-negative, got {power!r}")
    eps = np.asarray(polarization, dtype=complex).reshape(-1)
    if eps.shape != (2,):
        raise ValueError("polarization must have exactly two transverse components")
    norm = np.linalg.norm(eps)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("polarization vector must be non-zero")
    eps = eps / norm
    k = 2.0 * np.pi / wavelength
    z0 = np.pi * w0**2 / wavelength
    return BeamModel(
        profile=profile,
        w0=float(w0),
        wavelength=float(wavelength),
        power=float(power),
        polarization=(complex(eps[0]), complex(eps[1])),
        k=float(k),
        z0=float(z0),
        e0=peak_amplitude(power, w0),
    )


def _envelope_parts(beam: BeamModel, r: np.ndarray):
    """Envelope pieces: prefactor P, Gaussian part G, dP and dlnG per axis."""
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    z0, k, w0 = beam.z0, beam.k, beam.w0
    q = z - 1j * z0
    g = 1.0 / (1.0 + 1j * z / z0)
    rho2 = x**2 + y**2
    if beam.profile is Profile.TEM00:
        order = 1
        P = np.ones_like(q)
        dP = np.zeros(r.shape, dtype=complex)
    else:
        order = 2
        P = np.sqrt(2.0) * (x + 1j * y) / w0
        dP = np.zeros(r.shape, dtype=complex)
        dP[..., 0] = np.sqrt(2.0) / w0
        dP[..., 1] = 1j * np.sqrt(2.0) / w0
    G = g**order * np.exp(1j * k * rho2 / (2.0 * q))
    dlnG = np.empty(r.shape, dtype=complex)
    dlnG[..., 0] = 1j * k * x / q
    dlnG[..., 1] = 1j * k * y / q
    dlnG[..., 2] = -1j * order * g / z0 - 1j * k * rho2 / (2.0 * q**2)
    return P, G, dP, dlnG


def _polarization_vector(beam: BeamModel, r: np.ndarray) -> np.ndarray:
    ex, ey = beam.polarization
    c = np.empty(r.shape, dtype=complex)
    c[..., 0] = ex
    c[..., 1] = ey
    c[..., 2] = -1j * (ex * r[..., 0] + ey * r[..., 1]) / beam.z0
    return c


def field_at(beam: BeamModel, r) -> np.ndarray:
    """Complex field phasor (V/m) at point(s) ``r``; returns shape ``(..., 3)``."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("positions must be finite")
    P, G, _, _ = _envelope_parts(beam, r)
    phase = np.exp(1j * beam.k * r[..., 2])
    scalar = beam.e0 * P * G * phase
    return scalar[..., None] * _polarization_vector(beam, r)


def field_gradient_at(beam: BeamModel, r) -> np.ndarray:
    """Gradient tensor ``G[..., i, j] = d_i E_j`` (V/m^2) at point(s) ``r``."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("positions must be finite")
    P, G, dP, dlnG = _envelope_parts(beam, r)
    phase = np.exp(1j * beam.k * r[..., 2])
    phi = beam.e0 * P * G * phase
    # d_i phi = E0 e^{ikz} (dP_i G + P G dlnG_i) + delta_iz i k phi
    dphi = beam.e0 * phase[..., None] * G[..., None] * (dP + P[..., None] * dlnG)
    dphi[..., 2] += 1j * beam.k * phi
    c = _polarization_vector(beam, r)
    ex, ey = beam.polarization
    grad = dphi[..., :, None] * c[..., None, :]
    grad[..., 0, 2] += phi * (-1j * ex / beam.z0)
    grad[..., 1, 2] += phi * (-1j * ey / beam.z0)
    return grad


def divergence_residual(beam: BeamModel, r) -> float:
    """``|div E| / (k max_j |E_j|)`` at a single point.

    Measures how far the first-order field is from being transverse in the
    Maxwell sense; it scales as ``(lambda / (pi w0))**2``.
    """
    r = np.asarray(r, dtype=float).reshape(3)
    E = field_at(beam, r)
    emax = np.max(np.abs(E))
    if emax == 0.0:
        raise ValueError(f"field vanishes at {r.tolist()}; residual undefined")
    div = np.trace(field_gradient_at(beam, r))
    return float(abs(div) / (beam.k * emax))
