"""Quantization frame, spherical field components, E2 Rabi frequencies and light shifts.

Everything here works in the quantization frame ``(x', y', z' = B/|B|)``. The
frame is fixed by two angles: ``phi`` between B and the beam axis and
``theta`` between the polarization and the transverse projection of B. The
primed x axis is the part of the beam axis orthogonal to B, so for B in the
transverse plane it coincides with the lab z axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import clebsch_gordan, m_values, spin_matrices
from .atoms import AtomicDataset, polarizabilities_si
from .beams import BeamModel, field_gradient_at
from .constants import A0, E_CHARGE, HBAR, MU_B

GAUSS = 1e-4


@dataclass(frozen=True)
class CouplingFrame:
    """Static magnetic field and the lab-to-quantization rotation ``R``.

    ``R`` maps lab components to frame components, ``v' = R v``.
    """

    B: float  # tesla
    phi: float
    theta: float
    R: np.ndarray

    @property
    def b_hat(self) -> np.ndarray:
        return self.R[2].copy()


def make_frame(B: float, phi: float, theta: float, reference=(0.0, 1.0)) -> CouplingFrame:
    """Build a frame from the field magnitude (T) and the angles (rad).

    ``reference`` is the transverse direction from which ``theta`` is
    measured, normally the real part of the beam polarization.
    """
    if not (np.isfinite(B) and B >= 0):
        raise ValueError(f"B must be non-negative, got {B!r}")
    ref = np.array([reference[0], reference[1], 0.0], dtype=complex)
    ref = ref.real if np.linalg.norm(ref.real) > 1e-12 else ref.imag
    ref = ref / np.linalg.norm(ref)
    kz = np.array([0.0, 0.0, 1.0])
    perp = np.cross(ref, kz)
    u = np.cos(theta) * ref + np.sin(theta) * perp
    b_hat = np.cos(phi) * kz + np.sin(phi) * u
    if abs(np.sin(phi)) < 1e-12:
        # B along the beam axis: measure from the polarization instead
        x_axis = ref - np.dot(ref, b_hat) * b_hat
    else:
        # direction of k minus its projection on B, written without cancellation
        x_axis = np.sign(np.sin(phi)) * (np.sin(phi) * kz - np.cos(phi) * u)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(b_hat, x_axis)
    R = np.vstack([x_axis, y_axis, b_hat])
    return CouplingFrame(B=float(B), phi=float(phi), theta=float(theta), R=R)


def frame_preset(name: str, B: float, reference=(0.0, 1.0)) -> CouplingFrame:
    """Named orientations ``"B||y"`` (along the polarization) and ``"B||x"``."""
    key = name.replace("∥", "||").replace(" ", "").lower()
    if key in ("b||y", "by", "b_par_y"):
        return make_frame(B, np.pi / 2, 0.0, reference)
    if key in ("b||x", "bx", "b_par_x"):
        return make_frame(B, np.pi / 2, np.pi / 2, reference)
    raise ValueError(f"unknown frame preset {name!r}")


def displacement_axis(frame: CouplingFrame) -> np.ndarray:
    """Lab direction ``B x k`` along which the Rabi peak is displaced."""
    d = np.cross(frame.b_hat, [0.0, 0.0, 1.0])
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise ValueError("B is parallel to the beam axis; no transverse displacement axis")
    return d / n


def rotate_vector(v, frame: CouplingFrame) -> np.ndarray:
    return np.einsum("ij,...j->...i", frame.R, np.asarray(v))


def rotate_gradient(G, frame: CouplingFrame) -> np.ndarray:
    return np.einsum("ia,...ab,jb->...ij", frame.R, np.asarray(G), frame.R)


def rotate_to_quantization_frame(obj, frame: CouplingFrame) -> np.ndarray:
    """Rotate a field vector ``(..., 3)`` or gradient tensor ``(..., 3, 3)``."""
    obj = np.asarray(obj)
    if obj.shape[-2:] == (3, 3):
        return rotate_gradient(obj, frame)
    if obj.shape[-1] == 3:
        return rotate_vector(obj, frame)
    raise ValueError(f"cannot rotate array of shape {obj.shape}")


def rotate_from_quantization_frame(obj, frame: CouplingFrame) -> np.ndarray:
    inv = CouplingFrame(frame.B, frame.phi, frame.theta, frame.R.T)
    return rotate_to_quantization_frame(obj, inv)


def zeeman_shifts(dataset: AtomicDataset, B: float, label: str | None = None) -> dict:
    """Linear Zeeman shifts ``g_j mu_B B m / hbar`` (rad/s) keyed by ``(label, m)``."""
    if B < 0:
        raise ValueError("B must be non-negative")
    levels = [dataset.level(label)] if label is not None else dataset.levels
    out = {}
    for lv in levels:
        for m in m_values(lv.J):
            out[(lv.label, float(m))] = lv.g_j * MU_B * B * m / HBAR
    return out


def spherical_field_components(E) -> np.ndarray:
    """``(E_-1, E_0, E_+1)`` along the last axis, with ``E_{+-1} = -+(E_x +- i E_y)/sqrt 2``."""
    E = np.asarray(E, dtype=complex)
    ex, ey, ez = E[..., 0], E[..., 1], E[..., 2]
    return np.stack([(ex - 1j * ey) / np.sqrt(2), ez, -(ex + 1j * ey) / np.sqrt(2)], axis=-1)


def rank2_gradient_components(G) -> np.ndarray:
    """Rank-2 components ``q = -2..2`` (index ``q + 2``) of ``G[i, j] = d_i E_j``.

    The ``q = 0`` entry uses ``d_i E_i = 0``; the others hold for any tensor.
    """
    G = np.asarray(G, dtype=complex)
    xx, xy, xz = G[..., 0, 0], G[..., 0, 1], G[..., 0, 2]
    yx, yy, yz = G[..., 1, 0], G[..., 1, 1], G[..., 1, 2]
    zx, zy, zz = G[..., 2, 0], G[..., 2, 1], G[..., 2, 2]
    out = np.empty(G.shape[:-2] + (5,), dtype=complex)
    for s in (1, -1):
        out[..., 2 + 2 * s] = 0.5 * (xx + s * 1j * (xy + yx) - yy)
        out[..., 2 + s] = -s * 0.5 * (zx + s * 1j * zy + xz + s * 1j * yz)
    out[..., 2] = np.sqrt(6) / 2 * zz
    return out


def _e2_prefactor(dataset: AtomicDataset) -> float:
    return E_CHARGE * A0**2 / HBAR * dataset.q_red_au


def quadrupole_rabi(dataset: AtomicDataset, m_g, m_e, components) -> complex:
    """E2 Rabi frequency (rad/s) for ``|J_g m_g> -> |J_e m_e>``.

    ``components`` are the rank-2 gradient components in the quantization
    frame, indexed ``q + 2``. Transitions with ``|m_e - m_g| > 2`` give 0.
    """
    q = m_e - m_g
    if abs(q) > 2:
        return 0.0 + 0.0j
    Jg = dataset.lower_level.J
    Je = dataset.upper_level.J
    cg = clebsch_gordan(Jg, m_g, 2, q, Je, m_e)
    qi = int(round(q))
    return _e2_prefactor(dataset) * cg * (-1) ** qi * np.asarray(components)[..., 2 - qi]


def e2_coupling_table(dataset: AtomicDataset) -> np.ndarray:
    """Coefficients ``T[a, b, c]`` with ``Omega_ab = sum_c T[a, b, c] comps[c]``.

    ``a`` indexes lower sublevels and ``b`` upper sublevels in ascending m.
    """
    Jg = dataset.lower_level.J
    Je = dataset.upper_level.J
    mg = m_values(Jg)
    me = m_values(Je)
    pref = _e2_prefactor(dataset)
    T = np.zeros((len(mg), len(me), 5))
    for a, m1 in enumerate(mg):
        for b, m2 in enumerate(me):
            q = int(round(m2 - m1))
            if abs(q) <= 2:
                T[a, b, 2 - q] = pref * clebsch_gordan(Jg, m1, 2, q, Je, m2) * (-1) ** q
    return T


def polarizability_hamiltonian(alphas_si, J, E) -> np.ndarray:
    """Dipole light-shift operator (rad/s) on the ``2J+1`` sublevels.

    ``E`` is the field phasor in the quantization frame. The positive
    frequency part is ``E+ = E/2`` and ``E- = conj(E+)``; ``|E0|^2 = |E+|^2``.
    """
    alpha_s, alpha_v, alpha_t = alphas_si
    E = np.asarray(E, dtype=complex)
    ep = E / 2.0
    em = ep.conj()
    e0sq = float(np.real(np.vdot(ep, ep)))
    jx, jy, jz = spin_matrices(J)
    Jv = (jx, jy, jz)
    dim = jz.shape[0]
    H = -alpha_s * e0sq * np.eye(dim, dtype=complex)
    cross = np.cross(em, ep)
    H -= (alpha_v / J) * 1j * sum(cross[i] * Jv[i] for i in range(3))
    if J >= 1 and alpha_t != 0.0:
        a = sum(ep[i] * Jv[i] for i in range(3))
        b = sum(em[i] * Jv[i] for i in range(3))
        anti = 0.5 * (a @ b + b @ a)
        H -= 3 * alpha_t / (J * (2 * J - 1)) * (anti - J * (J + 1) / 3 * e0sq * np.eye(dim))
    return H / HBAR


def polarizability_stark(dataset: AtomicDataset, label: str, E, wavelength: float) -> np.ndarray:
    """Light-shift operator of level ``label`` for field ``E`` at ``wavelength``."""
    if label not in dataset.polarizabilities:
        raise KeyError(f"dataset {dataset.ident} has no polarizabilities for {label!r}")
    J = dataset.level(label).J
    return polarizability_hamiltonian(polarizabilities_si(dataset, label, wavelength), J, E)


def coupling_angle_map(beam: BeamModel, thetas, phis, q: int, reference=None) -> np.ndarray:
    """Normalised ``|(grad E)_{-q}|`` at the beam centre on a (theta, phi) grid.

    Returns an array of shape ``(len(thetas), len(phis))`` with maximum 1.
    """
    if abs(q) > 2:
        raise ValueError("q must lie in -2..2")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    if thetas.size == 0 or phis.size == 0:
        raise ValueError("angle grids must be non-empty")
    if reference is None:
        reference = beam.polarization
    G = field_gradient_at(beam, np.zeros(3))
    out = np.empty((thetas.size, phis.size))
    for i, th in enumerate(thetas):
        for j, ph in enumerate(phis):
            fr = make_frame(1.0, ph, th, reference)
            out[i, j] = abs(rank2_gradient_components(rotate_gradient(G, fr))[2 - q])
    peak = out.max()
    if peak == 0.0:
        raise ValueError("gradient vanishes at the beam centre; map undefined")
    return out / peak
