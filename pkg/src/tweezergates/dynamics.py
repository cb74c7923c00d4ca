"""Truncated Fock-space dynamics for the single-ion gate.

Composite operators are ordered qubit first: index ``q * (n_max + 1) + n``.
Energies are angular frequencies (hbar = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .constants import HBAR
from .gatemodel import GateErrorParams, error_params, gate_time, thermal_rabi, thermal_tail, thermal_weights
from .potentials import ExpansionCoefficients

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULIS = (I2, SX, SY, SZ)

N_GUARD = 3


class TruncationError(RuntimeError):
    """The Fock cutoff is too small for the requested thermal state."""


class ConvergenceError(RuntimeError):
    """Time stepping did not reach the requested self-consistency."""


class FockSpace:
    """Ladder operators on ``span{|0>, ..., |n_max>}``."""

    def __init__(self, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        self.n_max = int(n_max)
        self.dim = self.n_max + 1
        n = np.arange(self.dim)
        self.a = np.diag(np.sqrt(n[1:]), k=1).astype(complex)
        self.adag = self.a.conj().T
        self.n = np.diag(n).astype(complex)
        self.eye = np.eye(self.dim, dtype=complex)

    @property
    def x_unit(self) -> np.ndarray:
        """``a + a^dag``."""
        return self.a + self.adag

    @property
    def x2_unit(self) -> np.ndarray:
        """``(a + a^dag)^2`` truncated term by term, so ``<n|.|n> = 2n + 1`` exactly."""
        return self.a @ self.a + self.adag @ self.adag + 2 * self.n + self.eye

    @property
    def p_unit(self) -> np.ndarray:
        """``i (a^dag - a)``."""
        return 1j * (self.adag - self.a)

    def squeeze(self, s: float) -> np.ndarray:
        """``exp(s/2 (a^2 - a^dag^2))``."""
        return expm(0.5 * s * (self.a @ self.a - self.adag @ self.adag))

    def displace(self, z: float) -> np.ndarray:
        """``exp(z (a^dag - a))`` for real ``z``."""
        return expm(z * (self.adag - self.a))


def qubit_op(op: np.ndarray, fock: FockSpace) -> np.ndarray:
    return np.kron(op, fock.eye)


def motion_op(op: np.ndarray) -> np.ndarray:
    return np.kron(I2, op)


def build_h3(
    expansion: ExpansionCoefficients,
    omega: float,
    l_ho: float,
    n_max: int,
    include_stark: bool = True,
    resonant: bool = True,
) -> np.ndarray:
    """Single-ion Hamiltonian about ``x0`` (rad/s), qubit-first ordering.

    ``resonant`` applies the resonance convention (``delta0`` absorbed by the
    laser detuning); ``include_stark=False`` drops every Stark term.
    """
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    f = FockSpace(n_max)
    x = l_ho * f.x_unit
    x2 = l_ho**2 * f.x2_unit
    H = omega * np.kron(I2, f.n + 0.5 * f.eye)
    H = H + np.kron(SX, expansion.omega0 * f.eye + expansion.omega2 * x2)
    if include_stark:
        d0 = 0.0 if resonant else expansion.delta0
        H = H + np.kron(SZ, d0 * f.eye + expansion.delta1 * x + expansion.delta2 * x2)
    return H


def ideal_hamiltonian(omega: float, omega0: float, n_max: int) -> np.ndarray:
    f = FockSpace(n_max)
    return omega * np.kron(I2, f.n + 0.5 * f.eye) + omega0 * np.kron(SX, f.eye)


@dataclass
class PropagationResult:
    U: np.ndarray
    leakage: float = 0.0
    steps: int = 1
    method: str = "eigh"
    meta: dict = field(default_factory=dict)


def _check_hermitian(H: np.ndarray, rtol: float = 1e-12) -> None:
    scale = max(np.max(np.abs(H)), 1.0)
    if np.max(np.abs(H - H.conj().T)) > rtol * scale:
        raise ValueError("Hamiltonian is not Hermitian")


class Propagator:
    """``exp(-i H t)`` for many ``t`` from a single eigendecomposition."""

    def __init__(self, H: np.ndarray):
        H = np.asarray(H, dtype=complex)
        _check_hermitian(H)
        self.E, self.V = np.linalg.eigh(0.5 * (H + H.conj().T))

    def __call__(self, t: float) -> np.ndarray:
        return (self.V * np.exp(-1j * self.E * t)) @ self.V.conj().T


def evolve(H: np.ndarray, t: float) -> PropagationResult:
    """Unitary for a time-independent Hermitian ``H``."""
    return PropagationResult(Propagator(H)(t), method="eigh")


def _step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    E, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * E * dt)) @ V.conj().T


def _midpoint_product(h_of_t, T: float, n_steps: int) -> np.ndarray:
    dt = T / n_steps
    U = None
    for k in range(n_steps):
        Uk = _step_unitary(h_of_t((k + 0.5) * dt), dt)
        U = Uk if U is None else Uk @ U
    return U


def unitary_distance(U1: np.ndarray, U2: np.ndarray) -> float:
    """Spectral-norm distance ``||U1 - U2||``."""
    return float(np.linalg.norm(U1 - U2, 2))


def evolve_timedep(
    h_of_t: Callable[[float], np.ndarray],
    T: float,
    n_steps: int = 64,
    tol: float = 1e-8,
    max_refinements: int = 12,
    metric: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> PropagationResult:
    """Ordered product of midpoint exponentials, halving ``dt`` until converged.

    Convergence is declared when ``metric(U_fine, U_coarse) < tol``. The
    default metric is the spectral-norm distance, which bounds the change of
    any fidelity computed from ``U``.
    """
    metric = unitary_distance if metric is None else metric
    U_prev = _midpoint_product(h_of_t, T, n_steps)
    delta = np.inf
    for _ in range(max_refinements):
        n_steps *= 2
        U = _midpoint_product(h_of_t, T, n_steps)
        delta = metric(U, U_prev)
        if delta < tol:
            return PropagationResult(U, steps=n_steps, method="midpoint", meta={"delta": delta})
        U_prev = U
    raise ConvergenceError(f"midpoint stepping not converged after {max_refinements} halvings; last change {delta:.3e}")


# --- fidelity ----------------------------------------------------------------


def pauli_basis(n_qubits: int) -> list[np.ndarray]:
    ops = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        ops = [np.kron(a, p) for a in ops for p in PAULIS]
    return ops


def sector_channel(U: np.ndarray, d: int, sector: int, ops) -> np.ndarray:
    """Images ``tr_motion(U (sigma_l x |n><n|) U^dag)`` for each operator, shape ``(L, d, d)``."""
    M = U.shape[0] // d
    cols = sector + M * np.arange(d)
    K = U[:, cols].reshape(d, M, d)  # (q_out, m_out, q_in)
    ops = np.asarray(ops)
    return np.einsum("amb,lbc,dmc->lad", K, ops, K.conj())


def _ideal_images(U_id: np.ndarray, d: int, sector: int, ops) -> np.ndarray:
    if U_id.shape == (d, d):
        return np.einsum("ab,lbc,dc->lad", U_id, np.asarray(ops), U_id.conj())
    return sector_channel(U_id, d, sector, ops)


def _fidelity_from_images(ideal: np.ndarray, real: np.ndarray, d: int) -> float:
    s = np.einsum("lab,lab->", ideal.conj(), real).real
    return float((s + d**2) / (d**2 * (d + 1)))


def sector_fidelity(U_real: np.ndarray, U_id: np.ndarray, d: int, sector: int, ops=None) -> float:
    """Average gate fidelity of one motional input sector."""
    ops = pauli_basis(int(round(math.log2(d)))) if ops is None else ops
    real = sector_channel(U_real, d, sector, ops)
    ideal = _ideal_images(U_id, d, sector, ops)
    return _fidelity_from_images(ideal, real, d)


def kraus_fidelity(K: np.ndarray, U_id: np.ndarray, ops=None) -> float:
    """Average gate fidelity of the channel ``rho -> sum_m K_m rho K_m^dag``.

    ``K`` has shape ``(d, M, d)`` (output qubit, motional output, input
    qubit), i.e. the evolved columns of one motional input state.
    """
    d = K.shape[0]
    ops = np.asarray(pauli_basis(int(round(math.log2(d)))) if ops is None else ops)
    real = np.einsum("amb,lbc,dmc->lad", K, ops, K.conj())
    ideal = np.einsum("ab,lbc,dc->lad", U_id, ops, U_id.conj())
    return _fidelity_from_images(ideal, real, d)


def process_fidelity(
    U_real: np.ndarray,
    U_id: np.ndarray,
    nbar: float,
    n_max: int | None = None,
    d: int = 2,
    deficit_tol: float = 1e-6,
    sector_index=None,
) -> float:
    """Thermally averaged average-gate fidelity.

    ``U_id`` is either a ``d x d`` qubit unitary or a composite unitary on the
    same space as ``U_real``. ``sector_index(n)`` maps Fock number ``n`` of the
    thermal mode to a motional basis index (default: identity).
    """
    M = U_real.shape[0] // d
    n_max = M - 1 if n_max is None else n_max
    w = thermal_weights(nbar, n_max)
    deficit = 1.0 - float(np.sum(w))
    if deficit > deficit_tol:
        raise TruncationError(f"thermal weight deficit {deficit:.2e} at n_max={n_max}; increase the cutoff")
    ops = pauli_basis(int(round(math.log2(d))))
    idx = (lambda n: n) if sector_index is None else sector_index
    F = np.array(
        [sector_fidelity(U_real, U_id, d, idx(n), ops) if w[n] > 0 else 0.0 for n in range(n_max + 1)]
    )
    return float(np.sum(w * F) / np.sum(w))


def truncation_for(nbar: float, tail_tol: float = 1e-8, base: int = 20) -> int:
    """Cutoff ``max(base, ceil(8 nbar) + 15)`` raised until the thermal tail is below ``tail_tol``."""
    n_max = max(base, math.ceil(8 * nbar) + 15)
    while thermal_tail(nbar, n_max) >= tail_tol:
        n_max += 1
    return n_max


def leakage(U: np.ndarray, d: int, sectors, n_guard: int = N_GUARD) -> float:
    """Largest population driven into the top ``n_guard`` Fock levels."""
    M = U.shape[0] // d
    top = np.zeros(M, dtype=bool)
    top[M - n_guard :] = True
    rows = np.concatenate([top] * d)
    worst = 0.0
    for n in sectors:
        cols = n + M * np.arange(d)
        worst = max(worst, float(np.max(np.sum(np.abs(U[rows][:, cols]) ** 2, axis=0))))
    return worst


@dataclass(frozen=True)
class SingleQubitResult:
    nbar: float
    infidelity: float
    gate_time: float
    n_max: int
    leakage: float


def simulate_single_qubit(
    expansion: ExpansionCoefficients,
    omega: float,
    mass: float,
    nbars,
    timing: str = "tbar",
    include_stark: bool = True,
    n_max: int | None = None,
    leakage_tol: float = 1e-4,
) -> list[SingleQubitResult]:
    """Numerical thermally averaged infidelity of the pi/2 gate.

    ``timing`` is ``"tg"`` (``pi / 2 W0``) or ``"tbar"`` (``pi / 2 W_bar``).
    The ideal reference is always ``exp(-i H_id t_g)``.
    """
    if timing not in ("tg", "tbar"):
        raise ValueError("timing must be 'tg' or 'tbar'")
    nbars = np.atleast_1d(np.asarray(nbars, dtype=float))
    params = error_params(expansion, omega, mass)
    if not include_stark:
        params = error_params(expansion.with_terms(delta0=0.0, delta1=0.0, delta2=0.0), omega, mass)
    if n_max is None:
        n_max = truncation_for(float(nbars.max()))
    H = build_h3(expansion, omega, params.l_ho, n_max, include_stark=include_stark)
    prop = Propagator(H)
    w0 = expansion.omega0
    tg = gate_time(w0)
    U_id = Propagator(ideal_hamiltonian(omega, w0, n_max))(tg)
    out = []
    for nb in nbars:
        t = tg if timing == "tg" else gate_time(thermal_rabi(expansion, params, nb))
        U = prop(t)
        w = thermal_weights(nb, n_max)
        tracked = [n for n in range(n_max + 1 - N_GUARD) if w[n] >= 1e-6]
        leak = leakage(U, 2, tracked)
        if leak > leakage_tol:
            raise TruncationError(f"leakage {leak:.2e} into the top Fock levels at n_max={n_max}")
        F = process_fidelity(U, U_id, nb, n_max)
        out.append(SingleQubitResult(float(nb), 1.0 - F, t, n_max, leak))
    return out


# --- S2 oracle ---------------------------------------------------------------


@dataclass(frozen=True)
class TransformReport:
    max_rel_deviation: float  # relative to the qubit part of the closed form
    max_rel_correction_deviation: float  # relative to the kappa corrections
    kappa_x_fit: float
    kappa_z_fit: float
    kappa_x: float
    kappa_z: float
    n_checked: int
    linear_residual: float = 0.0


def transformed_generator_check(
    expansion: ExpansionCoefficients,
    omega: float,
    l_ho: float,
    n_max: int = 20,
    pad: int = 80,
    tol: float | None = None,
) -> TransformReport:
    """Conjugate H3 by ``S(s sz) D(-zeta sz)`` and compare Fock-diagonal blocks.

    The closed form is ``w (n + 1/2) + W0 sx + kz (n + 1/2) sz + kx (2n + 1) sx``
    with the signed ``kx`` of :mod:`tweezergates.gatemodel`. The transform is
    computed in a space padded by ``pad`` levels so truncation does not reach
    the checked blocks. Identity parts (global offsets) are ignored.
    ``linear_residual`` is the largest qubit-diagonal ``|<n+1|H|n>|`` left
    after the transform, relative to ``|d1| l_ho sqrt(n + 1)``.
    """
    mass = 1.0 / (2.0 * omega * l_ho**2) * HBAR
    params = error_params(expansion, omega, mass)
    nb = n_max + pad
    f = FockSpace(nb)
    H = build_h3(expansion, omega, l_ho, nb)
    s, z = params.s, params.zeta
    S = np.block([[f.squeeze(s), np.zeros((f.dim, f.dim))], [np.zeros((f.dim, f.dim)), f.squeeze(-s)]])
    # the squeeze rescales the linear term by exp(-s sz); displace by -zeta exp(-s sz) sz to cancel it
    D = np.block(
        [[f.displace(-z * np.exp(-s)), np.zeros((f.dim, f.dim))], [np.zeros((f.dim, f.dim)), f.displace(z * np.exp(s))]]
    )
    W = S @ D
    Ht = W.conj().T @ H @ W
    n_check = n_max // 2
    dev = corr_dev = lin = 0.0
    cx = []
    cz = []
    for n in range(n_check + 1):
        idx = [n, f.dim + n]
        block = Ht[np.ix_(idx, idx)]
        x_coef = 0.5 * np.real(np.trace(block @ SX))
        z_coef = 0.5 * np.real(np.trace(block @ SZ))
        y_coef = 0.5 * np.real(np.trace(block @ SY))
        ref_x = expansion.omega0 + params.kappa_x * (2 * n + 1)
        ref_z = params.kappa_z * (n + 0.5)
        err = np.sqrt((x_coef - ref_x) ** 2 + (z_coef - ref_z) ** 2 + y_coef**2)
        dev = max(dev, err / np.hypot(ref_x, ref_z))
        corr = np.hypot(params.kappa_x * (2 * n + 1), ref_z)
        if corr > 0:
            corr_dev = max(corr_dev, err / corr)
        if expansion.delta1 != 0.0:
            off = Ht[np.ix_([n + 1, f.dim + n + 1], idx)]
            # qubit-diagonal part only; the sx sideband created by the transform is genuine
            lin = max(lin, np.max(np.abs(np.diag(off))) / (abs(expansion.delta1) * l_ho * np.sqrt(n + 1)))
        cx.append(x_coef - expansion.omega0)
        cz.append(z_coef)
    ns = np.arange(n_check + 1)
    kx_fit = float(np.polyfit(2 * ns + 1, cx, 1)[0])
    kz_fit = float(np.polyfit(ns + 0.5, cz, 1)[0])
    report = TransformReport(dev, corr_dev, kx_fit, kz_fit, params.kappa_x, params.kappa_z, n_check + 1, float(lin))
    if tol is not None and dev > tol:
        raise AssertionError(f"transformed generator deviates by {dev:.3e} > {tol:.1e}")
    return report
