"""Normal modes of linear ion chains, parallel addressing and axial qubit-qubit coupling.

Mode vectors are stored as ``b[m, k]`` (mode ``m``, ion ``k``) with
orthonormal rows. Axial modes are sorted by increasing frequency, so the
centre-of-mass mode is ``m = 0``; radial modes are sorted by decreasing
frequency so the radial centre-of-mass mode is also ``m = 0``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, minimize

from .constants import E_CHARGE, EPS0, HBAR
from .dynamics import SX, SY, SZ, I2, FockSpace
from .potentials import ExpansionCoefficients


class ChainError(RuntimeError):
    """Equilibrium search failed."""


class PoleError(ValueError):
    """The modulation frequency coincides with an axial mode."""


@dataclass(frozen=True)
class IonChain:
    N: int
    omega_r: float
    omega_z: float
    mass: float
    positions: np.ndarray  # m
    axial_freqs: np.ndarray  # rad/s, ascending
    axial_vectors: np.ndarray  # b[m, k]
    radial_freqs: np.ndarray  # rad/s, descending
    radial_vectors: np.ndarray
    axial_hessian: np.ndarray  # dimensionless, units of m omega_z^2
    radial_hessian: np.ndarray

    def mode_length(self, m: int, radial: bool = False) -> float:
        """``l_m = sqrt(hbar / 2 m omega_m)``."""
        w = self.radial_freqs[m] if radial else self.axial_freqs[m]
        return float(np.sqrt(HBAR / (2.0 * self.mass * w)))

    @property
    def axial_lengths(self) -> np.ndarray:
        return np.sqrt(HBAR / (2.0 * self.mass * self.axial_freqs))


def _length_scale(omega_z: float, mass: float) -> float:
    return (E_CHARGE**2 / (4 * np.pi * EPS0 * mass * omega_z**2)) ** (1.0 / 3.0)


def _energy(u):
    d = u[:, None] - u[None, :]
    iu = np.triu_indices(u.size, 1)
    return 0.5 * np.sum(u**2) + np.sum(1.0 / np.abs(d[iu]))


def _gradient(u):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def equilibrium_positions(N: int) -> np.ndarray:
    """Dimensionless equilibrium positions (units of the Coulomb length)."""
    if N < 1:
        raise ValueError("N must be positive")
    if N == 1:
        return np.zeros(1)
    u0 = np.linspace(-1.0, 1.0, N) * 0.8 * N**0.56
    res = minimize(_energy, u0, jac=_gradient, method="BFGS", options={"gtol": 1e-8, "maxiter": 10000})
    u = np.sort(res.x)
    for _ in range(50):  # Newton polish with the exact Hessian
        A, _ = _hessians(u, 1.0)
        step = np.linalg.solve(A, _gradient(u))
        u = u - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(u))):
            break
    if np.max(np.abs(_gradient(u))) > 1e-11:
        raise ChainError(f"equilibrium not converged: {res.message}")
    return u


def _hessians(u: np.ndarray, ratio2: float):
    N = u.size
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    c = 1.0 / d**3
    A = -2.0 * c
    np.fill_diagonal(A, 1.0 + 2.0 * c.sum(axis=1))
    B = c.copy()
    np.fill_diagonal(B, ratio2 - c.sum(axis=1))
    return A, B


def normal_modes(N: int, omega_r: float, omega_z: float, mass: float) -> IonChain:
    """Equilibrium positions and axial/radial modes of an ``N``-ion chain."""
    if omega_z <= 0 or omega_r <= 0 or mass <= 0:
        raise ValueError("frequencies and mass must be positive")
    if omega_r <= omega_z:
        warnings.warn("omega_r <= omega_z: the chain may not be linear", RuntimeWarning, stacklevel=2)
    u = equilibrium_positions(N)
    A, B = _hessians(u, (omega_r / omega_z) ** 2)
    ea, va = np.linalg.eigh(A)
    eb, vb = np.linalg.eigh(B)
    if eb.min() <= 0:
        warnings.warn("radial Hessian not positive: linear chain unstable", RuntimeWarning, stacklevel=2)
    order = np.argsort(eb)[::-1]
    eb, vb = eb[order], vb[:, order]
    return IonChain(
        N=N,
        omega_r=float(omega_r),
        omega_z=float(omega_z),
        mass=float(mass),
        positions=u * _length_scale(omega_z, mass),
        axial_freqs=omega_z * np.sqrt(ea),
        axial_vectors=_fix_sign(va.T),
        radial_freqs=omega_z * np.sqrt(np.clip(eb, 0, None)),
        radial_vectors=_fix_sign(vb.T),
        axial_hessian=A,
        radial_hessian=B,
    )


def _fix_sign(b: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude-first entry of each mode positive (deterministic output)."""
    b = b.copy()
    for m in range(b.shape[0]):
        k = int(np.argmax(np.abs(b[m]) > 1e-9))
        if b[m, k] < 0:
            b[m] *= -1
    return b


def default_pair(N: int) -> tuple[int, int]:
    """The two central ions (the outer pair for ``N = 2``)."""
    if N < 2:
        raise ValueError("need at least two ions")
    return (N // 2 - 1, N // 2)


# --- axial qubit-qubit coupling ---------------------------------------------


def gax_terms(chain: IonChain, delta1: float, nu: float, ions=None, pole_tol: float = 1e-9) -> np.ndarray:
    """Per-mode contributions ``d1^2 l_m^2 b_mi b_mj / (nu - w_m)`` (rad/s)."""
    i, j = default_pair(chain.N) if ions is None else ions
    if i == j:
        raise ValueError("ions must differ")
    mu = nu - chain.axial_freqs
    bad = np.flatnonzero(np.abs(mu) <= pole_tol * chain.axial_freqs)
    if bad.size:
        m = int(bad[0])
        raise PoleError(f"nu coincides with axial mode {m} at {chain.axial_freqs[m]:.9e} rad/s")
    b = chain.axial_vectors
    return delta1**2 * chain.axial_lengths**2 * b[:, i] * b[:, j] / mu


def axial_qq_coupling(chain: IonChain, delta1: float, nu: float, ions=None, pole_tol: float = 1e-9) -> float:
    """Signed sum over axial modes of the induced ``sz sz`` coupling (rad/s)."""
    return float(np.sum(gax_terms(chain, delta1, nu, ions, pole_tol)))


def gax_scan(chain: IonChain, delta1: float, nus, ions=None, pole_tol: float = 1e-9):
    """``g_ax`` over a frequency grid; rows at a pole hold NaN and are flagged."""
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    g = np.empty(nus.size)
    pole = np.zeros(nus.size, dtype=bool)
    for k, nu in enumerate(nus):
        try:
            g[k] = axial_qq_coupling(chain, delta1, nu, ions, pole_tol)
        except PoleError:
            g[k] = np.nan
            pole[k] = True
    return g, pole


def gax_poles(chain: IonChain, delta1: float, ions=None, rel_window: float = 1e-3) -> np.ndarray:
    """Locate the divergences of ``g_ax(nu)`` by root-finding ``1 / g_ax``.

    Modes that do not couple the chosen pair (``b_mi b_mj = 0``) give NaN.
    """
    i, j = default_pair(chain.N) if ions is None else ions
    out = np.full(chain.N, np.nan)
    b = chain.axial_vectors
    for m, wm in enumerate(chain.axial_freqs):
        if abs(b[m, i] * b[m, j]) < 1e-12:
            continue
        h = rel_window * wm

        def inv(nu):
            if nu == wm:
                return 0.0
            return 1.0 / axial_qq_coupling(chain, delta1, nu, (i, j), pole_tol=0.0)

        while np.sign(inv(wm - h)) == np.sign(inv(wm + h)) and h > 1e-12 * wm:
            h /= 2  # a nearby zero of g_ax also flips the sign of 1 / g_ax
        out[m] = brentq(inv, wm - h, wm + h, xtol=1e-14 * wm, rtol=1e-15)
    return out


# --- parallel single-qubit addressing -------------------------------------------


@dataclass(frozen=True)
class ParallelGateModel:
    """Two addressed ions coupled to a set of axial modes."""

    freqs: np.ndarray  # mode frequencies, rad/s
    lengths: np.ndarray  # l_m, m
    b_i: np.ndarray
    b_j: np.ndarray
    expansion: ExpansionCoefficients

    @property
    def zetas(self) -> np.ndarray:
        return self.expansion.delta1 * self.lengths / self.freqs

    def qq_coefficient(self) -> float:
        """Coefficient of ``sz_i sz_j``: ``-sum_m 2 w_m zeta_m^2 b_mi b_mj``."""
        return float(-np.sum(2 * self.freqs * self.zetas**2 * self.b_i * self.b_j))

    def closed_form_block(self, ns) -> np.ndarray:
        """Fock-diagonal 4x4 qubit block of the transformed Hamiltonian (no identity offsets).

        Per ion ``k``: ``[W0 + sum_m (W2 l_m^2 - 2 W0 zeta_m^2) b_mk^2 (2 n_m + 1)] sx_k
        + d2 sum_m l_m^2 b_mk^2 (2 n_m + 1) sz_k``, plus the ``sz sz`` term.
        """
        ex = self.expansion
        ns = np.asarray(ns, dtype=float)
        H = np.zeros((4, 4), dtype=complex)
        for bk, op in ((self.b_i, 0), (self.b_j, 1)):
            occ = bk**2 * (2 * ns + 1)
            cx = ex.omega0 + np.sum((ex.omega2 * self.lengths**2 - 2 * ex.omega0 * self.zetas**2) * occ)
            cz = ex.delta2 * np.sum(self.lengths**2 * occ)
            H += cx * _on(SX, op) + cz * _on(SZ, op)
        H += self.qq_coefficient() * np.kron(SZ, SZ)
        return H


def _on(op, k):
    return np.kron(op, I2) if k == 0 else np.kron(I2, op)


def parallel_gate_model(chain: IonChain, expansion: ExpansionCoefficients, ions=None, modes=None) -> ParallelGateModel:
    i, j = default_pair(chain.N) if ions is None else ions
    if i == j:
        raise ValueError("ions must differ")
    modes = list(range(chain.N)) if modes is None else list(modes)
    b = chain.axial_vectors[modes]
    return ParallelGateModel(chain.axial_freqs[modes], chain.axial_lengths[modes], b[:, i].copy(), b[:, j].copy(), expansion)


def _mode_ops(cutoffs):
    spaces = [FockSpace(c) for c in cutoffs]
    eyes = [s.eye for s in spaces]

    def embed(k, op):
        mats = [op if q == k else eyes[q] for q in range(len(spaces))]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    return spaces, embed


def parallel_gate_hamiltonian(model: ParallelGateModel, cutoffs) -> np.ndarray:
    """Dense two-ion Hamiltonian with the addressed modes (ordering: qubit i, qubit j, modes)."""
    cutoffs = list(cutoffs)
    if len(cutoffs) != model.freqs.size:
        raise ValueError("one cutoff per mode required")
    if min(cutoffs) < 4:
        raise ValueError("cutoffs must be at least 4")
    ex = model.expansion
    spaces, embed = _mode_ops(cutoffs)
    dim = int(np.prod([s.dim for s in spaces]))
    H = np.zeros((4 * dim, 4 * dim), dtype=complex)
    Hm = sum(w * embed(k, s.n + 0.5 * s.eye) for k, (w, s) in enumerate(zip(model.freqs, spaces)))
    H += np.kron(np.eye(4), Hm)
    for bk, q in ((model.b_i, 0), (model.b_j, 1)):
        x = sum(l * b * embed(k, s.x_unit) for k, (l, b, s) in enumerate(zip(model.lengths, bk, spaces)))
        x2 = np.zeros((dim, dim), dtype=complex)
        for k, s in enumerate(spaces):
            x2 += (model.lengths[k] * bk[k]) ** 2 * embed(k, s.x2_unit)
        for k1, k2 in itertools.combinations(range(len(spaces)), 2):
            x2 += 2 * model.lengths[k1] * model.lengths[k2] * bk[k1] * bk[k2] * embed(k1, spaces[k1].x_unit) @ embed(
                k2, spaces[k2].x_unit
            )
        H += np.kron(_on(SX, q), ex.omega0 * np.eye(dim) + ex.omega2 * x2)
        H += np.kron(_on(SZ, q), ex.delta1 * x + ex.delta2 * x2)
    return H


@dataclass(frozen=True)
class ParallelTransformReport:
    max_rel_deviation: float
    qq_fit: float
    qq_closed_form: float
    n_checked: int


def parallel_transform_check(model: ParallelGateModel, n_check: int = 3, pad: int = 12) -> ParallelTransformReport:
    """Lang-Firsov conjugation of the dense two-ion Hamiltonian versus the closed form.

    Each qubit basis state ``(s_i, s_j)`` displaces mode ``m`` by
    ``-zeta_m (b_mi s_i + b_mj s_j)``; Fock-diagonal 4x4 blocks with all
    ``n_m <= n_check`` are compared after removing identity parts.
    """
    cutoffs = [n_check + pad] * model.freqs.size
    spaces, _ = _mode_ops(cutoffs)
    H = parallel_gate_hamiltonian(model, cutoffs)
    dim = int(np.prod([s.dim for s in spaces]))
    blocks = []
    for si, sj in itertools.product((1, -1), repeat=2):
        D = np.eye(1)
        for k, s in enumerate(spaces):
            beta = -model.zetas[k] * (model.b_i[k] * si + model.b_j[k] * sj)
            D = np.kron(D, expm(beta * (s.adag - s.a)))
        blocks.append(D)
    W = np.zeros((4 * dim, 4 * dim), dtype=complex)
    for q, D in enumerate(blocks):
        W[q * dim : (q + 1) * dim, q * dim : (q + 1) * dim] = D
    Ht = W.conj().T @ H @ W
    strides = np.cumprod([1] + [s.dim for s in spaces[::-1]])[:-1][::-1]
    dev = 0.0
    qq = []
    count = 0
    for ns in itertools.product(range(n_check + 1), repeat=len(spaces)):
        idx = int(np.dot(ns, strides))
        rows = [q * dim + idx for q in range(4)]
        blk = Ht[np.ix_(rows, rows)]
        ref = model.closed_form_block(ns)
        blk = blk - np.trace(blk) / 4 * np.eye(4)
        dev = max(dev, np.linalg.norm(blk - ref) / np.linalg.norm(ref))
        qq.append(np.real(np.trace(blk @ np.kron(SZ, SZ))) / 4)
        count += 1
    return ParallelTransformReport(float(dev), float(np.mean(qq)), model.qq_coefficient(), count)
