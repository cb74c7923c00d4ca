"""Molmer-Sorensen gate of two tweezer-addressed ions with non-paraxial error terms.

The simulation runs in the interaction picture of the free motion and of the
carrier ``W0 A(t) (sx_1 + sx_2)``, with ``A(t) = (1 - cos nu t) / 2`` and
``nu = w_rad + mu``. In that frame

    H(t) = sum_j [ -(W0 eta_j / 4) sx_j (cos(mu t) X_r - sin(mu t) P_r)
                   + A(t) W2 x_j(t)^2 sx_j
                   + A(t)^2 (d1 x_j(t) + d2 x_j(t)^2) (cos 2th sz_j + sin 2th sy_j) ]

with ``th(t) = W0 (t/2 - sin(nu t) / 2 nu)`` and
``x_j(t) = sum_m l_m b_mj (cos(w_m t) X_m + sin(w_m t) P_m)`` over the axial
centre-of-mass and stretch modes. The Rabi terms follow the field amplitude
``A`` and the light shifts its square. The radial term keeps only the
sideband resonant at ``mu``.

Ordering of the state block is ``(motion, qubits, columns)`` with motion
``com x str x rad`` and qubits ``ion0 x ion1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .dynamics import SX, ConvergenceError, FockSpace, TruncationError, kraus_fidelity
from .gatemodel import thermal_weights
from .ionchain import IonChain
from .potentials import ExpansionCoefficients

N_GUARD = 3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class MSGateConfig:
    omega0: float  # rad/s
    mu: float  # rad/s, detuning from the radial gate mode
    eta: float  # single-ion Lamb-Dicke parameter of the radial drive
    cutoffs: tuple[int, int, int] = (12, 8, 12)  # (n_com, n_str, n_rad)
    n_loops: int = 1
    radial_mode: str = "com"
    delta1: float = 0.0  # rad/s/m
    delta2: float = 0.0  # rad/s/m^2
    omega2: float = 0.0  # rad/s/m^2
    gradients: tuple[str, ...] = ("delta1", "delta2", "omega2")
    n_steps: int = 400
    tol: float = 1e-8
    max_refinements: int = 6

    def __post_init__(self):
        if min(self.cutoffs) < 4:
            raise ValueError("cutoffs must be at least 4")
        if self.mu == 0 or self.n_loops < 1:
            raise ValueError("mu must be non-zero and n_loops positive")
        if self.radial_mode not in ("com", "rocking"):
            raise ValueError("radial_mode must be 'com' or 'rocking'")
        unknown = set(self.gradients) - {"delta1", "delta2", "omega2"}
        if unknown:
            raise ValueError(f"unknown gradient flags {sorted(unknown)}")

    @property
    def duration(self) -> float:
        """``2 pi n_loops / |mu|``: closed radial phase-space loops."""
        return 2 * np.pi * self.n_loops / abs(self.mu)

    def nu(self, chain: IonChain) -> float:
        k = 0 if self.radial_mode == "com" else 1
        return float(chain.radial_freqs[k] + self.mu)

    def without_gradients(self) -> "MSGateConfig":
        return replace(self, gradients=())

    def term(self, name: str) -> float:
        return getattr(self, name) if name in self.gradients else 0.0

    @classmethod
    def from_expansion(cls, expansion: ExpansionCoefficients, mu: float, eta: float, **kw) -> "MSGateConfig":
        return cls(
            omega0=expansion.omega0,
            mu=mu,
            eta=eta,
            delta1=expansion.delta1,
            delta2=expansion.delta2,
            omega2=expansion.omega2,
            **kw,
        )


def implied_radial_frequency(eta: float, wavelength: float, mass: float) -> float:
    """Radial frequency consistent with ``eta = k sqrt(hbar / 2 m w_r)``."""
    from .constants import HBAR

    k = 2 * np.pi / wavelength
    return float(HBAR * k**2 / (2 * mass * eta**2))


def ms_phase(config: MSGateConfig, chain: IonChain) -> float:
    """Analytic ``chi`` of ``exp(-i chi sx_1 sx_2)`` after closed loops."""
    b = _radial_vector(config, chain)
    F = config.omega0 * config.eta / 4
    return float(2 * b[0] * b[1] * F**2 * config.duration / config.mu)


def ms_unitary(chi: float) -> np.ndarray:
    XX = np.kron(SX, SX)
    return np.cos(chi) * np.eye(4) - 1j * np.sin(chi) * XX


def _radial_vector(config: MSGateConfig, chain: IonChain) -> np.ndarray:
    if chain.N != 2:
        raise ValueError("the MS simulation is for two-ion chains")
    k = 0 if config.radial_mode == "com" else 1
    return chain.radial_vectors[k]


# --- operators -----------------------------------------------------------------


class _Ops:
    """Motional operator library on ``com x str x rad`` with a shared sparsity pattern."""

    NAMES = (
        "Xc", "Pc", "Xs", "Ps",
        "XXc", "PPc", "XPc", "XXs", "PPs", "XPs",
        "XcXs", "XcPs", "PcXs", "PcPs",
        "Xr", "Pr",
    )  # fmt: skip

    def __init__(self, cutoffs, names=None):
        self.names = tuple(self.NAMES if names is None else names)
        fc, fs, fr = (FockSpace(c) for c in cutoffs)
        self.dims = (fc.dim, fs.dim, fr.dim)
        self.dim = fc.dim * fs.dim * fr.dim

        def single(f):
            X = sp.csr_matrix(f.x_unit)
            P = sp.csr_matrix(f.p_unit)
            a2 = f.a @ f.a
            ad2 = f.adag @ f.adag
            XX = sp.csr_matrix(a2 + ad2 + 2 * f.n + f.eye)
            PP = sp.csr_matrix(-a2 - ad2 + 2 * f.n + f.eye)
            XP = sp.csr_matrix(2j * (ad2 - a2))  # {X, P}
            return X, P, XX, PP, XP

        Ic, Is, Ir = (sp.identity(d, format="csr", dtype=complex) for d in self.dims)

        def emb(c=None, s=None, r=None):
            return sp.kron(sp.kron(c if c is not None else Ic, s if s is not None else Is), r if r is not None else Ir, "csr")

        Xc, Pc, XXc, PPc, XPc = single(fc)
        Xs, Ps, XXs, PPs, XPs = single(fs)
        Xr, Pr, *_ = single(fr)
        mats = {
            "Xc": emb(c=Xc), "Pc": emb(c=Pc), "Xs": emb(s=Xs), "Ps": emb(s=Ps),
            "XXc": emb(c=XXc), "PPc": emb(c=PPc), "XPc": emb(c=XPc),
            "XXs": emb(s=XXs), "PPs": emb(s=PPs), "XPs": emb(s=XPs),
            "XcXs": emb(c=Xc, s=Xs), "XcPs": emb(c=Xc, s=Ps), "PcXs": emb(c=Pc, s=Xs), "PcPs": emb(c=Pc, s=Ps),
            "Xr": emb(r=Xr), "Pr": emb(r=Pr),
        }  # fmt: skip
        lin = []
        for name in self.names:
            m = mats[name].tocoo()
            lin.append(m.row.astype(np.int64) * self.dim + m.col)
        pattern = np.unique(np.concatenate(lin))
        self.data = np.zeros((len(self.names), pattern.size), dtype=complex)
        for k, name in enumerate(self.names):
            m = mats[name].tocoo()
            pos = np.searchsorted(pattern, m.row.astype(np.int64) * self.dim + m.col)
            self.data[k, pos] = m.data
        rows = pattern // self.dim
        self.indices = (pattern % self.dim).astype(np.int32)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=self.dim))]).astype(np.int32)

    def combine(self, coeffs: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((coeffs @ self.data, self.indices, self.indptr), shape=(self.dim, self.dim))


def _coefficients(config: MSGateConfig, chain: IonChain, t: np.ndarray) -> np.ndarray:
    """Coefficient array of shape ``t.shape + (6, 16)``."""
    idx = {n: k for k, n in enumerate(_Ops.NAMES)}
    C = np.zeros(t.shape + (6, len(_Ops.NAMES)))
    nu = config.nu(chain)
    A = 0.5 * (1 - np.cos(nu * t))
    th = config.omega0 * (t / 2 - np.sin(nu * t) / (2 * nu))
    c2, s2 = np.cos(2 * th), np.sin(2 * th)
    br = _radial_vector(config, chain)
    wc, ws = chain.axial_freqs[:2]
    lc, ls = chain.axial_lengths[:2]
    cc, sc, cs, ss = np.cos(wc * t), np.sin(wc * t), np.cos(ws * t), np.sin(ws * t)
    d1, d2, w2 = config.term("delta1"), config.term("delta2"), config.term("omega2")
    for j in (0, 1):
        qx, qz, qy = 3 * j, 3 * j + 1, 3 * j + 2
        F = config.omega0 * config.eta * br[j] / 4
        C[..., qx, idx["Xr"]] = -F * np.cos(config.mu * t)
        C[..., qx, idx["Pr"]] = F * np.sin(config.mu * t)
        Lc = lc * chain.axial_vectors[0, j]
        Ls = ls * chain.axial_vectors[1, j]
        lin = {"Xc": Lc * cc, "Pc": Lc * sc, "Xs": Ls * cs, "Ps": Ls * ss}
        quad = {
            "XXc": Lc**2 * cc**2, "PPc": Lc**2 * sc**2, "XPc": Lc**2 * cc * sc,
            "XXs": Ls**2 * cs**2, "PPs": Ls**2 * ss**2, "XPs": Ls**2 * cs * ss,
            "XcXs": 2 * Lc * Ls * cc * cs, "XcPs": 2 * Lc * Ls * cc * ss,
            "PcXs": 2 * Lc * Ls * sc * cs, "PcPs": 2 * Lc * Ls * sc * ss,
        }  # fmt: skip
        for name, v in quad.items():
            C[..., qx, idx[name]] += w2 * A * v
        for name, v in itertools.chain(((n, d1 * v) for n, v in lin.items()), ((n, d2 * v) for n, v in quad.items())):
            C[..., qz, idx[name]] += A**2 * c2 * v
            C[..., qy, idx[name]] += A**2 * s2 * v
    return C


# --- propagation ---------------------------------------------------------------


def _apply(mats, psi: np.ndarray) -> np.ndarray:
    """``H psi`` for per-qubit-operator motional matrices ordered X0, Z0, Y0, X1, Z1, Y1."""
    D, _, ncol = psi.shape
    flat = psi.reshape(D, 4 * ncol)
    out = np.zeros((D, 2, 2, ncol), dtype=complex)
    for q, M in enumerate(mats):
        if M is None:
            continue
        phi = (M @ flat).reshape(D, 2, 2, ncol)
        j, kind = divmod(q, 3)
        if j == 1:
            phi = phi.transpose(0, 2, 1, 3)
            tgt = out.transpose(0, 2, 1, 3)
        else:
            tgt = out
        if kind == 0:  # X
            tgt[:, 0] += phi[:, 1]
            tgt[:, 1] += phi[:, 0]
        elif kind == 1:  # Z
            tgt[:, 0] += phi[:, 0]
            tgt[:, 1] -= phi[:, 1]
        else:  # Y
            tgt[:, 0] -= 1j * phi[:, 1]
            tgt[:, 1] += 1j * phi[:, 0]
    return out.reshape(D, 4, ncol)


def _propagate(config: MSGateConfig, chain: IonChain, cutoffs, psi: np.ndarray, n_steps: int) -> np.ndarray:
    """Magnus-1 steps with Gauss-Legendre averaged coefficients and a Taylor exponential."""
    T = config.duration
    dt = T / n_steps
    starts = np.arange(n_steps) * dt
    nodes = starts[:, None] + 0.5 * dt * (1 + _GL_NODES)[None, :]
    C = np.einsum("g,sgqk->sqk", 0.5 * _GL_WEIGHTS, _coefficients(config, chain, nodes))
    used = np.any(C != 0, axis=(0, 1))
    ops = _Ops(cutoffs, names=[n for n, u in zip(_Ops.NAMES, used) if u])
    C = C[:, :, used]
    active = np.any(C != 0, axis=(0, 2))
    psi = psi.copy()
    for s in range(n_steps):
        mats = [ops.combine(C[s, q]) if active[q] else None for q in range(6)]
        term = psi
        for k in range(1, 30):
            term = (-1j * dt / k) * _apply(mats, term)
            psi = psi + term
            if np.max(np.abs(term)) < 1e-16:
                break
    return psi


@dataclass
class MSResult:
    """Fidelities per motional preset and thermal occupation."""

    nbars: np.ndarray
    presets: list
    fidelity: np.ndarray  # (preset, nbar)
    chi: float
    steps: int
    leakage: float
    step_delta: float
    block: np.ndarray = field(repr=False, default=None)


def _initial_block(cutoffs, presets) -> np.ndarray:
    nc, ns, nr = (c + 1 for c in cutoffs)
    D = nc * ns * nr
    cols = []
    for n_str, n_rad in presets:
        if n_str >= ns - N_GUARD or n_rad >= nr - N_GUARD:
            raise TruncationError(f"preset occupation ({n_str}, {n_rad}) too close to the cutoffs")
        for n in range(nc):
            for q in range(4):
                cols.append((((n * ns) + n_str) * nr + n_rad, q))
    psi = np.zeros((D, 4, len(cols)), dtype=complex)
    for c, (m, q) in enumerate(cols):
        psi[m, q, c] = 1.0
    return psi


def _fidelities(psi, cutoffs, presets, nbars, U_id, deficit_tol):
    nc = cutoffs[0] + 1
    D = psi.shape[0]
    F = np.empty((len(presets), len(nbars)))
    for p in range(len(presets)):
        Fn = np.empty(nc)
        for n in range(nc):
            cols = psi[:, :, (p * nc + n) * 4 : (p * nc + n + 1) * 4]  # (m, q_out, q_in)
            K = cols.transpose(1, 0, 2).reshape(4, D, 4)
            Fn[n] = kraus_fidelity(K, U_id)
        for k, nb in enumerate(nbars):
            w = thermal_weights(nb, nc - 1)
            if 1 - w.sum() > deficit_tol:
                raise TruncationError(f"thermal weight deficit {1 - w.sum():.2e} at n_com={nc - 1}")
            F[p, k] = np.sum(w * Fn) / np.sum(w)
    return F


def _leakage(psi, cutoffs) -> float:
    nc, ns, nr = (c + 1 for c in cutoffs)
    pop = np.sum(np.abs(psi) ** 2, axis=1).reshape(nc, ns, nr, -1)
    edge = pop[nc - N_GUARD :].sum(axis=(0, 1, 2)) + pop[:, ns - N_GUARD :].sum(axis=(0, 1, 2))
    edge = edge + pop[:, :, nr - N_GUARD :].sum(axis=(0, 1, 2))
    # initial columns that already start in the guard band are excluded
    start = np.zeros(nc, dtype=bool)
    start[: nc - N_GUARD] = True
    per = edge.reshape(-1, nc, 4)[:, start, :]
    return float(per.max())


def ms_gate_simulate(
    chain: IonChain,
    config: MSGateConfig,
    nbars=(0.0, 0.5, 1.0, 2.0),
    presets=((0, 0),),
    U_id: np.ndarray | None = None,
    deficit_tol: float = 1e-2,
    check_convergence: bool = True,
) -> MSResult:
    """Fidelity of the simulated gate against ``exp(-i chi sx sx)``.

    ``presets`` are ``(n_str, n_rad)`` Fock occupations; the axial
    centre-of-mass mode is thermal with each ``nbar``. Fidelities are
    renormalised over the kept thermal weight, with at most ``deficit_tol``
    discarded (the default admits an ``n_com = 12`` cutoff at nbar = 2).
    With ``check_convergence`` the step count is doubled until all
    fidelities change by less than ``config.tol``.
    """
    nbars = np.atleast_1d(np.asarray(nbars, dtype=float))
    presets = [tuple(p) for p in presets]
    chi = ms_phase(config, chain)
    U_id = ms_unitary(chi) if U_id is None else U_id
    psi0 = _initial_block(config.cutoffs, presets)
    n = config.n_steps
    psi = _propagate(config, chain, config.cutoffs, psi0, n)
    F = _fidelities(psi, config.cutoffs, presets, nbars, U_id, deficit_tol)
    delta = np.nan
    if check_convergence:
        for _ in range(config.max_refinements):
            n *= 2
            psi = _propagate(config, chain, config.cutoffs, psi0, n)
            F2 = _fidelities(psi, config.cutoffs, presets, nbars, U_id, deficit_tol)
            delta = float(np.max(np.abs(F2 - F)))
            F = F2
            if delta < config.tol:
                break
        else:
            raise ConvergenceError(f"MS stepping not converged; last fidelity change {delta:.3e}")
    return MSResult(nbars, presets, F, chi, n, _leakage(psi, config.cutoffs), delta, psi)


def ms_delta_fidelity(chain: IonChain, config: MSGateConfig, nbars=(0.0, 0.5, 1.0, 2.0), presets=((0, 0),), **kw):
    """``F_ideal - F_real`` with ``F_ideal`` from the same run with gradients removed.

    The ideal run reuses the converged step count of the real run.
    """
    real = ms_gate_simulate(chain, config, nbars, presets, **kw)
    kw["check_convergence"] = False
    ideal = ms_gate_simulate(chain, replace(config.without_gradients(), n_steps=real.steps), nbars, presets, **kw)
    return ideal.fidelity - real.fidelity, real, ideal


def bell_state_infidelity(result: MSResult, chi: float = np.pi / 4) -> float:
    """``1 - <B|rho|B>`` for ``|00>`` evolved with all modes in the preset ground state."""
    psi = result.block[:, :, 0]  # column: preset 0, n_com = 0, qubit |00>
    rho = psi.T @ psi.conj()
    target = ms_unitary(chi)[:, 0]
    return float(1 - np.real(target.conj() @ rho @ target))


def bell_rabi_frequency(config: MSGateConfig, chain: IonChain) -> float:
    """Carrier Rabi frequency for which ``n_loops`` loops give ``chi = pi / 4``."""
    b = _radial_vector(config, chain)
    F2 = (np.pi / 4) * config.mu / (2 * b[0] * b[1] * config.duration)
    return float(4 * math.sqrt(F2) / config.eta)
