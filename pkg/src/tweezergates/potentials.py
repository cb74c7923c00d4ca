"""Effective two-level description of the tweezer-driven qubit.

The eight sublevels of the lower and upper manifolds are reduced to the
qubit pair by second-order perturbation theory. Energies are in the frame
rotating with a laser tuned to the bare (Zeeman-shifted) qubit transition.
Couplings are the E2 matrix elements between manifolds plus the off-diagonal
elements of the dipole light-shift operator within each manifold; the
diagonal dipole shift of each qubit state enters at first order.

All rates are angular frequencies (rad/s) and lengths are metres.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .angular import m_values, spin_matrices
from .atoms import AtomicDataset, polarizabilities_si
from .beams import BeamModel, field_at, field_gradient_at
from .constants import HBAR, MU_B
from .coupling import (
    CouplingFrame,
    displacement_axis,
    e2_coupling_table,
    rank2_gradient_components,
    rotate_gradient,
    rotate_vector,
)

NEAR_DEGENERACY = 1e3  # rad/s


class NearDegeneracyError(ValueError):
    """A perturbative denominator is too small for the reduction to hold."""


class PeakFindingError(ValueError):
    """The Rabi profile does not have a single interior maximum."""


class FitError(ValueError):
    """The polynomial fit around the ion position is not accurate enough."""


@dataclass(frozen=True)
class Transition:
    """Qubit states ``|0> = (lower, m_g)`` and ``|1> = (upper, m_e)``."""

    m_g: float
    m_e: float

    @property
    def q(self) -> int:
        return int(round(self.m_e - self.m_g))


def default_transition(dataset: AtomicDataset) -> Transition:
    return Transition(dataset.qubit_g.m, dataset.qubit_e.m)


@dataclass(frozen=True)
class EffectiveQubitHamiltonian:
    """``H2 = [[D/2 + d0, W], [W*, -D/2 + d1]]`` (rad/s) at ``position``."""

    detuning: float
    delta0: float
    delta1: float
    omega: complex
    omega_01: complex
    omega_s: complex
    position: np.ndarray
    delta0_e2: float = 0.0
    delta1_e2: float = 0.0
    leakage: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.detuning / 2 + self.delta0, self.omega],
                [np.conj(self.omega), -self.detuning / 2 + self.delta1],
            ]
        )


class _LevelOps:
    """Spin matrices and anticommutators for one manifold, cached per J."""

    def __init__(self, J: float):
        self.J = J
        self.m = m_values(J)
        self.Jv = np.array(spin_matrices(J))
        self.anti = 0.5 * (
            np.einsum("iab,jbc->ijac", self.Jv, self.Jv) + np.einsum("jab,ibc->ijac", self.Jv, self.Jv)
        )


def _dipole_operator(ops: _LevelOps, alphas, E) -> np.ndarray:
    """Vectorised dipole light shift (rad/s); ``E`` has shape ``(N, 3)``."""
    a_s, a_v, a_t = alphas
    J = ops.J
    ep = E / 2.0
    em = ep.conj()
    e0sq = np.sum(np.abs(ep) ** 2, axis=-1)
    dim = ops.m.size
    eye = np.eye(dim)
    H = -a_s * e0sq[:, None, None] * eye
    cross = np.cross(em, ep)
    H = H - (a_v / J) * 1j * np.einsum("ni,iab->nab", cross, ops.Jv)
    if J >= 1 and a_t != 0.0:
        anti = np.einsum("ni,nj,ijab->nab", ep, em, ops.anti)
        H = H - 3 * a_t / (J * (2 * J - 1)) * (anti - J * (J + 1) / 3 * e0sq[:, None, None] * eye)
    return H / HBAR


def _rotating_energies(dataset: AtomicDataset, B: float, tr: Transition):
    lo, up = dataset.lower_level, dataset.upper_level
    e_lo = lo.g_j * MU_B * B * m_values(lo.J) / HBAR
    e_up = up.g_j * MU_B * B * (m_values(up.J) - tr.m_e) / HBAR + lo.g_j * MU_B * B * tr.m_g / HBAR
    return np.concatenate([e_lo, e_up])


def _qubit_indices(dataset: AtomicDataset, tr: Transition):
    lo, up = dataset.lower_level, dataset.upper_level
    mg = m_values(lo.J)
    me = m_values(up.J)
    ig = np.flatnonzero(np.isclose(mg, tr.m_g))
    ie = np.flatnonzero(np.isclose(me, tr.m_e))
    if ig.size != 1 or ie.size != 1:
        raise ValueError(f"transition {tr} not contained in {lo.label} -> {up.label}")
    return int(ig[0]), int(mg.size + ie[0]), mg.size


def _state_label(dataset, idx, n_lo):
    lo, up = dataset.lower_level, dataset.upper_level
    if idx < n_lo:
        return f"{lo.label}(m={m_values(lo.J)[idx]:+g})"
    return f"{up.label}(m={m_values(up.J)[idx - n_lo]:+g})"


def qubit_terms(
    beam: BeamModel,
    dataset: AtomicDataset,
    frame: CouplingFrame,
    points,
    transition: Transition | None = None,
    include_dipole: bool = True,
) -> dict:
    """Vectorised second-order reduction at ``points`` (shape ``(N, 3)``).

    Returns arrays ``delta0``, ``delta1``, ``omega`` (= omega_01 + omega_s),
    ``omega_01``, ``omega_s``, ``delta0_e2``, ``delta1_e2`` and ``leakage``.
    """
    tr = transition or default_transition(dataset)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if frame.B <= 0:
        raise NearDegeneracyError("B = 0: all Zeeman sublevels are degenerate")
    energies = _rotating_energies(dataset, frame.B, tr)
    i0, i1, n_lo = _qubit_indices(dataset, tr)
    n = energies.size
    for i in (i0, i1):
        for k in range(n):
            if k in (i0, i1):
                continue
            if abs(energies[i] - energies[k]) < NEAR_DEGENERACY:
                raise NearDegeneracyError(
                    f"|Delta| < {NEAR_DEGENERACY:g} rad/s between "
                    f"{_state_label(dataset, i, n_lo)} and {_state_label(dataset, k, n_lo)}"
                )

    G = rotate_gradient(field_gradient_at(beam, pts), frame)
    comps = rank2_gradient_components(G)
    T = e2_coupling_table(dataset)
    rabi = np.einsum("abc,nc->nab", T, comps)  # lower a -> upper b

    N = pts.shape[0]
    V = np.zeros((N, n, n), dtype=complex)
    V[:, n_lo:, :n_lo] = np.transpose(rabi, (0, 2, 1))
    V[:, :n_lo, n_lo:] = np.conj(rabi)
    diag_shift = np.zeros((N, n))
    if include_dipole:
        E = rotate_vector(field_at(beam, pts), frame)
        for lv, sl in ((dataset.lower_level, slice(0, n_lo)), (dataset.upper_level, slice(n_lo, n))):
            ops = _LevelOps(lv.J)
            Ha = _dipole_operator(ops, polarizabilities_si(dataset, lv.label, beam.wavelength), E)
            diag_shift[:, sl] = np.real(np.diagonal(Ha, axis1=1, axis2=2))
            off = Ha.copy()
            idx = np.arange(off.shape[1])
            off[:, idx, idx] = 0.0
            V[:, sl, sl] += off

    others = [k for k in range(n) if k not in (i0, i1)]
    out = {}
    for name, i in (("delta0", i0), ("delta1", i1)):
        den = energies[i] - energies[others]
        second = np.sum(np.abs(V[:, i, others]) ** 2 / den, axis=1)
        out[name] = second + diag_shift[:, i]
        mask = np.array([(k < n_lo) != (i < n_lo) for k in others])
        out[name + "_e2"] = np.sum(np.abs(V[:, i, others][:, mask]) ** 2 / den[mask], axis=1)
    omega_01 = V[:, i1, i0]
    # l is the qubit state sharing k's manifold
    den_s = np.array([energies[i0] - energies[k] if k < n_lo else energies[i1] - energies[k] for k in others])
    omega_s = np.sum(V[:, i1, others] * V[:, others, i0] / den_s, axis=1)
    out["omega_01"] = omega_01
    out["omega_s"] = omega_s
    out["omega"] = omega_01 + omega_s
    leak = np.zeros(N)
    for i in (i0, i1):
        den = energies[i] - energies[others]
        leak = np.maximum(leak, np.sum(np.abs(V[:, i, others] / den) ** 2, axis=1))
    out["leakage"] = leak
    return out


def effective_hamiltonian(
    beam: BeamModel,
    dataset: AtomicDataset,
    frame: CouplingFrame,
    r,
    transition: Transition | None = None,
    detuning: float = 0.0,
    include_dipole: bool = True,
) -> EffectiveQubitHamiltonian:
    """Effective qubit Hamiltonian at a single point ``r``."""
    r = np.asarray(r, dtype=float).reshape(3)
    t = qubit_terms(beam, dataset, frame, r[None, :], transition, include_dipole)
    return EffectiveQubitHamiltonian(
        detuning=float(detuning),
        delta0=float(t["delta0"][0]),
        delta1=float(t["delta1"][0]),
        omega=complex(t["omega"][0]),
        omega_01=complex(t["omega_01"][0]),
        omega_s=complex(t["omega_s"][0]),
        position=r,
        delta0_e2=float(t["delta0_e2"][0]),
        delta1_e2=float(t["delta1_e2"][0]),
        leakage=float(t["leakage"][0]),
    )


def dressed_potentials(h2: EffectiveQubitHamiltonian) -> tuple[float, float]:
    """Eigenvalues ``(E+, E-)`` of the 2x2 Hamiltonian, ``E+ >= E-``."""
    a = h2.detuning / 2 + h2.delta0
    d = -h2.detuning / 2 + h2.delta1
    mean = 0.5 * (a + d)
    half = np.hypot(0.5 * (a - d), abs(h2.omega))
    return float(mean + half), float(mean - half)


def dressed_potentials_arrays(terms: dict, detuning: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    a = detuning / 2 + terms["delta0"]
    d = -detuning / 2 + terms["delta1"]
    mean = 0.5 * (a + d)
    half = np.hypot(0.5 * (a - d), np.abs(terms["omega"]))
    return mean + half, mean - half


def rabi_profile(beam, dataset, frame, s, transition=None, axis=None, include_dipole=True) -> np.ndarray:
    """``|Omega|`` along ``axis`` (default: displacement axis) at signed offsets ``s``."""
    axis = displacement_axis(frame) if axis is None else np.asarray(axis, dtype=float)
    pts = np.outer(np.atleast_1d(s), axis)
    return np.abs(qubit_terms(beam, dataset, frame, pts, transition, include_dipole)["omega"])


@dataclass(frozen=True)
class PeakResult:
    x0: float  # signed offset along the displacement axis (m)
    axis: np.ndarray
    omega0: float

    @property
    def position(self) -> np.ndarray:
        return self.x0 * self.axis


def find_peak_displacement(
    beam: BeamModel,
    dataset: AtomicDataset,
    frame: CouplingFrame,
    transition: Transition | None = None,
    window: float = 1.5,
    n_scan: int = 801,
    xatol: float = 1e-13,
) -> PeakResult:
    """Locate the maximum of ``|Omega|`` along the displacement axis.

    A coarse scan over ``+-window*w0`` must show one dominant interior
    maximum; it is then refined by bounded Brent search to ``xatol``.
    """
    axis = displacement_axis(frame)
    s = np.linspace(-window * beam.w0, window * beam.w0, n_scan)
    v = rabi_profile(beam, dataset, frame, s, transition, axis)
    if not np.any(v > 0):
        raise PeakFindingError("Rabi frequency vanishes along the scan")
    interior = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    strong = [i for i in interior if v[i] > 0.5 * v.max()]
    if not strong:
        raise PeakFindingError("no interior maximum of |Omega| inside the scan window")
    if len(strong) > 1:
        cands = ", ".join(f"{s[i] * 1e9:.3f} nm" for i in strong)
        raise PeakFindingError(f"multiple maxima of |Omega| at {cands}")
    i = strong[0]
    res = minimize_scalar(
        lambda x: -rabi_profile(beam, dataset, frame, x, transition, axis)[0],
        bounds=(s[i - 1], s[i + 1]),
        method="bounded",
        options={"xatol": xatol},
    )
    x0 = float(res.x)
    return PeakResult(x0=x0, axis=axis, omega0=float(-res.fun))


@dataclass(frozen=True)
class StarkMap:
    xs: np.ndarray
    ys: np.ndarray
    delta0: np.ndarray  # shape (len(ys), len(xs))
    delta1: np.ndarray

    @property
    def dominant(self) -> np.ndarray:
        """Per point, whichever qubit shift has the larger magnitude."""
        return np.where(np.abs(self.delta0) >= np.abs(self.delta1), self.delta0, self.delta1)


def stark_map(beam, dataset, frame, xs, ys, transition=None, z: float = 0.0) -> StarkMap:
    """Stark shifts of both qubit states on the transverse grid ``xs x ys``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], axis=-1)
    if not np.all(np.isfinite(pts)):
        raise ValueError("grid must be finite")
    try:
        t = qubit_terms(beam, dataset, frame, pts, transition)
    except NearDegeneracyError as exc:
        raise NearDegeneracyError(f"{exc} (grid x in [{xs.min()}, {xs.max()}] m, y in [{ys.min()}, {ys.max()}] m)")
    return StarkMap(xs, ys, t["delta0"].reshape(X.shape), t["delta1"].reshape(X.shape))


# --- Taylor expansion --------------------------------------------------------


@dataclass(frozen=True)
class PolyFit:
    coeffs: np.ndarray  # coefficients of u**k, u = s - center (SI)
    residual: float  # rms residual relative to max |value|


def fit_taylor(s, values, center: float, degree: int = 4) -> PolyFit:
    """Least-squares polynomial in ``u = s - center``; coefficients in SI units."""
    s = np.asarray(s, dtype=float)
    values = np.asarray(values, dtype=float)
    u = s - center
    h = np.max(np.abs(u))
    if h == 0:
        raise FitError("fit window has zero width")
    t = u / h
    c = np.polynomial.polynomial.polyfit(t, values, degree)
    fit = np.polynomial.polynomial.polyval(t, c)
    scale = np.max(np.abs(values))
    resid = float(np.sqrt(np.mean((fit - values) ** 2)) / scale) if scale > 0 else 0.0
    return PolyFit(coeffs=c / h ** np.arange(degree + 1), residual=resid)


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Taylor coefficients about the ion position.

    ``delta*`` describe ``delta(x) = (delta_0(x) - delta_1(x)) / 2`` so the
    qubit states carry ``+delta`` and ``-delta``; ``detuning`` is the laser
    detuning ``-2 delta0`` that makes the qubit resonant at ``x0``.
    """

    x0: float
    omega0: float
    omega1: float
    omega2: float
    delta0: float
    delta1: float
    delta2: float
    window: float
    residual_omega: float
    residual_delta: float
    w0: float = 0.0
    mean_shift: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def detuning(self) -> float:
        return -2.0 * self.delta0

    def scaled_to_rabi(self, omega0: float) -> "ExpansionCoefficients":
        """Same geometry at a different power: Omega scales as r, delta as r**2."""
        r = omega0 / self.omega0
        return ExpansionCoefficients(
            x0=self.x0,
            omega0=self.omega0 * r,
            omega1=self.omega1 * r,
            omega2=self.omega2 * r,
            delta0=self.delta0 * r**2,
            delta1=self.delta1 * r**2,
            delta2=self.delta2 * r**2,
            window=self.window,
            residual_omega=self.residual_omega,
            residual_delta=self.residual_delta,
            w0=self.w0,
            mean_shift=self.mean_shift * r**2,
            meta=dict(self.meta),
        )

    def with_terms(self, **kw) -> "ExpansionCoefficients":
        d = dict(self.__dict__)
        d.update(kw)
        return ExpansionCoefficients(**d)


def harmonic_length(omega: float, mass: float) -> float:
    """``l_ho = sqrt(hbar / (2 m omega))``."""
    if omega <= 0 or mass <= 0:
        raise ValueError("trap frequency and mass must be positive")
    return float(np.sqrt(HBAR / (2.0 * mass * omega)))


def expand_at(
    beam: BeamModel,
    dataset: AtomicDataset,
    frame: CouplingFrame,
    x0: float,
    omega_trap: float,
    mass: float | None = None,
    transition: Transition | None = None,
    half_width: float | None = None,
    n_points: int = 41,
    max_residual: float = 1e-6,
    include_dipole: bool = True,
) -> ExpansionCoefficients:
    """Fit degree-4 polynomials to ``|Omega|`` and ``delta`` around ``x0``.

    The window defaults to ``+-3 l_ho``. ``x0`` is polished once by moving to
    the root of the fitted derivative of ``|Omega|``.
    """
    mass = dataset.mass if mass is None else mass
    l_ho = harmonic_length(omega_trap, mass)
    h = 3.0 * l_ho if half_width is None else float(half_width)
    axis = displacement_axis(frame)
    center = float(x0)
    for _ in range(2):
        s = center + np.linspace(-h, h, n_points)
        t = qubit_terms(beam, dataset, frame, np.outer(s, axis), transition, include_dipole)
        om = np.abs(t["omega"])
        fo = fit_taylor(s, om, center)
        c = fo.coeffs
        shift = -c[1] / (2 * c[2]) if c[2] != 0 else 0.0
        if abs(shift) < 1e-15 or abs(shift) > h:
            break
        center += shift
    delta = 0.5 * (t["delta0"] - t["delta1"])
    fd = fit_taylor(s, delta, center)
    mean = 0.5 * (t["delta0"] + t["delta1"])
    for name, f in (("Omega", fo), ("delta", fd)):
        if f.residual > max_residual:
            raise FitError(
                f"{name} fit residual {f.residual:.2e} exceeds {max_residual:.0e}; use a smaller window than {h:.3e} m"
            )
    return ExpansionCoefficients(
        x0=center,
        omega0=float(fo.coeffs[0]),
        omega1=float(fo.coeffs[1]),
        omega2=float(fo.coeffs[2]),
        delta0=float(fd.coeffs[0]),
        delta1=float(fd.coeffs[1]),
        delta2=float(fd.coeffs[2]),
        window=h,
        residual_omega=fo.residual,
        residual_delta=fd.residual,
        w0=beam.w0,
        mean_shift=float(mean[n_points // 2]),
        meta={"l_ho": l_ho, "n_points": n_points, "leakage": float(np.max(t["leakage"]))},
    )


def expansion_for_rabi(
    beam: BeamModel,
    dataset: AtomicDataset,
    frame: CouplingFrame,
    omega0: float,
    omega_trap: float,
    transition: Transition | None = None,
    include_dipole: bool = True,
    half_width: float | None = None,
) -> tuple[ExpansionCoefficients, BeamModel]:
    """Rescale the beam power so the peak ``|Omega|`` equals ``omega0`` and expand there.

    ``|Omega|`` scales as the square root of the power, so one rescaling is
    exact; the peak is then re-located at the new power.
    """
    if omega0 <= 0:
        raise ValueError("target Rabi frequency must be positive")
    probe = beam if beam.power > 0 else beam.with_power(1e-5)
    pk = find_peak_displacement(probe, dataset, frame, transition)
    scaled = probe.with_power(probe.power * (omega0 / pk.omega0) ** 2)
    pk = find_peak_displacement(scaled, dataset, frame, transition)
    ex = expand_at(
        scaled, dataset, frame, pk.x0, omega_trap, transition=transition, half_width=half_width, include_dipole=include_dipole
    )
    return ex, scaled
