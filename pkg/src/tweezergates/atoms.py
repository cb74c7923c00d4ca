"""Atomic datasets: level structure, E2 strength, dipole polarizabilities.

Datasets are JSON documents shipped under ``tweezergates/data``. Constants
live there, never in code. Loading is strict: unknown keys and missing fields
raise :class:`DatasetError` with the line on which the problem sits.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .angular import _twice, wigner_6j
from .constants import AMU, AU_POLARIZABILITY, C, HARTREE, HBAR, M_E

DEFAULT_DATASET = "ca40.json"
ENV_DATASET = "TWEEZER_DATASET"


class DatasetError(ValueError):
    """Raised for malformed or inconsistent atomic datasets."""


@dataclass(frozen=True)
class Level:
    label: str
    J: float
    g_j: float
    energy: float  # rad/s, relative to the ground level

    @property
    def dim(self) -> int:
        return _twice(self.J) + 1


@dataclass(frozen=True)
class DipoleLine:
    """One E1 line contributing to a level's dynamic polarizability."""

    partner: str
    J: float
    wavelength: float  # vacuum wavelength, m
    reduced_me: float  # |<J'||d||J>| in e a0
    partner_above: bool = True


@dataclass(frozen=True)
class PolarizabilityData:
    """Either explicit values or a sum-over-states description (atomic units)."""

    alpha_s: float | None = None
    alpha_v: float | None = None
    alpha_t: float | None = None
    lines: tuple[DipoleLine, ...] = ()
    remainder_s: float = 0.0
    remainder_t: float = 0.0

    @property
    def explicit(self) -> bool:
        return self.alpha_s is not None


@dataclass(frozen=True)
class QubitState:
    level: str
    m: float


@dataclass(frozen=True)
class AtomicDataset:
    species: str
    version: str
    mass: float  # kg
    levels: tuple[Level, ...]
    lower: str
    upper: str
    q_red_au: float
    polarizabilities: dict = field(default_factory=dict)
    qubit_g: QubitState | None = None
    qubit_e: QubitState | None = None
    citations: tuple[str, ...] = ()
    source: str = ""

    def level(self, label: str) -> Level:
        for lv in self.levels:
            if lv.label == label:
                return lv
        raise KeyError(f"unknown level {label!r} in dataset {self.species}")

    @property
    def lower_level(self) -> Level:
        return self.level(self.lower)

    @property
    def upper_level(self) -> Level:
        return self.level(self.upper)

    @property
    def ident(self) -> str:
        return f"{self.species}@{self.version}"


# --- loading -----------------------------------------------------------------

_TOP_REQUIRED = {"species", "version", "mass_amu", "levels", "e2_transition", "q_red_au", "qubit"}
_TOP_OPTIONAL = {"polarizabilities", "citations", "notes"}
_LEVEL_KEYS = {"label", "J", "g_j", "energy_rad_s"}
_POL_EXPLICIT = {"alpha_s", "alpha_v", "alpha_t"}
_POL_SOS = {"lines", "remainder"}
_LINE_KEYS = {"partner", "J", "wavelength_nm", "reduced_me_au"}
_LINE_OPTIONAL = {"partner_above", "source"}


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if m is None:
        return 1
    return text.count("\n", 0, m.start()) + 1


def _check_keys(obj, required, optional, where, text):
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        key = sorted(unknown)[0]
        raise DatasetError(f"line {_line_of(text, key)}: unknown key {key!r} in {where}")
    missing = required - set(obj)
    if missing:
        key = sorted(missing)[0]
        raise DatasetError(f"{where}: missing required field {key!r}")


def parse_dataset(text: str, source: str = "<string>") -> AtomicDataset:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line {exc.lineno}: {exc.msg}") from None
    _check_keys(raw, _TOP_REQUIRED, _TOP_OPTIONAL, "dataset", text)

    levels = []
    for i, lv in enumerate(raw["levels"]):
        _check_keys(lv, _LEVEL_KEYS, set(), f"levels[{i}]", text)
        try:
            _twice(lv["J"])
        except ValueError as exc:
            raise DatasetError(f"line {_line_of(text, 'J')}: {exc}") from None
        if lv["J"] < 0.5 or _twice(lv["J"]) % 2 == 0:
            raise DatasetError(f"levels[{i}]: J must be half-integer >= 1/2")
        if lv["g_j"] <= 0:
            raise DatasetError(f"levels[{i}]: g_j must be positive")
        levels.append(Level(lv["label"], float(lv["J"]), float(lv["g_j"]), float(lv["energy_rad_s"])))
    labels = {lv.label for lv in levels}

    e2 = raw["e2_transition"]
    _check_keys(e2, {"lower", "upper"}, set(), "e2_transition", text)
    for key in ("lower", "upper"):
        if e2[key] not in labels:
            raise DatasetError(f"line {_line_of(text, key)}: e2_transition.{key} names unknown level {e2[key]!r}")

    pols = {}
    for label, spec in raw.get("polarizabilities", {}).items():
        if label not in labels:
            raise DatasetError(f"line {_line_of(text, label)}: polarizabilities for unknown level {label!r}")
        if isinstance(spec, dict) and "lines" in spec:
            _check_keys(spec, {"lines"}, {"remainder"}, f"polarizabilities[{label}]", text)
            lines = []
            for j, ln in enumerate(spec["lines"]):
                _check_keys(ln, _LINE_KEYS, _LINE_OPTIONAL, f"polarizabilities[{label}].lines[{j}]", text)
                lines.append(
                    DipoleLine(
                        partner=ln["partner"],
                        J=float(ln["J"]),
                        wavelength=float(ln["wavelength_nm"]) * 1e-9,
                        reduced_me=float(ln["reduced_me_au"]),
                        partner_above=bool(ln.get("partner_above", True)),
                    )
                )
            rem = spec.get("remainder", {})
            _check_keys(rem, set(), {"alpha_s", "alpha_t"}, f"polarizabilities[{label}].remainder", text)
            pols[label] = PolarizabilityData(
                lines=tuple(lines), remainder_s=float(rem.get("alpha_s", 0.0)), remainder_t=float(rem.get("alpha_t", 0.0))
            )
        else:
            _check_keys(spec, {"alpha_s"}, {"alpha_v", "alpha_t"}, f"polarizabilities[{label}]", text)
            pols[label] = PolarizabilityData(
                alpha_s=float(spec["alpha_s"]),
                alpha_v=float(spec.get("alpha_v", 0.0)),
                alpha_t=float(spec.get("alpha_t", 0.0)),
            )

    qb = raw["qubit"]
    _check_keys(qb, {"g", "e"}, set(), "qubit", text)
    states = []
    for key in ("g", "e"):
        st = qb[key]
        _check_keys(st, {"level", "m"}, set(), f"qubit.{key}", text)
        if st["level"] not in labels:
            raise DatasetError(f"qubit.{key}: unknown level {st['level']!r}")
        J = next(lv.J for lv in levels if lv.label == st["level"])
        if abs(st["m"]) > J or _twice(st["m"] + J) % 2:
            raise DatasetError(f"qubit.{key}: m={st['m']} not allowed for J={J}")
        states.append(QubitState(st["level"], float(st["m"])))

    mass = ion_mass_from_atomic(float(raw["mass_amu"]))
    return AtomicDataset(
        species=raw["species"],
        version=str(raw["version"]),
        mass=mass,
        levels=tuple(levels),
        lower=e2["lower"],
        upper=e2["upper"],
        q_red_au=float(raw["q_red_au"]),
        polarizabilities=pols,
        qubit_g=states[0],
        qubit_e=states[1],
        citations=tuple(raw.get("citations", ())),
        source=source,
    )


def load_dataset(path: str | os.PathLike | None = None) -> AtomicDataset:
    """Load a dataset file; falls back to ``$TWEEZER_DATASET`` then the bundled Ca-40+ data."""
    if path is None:
        path = os.environ.get(ENV_DATASET)
    if path is None:
        text = resources.files("tweezergates.data").joinpath(DEFAULT_DATASET).read_text()
        return parse_dataset(text, source=f"bundled:{DEFAULT_DATASET}")
    path = Path(path)
    return parse_dataset(path.read_text(), source=str(path))


# --- polarizabilities ---------------------------------------------------------


def _line_alpha_k(J: float, line: DipoleLine, omega_au: float, K: int) -> float:
    """Contribution of one line to the reduced polarizability of rank K (a.u.)."""
    w0 = 2.0 * np.pi * C / line.wavelength * HBAR / HARTREE
    if not line.partner_above:
        w0 = -w0
    sixj = wigner_6j(1, K, 1, J, line.J, J)
    phase = (-1) ** int(round(K + J + 1 + line.J))
    res = 1.0 / (w0 - omega_au) + (-1) ** K / (w0 + omega_au)
    return phase * np.sqrt(2 * K + 1) * sixj * line.reduced_me**2 * res


def polarizabilities_au(dataset: AtomicDataset, label: str, wavelength: float) -> tuple[float, float, float]:
    """Scalar, vector and tensor polarizabilities (atomic units) at ``wavelength``.

    The vector value is returned in the sign/normalisation that enters
    :func:`tweezergates.coupling.polarizability_hamiltonian` directly.
    """
    if label not in dataset.polarizabilities:
        raise KeyError(f"no polarizability data for level {label!r}")
    data = dataset.polarizabilities[label]
    if data.explicit:
        return data.alpha_s, data.alpha_v or 0.0, data.alpha_t or 0.0
    J = dataset.level(label).J
    omega_au = 2.0 * np.pi * C / wavelength * HBAR / HARTREE
    a = [sum(_line_alpha_k(J, ln, omega_au, K) for ln in data.lines) for K in (0, 1, 2)]
    alpha_s = a[0] / np.sqrt(3 * (2 * J + 1)) + data.remainder_s
    alpha_v_std = -np.sqrt(2 * J / ((J + 1) * (2 * J + 1))) * a[1]
    if J >= 1:
        alpha_t = -np.sqrt(2 * J * (2 * J - 1) / (3 * (J + 1) * (2 * J + 1) * (2 * J + 3))) * a[2]
        alpha_t += data.remainder_t
    else:
        alpha_t = 0.0
    # the anticommutator form carries -alpha_v/J where the usual form has +alpha_v/(2J)
    return float(alpha_s), float(-0.5 * alpha_v_std), float(alpha_t)


def polarizabilities_si(dataset: AtomicDataset, label: str, wavelength: float) -> tuple[float, float, float]:
    return tuple(a * AU_POLARIZABILITY for a in polarizabilities_au(dataset, label, wavelength))


def ion_mass_from_atomic(mass_amu: float, charge: int = 1) -> float:
    """Ion mass in kg from the neutral atomic mass."""
    return mass_amu * AMU - charge * M_E
