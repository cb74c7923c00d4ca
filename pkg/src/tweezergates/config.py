"""Layered run configuration with unit-checked values.

Resolution order is defaults < preset < config file (JSON) < ``KEY=VALUE``
overrides. Quantities carry explicit units: ``"729nm"``, ``"5G"``,
``"10uW"``, ``"2pi*0.5MHz"``, ``"3.1e6rad/s"``, ``"90deg"``. Angular
frequencies must say ``2pi*...Hz`` or ``rad/s``; a bare ``Hz`` value is
rejected because it is ambiguous.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration value, key or file."""


_LENGTH = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_POWER = {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9}
_FIELD = {"T": 1.0, "mT": 1e-3, "G": 1e-4, "mG": 1e-7}
_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_ANGLE = {"rad": 1.0, "deg": math.pi / 180}
_UNITS = {"length": _LENGTH, "power": _POWER, "field": _FIELD, "angle": _ANGLE}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QTY = re.compile(rf"^\s*(?P<twopi>2\s*\*?\s*pi\s*\*\s*)?(?P<num>{_NUM})\s*(?P<unit>[A-Za-zµ/]*)\s*$")


def parse_quantity(text, kind: str) -> float:
    """Parse ``text`` as a quantity of ``kind`` and return SI units.

    Kinds: ``length`` (m), ``power`` (W), ``field`` (T), ``angle`` (rad),
    ``angular`` (rad/s), ``float``, ``int``.
    """
    if kind in ("float", "int"):
        try:
            v = float(text) if kind == "float" else int(text)
        except (TypeError, ValueError):
            raise ConfigError(f"expected a plain number, got {text!r}") from None
        return v
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        if text == 0:
            return 0.0
        raise ConfigError(f"{kind} value {text!r} needs an explicit unit")
    if not isinstance(text, str):
        raise ConfigError(f"expected a string with units, got {text!r}")
    m = _QTY.match(text)
    if m is None:
        pos = _first_bad(text)
        raise ConfigError(f"cannot parse {text!r} as {kind} (at position {pos})")
    num = float(m["num"])
    unit = m["unit"]
    twopi = m["twopi"] is not None
    if kind == "angular":
        if unit == "rad/s":
            if twopi:
                raise ConfigError(f"conflicting units in {text!r}: 2pi with rad/s")
            return num
        if unit in _FREQ:
            if not twopi:
                raise ConfigError(f"angular frequency {text!r} is ambiguous; write 2pi*{num:g}{unit} or rad/s")
            return 2 * math.pi * num * _FREQ[unit]
        raise ConfigError(f"unknown frequency unit {unit!r} in {text!r}")
    if twopi:
        raise ConfigError(f"2pi prefix not allowed for {kind} in {text!r}")
    table = _UNITS.get(kind)
    if table is None:
        raise ConfigError(f"unknown quantity kind {kind!r}")
    if unit == "":
        if num == 0:
            return 0.0
        raise ConfigError(f"{kind} value {text!r} has no unit")
    if unit not in table:
        raise ConfigError(f"unit {unit!r} is not a {kind} unit in {text!r}")
    return num * table[unit]


def _first_bad(text: str) -> int:
    for i in range(len(text), 0, -1):
        if _QTY.match(text[:i]) or re.match(rf"^\s*(2\s*\*?\s*pi\s*\*\s*)?{_NUM}", text[:i]):
            return i
    return 0


@dataclass(frozen=True)
class Key:
    kind: str  # quantity kind, or str / list:<kind> / pairs
    default: object
    help: str = ""


SCHEMA: dict[str, Key] = {
    "dataset": Key("str", None, "dataset path (falls back to $TWEEZER_DATASET)"),
    "profile": Key("str", "TEM00", "TEM00 or LG01"),
    "wavelength": Key("length", "729nm"),
    "w0": Key("length", "729nm", "beam waist"),
    "P0": Key("power", "10uW", "beam power"),
    "polarization": Key("str", "y", "x or y"),
    "B": Key("field", "5G"),
    "frame": Key("str", "B||y", "B||y, B||x or angles"),
    "phi": Key("angle", "90deg", "angle between B and the beam axis (frame=angles)"),
    "theta": Key("angle", "0deg", "angle between polarization and B projection (frame=angles)"),
    "q": Key("int", 1, "m_e - m_g of the qubit transition: +-1 or +-2 (sign mirrors the Zeeman sublevels)"),
    "omega": Key("angular", "2pi*0.5MHz", "single-ion trap frequency"),
    "omega0": Key("angular", "2pi*1MHz", "target carrier Rabi frequency"),
    "nbar": Key("list:float", [0.05, 0.1, 0.2, 0.5, 1.0, 2.0]),
    "x_span": Key("length", "1.5um", "half-width of 1-D and 2-D maps"),
    "n_points": Key("int", 201),
    "n_grid": Key("int", 41),
    "w0_min": Key("length", "200nm"),
    "w0_max": Key("length", "15um"),
    "n_w0": Key("int", 25),
    "omegas": Key("list:angular", ["2pi*0.5MHz", "2pi*1MHz", "2pi*2MHz"], "trap frequencies for waist-scan"),
    "waist_nbar": Key("list:float", [0.1, 1.0]),
    "panels": Key("pairs", [["2pi*0.2MHz", "2.5G"], ["2pi*0.2MHz", "5G"], ["2pi*1MHz", "2.5G"], ["2pi*1MHz", "5G"]]),
    "n_ions": Key("int", 10),
    "omega_r": Key("angular", "2pi*3MHz"),
    "omega_z": Key("angular", "2pi*0.5MHz"),
    "ms_omega0": Key("angular", "2pi*228kHz"),
    "ms_B": Key("field", "2.5G"),
    "mu": Key("angular", "2pi*50kHz"),
    "eta": Key("float", 0.056),
    "cutoffs": Key("list:int", [12, 8, 12]),
    "n_loops": Key("int", 1),
    "radial_mode": Key("str", "com"),
    "nbar_com": Key("list:float", [0.0, 0.5, 1.0, 2.0]),
    "occupations": Key("list:list:int", [[0, 0], [1, 1]], "(n_str, n_rad) Fock presets"),
    "nu_min": Key("angular", "2pi*0.3MHz"),
    "nu_max": Key("angular", "2pi*3.5MHz"),
    "n_nu": Key("int", 2000),
    "ms_steps": Key("int", 200),
}

PRESETS: dict[str, dict] = {
    "fig2": {"P0": "10uW", "w0": "729nm", "B": "5G"},
    "fig3": {"w0": "729nm", "omega": "2pi*0.5MHz", "nbar": [0.05, 0.1, 0.2, 0.5, 1.0, 2.0]},
    "fig4": {"w0": "729nm", "omega_r": "2pi*3MHz", "omega_z": "2pi*0.5MHz", "ms_omega0": "2pi*228kHz", "ms_B": "2.5G"},
    "figS1": {"w0_min": "200nm", "w0_max": "15um", "n_w0": 25},
    "figS2": {"omega0": "2pi*0.2MHz", "B": "2.5G", "waist_nbar": [0.1, 1.0]},
}


def _resolve(kind: str, value, key: str):
    try:
        if kind == "str":
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"expected a string, got {value!r}")
            return value
        if kind.startswith("list:"):
            sub = kind[5:]
            if isinstance(value, str):
                value = _split_list(value)
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"expected a list, got {value!r}")
            return [_resolve(sub, v, key) for v in value]
        if kind == "pairs":
            if isinstance(value, str):
                value = json.loads(value)
            return [(parse_quantity(a, "angular"), parse_quantity(b, "field")) for a, b in value]
        return parse_quantity(value, kind)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _split_list(text: str) -> list:
    """JSON list, or a bare comma list such as ``[2pi*1MHz,2pi*2MHz]`` / ``1um,2um``."""
    t = text.strip()
    if t.startswith("["):
        try:
            return json.loads(t)
        except json.JSONDecodeError:
            if "[" in t[1:]:
                raise
            t = t[1:-1] if t.endswith("]") else t[1:]
    return [v.strip() for v in t.split(",") if v.strip()]


@dataclass(frozen=True)
class RunConfig:
    values: dict  # resolved SI values
    raw: dict  # unit-carrying inputs as given

    def __getitem__(self, key):
        return self.values[key]

    def manifest(self) -> dict:
        return {k: self.raw[k] for k in sorted(self.raw)}


def _split_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like KEY=VALUE")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def load_config(path=None, overrides=(), preset: str | None = None) -> RunConfig:
    """Resolve defaults, an optional preset, an optional JSON file and overrides."""
    raw = {k: spec.default for k, spec in SCHEMA.items()}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        raw.update(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        _merge(raw, data, str(path))
    _merge(raw, dict(_split_override(o) for o in overrides), "override")
    values = {k: _resolve(SCHEMA[k].kind, v, k) for k, v in raw.items()}
    _validate(values)
    return RunConfig(values, raw)


def _merge(raw: dict, data: dict, where: str):
    for k, v in data.items():
        if k not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {k!r}")
        raw[k] = v


def _validate(v: dict):
    if v["profile"] not in ("TEM00", "LG01"):
        raise ConfigError("profile must be TEM00 or LG01")
    if v["polarization"] not in ("x", "y"):
        raise ConfigError("polarization must be x or y")
    if v["frame"] not in ("B||y", "B||x", "angles"):
        raise ConfigError("frame must be B||y, B||x or angles")
    if v["q"] not in (1, -1, 2, -2):
        raise ConfigError("q must be one of -2, -1, 1, 2")
    for k in ("wavelength", "w0", "w0_min", "w0_max", "x_span", "omega", "omega0", "omega_r", "omega_z", "ms_omega0"):
        if not v[k] > 0:
            raise ConfigError(f"{k} must be positive")
    if v["P0"] < 0 or v["B"] < 0:
        raise ConfigError("P0 and B must be non-negative")
    if v["n_points"] < 1 or v["n_grid"] < 1 or v["n_w0"] < 1 or v["n_nu"] < 1:
        raise ConfigError("grid sizes must be positive")
    if len(v["cutoffs"]) != 3:
        raise ConfigError("cutoffs needs three entries (n_com, n_str, n_rad)")
    if any(n < 0 for n in v["nbar"] + v["nbar_com"] + v["waist_nbar"]):
        raise ConfigError("occupations must be non-negative")
