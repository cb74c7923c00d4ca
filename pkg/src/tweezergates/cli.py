"""Command-line interface: figure-class data as CSV/JSON tables plus a manifest.

Exit codes: 0 success, 2 configuration or dataset error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .atoms import DatasetError, load_dataset
from .beams import make_beam
from .config import SCHEMA, ConfigError, load_config
from .coupling import displacement_axis, frame_preset, make_frame
from .dynamics import ConvergenceError, TruncationError, simulate_single_qubit
from .gatemodel import analytic_infidelity, compensated_infidelity, error_params, thermal_rabi
from .ionchain import ChainError, PoleError, gax_scan, normal_modes
from .output import write_manifest, write_table
from .potentials import (
    FitError,
    NearDegeneracyError,
    PeakFindingError,
    Transition,
    default_transition,
    dressed_potentials_arrays,
    expansion_for_rabi,
    find_peak_displacement,
    qubit_terms,
    stark_map,
)

NUMERICAL_ERRORS = (
    NearDegeneracyError,
    PeakFindingError,
    FitError,
    TruncationError,
    ConvergenceError,
    ChainError,
    PoleError,
    FloatingPointError,
    np.linalg.LinAlgError,
)

POLARIZATION = {"x": (1.0, 0.0), "y": (0.0, 1.0)}


# --- shared builders -----------------------------------------------------------------


class Context:
    def __init__(self, cfg, out: Path, fmt: str):
        self.cfg = cfg
        self.out = out
        self.fmt = fmt
        self.files = []
        self._ds = None

    @property
    def dataset(self):
        if self._ds is None:
            self._ds = load_dataset(self.cfg["dataset"])
        return self._ds

    def beam(self, profile=None, w0=None, power=None):
        c = self.cfg
        return make_beam(
            profile or c["profile"],
            c["w0"] if w0 is None else w0,
            c["wavelength"],
            c["P0"] if power is None else power,
            POLARIZATION[c["polarization"]],
        )

    def frame(self, name=None, B=None):
        c = self.cfg
        B = c["B"] if B is None else B
        name = name or c["frame"]
        ref = POLARIZATION[c["polarization"]]
        if name == "angles":
            return make_frame(B, c["phi"], c["theta"], ref)
        return frame_preset(name, B, ref)

    def transition(self, q=None):
        """Dataset qubit for its own q; otherwise m_g keeps |m_g| and takes the sign of q."""
        tr = default_transition(self.dataset)
        q = self.cfg["q"] if q is None else q
        if q == tr.q:
            return tr
        m_g = abs(tr.m_g) * np.sign(q)
        return Transition(m_g, m_g + q)

    def write(self, name: str, columns: dict):
        path = self.out / f"{name}.{self.fmt}"
        n = len(np.atleast_1d(next(iter(columns.values()))))
        columns = dict(columns)
        columns["dataset_label"] = [self.dataset.ident] * n
        columns["version_label"] = [__version__] * n
        write_table(path, columns, self.fmt)
        self.files.append(path)
        return path


def _tag(name: str) -> str:
    return name.replace("||", "par").replace(" ", "")


# --- verbs -----------------------------------------------------------------------------


def cmd_potential_map(ctx: Context):
    c = ctx.cfg
    s = np.linspace(-c["x_span"], c["x_span"], c["n_points"]) if c["n_points"] > 1 else np.zeros(1)
    g = np.linspace(-c["x_span"], c["x_span"], c["n_grid"]) if c["n_grid"] > 1 else np.zeros(1)
    for profile in ("TEM00", "LG01"):
        for fname in ("B||x", "B||y"):
            beam = ctx.beam(profile=profile)
            frame = ctx.frame(fname)
            axis = displacement_axis(frame)
            t = qubit_terms(beam, ctx.dataset, frame, np.outer(s, axis), ctx.transition())
            ep, em = dressed_potentials_arrays(t)
            ctx.write(
                f"potential_{profile}_{_tag(fname)}",
                {
                    "x_m": s,
                    "E_plus_rad_s": ep,
                    "E_minus_rad_s": em,
                    "delta_0_rad_s": t["delta0"],
                    "delta_1_rad_s": t["delta1"],
                    "Omega_abs_rad_s": np.abs(t["omega"]),
                },
            )
            sm = stark_map(beam, ctx.dataset, frame, g, g, ctx.transition())
            X, Y = np.meshgrid(g, g)
            ctx.write(
                f"stark_{profile}_{_tag(fname)}",
                {"x_m": X.ravel(), "y_m": Y.ravel(), "delta_dominant_rad_s": sm.dominant.ravel()},
            )


def cmd_stark_map(ctx: Context):
    c = ctx.cfg
    g = np.linspace(-c["x_span"], c["x_span"], c["n_grid"]) if c["n_grid"] > 1 else np.zeros(1)
    sm = stark_map(ctx.beam(), ctx.dataset, ctx.frame(), g, g, ctx.transition())
    X, Y = np.meshgrid(g, g)
    ctx.write(
        f"stark_{c['profile']}_{_tag(c['frame'])}",
        {
            "x_m": X.ravel(),
            "y_m": Y.ravel(),
            "delta_0_rad_s": sm.delta0.ravel(),
            "delta_1_rad_s": sm.delta1.ravel(),
            "delta_dominant_rad_s": sm.dominant.ravel(),
        },
    )


def cmd_displacement_scan(ctx: Context):
    c = ctx.cfg
    lam = c["wavelength"]
    w0s = np.geomspace(c["w0_min"], c["w0_max"], c["n_w0"])
    cases = [("B||y", 1, lam / (2 * np.pi)), ("B||x", 2, lam / np.pi), ("B||y", -1, -lam / (2 * np.pi))]
    rows = {k: [] for k in ("w0_m", "x0_m", "asymptote_m", "q_1", "frame_label", "error_label")}
    for fname, q, asym in cases:
        tr = ctx.transition(q)
        for w0 in w0s:
            beam = ctx.beam(w0=w0)
            try:
                x0 = find_peak_displacement(beam, ctx.dataset, ctx.frame(fname), tr).x0
                err = ""
            except PeakFindingError as exc:
                x0, err = float("nan"), str(exc)
            rows["w0_m"].append(w0)
            rows["x0_m"].append(x0)
            rows["asymptote_m"].append(asym)
            rows["q_1"].append(tr.q)
            rows["frame_label"].append(fname)
            rows["error_label"].append(err)
    ctx.write("displacement_scan", rows)


def _expansion_columns(ex, params) -> dict:
    return {
        "x0_m": [ex.x0],
        "omega0_rad_s": [ex.omega0],
        "omega2_rad_s_m2": [ex.omega2],
        "delta0_rad_s": [ex.delta0],
        "delta1_rad_s_m": [ex.delta1],
        "delta2_rad_s_m2": [ex.delta2],
        "l_ho_m": [params.l_ho],
        "zeta_1": [params.zeta],
        "s_1": [params.s],
        "kappa_x_rad_s": [params.kappa_x],
        "kappa_z_rad_s": [params.kappa_z],
        "fit_residual_1": [max(ex.residual_omega, ex.residual_delta)],
    }


def cmd_expand(ctx: Context):
    c = ctx.cfg
    ex, _ = expansion_for_rabi(ctx.beam(), ctx.dataset, ctx.frame(), c["omega0"], c["omega"], ctx.transition())
    params = error_params(ex, c["omega"], ctx.dataset.mass)
    ctx.write("expansion", _expansion_columns(ex, params))


def cmd_single_qubit(ctx: Context):
    c = ctx.cfg
    nbars = np.asarray(c["nbar"], dtype=float)
    mass = ctx.dataset.mass
    rows = {
        k: []
        for k in (
            "panel_label",
            "omega0_rad_s",
            "B_T",
            "nbar_1",
            "infid_rabi_only_tg_1",
            "infid_with_stark_tg_1",
            "infid_rabi_only_tbar_1",
            "infid_with_stark_tbar_1",
            "infid_analytic_tg_1",
            "infid_analytic_compensated_1",
        )
    }
    panels = [(f"Omega0=2pi*{w0 / 2e6 / np.pi:g}MHz;B={B * 1e4:g}G", w0, B) for w0, B in c["panels"]]
    panels.append(("control", c["panels"][0][0], c["panels"][0][1]))
    for label, w0, B in panels:
        ex, _ = expansion_for_rabi(ctx.beam(), ctx.dataset, ctx.frame(B=B), w0, c["omega"], ctx.transition())
        if label == "control":
            ex = ex.with_terms(omega2=0.0, delta1=0.0, delta2=0.0)
        params = error_params(ex, c["omega"], mass)
        sims = {
            (stark, timing): simulate_single_qubit(ex, c["omega"], mass, nbars, timing, include_stark=stark)
            for stark in (False, True)
            for timing in ("tg", "tbar")
        }
        for k, nb in enumerate(nbars):
            rows["panel_label"].append(label)
            rows["omega0_rad_s"].append(w0)
            rows["B_T"].append(B)
            rows["nbar_1"].append(nb)
            rows["infid_rabi_only_tg_1"].append(sims[(False, "tg")][k].infidelity)
            rows["infid_with_stark_tg_1"].append(sims[(True, "tg")][k].infidelity)
            rows["infid_rabi_only_tbar_1"].append(sims[(False, "tbar")][k].infidelity)
            rows["infid_with_stark_tbar_1"].append(sims[(True, "tbar")][k].infidelity)
            rows["infid_analytic_tg_1"].append(analytic_infidelity(params, ex.omega0, nb))
            om = thermal_rabi(ex, params, nb)
            rows["infid_analytic_compensated_1"].append(compensated_infidelity(params, ex.omega0, om, nb))
    ctx.write("single_qubit", rows)


def cmd_waist_scan(ctx: Context):
    c = ctx.cfg
    mass = ctx.dataset.mass
    w0s = np.geomspace(c["w0_min"], c["w0_max"], c["n_w0"])
    rows = {k: [] for k in ("w0_m", "omega_rad_s", "nbar_1", "infid_compensated_1", "error_label")}
    for w0 in w0s:
        for om in c["omegas"]:
            try:
                ex, _ = expansion_for_rabi(ctx.beam(w0=w0), ctx.dataset, ctx.frame(), c["omega0"], om, ctx.transition())
                params = error_params(ex, om, mass)
                err = ""
            except (PeakFindingError, FitError) as exc:
                ex, err = None, str(exc)
            for nb in c["waist_nbar"]:
                if ex is None:
                    val = float("nan")
                else:
                    val = compensated_infidelity(params, ex.omega0, thermal_rabi(ex, params, nb), nb)
                rows["w0_m"].append(w0)
                rows["omega_rad_s"].append(om)
                rows["nbar_1"].append(nb)
                rows["infid_compensated_1"].append(val)
                rows["error_label"].append(err)
    ctx.write("waist_scan", rows)


def _ms_expansion(ctx: Context):
    c = ctx.cfg
    ex, _ = expansion_for_rabi(ctx.beam(), ctx.dataset, ctx.frame(B=c["ms_B"]), c["ms_omega0"], c["omega_z"], ctx.transition())
    return ex


def cmd_gax_scan(ctx: Context):
    c = ctx.cfg
    chain = normal_modes(c["n_ions"], c["omega_r"], c["omega_z"], ctx.dataset.mass)
    ex = _ms_expansion(ctx)
    nus = np.linspace(c["nu_min"], c["nu_max"], c["n_nu"])
    g1, p1 = gax_scan(chain, ex.delta1, nus)
    g2, _ = gax_scan(chain, ex.scaled_to_rabi(2 * ex.omega0).delta1, nus)
    ctx.write(
        "gax_scan",
        {
            "nu_rad_s": nus,
            "gax_rad_s": g1,
            "gax_abs_rad_s": np.abs(g1),
            "gax_double_rabi_rad_s": g2,
            "gax_double_rabi_abs_rad_s": np.abs(g2),
            "pole_1": p1.astype(int),
        },
    )
    ctx.write("axial_modes", {"mode_1": np.arange(chain.N), "omega_m_rad_s": chain.axial_freqs})


def cmd_ms_gate(ctx: Context):
    from .msgate import MSGateConfig, ms_delta_fidelity, ms_gate_simulate

    c = ctx.cfg
    chain = normal_modes(2, c["omega_r"], c["omega_z"], ctx.dataset.mass)
    ex = _ms_expansion(ctx)
    cfg = MSGateConfig.from_expansion(
        ex,
        mu=c["mu"],
        eta=c["eta"],
        cutoffs=tuple(c["cutoffs"]),
        n_loops=c["n_loops"],
        radial_mode=c["radial_mode"],
        n_steps=c["ms_steps"],
    )
    presets = [tuple(p) for p in c["occupations"]]
    dF, real, ideal = ms_delta_fidelity(chain, cfg, c["nbar_com"], presets)
    ctrl_cfg = replace(cfg.without_gradients(), n_steps=real.steps)
    ctrl = ms_gate_simulate(chain, ctrl_cfg, c["nbar_com"], presets, check_convergence=False)
    keys = ("gradients_label", "n_str_1", "n_rad_1", "nbar_com_1", "F_real_1", "F_ideal_1", "delta_F_1")
    rows = {k: [] for k in keys}
    for label, F in (("on", real.fidelity), ("off", ctrl.fidelity)):
        for p, (ns, nr) in enumerate(presets):
            for k, nb in enumerate(c["nbar_com"]):
                vals = (label, ns, nr, nb, F[p, k], ideal.fidelity[p, k], ideal.fidelity[p, k] - F[p, k])
                for key, v in zip(keys, vals):
                    rows[key].append(v)
    ctx.write("ms_gate", rows)


def cmd_validate_dataset(ctx: Context):
    ds = ctx.dataset
    print(f"{ds.ident}: {len(ds.levels)} levels, E2 {ds.lower} -> {ds.upper}, source {ds.source}")


COMMANDS = {
    "potential-map": cmd_potential_map,
    "displacement-scan": cmd_displacement_scan,
    "stark-map": cmd_stark_map,
    "expand": cmd_expand,
    "single-qubit": cmd_single_qubit,
    "waist-scan": cmd_waist_scan,
    "gax-scan": cmd_gax_scan,
    "ms-gate": cmd_ms_gate,
    "validate-dataset": cmd_validate_dataset,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tweezergates", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE", help="config overrides, e.g. w0=729nm B=5G")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--preset", choices=("fig2", "fig3", "fig4", "figS1", "figS2"))
    p.add_argument("--dataset", help="dataset JSON (overrides $TWEEZER_DATASET)")
    p.epilog = "keys: " + ", ".join(sorted(SCHEMA))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    overrides = list(args.overrides)
    if args.dataset:
        overrides.append(f"dataset={args.dataset}")
    try:
        cfg = load_config(args.config, overrides, args.preset)
        ctx = Context(cfg, Path(args.out), args.format)
        if args.command == "validate-dataset":
            COMMANDS[args.command](ctx)
            return 0
        ctx.dataset  # fail early on a bad dataset
        COMMANDS[args.command](ctx)
    except (ConfigError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    manifest = write_manifest(
        ctx.out, args.command, cfg.manifest(), ctx.files, {"dataset": ctx.dataset.ident, "format": args.format}
    )
    for f in ctx.files:
        print(f)
    print(manifest)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
