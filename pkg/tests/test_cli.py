import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tweezergates.cli import main
from tweezergates.output import read_table, sha256, validate_table

LAM = 729e-9
FAST_MS = ["cutoffs=[8,5,8]", "nbar_com=[0,1]", "occupations=[[0,0]]", "ms_steps=60"]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "tweezergates.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "single-qubit" in res.stdout


def test_config_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "expand", "w0=729") == 2
    assert "w0" in capsys.readouterr().err
    assert run(tmp_path, "expand", "frobnicate=1") == 2


def test_dataset_error_exit_code(tmp_path):
    bad = tmp_path / "ds.json"
    bad.write_text("{}")
    assert run(tmp_path, "validate-dataset", "--dataset", str(bad)) == 2
    assert run(tmp_path, "validate-dataset") == 0


def test_numerical_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "expand", "B=0G") == 3
    assert "numerical failure" in capsys.readouterr().err
    assert run(tmp_path, "ms-gate", "cutoffs=[5,4,5]", "nbar_com=[2]", "occupations=[[0,0]]", "ms_steps=20") == 3


def test_byte_determinism_and_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["expand", "--preset", "fig2"]
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    for name in ("expansion.csv", "manifest_expand.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    doc = json.loads((a / "manifest_expand.json").read_text())
    assert doc["files"]["expansion.csv"] == sha256(a / "expansion.csv")
    assert doc["config"]["w0"] == "729nm"
    assert validate_table(a / "expansion.csv") == 1


def test_json_format(tmp_path):
    assert run(tmp_path, "expand", "--format", "json") == 0
    t = read_table(tmp_path / "expansion.json")
    assert t["x0_m"][0] > 0
    assert t["dataset_label"][0].startswith("40Ca+")


def test_expand_matches_library(tmp_path, expansion):
    assert run(tmp_path, "expand") == 0
    t = read_table(tmp_path / "expansion.csv")
    assert t["delta1_rad_s_m"][0] == pytest.approx(expansion.delta1, rel=1e-12)
    assert t["x0_m"][0] == pytest.approx(expansion.x0, rel=1e-12)


def test_potential_map_zero_power_is_flat(tmp_path):
    assert run(tmp_path, "potential-map", "P0=0W", "n_points=11", "n_grid=3") == 0
    for name in ("potential_TEM00_Bparx", "potential_LG01_Bpary"):
        t = read_table(tmp_path / f"{name}.csv")
        assert np.all(np.array(t["E_plus_rad_s"]) == 0)
        assert np.all(np.array(t["Omega_abs_rad_s"]) == 0)


def test_single_point_grid(tmp_path):
    assert run(tmp_path, "potential-map", "n_points=1", "n_grid=1") == 0
    assert validate_table(tmp_path / "potential_TEM00_Bpary.csv") == 1
    assert validate_table(tmp_path / "stark_LG01_Bparx.csv") == 1


def test_stark_map(tmp_path):
    assert run(tmp_path, "stark-map", "n_grid=5") == 0
    assert validate_table(tmp_path / "stark_TEM00_Bpary.csv") == 25


def test_displacement_scan(tmp_path):
    assert run(tmp_path, "displacement-scan", "w0_min=200nm", "w0_max=15um", "n_w0=8") == 0
    t = read_table(tmp_path / "displacement_scan.csv")
    frame = np.array(t["frame_label"])
    q = np.array(t["q_1"])
    x0 = np.array(t["x0_m"])
    w0 = np.array(t["w0_m"])
    asym = np.array(t["asymptote_m"])
    widest = w0 == w0.max()
    np.testing.assert_allclose(x0[widest], asym[widest], rtol=0.02)
    bx = frame == "B||x"
    small = bx & (w0 < LAM)
    assert np.all(np.diff(x0[small]) > 0)  # shrinks toward small waists
    pos, neg = (frame == "B||y") & (q == 1), (frame == "B||y") & (q == -1)
    ok = ~np.isnan(x0[pos]) & ~np.isnan(x0[neg])
    np.testing.assert_allclose(x0[neg][ok], -x0[pos][ok], rtol=1e-6)  # peak-finder tolerance
    errs = np.array(t["error_label"])
    assert np.all((errs == "") == ~np.isnan(x0))


@pytest.fixture(scope="module")
def single_qubit_table(tmp_path_factory):
    out = tmp_path_factory.mktemp("sq")
    assert main(["single-qubit", "nbar=[0.05,0.5,2]", "--out", str(out)]) == 0
    return {k: np.array(v) for k, v in read_table(out / "single_qubit.csv").items()}


def test_single_qubit_panels(single_qubit_table):
    t = single_qubit_table
    labels = list(dict.fromkeys(t["panel_label"]))
    assert len(labels) == 5 and labels[-1] == "control"
    ctrl = t["panel_label"] == "control"
    for col in ("infid_rabi_only_tg_1", "infid_with_stark_tg_1", "infid_rabi_only_tbar_1", "infid_with_stark_tbar_1"):
        assert np.all(t[col][ctrl] <= 1e-10)
        assert np.all(t[col][~ctrl] > 0)


def test_single_qubit_compensation_helps_at_low_nbar(single_qubit_table):
    t = single_qubit_table
    low = (t["nbar_1"] == 0.05) & (t["panel_label"] != "control")
    assert np.all(t["infid_with_stark_tbar_1"][low] < t["infid_with_stark_tg_1"][low])
    assert np.all(t["infid_analytic_compensated_1"][low] <= t["infid_analytic_tg_1"][low])


def test_waist_scan(tmp_path):
    args = ["w0_min=729nm", "w0_max=7um", "n_w0=5", "omegas=[2pi*0.5MHz,2pi*2MHz]", "waist_nbar=[0.1,1]"]
    assert run(tmp_path, "waist-scan", *args) == 0
    t = {k: np.array(v) for k, v in read_table(tmp_path / "waist_scan.csv").items()}
    w0s = np.unique(t["w0_m"])
    for om in np.unique(t["omega_rad_s"]):
        for nb in (0.1, 1.0):
            sel = (t["omega_rad_s"] == om) & (t["nbar_1"] == nb)
            assert np.all(np.diff(t["infid_compensated_1"][sel]) < 0)
    lo, hi = min(t["omega_rad_s"]), max(t["omega_rad_s"])
    for w in w0s:
        at = t["w0_m"] == w
        f = {(o, n): t["infid_compensated_1"][at & (t["omega_rad_s"] == o) & (t["nbar_1"] == n)][0] for o in (lo, hi) for n in (0.1, 1.0)}
        assert f[(lo, 1.0)] > f[(lo, 0.1)]
        assert f[(lo, 0.1)] > f[(hi, 0.1)]


def test_gax_scan(tmp_path):
    assert run(tmp_path, "gax-scan", "n_nu=300") == 0
    t = {k: np.array(v) for k, v in read_table(tmp_path / "gax_scan.csv").items()}
    ok = t["pole_1"] == 0
    np.testing.assert_allclose(t["gax_double_rabi_abs_rad_s"][ok] / t["gax_abs_rad_s"][ok], 16, atol=1e-6)
    modes = read_table(tmp_path / "axial_modes.csv")
    assert len(modes["omega_m_rad_s"]) == 10


def test_ms_gate(tmp_path):
    assert run(tmp_path, "ms-gate", *FAST_MS) == 0
    t = {k: np.array(v) for k, v in read_table(tmp_path / "ms_gate.csv").items()}
    on, off = t["gradients_label"] == "on", t["gradients_label"] == "off"
    assert np.all(t["delta_F_1"][on] > 0)
    assert np.all(t["delta_F_1"][off] == 0)
    assert not any(math.isnan(v) for v in t["F_real_1"])
