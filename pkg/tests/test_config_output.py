import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tweezergates.config import PRESETS, ConfigError, load_config, parse_quantity
from tweezergates.output import (
    SchemaError,
    read_table,
    render,
    sha256,
    validate_table,
    write_manifest,
    write_table,
)


@pytest.mark.parametrize(
    "text,kind,value",
    [
        ("729nm", "length", 7.29e-7),
        ("1.5um", "length", 1.5e-6),
        ("5G", "field", 5e-4),
        ("10uW", "power", 1e-5),
        ("2pi*0.5MHz", "angular", 2 * math.pi * 0.5e6),
        ("3.1e6rad/s", "angular", 3.1e6),
        ("90deg", "angle", math.pi / 2),
        ("0", "length", 0.0),
    ],
)
def test_parse_quantity(text, kind, value):
    assert parse_quantity(text, kind) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize(
    "text,kind,msg",
    [
        ("729", "length", "no unit"),
        ("1MHz", "angular", "ambiguous"),
        ("2pi*1rad/s", "angular", "conflicting"),
        ("5 parsec", "length", "parse|unit"),
        ("5G", "length", "not a length unit"),
        ("2pi*5nm", "length", "2pi prefix"),
        (729, "length", "explicit unit"),
        ("1.2.3nm", "length", "position"),
    ],
)
def test_parse_quantity_rejections(text, kind, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_quantity(text, kind)


def test_override_rejects_unitless_waist():
    with pytest.raises(ConfigError, match="w0"):
        load_config(overrides=["w0=729"])


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(overrides=["waist=1um"])
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(p)


def test_bad_json_reports_location(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"w0": "1um",\n "B": }')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_layering_order(tmp_path):
    assert load_config()["w0"] == pytest.approx(729e-9)
    assert load_config(preset="figS2")["omega0"] == pytest.approx(2 * math.pi * 0.2e6)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"omega0": "2pi*0.3MHz", "B": "1G"}))
    c = load_config(p, preset="figS2")
    assert c["omega0"] == pytest.approx(2 * math.pi * 0.3e6)
    c = load_config(p, overrides=["B=2G"], preset="figS2")
    assert c["B"] == pytest.approx(2e-4)
    assert c.manifest()["B"] == "2G"


@pytest.mark.parametrize("override", ["q=0", "profile=HG", "frame=B||z", "cutoffs=[5,5]", "P0=-1uW", "n_points=0"])
def test_validation(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


def test_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        load_config(preset="fig9")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_resolve(name):
    load_config(preset=name)


# --- tables ----------------------------------------------------------------------------


def test_header_unit_suffix_enforced():
    with pytest.raises(SchemaError):
        render({"x": [1.0]})
    with pytest.raises(SchemaError):
        render({"x_furlong": [1.0]})
    with pytest.raises(SchemaError):
        render({"x_m": [1.0, 2.0], "y_m": [1.0]})


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_json_round_trip(tmp_path_factory, values):
    d = tmp_path_factory.mktemp("rt")
    cols = {"x_m": values, "tag_label": ["a"] * len(values), "count_1": list(range(len(values)))}
    a = read_table(write_table(d / "t.csv", cols, "csv"))
    b = read_table(write_table(d / "t.json", cols, "json"))
    assert a["x_m"] == values and b["x_m"] == values
    assert a["tag_label"] == b["tag_label"]
    assert b["count_1"] == list(range(len(values)))


def test_nan_survives_round_trip(tmp_path):
    cols = {"x_m": [np.nan, 1.0]}
    for fmt in ("csv", "json"):
        r = read_table(write_table(tmp_path / f"t.{fmt}", cols, fmt))
        assert math.isnan(r["x_m"][0]) and r["x_m"][1] == 1.0


def test_validate_table_detects_bad_rows(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("x_m,y_m\n1,2\n3\n")
    with pytest.raises(SchemaError, match="line 3"):
        validate_table(p)
    p.write_text("x,y_m\n1,2\n")
    with pytest.raises(SchemaError):
        validate_table(p)


def test_manifest_is_deterministic(tmp_path):
    f = write_table(tmp_path / "t.csv", {"x_m": [1.0, 2.0]})
    m1 = write_manifest(tmp_path, "demo", {"w0": "1um"}, [f]).read_bytes()
    m2 = write_manifest(tmp_path, "demo", {"w0": "1um"}, [f]).read_bytes()
    assert m1 == m2
    doc = json.loads(m1)
    assert doc["files"]["t.csv"] == sha256(f)
    assert "numpy" in doc["versions"]


def test_bare_list_overrides():
    c = load_config(overrides=["omegas=[2pi*0.5MHz,2pi*2MHz]", "nbar=0.1,1"])
    assert c["omegas"] == pytest.approx([2 * math.pi * 0.5e6, 2 * math.pi * 2e6])
    assert c["nbar"] == [0.1, 1.0]
    with pytest.raises(ConfigError):
        load_config(overrides=["occupations=[[0,0],[1,]"])
