import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import S
from sympy.physics.quantum.cg import CG

from tweezergates.angular import clebsch_gordan, m_values, spin_matrices
from tweezergates.atoms import DatasetError, load_dataset, parse_dataset
from tweezergates.beams import field_gradient_at, make_beam
from tweezergates.constants import HBAR, MU_B
from tweezergates.coupling import (
    GAUSS,
    coupling_angle_map,
    frame_preset,
    make_frame,
    polarizability_hamiltonian,
    polarizability_stark,
    quadrupole_rabi,
    rank2_gradient_components,
    rotate_from_quantization_frame,
    rotate_gradient,
    rotate_to_quantization_frame,
    spherical_field_components,
    zeeman_shifts,
)

LAM = 729e-9
HALF_INTEGERS = [j / 2 for j in range(0, 6)]


def bundled_text():
    return resources.files("tweezergates.data").joinpath("ca40.json").read_text()


# --- Clebsch-Gordan ------------------------------------------------------------------


def sympy_cg(j1, m1, j2, m2, J, M):
    return float(CG(S(j1), S(m1), S(j2), S(m2), S(J), S(M)).doit())


def test_cg_selection_rule_and_identity():
    assert clebsch_gordan(0.5, 0.5, 1, 0, 1.5, 1.5) == 0.0
    assert clebsch_gordan(0, 0, 0, 0, 0, 0) == 1.0


def test_cg_against_independent_implementation():
    assert clebsch_gordan(0.5, 0.5, 2, 1, 2.5, 1.5) == pytest.approx(sympy_cg("1/2", "1/2", 2, 1, "5/2", "3/2"), abs=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(60):
        j1, j2 = rng.choice(HALF_INTEGERS, 2)
        Js = np.arange(abs(j1 - j2), j1 + j2 + 0.5)
        J = rng.choice(Js)
        m1 = rng.choice(m_values(j1))
        m2 = rng.choice(m_values(j2))
        M = m1 + m2
        if abs(M) > J:
            continue
        ref = sympy_cg(S(int(2 * j1)) / 2, S(int(2 * m1)) / 2, S(int(2 * j2)) / 2, S(int(2 * m2)) / 2, S(int(2 * J)) / 2, S(int(2 * M)) / 2)
        assert clebsch_gordan(j1, m1, j2, m2, J, M) == pytest.approx(ref, abs=1e-12)


def test_cg_orthogonality():
    for j1 in HALF_INTEGERS:
        for j2 in HALF_INTEGERS:
            Js = np.arange(abs(j1 - j2), j1 + j2 + 0.5)
            pairs = [(J, M) for J in Js for M in m_values(J)]
            mat = np.array([[clebsch_gordan(j1, m1, j2, m2, J, M) for m1 in m_values(j1) for m2 in m_values(j2)] for J, M in pairs])
            np.testing.assert_allclose(mat @ mat.T, np.eye(len(pairs)), atol=1e-10)


def test_half_integer_validation():
    with pytest.raises(ValueError):
        clebsch_gordan(0.3, 0.3, 1, 0, 1, 0)


# --- dataset -----------------------------------------------------------------------


def test_bundled_dataset(ds):
    assert ds.lower == "S1/2" and ds.upper == "D5/2"
    assert ds.qubit_g.m == 0.5 and ds.qubit_e.m == 1.5
    assert 6.6e-26 < ds.mass < 6.7e-26
    assert ds.citations


def test_env_dataset(tmp_path, monkeypatch):
    raw = json.loads(bundled_text())
    raw["version"] = "test"
    p = tmp_path / "ds.json"
    p.write_text(json.dumps(raw))
    monkeypatch.setenv("TWEEZER_DATASET", str(p))
    assert load_dataset().version == "test"


@pytest.mark.parametrize(
    "mutate,msg",
    [
        (lambda r: r.update(bogus=1), "unknown key"),
        (lambda r: r.pop("q_red_au"), "missing"),
        (lambda r: r["levels"][0].update(J=1.0), "half-integer"),
        (lambda r: r["levels"][0].update(g_j=-2.0), "g_j"),
        (lambda r: r["qubit"]["e"].update(m=3.5), "not allowed"),
        (lambda r: r["e2_transition"].update(upper="X"), "unknown level"),
    ],
)
def test_dataset_validation(mutate, msg):
    raw = json.loads(bundled_text())
    mutate(raw)
    with pytest.raises(DatasetError, match=msg):
        parse_dataset(json.dumps(raw, indent=1))


def test_dataset_syntax_error_reports_line():
    with pytest.raises(DatasetError, match="line 3"):
        parse_dataset('{\n "species": "x",\n oops\n}')


# --- Zeeman ------------------------------------------------------------------------


def test_zeeman(ds):
    assert all(v == 0 for v in zeeman_shifts(ds, 0.0).values())
    a = zeeman_shifts(ds, 5 * GAUSS)
    b = zeeman_shifts(ds, 10 * GAUSS)
    assert all(b[k] == 2 * a[k] for k in a)
    g = ds.level("S1/2").g_j
    assert a[("S1/2", 0.5)] == pytest.approx(g * MU_B * 5e-4 / (2 * HBAR), rel=1e-14)


# --- frames and spherical components -------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_frame_orthogonal_and_isometric(phi, theta):
    fr = make_frame(1e-4, phi, theta)
    np.testing.assert_allclose(fr.R.T @ fr.R, np.eye(3), atol=1e-12)
    rng = np.random.default_rng(int(phi * 1e6) % 1000)
    E = rng.normal(size=3) + 1j * rng.normal(size=3)
    Er = rotate_to_quantization_frame(E, fr)
    assert np.linalg.norm(Er) == pytest.approx(np.linalg.norm(E), rel=1e-12)
    np.testing.assert_allclose(rotate_from_quantization_frame(Er, fr), E, atol=1e-12 * np.linalg.norm(E))


def test_frame_preset_b_along_y():
    fr = frame_preset("B||y", 5 * GAUSS)
    np.testing.assert_allclose(fr.b_hat, [0, 1, 0], atol=1e-12)
    E = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.sort(np.abs(rotate_to_quantization_frame(E, fr))), [1, 2, 3], atol=1e-12)
    with pytest.raises(ValueError):
        make_frame(-1.0, 0, 0)


def test_spherical_components():
    np.testing.assert_allclose(spherical_field_components([0, 0, 1]), [0, 1, 0])
    sp = spherical_field_components(np.array([1, 1j, 0]) / np.sqrt(2))
    # E_{+1} = -(Ex + i Ey)/sqrt 2 = 0, E_{-1} = (Ex - i Ey)/sqrt 2 = 1
    np.testing.assert_allclose(sp, [1, 0, 0], atol=1e-15)
    rng = np.random.default_rng(0)
    E = rng.normal(size=(100, 3)) + 1j * rng.normal(size=(100, 3))
    np.testing.assert_allclose(np.linalg.norm(spherical_field_components(E), axis=1), np.linalg.norm(E, axis=1), rtol=1e-12)


def _sph(v):
    return {1: -(v[0] + 1j * v[1]) / np.sqrt(2), 0: v[2], -1: (v[0] - 1j * v[1]) / np.sqrt(2)}


def rank2_oracle(G):
    """Couple the spherical components of the derivative and field indices to rank 2."""
    basis = np.eye(3)
    out = np.zeros(5, dtype=complex)
    for q in range(-2, 3):
        for a in (-1, 0, 1):
            b = q - a
            if abs(b) > 1:
                continue
            c = sympy_cg(1, a, 1, b, 2, q)
            val = sum(_sph(basis[i])[a] * _sph(basis[j])[b] * G[i, j] for i in range(3) for j in range(3))
            out[q + 2] += c * val
    return out


def test_rank2_components():
    assert np.all(rank2_gradient_components(np.zeros((3, 3))) == 0)
    G = np.zeros((3, 3))
    G[2, 2] = 1.7
    np.testing.assert_allclose(rank2_gradient_components(G), [0, 0, np.sqrt(6) / 2 * 1.7, 0, 0], atol=1e-15)
    rng = np.random.default_rng(5)
    for _ in range(20):
        G = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        G -= np.trace(G) / 3 * np.eye(3)
        np.testing.assert_allclose(rank2_gradient_components(G), rank2_oracle(G), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_rank2_phase_law(chi):
    rng = np.random.default_rng(11)
    G = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    G -= np.trace(G) / 3 * np.eye(3)
    c, s = np.cos(chi), np.sin(chi)
    Rz = np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]])  # frame axes rotated by chi about z
    Gp = Rz @ G @ Rz.T
    q = np.arange(-2, 3)
    np.testing.assert_allclose(rank2_gradient_components(Gp), np.exp(-1j * q * chi) * rank2_gradient_components(G), atol=1e-10)


# --- quadrupole Rabi frequency -------------------------------------------------------


def test_quadrupole_selection_and_zero(ds):
    comps = np.ones(5, dtype=complex)
    assert quadrupole_rabi(ds, 0.5, 1.5, np.zeros(5)) == 0
    for mg in m_values(0.5):
        for me in m_values(2.5):
            val = quadrupole_rabi(ds, mg, me, comps)
            if abs(me - mg) > 2:
                assert val == 0
            else:
                assert val != 0


def test_quadrupole_power_scaling(ds):
    fr = frame_preset("B||y", 5 * GAUSS)
    vals = []
    for p in (1e-5, 2e-5):
        b = make_beam("TEM00", LAM, LAM, p, (0, 1))
        G = rotate_gradient(field_gradient_at(b, [100e-9, 0, 0]), fr)
        vals.append(abs(quadrupole_rabi(ds, 0.5, 1.5, rank2_gradient_components(G))))
    assert vals[1] / vals[0] == pytest.approx(np.sqrt(2), rel=1e-12)


# --- polarizability operator ---------------------------------------------------------


def test_polarizability_vector_term_vanishes_for_linear_light():
    E = np.array([1.0, 2.0, -0.5]) * 1e4
    H_full = polarizability_hamiltonian((1e-39, 5e-40, 0.0), 2.5, E)
    H_scalar = polarizability_hamiltonian((1e-39, 0.0, 0.0), 2.5, E)
    np.testing.assert_allclose(H_full, H_scalar, atol=1e-12 * np.max(np.abs(H_scalar)))
    assert np.all(polarizability_hamiltonian((1e-39, 5e-40, 3e-40), 2.5, np.zeros(3)) == 0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_polarizability_stark_hermitian(ds, seed):
    rng = np.random.default_rng(seed)
    E = (rng.normal(size=3) + 1j * rng.normal(size=3)) * 1e5
    for label in ("S1/2", "D5/2"):
        H = polarizability_stark(ds, label, E, LAM)
        scale = np.max(np.abs(H))
        assert np.max(np.abs(H - H.conj().T)) <= 1e-12 * scale
        ev = np.linalg.eigvals(H)
        assert np.max(np.abs(ev.imag)) <= 1e-10 * scale


def test_scalar_part_shifts_uniformly(ds):
    E = np.array([0.3, 1.0, 0.2j]) * 1e5
    H_s = polarizability_hamiltonian((2e-39, 0.0, 0.0), 2.5, E)
    np.testing.assert_allclose(H_s, H_s[0, 0] * np.eye(6), atol=1e-15 * abs(H_s[0, 0]))
    H = polarizability_hamiltonian((2e-39, 0.0, 1e-39), 2.5, E)
    traceless = H - np.trace(H) / 6 * np.eye(6)
    np.testing.assert_allclose(traceless, H - H_s - np.trace(H - H_s) / 6 * np.eye(6), atol=1e-12 * np.max(np.abs(H)))


def test_spin_matrices_algebra():
    for J in (0.5, 1.5, 2.5):
        jx, jy, jz = spin_matrices(J)
        np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)


# --- angle map ------------------------------------------------------------------------


def test_angle_map_range_and_geometric_factors():
    # wide beam: plane-wave geometric factors of E2 coupling
    b = make_beam("TEM00", 20 * LAM, LAM, 1e-5, (0, 1))
    th = np.linspace(0, np.pi / 2, 7)
    ph = np.linspace(0, np.pi, 9)
    T, P = np.meshgrid(th, ph, indexing="ij")
    ref = {
        0: np.abs(np.cos(T) * np.sin(2 * P)),
        1: np.abs(np.cos(T) * np.cos(2 * P) + 1j * np.sin(T) * np.cos(P)),
        2: np.abs(0.5 * np.cos(T) * np.sin(2 * P) + 1j * np.sin(T) * np.sin(P)),
    }
    for q in range(-2, 3):
        m = coupling_angle_map(b, th, ph, q)
        assert m.min() >= 0 and m.max() == 1.0
        r = ref[abs(q)] / ref[abs(q)].max()
        np.testing.assert_allclose(m, r, atol=1e-12)
    with pytest.raises(ValueError):
        coupling_angle_map(b, th, ph, 3)


def test_angle_map_structure_invariant():
    th = np.linspace(0, np.pi / 2, 10)
    ph = np.linspace(0, np.pi, 19)
    for q in (0, 1, 2):
        a = coupling_angle_map(make_beam("TEM00", LAM, LAM, 1e-5, (0, 1)), th, ph, q)
        b = coupling_angle_map(make_beam("TEM00", 2 * LAM, LAM, 1e-5, (0, 1)), th, ph, q)
        c = coupling_angle_map(make_beam("TEM00", LAM, LAM, 7e-5, (0, 1)), th, ph, q)
        assert np.argmax(a) == np.argmax(b)
        np.testing.assert_allclose(a, c, atol=1e-12)
