import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smforge.microstrip import (CoupledParams, ValidityError, microstrip_coupled_params,
                                microstrip_params)
from smforge.models import (CoarseModel, EmulatorTruth, FineEmulator, ModelError,
                            eval_coarse, eval_fine_emulator)
from smforge.network import (SingularSectionError, cascade, coupled_section_impedance,
                             coupled_section_two_port, electrical_length, line_two_port,
                             to_scattering, z_to_scattering)
from smforge.response import ChannelSelector, response_distance

from conftest import REGION_HI, REGION_LO, X0

ETA0 = 376.730313668


def _kj_reference(w, s, h, er):
    """Second, separately written evaluation of the zero-thickness coupled-line formulas."""
    u, g = w / h, s / h

    def a_(v):
        return (1 + math.log((v**4 + (v / 52) ** 2) / (v**4 + 0.432)) / 49
                + math.log(1 + (v / 18.1) ** 3) / 18.7)

    b = 0.564 * ((er - 0.9) / (er + 3)) ** 0.053
    e0 = (er + 1) / 2 + (er - 1) / 2 * (1 + 10 / u) ** (-a_(u) * b)
    fu = 6 + (2 * math.pi - 6) * math.exp(-((30.666 / u) ** 0.7528))
    z01 = ETA0 / (2 * math.pi) * math.log(fu / u + math.sqrt(1 + 4 / u**2))

    v = u * (20 + g**2) / (10 + g**2) + g * math.exp(-g)
    ee = (er + 1) / 2 + (er - 1) / 2 * (1 + 10 / v) ** (-a_(v) * b)
    a0 = 0.7287 * (e0 - (er + 1) / 2) * (1 - math.exp(-0.179 * u))
    b0 = 0.747 * er / (0.15 + er)
    c0 = b0 - (b0 - 0.207) * math.exp(-0.414 * u)
    d0 = 0.593 + 0.694 * math.exp(-0.562 * u)
    eo = ((er + 1) / 2 + a0 - e0) * math.exp(-c0 * g**d0) + e0

    q1 = 0.8695 * u**0.194
    q2 = 1 + 0.7519 * g + 0.189 * g**2.31
    q3 = (0.1975 + (16.6 + (8.4 / g) ** 6) ** -0.387
          + math.log(g**10 / (1 + (g / 3.4) ** 10)) / 241)
    q4 = 2 * q1 / q2 / (math.exp(-g) * u**q3 + (2 - math.exp(-g)) * u**-q3)
    q5 = 1.794 + 1.14 * math.log(1 + 0.638 / (g + 0.517 * g**2.43))
    q6 = (0.2305 + math.log(g**10 / (1 + (g / 5.8) ** 10)) / 281.3
          + math.log(1 + 0.598 * g**1.154) / 5.1)
    q7 = (10 + 190 * g**2) / (1 + 82.3 * g**3)
    q8 = math.exp(-6.5 - 0.95 * math.log(g) - (g / 0.15) ** 5)
    q9 = math.log(q7) * (q8 + 1 / 16.5)
    q10 = (q2 * q4 - q5 * math.exp(math.log(u) * q6 * u**-q9)) / q2
    z0e = z01 / math.sqrt(ee) / (1 - z01 / ETA0 * q4)
    z0o = z01 / math.sqrt(eo) / (1 - z01 / ETA0 * q10)
    return z0e, z0o, ee, eo


def _sig4(a, b):
    return abs(a - b) <= 5e-4 * abs(b)


def test_coupled_params_match_reference():
    for args in [(0.575, 0.54, 0.635, 10.2), (0.383, 0.1, 0.635, 10.2), (1.2, 2.0, 1.0, 4.4)]:
        got = microstrip_coupled_params(*args)
        ref = _kj_reference(*args)
        assert all(_sig4(a, b) for a, b in
                   zip((got.z0e, got.z0o, got.eeff_e, got.eeff_o), ref)), (args, got, ref)


def test_single_line_50_ohm_on_alumina_like():
    z0, eeff = microstrip_params(0.59, 0.635, 10.2)
    assert 45 < z0 < 55 and 6 < eeff < 8


def test_air_gives_unit_permittivity():
    p = microstrip_coupled_params(0.5, 0.3, 0.635, 1.0)
    assert p.eeff_e == pytest.approx(1.0) and p.eeff_o == pytest.approx(1.0)


@pytest.mark.parametrize("w, s, ratio", [(0.05, 0.3, "w/h"), (0.5, 0.01, "s/h")])
def test_validity_window(w, s, ratio):
    with pytest.raises(ValidityError, match=ratio):
        microstrip_coupled_params(w, s, 0.635, 10.2)


@given(st.floats(0.06, 6.0))
def test_coupling_decreases_with_gap(s):
    a = microstrip_coupled_params(0.575, s, 0.635, 10.2)
    b = microstrip_coupled_params(0.575, s * 1.05, 0.635, 10.2)
    assert a.z0e > a.z0o
    assert (b.z0e - b.z0o) < (a.z0e - a.z0o)


# network


def test_line_zero_length_is_identity():
    assert np.allclose(line_two_port(50, 6.5, 0.0, 10.0), np.eye(2))


def _length_for(theta, eeff, f):
    return theta / electrical_length(eeff, 1.0, f)


def test_quarter_and_half_wave_lines():
    L = _length_for(math.pi / 2, 4.0, 10.0)
    s11, s12, s21, s22 = to_scattering(line_two_port(50, 4.0, L, 10.0), 50)
    assert abs(s21 - (-1j)) < 1e-12 and abs(s11) < 1e-12
    m = line_two_port(50, 4.0, 2 * L, 10.0)
    assert np.allclose(m, -np.eye(2), atol=1e-12)
    assert abs(to_scattering(m, 50)[2]) == pytest.approx(1.0)


def test_cascade_identities():
    m = line_two_port(35, 5.0, 1.3, 9.0)
    assert np.array_equal(cascade([np.eye(2)]), np.eye(2))
    assert np.array_equal(cascade([m]), m)
    with pytest.raises(ValueError):
        cascade([])


def test_to_scattering_examples():
    s11, _, s21, _ = to_scattering(np.eye(2, dtype=complex), 50)
    assert s11 == 0 and s21 == 1
    series = np.array([[1, 100], [0, 1]], dtype=complex)
    assert to_scattering(series, 50)[0] == pytest.approx(0.5)


def test_quarter_wave_coupled_section_closed_form():
    # Z = [[0, -15j], [-15j, 0]] at theta = pi/2; S21 = 2 Z21 Zr / ((Zr)^2 - Z21^2)
    p = CoupledParams(70.0, 40.0, 4.0, 4.0)
    L = _length_for(math.pi / 2, 4.0, 10.0)
    s = to_scattering(coupled_section_two_port(p, L, 10.0), 50)
    assert abs(s[2] - (-1500j / 2725)) < 1e-12
    assert abs(s[2] - s[1]) < 1e-12


def test_zero_coupling_transmits_nothing():
    p = CoupledParams(55.0, 55.0, 6.5, 6.5)
    f = np.linspace(8, 12, 17)
    z = coupled_section_impedance(p, 2.9, f)
    _, s12, s21, _ = z_to_scattering(z, 50)
    assert np.max(np.abs(s21)) <= 1e-12 and np.max(np.abs(s12)) <= 1e-12
    with pytest.raises(SingularSectionError):
        coupled_section_two_port(p, 2.9, f)


def test_short_section_transmission_vanishes():
    p = CoupledParams(70.0, 40.0, 7.0, 6.0)
    vals = [abs(to_scattering(coupled_section_two_port(p, L, 10.0), 50)[2])
            for L in (1e-1, 1e-2, 1e-3)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-2


def test_singular_length_names_frequency_and_mode():
    p = CoupledParams(70.0, 40.0, 4.0, 5.0)
    L = _length_for(math.pi, 4.0, 10.0)
    with pytest.raises(SingularSectionError, match="even.*10.0 GHz"):
        coupled_section_impedance(p, L, 10.0)


# built-in filter models


def _random_designs(count, seed):
    return np.random.default_rng(seed).uniform(REGION_LO, REGION_HI, size=(count, 6))


def test_filter_invariants(coarse, geom, grid):
    fine = FineEmulator(geom, grid)
    for x in _random_designs(20, 7):
        for r in (coarse(x), fine(x)):
            assert np.max(np.abs(np.abs(r.s11) ** 2 + np.abs(r.s21) ** 2 - 1)) <= 1e-9
            assert np.max(np.abs(r.s12 - r.s21)) <= 1e-12
            assert np.max(np.abs(r.s11 - r.s22)) <= 1e-12


def test_band_pass_shape_at_reference(coarse):
    r = coarse(X0)
    db = r.db("S21")
    f = r.grid.points
    inband = db[(f >= 8.9) & (f <= 10.1)].max()
    assert inband - max(db[0], db[-1]) >= 10


@pytest.mark.xfail(strict=True, reason="even/odd permittivities still differ at s = 10h, "
                   "leaving ~1e-6 residual coupling in the closed-form model")
def test_wide_gaps_decouple_filter(geom, grid):
    x = np.array([6.35, 2.85, 6.35, 2.77, 6.35, 2.76])
    r = eval_coarse(x, geom.nominal_aux(), geom, grid)
    assert np.max(np.abs(r.s21)) <= 1e-10


def test_wide_gaps_nearly_decouple(geom, grid):
    x = np.array([6.35, 2.85, 6.35, 2.77, 6.35, 2.76])
    r = eval_coarse(x, geom.nominal_aux(), geom, grid)
    assert np.max(np.abs(r.s21)) <= 1e-4


def test_zero_truth_matches_coarse_bitwise(geom, grid):
    for x in _random_designs(3, 3):
        a = eval_fine_emulator(x, EmulatorTruth.zero(), geom, grid)
        b = eval_coarse(x, geom.nominal_aux(), geom, grid)
        for c in ("s11", "s12", "s21", "s22"):
            assert np.array_equal(a.channel(c), b.channel(c))


def _centre(r):
    f = np.linspace(r.grid.f_min, r.grid.f_max, 801)
    s21 = np.interp(f, r.grid.points, np.abs(r.s21))
    return np.sum(f * s21**4) / np.sum(s21**4)


def test_permittivity_increase_lowers_passband(geom):
    from smforge.response import make_grid
    g = make_grid(7.0, 13.0, 0.01)
    base = eval_coarse(X0, geom.nominal_aux(), geom, g)
    up = eval_fine_emulator(X0, EmulatorTruth(0.3, 0.0, 0.0, 0.0), geom, g)
    assert _centre(up) < _centre(base) - 0.05


def test_default_emulator_differs_from_coarse(coarse, geom, grid):
    d = response_distance(FineEmulator(geom, grid)(X0), coarse(X0), ChannelSelector(("S12",)))
    assert d >= 0.1


def test_model_rejects_bad_vectors(coarse):
    with pytest.raises(ModelError, match="6 entries"):
        coarse(X0[:5])
    with pytest.raises(ModelError, match="section 1"):
        coarse(np.array([0.01, 2.85, 0.54, 2.77, 0.73, 2.76]))


def test_counter_tracks_evaluations(geom, grid):
    m = CoarseModel(geom, grid)
    for _ in range(3):
        m(X0)
    assert m.counter.snapshot() == {"coarse_evals": 3, "fine_evals": 0}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=6, max_size=6))
def test_passivity_property(geom, grid, t):
    x = REGION_LO + np.array(t) * (REGION_HI - REGION_LO)
    r = eval_coarse(x, geom.nominal_aux(), geom, grid)
    assert np.all(np.abs(r.s11) <= 1 + 1e-12)
