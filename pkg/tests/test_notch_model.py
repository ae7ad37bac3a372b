"""Forward notch model, trace synthesis, and photon-number calibration."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from resokit.errors import DomainError, UnphysicalValueError
from resokit.notch import (AttenuationChain, NotchParams, S21Trace, TraceMeta,
                           chip_input_power, photon_number, s21_full,
                           s21_ideal, synthesize_trace)
from resokit.numerics import circle_fit

HBAR = 1.0545718176461565e-34

P_REF = NotchParams(f_r=5.9643e9, q_loaded=5000.0, q_coupling_mag=10000.0,
                    phi=0.0, amp=1.0, phase_offset=0.0, delay=0.0)


def test_s21_ideal_at_resonance():
    val = s21_ideal(P_REF.f_r, P_REF)
    assert_allclose(val, 1.0 - 0.5, rtol=1e-15)
    p2 = NotchParams(f_r=5e9, q_loaded=2000.0, q_coupling_mag=4000.0, phi=0.2)
    assert_allclose(s21_ideal(5e9, p2), 1.0 - 0.5 * np.exp(0.2j), rtol=1e-15)


def test_s21_ideal_off_resonant_limit():
    # far detuning approaches the off-resonant point at unity
    for f in (P_REF.f_r * 1e3, P_REF.f_r / 1e3):
        assert abs(s21_ideal(f, P_REF) - 1.0) < 1e-3


def test_s21_ideal_circle_diameter():
    # the Im/Re locus is a circle of diameter Ql/|Qc| through the point 1
    lw = P_REF.f_r / P_REF.q_loaded
    f = np.linspace(P_REF.f_r - 50 * lw, P_REF.f_r + 50 * lw, 10000)
    z = s21_ideal(f, P_REF)
    c = circle_fit(np.column_stack([z.real, z.imag]))
    assert_allclose(2.0 * c.radius, P_REF.q_loaded / P_REF.q_coupling_mag,
                    rtol=1e-6)


def test_s21_full_identity_environment():
    f = np.linspace(5.9e9, 6.0e9, 64)
    assert_allclose(s21_full(f, P_REF), s21_ideal(f, P_REF), rtol=1e-15)


def test_s21_full_magnitude_scaling():
    p = NotchParams(f_r=5.9643e9, q_loaded=5000.0, q_coupling_mag=10000.0,
                    phi=0.1, amp=2.7, phase_offset=1.2, delay=37e-9)
    f = np.linspace(5.9e9, 6.0e9, 257)
    assert_allclose(np.abs(s21_full(f, p)), p.amp * np.abs(s21_ideal(f, p)),
                    rtol=1e-13)


def test_s21_full_delay_winding():
    p = NotchParams(f_r=5.9643e9, q_loaded=5000.0, q_coupling_mag=10000.0,
                    phi=0.0, amp=1.0, phase_offset=0.0, delay=50e-9)
    for f in (5.8e9, 5.9643e9, 6.1e9):
        expected = (1.0 - (0.5 / (1.0 + 2j * 5000.0 * (f / 5.9643e9 - 1.0)))) \
            * np.exp(-2j * np.pi * f * 50e-9)
        assert_allclose(s21_full(f, p), expected, rtol=1e-13)


def test_min_magnitude_at_resonance_for_zero_phi():
    lw = P_REF.f_r / P_REF.q_loaded
    f = np.linspace(P_REF.f_r - 5 * lw, P_REF.f_r + 5 * lw, 20001)
    mag = np.abs(s21_full(f, P_REF))
    assert abs(f[np.argmin(mag)] - P_REF.f_r) <= (f[1] - f[0])


# --------------------------------------------------------------------------
# synthesis
# --------------------------------------------------------------------------

def test_synthesize_noiseless_matches_model():
    tr = synthesize_trace(P_REF, 5.9e9, 6.0e9, 64, noise_sigma=0.0, seed=3)
    assert_allclose(tr.values, s21_full(tr.freqs, P_REF), rtol=1e-15)


def test_synthesize_seed_determinism():
    a = synthesize_trace(P_REF, 5.9e9, 6.0e9, 64, 0.01, seed=1)
    b = synthesize_trace(P_REF, 5.9e9, 6.0e9, 64, 0.01, seed=1)
    c = synthesize_trace(P_REF, 5.9e9, 6.0e9, 64, 0.01, seed=2)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_synthesize_noise_statistics():
    n = 100000
    tr = synthesize_trace(P_REF, 5.9e9, 6.0e9, n, noise_sigma=0.05, seed=9)
    noise = tr.values - s21_full(tr.freqs, P_REF)
    se = 0.05 / math.sqrt(n)
    assert abs(noise.real.mean()) < 5 * se
    assert abs(noise.imag.mean()) < 5 * se


def test_synthesize_validation():
    with pytest.raises(DomainError):
        synthesize_trace(P_REF, 6.0e9, 5.9e9, 64)
    with pytest.raises(DomainError):
        synthesize_trace(P_REF, 5.9e9, 6.0e9, 8)


def test_trace_invariants():
    with pytest.raises(DomainError):
        S21Trace(freqs=np.array([1.0, 1.0, 2.0]),
                 values=np.array([1j, 1j, 1j]))
    with pytest.raises(DomainError):
        S21Trace(freqs=np.array([1.0, 2.0]), values=np.array([1j]))
    tr = synthesize_trace(P_REF, 5.9e9, 6.0e9, 64)
    with pytest.raises(ValueError):
        tr.freqs[0] = 0.0  # arrays are frozen


# --------------------------------------------------------------------------
# power chain and photon number
# --------------------------------------------------------------------------

def test_chip_input_power_reference_chain():
    chain = AttenuationChain.from_db_list([40.0, 20.0, 20.0, 20.0],
                                          ["room", "70K", "4K", "0.5K"])
    assert chain.total_db == 100.0
    assert_allclose(chip_input_power(-30.0, chain), 1e-16, rtol=1e-12)


def test_chip_input_power_dbm_definition():
    empty = AttenuationChain()
    assert_allclose(chip_input_power(0.0, empty), 1e-3, rtol=1e-12)


def test_three_db_stage_halves_power():
    empty = AttenuationChain()
    one = AttenuationChain.from_db_list([3.0])
    ratio = chip_input_power(0.0, one) / chip_input_power(0.0, empty)
    assert_allclose(ratio, 10 ** -0.3, rtol=1e-12)
    assert abs(ratio - 0.501) < 1e-3


def test_photon_number_zero_power():
    assert photon_number(0.0, 5.952e9, 9.57e4, 2308.0, 2253.6) == 0.0


def test_photon_number_decoupled_limit():
    # q_c -> infinity at fixed q_i: the coupling factor kills the number
    n_ref = photon_number(1e-15, 5.952e9, 9.57e4, 2.0e5, 9.57e4 / 1.5)
    n_far = photon_number(1e-15, 5.952e9, 9.57e4, 1.0e12, 9.57e4 * (1 - 1e-8))
    assert n_far < 1e-5 * n_ref


def test_photon_number_reference_point():
    # loaded Q from the published (q_i, q_c) pair agrees with the printed
    # 2252 to 0.1%; mean photon number frozen from direct evaluation
    q_i, q_c = 9.57e4, 2308.0
    q_l = 1.0 / (1.0 / q_i + 1.0 / q_c)
    assert abs(q_l - 2252.0) / 2252.0 < 1e-3
    n = photon_number(1e-16, 5.952e9, q_i, q_c, q_l)
    assert_allclose(n, 2.9840416402401733, rtol=1e-12)


def test_photon_number_scalings():
    args = (5.952e9, 9.57e4, 2308.0, 2253.6)
    n1 = photon_number(1e-16, *args)
    assert_allclose(photon_number(3e-16, *args), 3.0 * n1, rtol=1e-12)
    n_f2 = photon_number(1e-16, 2 * 5.952e9, 9.57e4, 2308.0, 2253.6)
    assert_allclose(n_f2, n1 / 4.0, rtol=1e-12)


def test_photon_number_unphysical():
    with pytest.raises(UnphysicalValueError):
        photon_number(1e-16, 5.952e9, 9.57e4, 2000.0, 2253.6)


def test_loaded_q_cross_check_sample1():
    q_l = 1.0 / (1.0 / 1.07e6 + 1.0 / 6378.0)
    assert abs(q_l - 6340.0) <= 1.0


def test_notch_params_validation():
    with pytest.raises(DomainError):
        NotchParams(f_r=-1.0, q_loaded=100.0, q_coupling_mag=100.0)
    with pytest.raises(UnphysicalValueError):
        # Ql > |Qc|/cos(phi) implies negative internal loss
        NotchParams(f_r=5e9, q_loaded=3000.0, q_coupling_mag=2000.0, phi=0.0)
