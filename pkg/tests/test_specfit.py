"""Inverse-problem tests: delay estimation, the notch fit pipeline, Q_i
extraction, Jacobian gradient checks, and estimator statistics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from resokit.errors import NoResonanceError, UnphysicalValueError
from resokit.notch import NotchParams, S21Trace, TraceMeta, s21_full, synthesize_trace
from resokit.numerics import numeric_jacobian
from resokit.specfit import estimate_delay, extract_qi, fit_notch

P_PAPER = NotchParams(f_r=5.9643e9, q_loaded=2253.6, q_coupling_mag=2308.0,
                      phi=0.1, amp=1.0, phase_offset=0.3, delay=40e-9)


def _trace(p, span_lw=10.0, n=801, sigma=0.0, seed=0):
    lw = p.f_r / p.q_loaded
    return synthesize_trace(p, p.f_r - span_lw * lw / 2.0,
                            p.f_r + span_lw * lw / 2.0, n, sigma, seed)


# --------------------------------------------------------------------------
# delay estimation
# --------------------------------------------------------------------------

def test_delay_recovery_wide_span():
    p = NotchParams(f_r=5.9643e9, q_loaded=2253.6, q_coupling_mag=2308.0,
                    phi=0.1, amp=1.0, phase_offset=0.3, delay=42e-9)
    tau = estimate_delay(_trace(p, span_lw=20.0, n=2001))
    assert abs(tau - 42e-9) < 0.1e-9


def test_delay_zero():
    p = NotchParams(f_r=5.9643e9, q_loaded=2253.6, q_coupling_mag=2308.0,
                    phi=0.1, amp=1.0, phase_offset=0.3, delay=0.0)
    tau = estimate_delay(_trace(p, span_lw=20.0, n=2001))
    assert abs(tau) < 1e-12


def test_narrow_span_sets_delay_uncertain_flag():
    rep = fit_notch(_trace(P_PAPER, span_lw=2.0, n=401))
    assert "delay_uncertain" in rep.flags


def test_wide_span_no_delay_flag():
    rep = fit_notch(_trace(P_PAPER, span_lw=12.0, n=801))
    assert "delay_uncertain" not in rep.flags


# --------------------------------------------------------------------------
# Q_i extraction
# --------------------------------------------------------------------------

def test_extract_qi_reference_triple():
    # inversion of the published (Q_l, Q_c) pair at phi = 0
    qi = extract_qi(2253.6, 2308.0, 0.0)
    assert abs(qi - 9.57e4) / 9.57e4 < 5e-3


def test_extract_qi_limits():
    assert_allclose(extract_qi(2253.6, 1e300, 0.0), 2253.6, rtol=1e-12)
    assert_allclose(extract_qi(2253.6, 2308.0, math.pi / 2.0), 2253.6,
                    rtol=1e-12)


def test_extract_qi_unphysical():
    with pytest.raises(UnphysicalValueError):
        extract_qi(3000.0, 2000.0, 0.0)


# --------------------------------------------------------------------------
# the fit pipeline
# --------------------------------------------------------------------------

def test_noiseless_round_trip():
    rep = fit_notch(_trace(P_PAPER, span_lw=10.0, n=801))
    p = rep.params
    for name in ("f_r", "q_loaded", "q_coupling_mag", "phi", "amp",
                 "phase_offset", "delay"):
        true = getattr(P_PAPER, name)
        assert abs(getattr(p, name) - true) / abs(true) < 1e-6, name
    qi_true = extract_qi(P_PAPER.q_loaded, P_PAPER.q_coupling_mag, P_PAPER.phi)
    assert abs(rep.q_internal - qi_true) / qi_true < 1e-6
    assert rep.n_points == 801
    assert "no_convergence" not in rep.flags


def test_report_qi_consistent_with_params():
    rep = fit_notch(_trace(P_PAPER, sigma=0.005, seed=4))
    p = rep.params
    lhs = 1.0 / p.q_loaded
    rhs = 1.0 / rep.q_internal + math.cos(p.phi) / p.q_coupling_mag
    assert abs(lhs - rhs) * p.q_loaded < 1e-9


def test_parallel_resistor_identity_on_noiseless_data():
    # synthesized then re-extracted triple satisfies the mismatch relation
    rep = fit_notch(_trace(P_PAPER))
    p = rep.params
    assert abs(1.0 / p.q_loaded - (1.0 / rep.q_internal
                                   + math.cos(p.phi) / p.q_coupling_mag)) < 1e-10


def test_flat_trace_raises_no_resonance():
    freqs = np.linspace(5.9e9, 6.0e9, 301)
    values = np.full(301, 0.8 + 0.1j)
    with pytest.raises(NoResonanceError):
        fit_notch(S21Trace(freqs=freqs, values=values))


def test_noisy_flat_trace_raises_no_resonance():
    rng = np.random.default_rng(12)
    freqs = np.linspace(5.9e9, 6.0e9, 301)
    values = 1.0 + 0.01 * (rng.standard_normal(301)
                           + 1j * rng.standard_normal(301))
    with pytest.raises(NoResonanceError):
        fit_notch(S21Trace(freqs=freqs, values=values))


def test_uncertainties_nonnegative_and_meaningful():
    rep = fit_notch(_trace(P_PAPER, sigma=0.01, seed=2, n=1001))
    assert all(v >= 0.0 for v in rep.uncertainties.values())
    assert rep.uncertainties["f_r"] > 0.0
    # one-sigma f_r error of a clean fit stays well below a linewidth
    assert rep.uncertainties["f_r"] < P_PAPER.f_r / P_PAPER.q_loaded


def test_shallow_dip_flag():
    p = NotchParams(f_r=5.9643e9, q_loaded=2000.0, q_coupling_mag=20000.0,
                    phi=0.0, amp=1.0, phase_offset=0.0, delay=5e-9)
    rep = fit_notch(_trace(p, span_lw=12.0))
    assert "shallow_dip" in rep.flags
    # and the fit is still exact on noiseless data
    assert abs(rep.params.q_loaded - 2000.0) / 2000.0 < 1e-6


def test_low_snr_flag():
    p = NotchParams(f_r=5.9643e9, q_loaded=2253.6, q_coupling_mag=2308.0,
                    phi=0.0, amp=1.0, phase_offset=0.0, delay=0.0)
    rep = fit_notch(_trace(p, sigma=0.12, seed=8, n=3001))
    assert "low_snr" in rep.flags


# --------------------------------------------------------------------------
# Jacobian gradient check
# --------------------------------------------------------------------------

def _internal_model(f, f_mid, span):
    """The refinement parameterization of s21_full used by fit_notch."""
    def model(p):
        tau = p[6] / span
        params = NotchParams(f_r=f_mid + p[0] * span,
                             q_loaded=math.exp(p[1]),
                             q_coupling_mag=math.exp(p[2]), phi=p[3],
                             amp=math.exp(p[4]),
                             phase_offset=p[5] + 2.0 * math.pi * f_mid * tau,
                             delay=tau)
        z = s21_full(f, params)
        return np.concatenate([z.real, z.imag])
    return model


def test_gradient_check_against_central_difference_oracle():
    rng = np.random.default_rng(31)
    f_mid, span = 5.9643e9, 30e6
    f = np.linspace(f_mid - span / 2, f_mid + span / 2, 41)
    model = _internal_model(f, f_mid, span)
    for _ in range(10):
        ln_ql = math.log(10 ** rng.uniform(3, 5))
        ln_qc = ln_ql - math.log(rng.uniform(0.1, 0.9))  # |Qc| = Ql/depth
        p = np.array([rng.uniform(-0.2, 0.2), ln_ql, ln_qc,
                      rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3),
                      rng.uniform(-2, 2), rng.uniform(0.0, 3.0)])
        jac = numeric_jacobian(model, p)
        # oracle: independent central differences at a different step size
        oracle = np.empty_like(jac)
        for i in range(p.size):
            h = 1e-6 * max(abs(p[i]), 1.0)
            plus, minus = p.copy(), p.copy()
            plus[i] += h
            minus[i] -= h
            oracle[:, i] = (model(plus) - model(minus)) / (2.0 * h)
        scale = np.abs(oracle).max(axis=0)
        assert np.all(np.abs(jac - oracle).max(axis=0) <= 1e-5 * scale)


# --------------------------------------------------------------------------
# estimator statistics
# --------------------------------------------------------------------------

def test_dispersion_scales_with_point_count():
    sizes = (201, 801, 3201)
    stds = []
    for n in sizes:
        errs = []
        for seed in range(40):
            rep = fit_notch(_trace(P_PAPER, n=n, sigma=0.01, seed=seed))
            errs.append(rep.params.f_r - P_PAPER.f_r)
        stds.append(np.std(errs))
    for i, j in ((0, 1), (1, 2), (0, 2)):
        expected = math.sqrt(sizes[j] / sizes[i])
        ratio = stds[i] / stds[j]
        assert expected / 2.0 < ratio < expected * 2.0


def test_uncertainty_coverage():
    # nominal 68% one-sigma coverage lands in [58%, 78%] over 500 fits
    hits = {"f_r": 0, "q_loaded": 0, "q_coupling_mag": 0}
    n_runs = 500
    for seed in range(n_runs):
        rep = fit_notch(_trace(P_PAPER, n=801, sigma=0.01, seed=seed))
        for name in hits:
            err = abs(getattr(rep.params, name) - getattr(P_PAPER, name))
            if err <= rep.uncertainties[name]:
                hits[name] += 1
    for name, count in hits.items():
        assert 0.58 <= count / n_runs <= 0.78, (name, count / n_runs)
