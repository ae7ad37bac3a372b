"""Extraction of notch-resonator parameters from measured S21 traces.

Pipeline: estimate and remove the electrical delay, fit the resonance circle,
fit the phase of the centered data for (f_r, Q_l), recover the environment
(a, alpha) and the mismatch angle phi from the off-resonant point, then refine
all seven parameters against the raw complex data and derive Q_i.

The refinement runs on internally rescaled parameters (frequency offsets in
units of the span, Q's in log space, delay in units of 1/f) so the numerically
differenced Jacobian is well conditioned regardless of the physical scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateDataError, NoResonanceError,
                     SingularJacobianError, UnphysicalValueError)
from .notch import NotchParams, S21Trace, _s21
from .numerics import Circle2D, _taubin_svd, circle_fit, least_squares_fit

__all__ = ["FitReport", "estimate_delay", "fit_notch", "extract_qi"]

# FitReport.flags values
FLAG_LOW_SNR = "low_snr"
FLAG_DELAY_UNCERTAIN = "delay_uncertain"
FLAG_SHALLOW_DIP = "shallow_dip"
FLAG_NO_CONVERGENCE = "no_convergence"

DIP_THRESHOLD_DB = 0.5       # minimum dip depth below the median to accept a fit
SHALLOW_DIP_DB = 3.0         # below this the fit is accepted but flagged
MIN_SPAN_LINEWIDTHS = 4.0    # narrower spans get the delay_uncertain flag
LOW_SNR_RADIUS_RATIO = 5.0   # circle radius / per-quadrature noise


@dataclass(frozen=True)
class FitReport:
    """Notch fit outcome with the derived internal quality factor.

    uncertainties holds one-sigma values keyed like NotchParams fields plus
    "q_internal"; it is empty (all zero) when the refinement covariance was
    unavailable.
    """

    params: NotchParams
    q_internal: float
    uncertainties: dict[str, float]
    rms_residual: float
    n_points: int
    flags: frozenset[str] = field(default_factory=frozenset)


def extract_qi(q_loaded: float, q_coupling_mag: float, phi: float) -> float:
    """Diameter-corrected internal quality factor.

    Q_i = 1/(1/Q_l - cos(phi)/|Q_c|).  Raises UnphysicalValueError when the
    loaded Q exceeds the coupling limit (over-coupled mis-fit).
    """
    inv = 1.0 / q_loaded - math.cos(phi) / q_coupling_mag
    if inv <= 0.0:
        raise UnphysicalValueError(
            f"1/Q_l - cos(phi)/|Q_c| = {inv:.3e} <= 0: no physical Q_i")
    return 1.0 / inv


# --------------------------------------------------------------------------
# dip and linewidth bookkeeping
# --------------------------------------------------------------------------

def _smooth(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return values
    kernel = np.ones(width) / width
    pad = width // 2
    padded = np.concatenate([np.full(pad, values[0]), values, np.full(pad, values[-1])])
    return np.convolve(padded, kernel, mode="valid")[: values.size]


def _dip_info(trace: S21Trace) -> tuple[int, float, float]:
    """Dip index, depth below the median in dB, and FWHM-based linewidth in Hz."""
    mag = np.abs(trace.values)
    mag = np.where(mag > 0.0, mag, 1e-300)
    smooth_w = max(3, len(trace) // 200)
    power = _smooth(mag * mag, smooth_w)
    i_dip = int(np.argmin(power))
    mag_db = 20.0 * np.log10(mag)
    depth_db = float(np.median(mag_db) - mag_db[i_dip])

    baseline = float(np.median(power))
    dip = float(power[i_dip])
    half = 0.5 * (baseline + dip)
    left = i_dip
    while left > 0 and power[left] < half:
        left -= 1
    right = i_dip
    while right < power.size - 1 and power[right] < half:
        right += 1
    linewidth = float(trace.freqs[right] - trace.freqs[left])
    if linewidth <= 0.0:
        linewidth = trace.span / len(trace)
    return i_dip, depth_db, linewidth


# --------------------------------------------------------------------------
# delay estimation
# --------------------------------------------------------------------------

def _edge_slope(freqs: np.ndarray, values: np.ndarray) -> float:
    phase = np.unwrap(np.angle(values))
    return float(np.polyfit(freqs, phase, 1)[0])


def _circle_residual_for_tau(trace: S21Trace, tau: float) -> float:
    z = trace.values * np.exp(2j * np.pi * trace.freqs * tau)
    x, y = z.real, z.imag
    scale = max(float(np.abs(x - x.mean()).max()), float(np.abs(y - y.mean()).max()), 1e-300)
    try:
        cx, cy, r = _taubin_svd(x / scale, y / scale)
    except DegenerateDataError:
        return np.inf
    d = np.hypot(x / scale - cx, y / scale - cy) - r
    return float(np.sqrt(np.mean(d * d)))


def _golden_min(fn, lo: float, hi: float, max_iter: int = 60) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        if (b - a) <= 1e-7 * (hi - lo):
            break
    return 0.5 * (a + b)


def _estimate_delay(trace: S21Trace) -> tuple[float, bool]:
    """Delay in seconds plus the delay-uncertain diagnostic.

    Straight-line fit to the unwrapped phase over the outer 20% of points on
    each edge, then refinement by minimizing the circle-fit residual over a
    tau bracket of +-2 full phase turns across the span.  The uncertainty
    diagnostic fires when resonance features reach into the edge windows:
    either the span is below MIN_SPAN_LINEWIDTHS estimated linewidths (the
    1/x phase tails then bend the edge windows) or the dip itself sits inside
    one of them.
    """
    n = len(trace)
    window = max(3, n // 5)
    f, z = trace.freqs, trace.values
    slope = 0.5 * (_edge_slope(f[:window], z[:window]) +
                   _edge_slope(f[-window:], z[-window:]))
    tau0 = -slope / (2.0 * np.pi)

    i_dip, _depth, linewidth = _dip_info(trace)
    uncertain = (trace.span < MIN_SPAN_LINEWIDTHS * linewidth
                 or i_dip < window or i_dip >= n - window)

    # The circle-residual objective has its basin of attraction on the scale
    # of one phase turn across the span; scanning +-2/(pi span) around the
    # line-fit estimate keeps the basin resolved for any span/linewidth ratio
    # while still covering the resonance-tail bias of the line fit.
    bracket = 2.0 / (np.pi * trace.span)
    taus = np.linspace(tau0 - bracket, tau0 + bracket, 65)
    costs = [_circle_residual_for_tau(trace, t) for t in taus]
    best = int(np.argmin(costs))
    lo = taus[max(best - 1, 0)]
    hi = taus[min(best + 1, taus.size - 1)]
    tau = _golden_min(lambda t: _circle_residual_for_tau(trace, t), lo, hi)
    return float(tau), uncertain


def estimate_delay(trace: S21Trace) -> float:
    """Electrical delay tau in seconds (see _estimate_delay for the method)."""
    return _estimate_delay(trace)[0]


# --------------------------------------------------------------------------
# notch fit
# --------------------------------------------------------------------------

def _wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    return float(np.pi) if w == -np.pi else float(w)


def _phase_model(f: np.ndarray, theta0: float, q_l: float, f_r: float) -> np.ndarray:
    return theta0 + 2.0 * np.arctan(2.0 * q_l * (1.0 - f / f_r))


def fit_notch(trace: S21Trace) -> FitReport:
    """Fit the full notch model to a trace and derive Q_i.

    Raises NoResonanceError when the deepest dip is less than 3 dB below the
    median magnitude.  Refinement failures are reported through the
    no_convergence flag with the best pre-refinement parameters, never raised.
    """
    f = trace.freqs
    z = trace.values
    n = len(trace)
    f_mid = float(f.mean())
    span = trace.span

    i_dip, depth_db, linewidth = _dip_info(trace)
    if depth_db < DIP_THRESHOLD_DB:
        raise NoResonanceError(
            f"deepest dip is {depth_db:.2f} dB below the median; "
            f"need >= {DIP_THRESHOLD_DB} dB")

    flags: set[str] = set()
    if depth_db < SHALLOW_DIP_DB:
        flags.add(FLAG_SHALLOW_DIP)

    # (1) delay removal
    tau0, delay_uncertain = _estimate_delay(trace)
    if delay_uncertain:
        flags.add(FLAG_DELAY_UNCERTAIN)
    z1 = z * np.exp(2j * np.pi * f * tau0)

    # (2) resonance circle
    circle = circle_fit(np.column_stack([z1.real, z1.imag]))
    center = complex(circle.center_re, circle.center_im)
    radius = circle.radius

    # (3) phase of the centered data -> f_r, Q_l.  Chord residuals on the unit
    # circle sidestep unwrapping entirely.
    z2 = z1 - center
    u = z2 / np.abs(z2)
    fr_guess = float(f[i_dip])
    ql_guess = max(fr_guess / linewidth, 1.0)
    theta0_guess = float(np.angle(z2[i_dip]))

    def phase_residuals(p: np.ndarray) -> np.ndarray:
        f_r = f_mid + p[0] * span
        model = np.exp(1j * _phase_model(f, p[2], np.exp(p[1]), f_r))
        d = u - model
        return np.concatenate([d.real, d.imag])

    phase_fit = least_squares_fit(
        phase_residuals,
        [(fr_guess - f_mid) / span, math.log(ql_guess), theta0_guess],
        max_iterations=100)
    fr1 = f_mid + phase_fit.params[0] * span
    ql1 = math.exp(phase_fit.params[1])
    theta0 = phase_fit.params[2]

    # (4) environment and mismatch from the off-resonant point
    beta = theta0 - np.pi
    off_res = center + radius * np.exp(1j * beta)
    amp1 = abs(off_res)
    alpha1 = float(np.angle(off_res))
    phi1 = _wrap_angle(beta - alpha1)
    qc1 = ql1 * amp1 / (2.0 * radius)

    # (5) full-model refinement of all seven parameters on the raw data.
    # Internal parameterization: [ (f_r - f_mid)/span, ln Ql, ln |Qc|, phi,
    # ln a, mid-band phase, tau*span ].  Splitting the delay phase into its
    # mid-band value and the tilt across the span decorrelates tau from the
    # global phase offset; the physical alpha is mid_phase + 2 pi f_mid tau.
    def full_residuals(p: np.ndarray) -> np.ndarray:
        tau = p[6] / span
        d = _s21(f, f_mid + p[0] * span, math.exp(p[1]), math.exp(p[2]),
                 p[3], math.exp(p[4]), p[5] + 2.0 * np.pi * f_mid * tau, tau) - z
        return np.concatenate([d.real, d.imag])

    start = np.array([
        (fr1 - f_mid) / span,
        math.log(ql1),
        math.log(max(qc1, 1e-12)),
        phi1,
        math.log(max(amp1, 1e-12)),
        _wrap_angle(alpha1 - 2.0 * np.pi * f_mid * tau0),
        tau0 * span,
    ])

    refined = None
    try:
        refined = least_squares_fit(full_residuals, start, max_iterations=200)
        if not refined.converged:
            flags.add(FLAG_NO_CONVERGENCE)
    except SingularJacobianError:
        flags.add(FLAG_NO_CONVERGENCE)

    if refined is not None:
        p = refined.params
        fr, ql, qc = f_mid + p[0] * span, math.exp(p[1]), math.exp(p[2])
        tau = p[6] / span
        phi, amp = _wrap_angle(p[3]), math.exp(p[4])
        alpha = _wrap_angle(p[5] + 2.0 * np.pi * f_mid * tau)
        cov = refined.covariance
        resid = refined.residual_norm
    else:
        fr, ql, qc, phi, amp, alpha, tau = fr1, ql1, qc1, phi1, amp1, alpha1, tau0
        phi, alpha = _wrap_angle(phi), _wrap_angle(alpha)
        cov = np.zeros((7, 7))
        resid = float(np.linalg.norm(full_residuals(start)))

    params = NotchParams(f_r=fr, q_loaded=ql, q_coupling_mag=qc, phi=phi,
                         amp=amp, phase_offset=alpha, delay=tau)
    q_internal = extract_qi(ql, qc, phi)

    # map internal-parameter covariance back to physical one-sigma values
    scale = np.array([span, ql, qc, 1.0, amp, 1.0, 1.0 / span])
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None)) * scale
    # alpha combines the mid-band phase with the tau tilt
    dadt = 2.0 * np.pi * f_mid / span
    var_alpha = cov[5, 5] + dadt * dadt * cov[6, 6] + 2.0 * dadt * cov[5, 6]
    sigmas[5] = math.sqrt(max(var_alpha, 0.0))
    # Q_i error from the (ln Ql, ln Qc, phi) block of u = 1/Ql - cos(phi)/|Qc|
    g = np.array([-1.0 / ql, math.cos(phi) / qc, math.sin(phi) / qc])
    block = cov[np.ix_([1, 2, 3], [1, 2, 3])]
    var_u = float(g @ block @ g)
    qi_sigma = q_internal * q_internal * math.sqrt(max(var_u, 0.0))

    uncertainties = {
        "f_r": float(sigmas[0]),
        "q_loaded": float(sigmas[1]),
        "q_coupling_mag": float(sigmas[2]),
        "phi": float(sigmas[3]),
        "amp": float(sigmas[4]),
        "phase_offset": float(sigmas[5]),
        "delay": float(sigmas[6]),
        "q_internal": qi_sigma,
    }

    rms = resid / math.sqrt(2.0 * n)
    noise_per_quadrature = resid / math.sqrt(max(2.0 * n - 7.0, 1.0))
    if refined is not None and noise_per_quadrature > 0.0:
        if radius / noise_per_quadrature < LOW_SNR_RADIUS_RATIO:
            flags.add(FLAG_LOW_SNR)

    return FitReport(params=params, q_internal=q_internal,
                     uncertainties=uncertainties, rms_residual=rms,
                     n_points=n, flags=frozenset(flags))
