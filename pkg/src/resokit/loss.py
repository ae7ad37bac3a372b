"""Loss and frequency-shift physics for superconducting CPW resonators.

Covers the saturable two-level-system (TLS) loss, thermal quasiparticle loss,
a phenomenological quadratic in-plane-field loss, the matching TLS/quasiparticle
frequency shifts, thin-film vortex threshold fields, electron-diffusion
inversion of the parabolic field response, and the regression drivers that fit
these models to sweep curves.

Sign conventions: losses are dimensionless inverse quality factors (>= 0);
frequency shifts are in Hz, negative for red shifts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constants as const
from .errors import DomainError, UnphysicalValueError
from .numerics import FitResult, digamma_half_line, least_squares_fit

__all__ = [
    "TlsParams",
    "QpParams",
    "FieldParams",
    "LossBudget",
    "JumpEvent",
    "TlsFitResult",
    "FreqShiftFitResult",
    "FieldFitResult",
    "tls_loss",
    "qp_loss",
    "field_loss",
    "total_loss",
    "fit_tls",
    "tls_freq_shift",
    "qp_freq_shift",
    "total_freq_shift",
    "field_freq_shift",
    "diffusion_from_k",
    "k_from_diffusion",
    "vortex_thresholds",
    "detect_jumps",
    "fit_freq_shift",
    "fit_field_shift",
]

DEFAULT_TC_K = 12.0  # NbN film critical temperature; a configuration input,
                     # every quantity derived from it inherits its uncertainty


def bcs_gap(t_c: float) -> float:
    """Weak-coupling BCS gap estimate Delta = 1.76 k_B T_c, in joules."""
    if t_c <= 0.0:
        raise DomainError("t_c must be positive")
    return 1.76 * const.k_B * t_c


@dataclass(frozen=True)
class TlsParams:
    """Saturable TLS loss parameters: zero-power Q, critical photon number,
    saturation exponent."""

    q_tls0: float
    n_c: float
    beta: float

    def __post_init__(self):
        if not (self.q_tls0 > 0 and self.n_c > 0 and self.beta > 0):
            raise DomainError("q_tls0, n_c and beta must be positive")


@dataclass(frozen=True)
class QpParams:
    """Quasiparticle loss parameters.

    gap_joules defaults to the BCS estimate 1.76 k_B t_c; alpha_kinetic is the
    kinetic-inductance fraction from the CPW design module.
    """

    t_c: float = DEFAULT_TC_K
    alpha_kinetic: float = 0.1
    gap_joules: float | None = None

    def __post_init__(self):
        if self.t_c <= 0.0:
            raise DomainError("t_c must be positive")
        if not 0.0 <= self.alpha_kinetic < 1.0:
            raise DomainError("alpha_kinetic must be in [0, 1)")
        if self.gap_joules is None:
            object.__setattr__(self, "gap_joules", bcs_gap(self.t_c))
        elif self.gap_joules <= 0.0:
            raise DomainError("gap_joules must be positive")


@dataclass(frozen=True)
class FieldParams:
    """In-plane-field response: parabolic coefficient, film thickness,
    electron diffusion constant, critical temperature."""

    k_quad: float     # 1/T^2
    thickness: float  # m
    diffusion: float  # m^2/s
    t_c: float = DEFAULT_TC_K

    def __post_init__(self):
        if min(self.k_quad, self.thickness, self.diffusion, self.t_c) <= 0.0:
            raise DomainError("all FieldParams fields must be positive")


@dataclass(frozen=True)
class LossBudget:
    """Additive loss budget; total is exactly the sum of the four parts."""

    delta_tls: float
    delta_qp: float
    delta_field: float
    delta_const: float
    total: float

    def __post_init__(self):
        for name in ("delta_tls", "delta_qp", "delta_field", "delta_const"):
            if getattr(self, name) < 0.0:
                raise UnphysicalValueError(f"{name} must be >= 0")
        expected = (self.delta_tls + self.delta_qp + self.delta_field
                    + self.delta_const)
        if self.total != expected:
            raise DomainError("total must equal the exact sum of components")

    @property
    def q_i(self) -> float:
        return 1.0 / self.total


# --------------------------------------------------------------------------
# loss models
# --------------------------------------------------------------------------

def tls_loss(temperature: float, n_ph: float, f_r: float, p: TlsParams) -> float:
    """Power- and temperature-dependent TLS loss.

    delta = (1/Q_tls0) tanh(h f_r / 2 k_B T) / (1 + n_ph/n_c)^beta
    """
    if temperature <= 0.0:
        raise DomainError("temperature must be positive")
    if n_ph < 0.0:
        raise DomainError("n_ph must be >= 0")
    thermal = math.tanh(const.h * f_r / (2.0 * const.k_B * temperature))
    saturation = (1.0 + n_ph / p.n_c) ** p.beta
    return thermal / (p.q_tls0 * saturation)


def qp_loss(temperature: float, f_r: float, p: QpParams) -> float:
    """Thermal quasiparticle loss.

    1/Q_qp = (alpha/pi) sqrt(2 Delta / hbar omega) n_qp/(D(E_F) Delta) with the
    thermal density n_qp = 2 D(E_F) sqrt(2 pi k_B T Delta) exp(-Delta/k_B T).
    The Fermi-level density of states cancels and is not an input.
    """
    if temperature <= 0.0:
        raise DomainError("temperature must be positive")
    gap = p.gap_joules
    kt = const.k_B * temperature
    omega = 2.0 * math.pi * f_r
    density_ratio = 2.0 * math.sqrt(2.0 * math.pi * kt * gap) * math.exp(-gap / kt) / gap
    return (p.alpha_kinetic / math.pi) * math.sqrt(2.0 * gap / (const.hbar * omega)) * density_ratio


def field_loss(b_parallel: float, c_quad: float) -> float:
    """Phenomenological field loss delta_B = c_quad * B^2 (zero at B = 0).

    The microscopic vortex loss has no closed form here; this quadratic is an
    artifact model whose coefficient comes from fitting Q_i(B) data.
    """
    if c_quad < 0.0:
        raise DomainError("c_quad must be >= 0")
    return c_quad * b_parallel * b_parallel


def total_loss(delta_tls: float, delta_qp: float, delta_field: float,
               delta_const: float) -> LossBudget:
    """Assemble the additive budget delta = delta_TLS + delta_qp + delta_B + delta_0."""
    return LossBudget(delta_tls=delta_tls, delta_qp=delta_qp,
                      delta_field=delta_field, delta_const=delta_const,
                      total=delta_tls + delta_qp + delta_field + delta_const)


# --------------------------------------------------------------------------
# frequency-shift models
# --------------------------------------------------------------------------

def tls_freq_shift(temperature: float, f_r: float, q_tls0: float) -> float:
    """TLS frequency shift in Hz.

    (f_r / pi Q_tls0) [Re psi(1/2 + i xi) - ln xi] with xi = h f_r/(2 pi k_B T).
    The printed bracket is dimensionless; the overall factor f_r makes the
    result a frequency (standard TLS shift convention).  Positive (blue) at
    high temperature, -> 0 as T -> 0.
    """
    if temperature <= 0.0:
        raise DomainError("temperature must be positive")
    if q_tls0 <= 0.0:
        raise DomainError("q_tls0 must be positive")
    xi = const.h * f_r / (2.0 * math.pi * const.k_B * temperature)
    return f_r / (math.pi * q_tls0) * (digamma_half_line(xi) - math.log(xi))


def _x_over_sinh(x: float) -> float:
    """x/sinh(x), overflow-safe for large x."""
    if x > 30.0:
        return 2.0 * x * math.exp(-x)
    if x == 0.0:
        return 1.0
    return x / math.sinh(x)


def qp_freq_shift(temperature: float, f_r: float, p: QpParams) -> float:
    """Quasiparticle red shift in Hz: -(1/2) alpha f_r (Delta/k_B T)/sinh(Delta/k_B T)."""
    if temperature <= 0.0:
        raise DomainError("temperature must be positive")
    x = p.gap_joules / (const.k_B * temperature)
    return -0.5 * p.alpha_kinetic * f_r * _x_over_sinh(x)


def total_freq_shift(temperature: float, f_r: float, tls: TlsParams,
                     qp: QpParams) -> float:
    """Total shift, TLS plus quasiparticle."""
    return (tls_freq_shift(temperature, f_r, tls.q_tls0)
            + qp_freq_shift(temperature, f_r, qp))


def field_freq_shift(b_parallel: float, f_r0: float, k_quad: float) -> float:
    """Parabolic field shift in Hz: -k B^2 f_r0 (even in B, zero at B = 0)."""
    return -k_quad * b_parallel * b_parallel * f_r0


# --------------------------------------------------------------------------
# vortex thresholds and diffusion constant
# --------------------------------------------------------------------------

def vortex_thresholds(thickness: float) -> tuple[float, float]:
    """Thin-film vortex field scales in tesla.

    B_a = pi phi_0 / (4 t^2) below which vortices feel a net expulsion force,
    B_c1 = 1.65 phi_0 / t^2 above which film edges are no longer vortex free.
    """
    if thickness <= 0.0:
        raise DomainError("thickness must be positive")
    t2 = thickness * thickness
    return math.pi * const.phi_0 / (4.0 * t2), 1.65 * const.phi_0 / t2


def k_from_diffusion(diffusion: float, thickness: float, t_c: float) -> float:
    """Parabolic coefficient k = (pi/48) t^2 e^2 D / (hbar k_B T_c), 1/T^2."""
    if min(diffusion, thickness, t_c) <= 0.0:
        raise DomainError("diffusion, thickness and t_c must be positive")
    return (math.pi / 48.0) * thickness ** 2 * const.e_charge ** 2 * diffusion / (
        const.hbar * const.k_B * t_c)


def diffusion_from_k(k_quad: float, thickness: float, t_c: float) -> float:
    """Electron diffusion constant in m^2/s, exact inverse of k_from_diffusion."""
    if min(k_quad, thickness, t_c) <= 0.0:
        raise DomainError("k_quad, thickness and t_c must be positive")
    return 48.0 * k_quad * const.hbar * const.k_B * t_c / (
        math.pi * thickness ** 2 * const.e_charge ** 2)


# --------------------------------------------------------------------------
# jump detection
# --------------------------------------------------------------------------

JUMP_FLOOR_HZ = 1e4
JUMP_MEDIAN_FACTOR = 5.0


@dataclass(frozen=True)
class JumpEvent:
    b_field: float   # midpoint of the step interval, same unit as the sweep
    delta_f: float   # signed frequency jump, Hz


def detect_jumps(sweep) -> list[JumpEvent]:
    """Flag resonance-frequency jumps in an ordered (b_field, f_r) sweep.

    A step counts as a jump when |f_{i+1} - f_i| exceeds
    max(5 x median absolute successive difference, 10 kHz).  Purely
    phenomenological; returns an empty list for smooth or constant sweeps.
    """
    data = np.asarray(sweep, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 4:
        raise DomainError("detect_jumps needs >= 4 (b_field, f_r) pairs")
    b, f = data[:, 0], data[:, 1]
    db = np.diff(b)
    if not (np.all(db > 0.0) or np.all(db < 0.0)):
        raise DomainError("b_field values must be strictly monotone")
    df = np.diff(f)
    threshold = max(JUMP_MEDIAN_FACTOR * float(np.median(np.abs(df))), JUMP_FLOOR_HZ)
    events = []
    for i in np.nonzero(np.abs(df) > threshold)[0]:
        events.append(JumpEvent(b_field=float(0.5 * (b[i] + b[i + 1])),
                                delta_f=float(df[i])))
    return events


# --------------------------------------------------------------------------
# regression drivers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TlsFitResult:
    params: TlsParams
    delta_const: float
    uncertainties: dict[str, float]
    converged: bool
    beta_at_boundary: bool
    fit: FitResult = field(repr=False, default=None)


def fit_tls(curve, f_r: float, temperature: float) -> TlsFitResult:
    """Fit the TLS power law plus a constant loss to a (n_ph, q_i) curve.

    Works on log residuals, ln(model loss) - ln(1/q_i), which weights the
    decades of a power sweep evenly.  beta is kept in (0, 1] by the bounded
    fit; hitting the upper boundary raises a warning and sets the flag.
    """
    data = np.asarray(curve, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 6:
        raise DomainError("fit_tls needs >= 6 (n_ph, q_i) points")
    n_ph, q_i = data[:, 0], data[:, 1]
    if np.any(n_ph <= 0.0) or np.any(q_i <= 0.0):
        raise DomainError("n_ph and q_i must be positive")
    if n_ph.max() / n_ph.min() < 100.0:
        raise DomainError("fit_tls needs n_ph coverage of at least two decades")

    loss = 1.0 / q_i
    thermal = math.tanh(const.h * f_r / (2.0 * const.k_B * temperature))

    delta0_guess = float(loss.min())
    tls0_guess = max(float(loss.max()) - delta0_guess, 0.1 * delta0_guess)
    nc_guess = float(np.exp(np.median(np.log(n_ph))))

    def residuals(p: np.ndarray) -> np.ndarray:
        inv_q0, nc, beta, delta0 = np.exp(p[0]), np.exp(p[1]), p[2], np.exp(p[3])
        model = inv_q0 * thermal / (1.0 + n_ph / nc) ** beta + delta0
        return np.log(model) - np.log(loss)

    fit = least_squares_fit(
        residuals,
        [math.log(tls0_guess), math.log(nc_guess), 0.3, math.log(delta0_guess)],
        bounds=[None, None, (1e-6, 1.0), None],
        max_iterations=300)

    inv_q0, nc, beta, delta0 = (math.exp(fit.params[0]), math.exp(fit.params[1]),
                                float(fit.params[2]), math.exp(fit.params[3]))
    q_tls0 = 1.0 / inv_q0
    at_boundary = beta > 1.0 - 1e-6 or beta < 1e-5
    if at_boundary:
        warnings.warn("fit_tls: beta pinned at its (0, 1] boundary", stacklevel=2)

    sig = np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None))
    uncertainties = {
        "q_tls0": q_tls0 * float(sig[0]),
        "n_c": nc * float(sig[1]),
        "beta": float(sig[2]),
        "delta_const": delta0 * float(sig[3]),
    }
    return TlsFitResult(params=TlsParams(q_tls0=q_tls0, n_c=nc, beta=beta),
                        delta_const=delta0, uncertainties=uncertainties,
                        converged=fit.converged, beta_at_boundary=at_boundary,
                        fit=fit)


@dataclass(frozen=True)
class FreqShiftFitResult:
    f_r0: float
    q_tls0: float
    alpha_kinetic: float
    uncertainties: dict[str, float]
    converged: bool


def fit_freq_shift(temperatures, f_r_values, qp_defaults: QpParams) -> FreqShiftFitResult:
    """Fit f_r(T) with the combined TLS + quasiparticle shift model.

    Free parameters: the zero-temperature resonance f_r0, the TLS scale
    Q_tls0 and the kinetic fraction alpha.  The gap is taken from
    qp_defaults (i.e. from t_c), which dominates the systematic uncertainty.
    """
    t = np.asarray(temperatures, dtype=float)
    f_meas = np.asarray(f_r_values, dtype=float)
    if t.size != f_meas.size or t.size < 4:
        raise DomainError("fit_freq_shift needs >= 4 (T, f_r) samples")
    if np.any(t <= 0.0):
        raise DomainError("temperatures must be positive")
    f_scale = float(np.median(f_meas))

    def residuals(p: np.ndarray) -> np.ndarray:
        f_r0 = p[0] * f_scale
        q0 = math.exp(p[1])
        alpha = math.exp(p[2])
        qp = QpParams(t_c=qp_defaults.t_c, alpha_kinetic=min(alpha, 1.0 - 1e-9),
                      gap_joules=qp_defaults.gap_joules)
        model = np.array([f_r0 + tls_freq_shift(tk, f_r0, q0)
                          + qp_freq_shift(tk, f_r0, qp) for tk in t])
        return (model - f_meas) / f_scale

    alpha0 = max(qp_defaults.alpha_kinetic, 1e-3)
    fit = least_squares_fit(residuals,
                            [float(f_meas.max()) / f_scale, math.log(1e5),
                             math.log(alpha0)],
                            max_iterations=300)
    f_r0 = fit.params[0] * f_scale
    q0 = math.exp(fit.params[1])
    alpha = math.exp(fit.params[2])
    sig = np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None))
    return FreqShiftFitResult(
        f_r0=f_r0, q_tls0=q0, alpha_kinetic=alpha,
        uncertainties={"f_r0": f_scale * float(sig[0]),
                       "q_tls0": q0 * float(sig[1]),
                       "alpha_kinetic": alpha * float(sig[2])},
        converged=fit.converged)


@dataclass(frozen=True)
class FieldFitResult:
    f_r0: float
    k_quad: float
    uncertainties: dict[str, float]
    converged: bool


def fit_field_shift(b_fields, f_r_values) -> FieldFitResult:
    """Fit f_r(B) = f_r0 (1 - k B^2) to an in-plane field sweep."""
    b = np.asarray(b_fields, dtype=float)
    f_meas = np.asarray(f_r_values, dtype=float)
    if b.size != f_meas.size or b.size < 3:
        raise DomainError("fit_field_shift needs >= 3 (B, f_r) samples")
    f_scale = float(np.median(f_meas))
    b2_scale = float(max(np.max(np.abs(b)) ** 2, 1e-12))

    def residuals(p: np.ndarray) -> np.ndarray:
        f_r0 = p[0] * f_scale
        k = p[1] / b2_scale
        return (f_r0 * (1.0 - k * b * b) - f_meas) / f_scale

    fit = least_squares_fit(residuals, [float(f_meas.max()) / f_scale, 0.01],
                            max_iterations=200)
    f_r0 = fit.params[0] * f_scale
    k = fit.params[1] / b2_scale
    sig = np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None))
    return FieldFitResult(
        f_r0=f_r0, k_quad=k,
        uncertainties={"f_r0": f_scale * float(sig[0]),
                       "k_quad": float(sig[1]) / b2_scale},
        converged=fit.converged)
