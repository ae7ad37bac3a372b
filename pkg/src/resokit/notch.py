"""Forward model of a notch-type resonator on a feedline.

S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2i Ql (f/fr - 1))]

plus trace synthesis with additive complex Gaussian noise and the
power-to-photon-number calibration through the cryostat attenuation chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as const
from .errors import DomainError, UnphysicalValueError

__all__ = [
    "NotchParams",
    "TraceMeta",
    "S21Trace",
    "AttenuationStage",
    "AttenuationChain",
    "s21_ideal",
    "s21_full",
    "synthesize_trace",
    "chip_input_power",
    "photon_number",
]


@dataclass(frozen=True)
class NotchParams:
    """The seven notch-model parameters.

    phi is the impedance-mismatch rotation of the resonance circle; amp,
    phase_offset and delay describe the environment (cable damping, cable
    phase, electrical delay).
    """

    f_r: float            # resonance frequency, Hz
    q_loaded: float       # loaded quality factor
    q_coupling_mag: float  # |Qc|
    phi: float = 0.0      # impedance mismatch angle, rad
    amp: float = 1.0      # environmental amplitude a
    phase_offset: float = 0.0  # environmental phase alpha, rad
    delay: float = 0.0    # electrical delay tau, s

    def __post_init__(self):
        if not (self.f_r > 0 and self.q_loaded > 0 and
                self.q_coupling_mag > 0 and self.amp > 0):
            raise DomainError("f_r, q_loaded, q_coupling_mag and amp must be positive")
        if 1.0 / self.q_loaded < math.cos(self.phi) / self.q_coupling_mag - 1e-12 / self.q_loaded:
            raise UnphysicalValueError(
                "1/q_loaded < cos(phi)/q_coupling_mag implies a negative internal loss")


@dataclass(frozen=True)
class TraceMeta:
    vna_power_dbm: float = 0.0
    temperature_k: float = 0.0
    field_mt: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.temperature_k < 0.0:
            raise DomainError("temperature_k must be >= 0")


@dataclass(frozen=True)
class S21Trace:
    """Complex transmission samples on a strictly increasing frequency grid."""

    freqs: np.ndarray
    values: np.ndarray
    meta: TraceMeta = field(default_factory=TraceMeta)

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freqs.ndim != 1 or values.shape != freqs.shape:
            raise DomainError("freqs and values must be 1-D arrays of equal length")
        if freqs.size < 2 or np.any(np.diff(freqs) <= 0.0):
            raise DomainError("freqs must be strictly increasing")
        freqs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.freqs.size)

    @property
    def span(self) -> float:
        return float(self.freqs[-1] - self.freqs[0])


@dataclass(frozen=True)
class AttenuationStage:
    label: str
    attenuation_db: float

    def __post_init__(self):
        if self.attenuation_db < 0.0:
            raise DomainError("attenuation_db must be >= 0")


@dataclass(frozen=True)
class AttenuationChain:
    """Input-line attenuator cascade between the VNA and the chip."""

    stages: tuple[AttenuationStage, ...] = ()

    @property
    def total_db(self) -> float:
        return float(sum(s.attenuation_db for s in self.stages))

    @staticmethod
    def from_db_list(values, labels=None) -> "AttenuationChain":
        labels = labels or [f"stage{i}" for i in range(len(values))]
        return AttenuationChain(tuple(
            AttenuationStage(label=l, attenuation_db=float(v))
            for l, v in zip(labels, values)))


def _s21(f, f_r, q_loaded, q_coupling_mag, phi, amp, phase_offset, delay):
    """Model formula on raw values; the single source for both public forms
    and for fit residuals, which must evaluate transiently unphysical trials."""
    d = q_loaded / q_coupling_mag
    ideal = 1.0 - d * np.exp(1j * phi) / (1.0 + 2j * q_loaded * (f / f_r - 1.0))
    env = amp * np.exp(1j * (phase_offset - 2.0 * np.pi * f * delay))
    return env * ideal


def s21_ideal(f, p: NotchParams):
    """Ideal notch response; 1 far off resonance, 1 - (Ql/|Qc|)e^{i phi} at f_r."""
    f = np.asarray(f, dtype=float)
    out = _s21(f, p.f_r, p.q_loaded, p.q_coupling_mag, p.phi, 1.0, 0.0, 0.0)
    return out if out.ndim else complex(out)


def s21_full(f, p: NotchParams):
    """Notch response including the environmental factor a e^{i alpha} e^{-2 pi i f tau}."""
    f = np.asarray(f, dtype=float)
    out = _s21(f, p.f_r, p.q_loaded, p.q_coupling_mag, p.phi, p.amp,
               p.phase_offset, p.delay)
    return out if out.ndim else complex(out)


def synthesize_trace(p: NotchParams, f_start: float, f_stop: float,
                     n_points: int, noise_sigma: float = 0.0,
                     seed: int = 0, meta: TraceMeta | None = None) -> S21Trace:
    """Evaluate the model on a uniform grid and add complex Gaussian noise.

    Noise is independent per quadrature with standard deviation noise_sigma;
    the trace is deterministic for a given seed.
    """
    if not f_start < f_stop:
        raise DomainError("f_start must be below f_stop")
    if n_points < 16:
        raise DomainError("n_points must be >= 16")
    if noise_sigma < 0.0:
        raise DomainError("noise_sigma must be >= 0")
    freqs = np.linspace(f_start, f_stop, n_points)
    values = np.asarray(s21_full(freqs, p), dtype=complex)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, noise_sigma, size=(2, n_points))
        values = values + noise[0] + 1j * noise[1]
    return S21Trace(freqs=freqs, values=values, meta=meta or TraceMeta())


def chip_input_power(vna_power_dbm: float, chain: AttenuationChain) -> float:
    """Power reaching the chip in watts: 10^((P_dBm - total_dB - 30)/10)."""
    return 10.0 ** ((vna_power_dbm - chain.total_db - 30.0) / 10.0)


def photon_number(p_in: float, f_r: float, q_i: float, q_c: float,
                  q_l: float) -> float:
    """Mean intra-resonator photon number for a notch resonator.

    <n> = Q_i * P_in/(hbar omega0^2) * 2 Q_l (Q_c - Q_l)/Q_c^2, omega0 = 2 pi f_r.
    """
    if min(p_in, f_r, q_i, q_c, q_l) <= 0.0:
        if p_in == 0.0:
            return 0.0
        raise DomainError("photon_number arguments must be positive")
    if q_l > q_c * (1.0 + 1e-12):
        raise UnphysicalValueError("q_l > q_c is unphysical for a notch resonator")
    omega0 = 2.0 * math.pi * f_r
    coupling = 2.0 * q_l * (q_c - q_l) / (q_c * q_c)
    return q_i * p_in / (const.hbar * omega0 * omega0) * coupling
