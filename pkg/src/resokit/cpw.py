"""CPW transmission-line design: geometry to line parameters and back.

Conformal-mapping formulas for a coplanar waveguide on a single dielectric of
finite thickness.  All lengths in meters, inductances in H/m, capacitances in
F/m, frequencies in Hz.  The elliptic integrals take the modulus k, not the
parameter m = k^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import constants as const
from .errors import DomainError, UnphysicalValueError
from .numerics import elliptic_k

__all__ = [
    "CpwGeometry",
    "LineParams",
    "line_params_from_geometry",
    "resonance_frequency",
    "invert_kinetic_inductance",
]

MODES = ("quarter_wave", "half_wave")


@dataclass(frozen=True)
class CpwGeometry:
    """Cross-section and length of a CPW resonator.

    width: center conductor width w; gap: slot s to each ground plane;
    film_thickness: metal thickness t (recorded, no thickness correction is
    applied to the mapping since t << w for the films this targets).
    """

    width: float
    gap: float
    film_thickness: float
    substrate_epsilon_r: float
    substrate_thickness: float
    resonator_length: float
    mode: str = "quarter_wave"

    def __post_init__(self):
        for name in ("width", "gap", "film_thickness", "substrate_thickness",
                     "resonator_length"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        if self.substrate_epsilon_r < 1.0:
            raise DomainError("substrate_epsilon_r must be >= 1")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class LineParams:
    """Per-unit-length transmission-line parameters and the derived scalars."""

    l_geo: float       # geometric inductance, H/m
    c_geo: float       # geometric capacitance, F/m
    l_kin: float       # kinetic inductance, H/m
    impedance: float   # sqrt((l_geo + l_kin)/c_geo), ohm
    phase_velocity: float  # 1/sqrt(c_geo (l_geo + l_kin)), m/s
    alpha_kinetic: float   # l_kin / (l_kin + l_geo)


def _sinh_ratio(a: float, b: float) -> float:
    """sinh(a)/sinh(b) for 0 < a < b, safe against overflow for large args."""
    if b > 30.0:
        # sinh(x) ~ e^x / 2; the correction factors are < 1e-26 at x > 30
        return math.exp(a - b)
    return math.sinh(a) / math.sinh(b)


def line_params_from_geometry(geom: CpwGeometry, l_kin: float) -> LineParams:
    """Map a CPW cross section plus kinetic inductance to line parameters.

    k0 = w/(w+2s) sets the geometric inductance (mu0/4) K(k0')/K(k0); the
    finite substrate enters through the filling factor
    q = (1/2) [K(k1)/K(k1')] [K(k0')/K(k0)] with
    k1 = sinh(pi w/4h)/sinh(pi (w+2s)/4h), giving eps_eff = 1 + q (eps_r - 1).
    For h -> infinity this reduces to eps_eff = (eps_r + 1)/2.
    """
    if l_kin < 0.0:
        raise DomainError("kinetic inductance must be >= 0")
    w, s, h = geom.width, geom.gap, geom.substrate_thickness
    k0 = w / (w + 2.0 * s)
    k0p = math.sqrt(1.0 - k0 * k0)
    ratio0 = elliptic_k(k0) / elliptic_k(k0p)

    l_geo = (const.mu_0 / 4.0) / ratio0

    k1 = _sinh_ratio(math.pi * w / (4.0 * h), math.pi * (w + 2.0 * s) / (4.0 * h))
    k1p = math.sqrt(1.0 - k1 * k1)
    q = 0.5 * (elliptic_k(k1) / elliptic_k(k1p)) / ratio0
    eps_eff = 1.0 + q * (geom.substrate_epsilon_r - 1.0)
    c_geo = 4.0 * const.eps_0 * eps_eff * ratio0

    l_tot = l_geo + l_kin
    return LineParams(
        l_geo=l_geo,
        c_geo=c_geo,
        l_kin=l_kin,
        impedance=math.sqrt(l_tot / c_geo),
        phase_velocity=1.0 / math.sqrt(c_geo * l_tot),
        alpha_kinetic=l_kin / l_tot,
    )


def resonance_frequency(params: LineParams, length: float, n: int = 1,
                        mode: str = "quarter_wave") -> float:
    """Resonance frequency of mode n for the given line and length.

    quarter_wave resonators carry odd harmonics, f_n = v_ph (2n-1)/(4l);
    half_wave carry all, f_n = v_ph n/(2l).  n = 1 is the fundamental.
    """
    if n < 1:
        raise DomainError("mode index n must be >= 1")
    if length <= 0.0:
        raise DomainError("length must be positive")
    if mode == "quarter_wave":
        return params.phase_velocity * (2 * n - 1) / (4.0 * length)
    if mode == "half_wave":
        return params.phase_velocity * n / (2.0 * length)
    raise DomainError(f"mode must be one of {MODES}")


def invert_kinetic_inductance(f_measured: float, geom: CpwGeometry,
                              n: int = 1, mode: str | None = None) -> float:
    """Solve a measured resonance frequency for the kinetic inductance.

    Closed form: the mode formula gives the target phase velocity, and
    L_k = 1/(v^2 c_geo) - l_geo.  Raises UnphysicalValueError when f_measured
    exceeds the L_k = 0 frequency (the geometry cannot be that fast).
    """
    if f_measured <= 0.0:
        raise DomainError("measured frequency must be positive")
    mode = geom.mode if mode is None else mode
    if n < 1:
        raise DomainError("mode index n must be >= 1")
    length = geom.resonator_length
    if mode == "quarter_wave":
        v_target = 4.0 * length * f_measured / (2 * n - 1)
    elif mode == "half_wave":
        v_target = 2.0 * length * f_measured / n
    else:
        raise DomainError(f"mode must be one of {MODES}")
    base = line_params_from_geometry(geom, 0.0)
    l_kin = 1.0 / (v_target * v_target * base.c_geo) - base.l_geo
    if l_kin < 0.0:
        f_max = resonance_frequency(base, length, n, mode)
        raise UnphysicalValueError(
            f"f_measured = {f_measured:.6g} Hz exceeds the L_k = 0 frequency "
            f"{f_max:.6g} Hz for this geometry")
    return l_kin
