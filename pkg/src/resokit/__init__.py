"""resokit: superconducting CPW resonator design and S21 characterization.

Forward synthesis of notch-type S21 traces, inverse fitting of resonance
parameters with uncertainties, photon-number calibration through the cryostat
attenuation chain, CPW conformal-mapping design, and TLS/quasiparticle/field
loss and frequency-shift regressions, plus file parsing and a CLI.
"""

__version__ = "0.1.0"

from .cpw import (CpwGeometry, LineParams, invert_kinetic_inductance,
                  line_params_from_geometry, resonance_frequency)
from .errors import (DegenerateDataError, DomainError, ManifestError,
                     NoResonanceError, ResokitError, SingularJacobianError,
                     TraceParseError, UnphysicalValueError)
from .loss import (FieldParams, JumpEvent, LossBudget, QpParams, TlsParams,
                   detect_jumps, diffusion_from_k, field_freq_shift,
                   field_loss, fit_field_shift, fit_freq_shift, fit_tls,
                   k_from_diffusion, qp_freq_shift, qp_loss, tls_freq_shift,
                   tls_loss, total_freq_shift, total_loss, vortex_thresholds)
from .notch import (AttenuationChain, AttenuationStage, NotchParams, S21Trace,
                    TraceMeta, chip_input_power, photon_number, s21_full,
                    s21_ideal, synthesize_trace)
from .numerics import (Circle2D, FitResult, circle_fit, digamma_half_line,
                       elliptic_k, least_squares_fit)
from .specfit import FitReport, estimate_delay, extract_qi, fit_notch

__all__ = [name for name in dir() if not name.startswith("_")]
