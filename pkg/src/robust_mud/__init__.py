"""Robust multiuser detection and characteristic-function BER analysis for
asynchronous flat-fading CDMA in epsilon-contaminated noise."""

from .ber import (AnalyticBerInputs, average_ber, conditional_ber, disturbance_cdf,
                  disturbance_cf, gaussian_q)
from .cdma import (ChannelRealization, FadingParams, SignatureSet, build_composite_matrix,
                   generate_fading, generate_m_sequence, make_signatures, synthesize_received)
from .detectors import (EstimateResult, PenaltyFunction, decorrelate, detect_symbols,
                        m_estimate, psi, rho)
from .harness import (BerCurve, ExperimentConfig, emit_results, load_config,
                      mc_oracle_interference, run_analytic_curve, run_ber_sweep)
from .interference import (BoundaryProfile, count_transitions, interferer_cf_given_B,
                           interferer_cf_given_sB, j_kernel, sample_interferer,
                           total_interference_cf)
from .noise import MixtureNoiseParams, mixture_pdf, noise_cf_exact, noise_cf_paper, sample_noise
from .quadrature import QuadratureError, QuadratureSpec

__version__ = "0.1.0"
