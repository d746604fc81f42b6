"""Gaussian wavepacket families and scaling tests for collapsing estimates.

Closed-form free evolution of Gaussian sums under mixed-signature
Laplacians, the counterexample families built from them, mixed space-time
norms of their diagonal traces, and R-scans that fit the growth exponent of
estimate ratios.
"""

from .exceptions import ConfigurationError, ConstructionError, ContractError, ResourceError
from .families import FamilySpec, build_family, count_envelope
from .gaussian import (
    BlockSignature, ComplexGaussian, GaussianTerm, QuadratureSpec, WavepacketSum,
    diagonal_restrict, evolve_eval, evolve_sum, fourier_transform, gram_l2_norm,
    hermitian_symmetrize, hs_norm, inner_product, inverse_fourier_transform, tube_constant,
)
from .norms import (
    FracDerivSpec, MixedNormSpec, RegionSpec, eval_diagonal, frac_deriv_diagonal, lp_split,
    mixed_norm, paper_p_region, paper_q_region,
)
from .scaling import ScanSpec, ScalingReport, fit_slope, predicted_slope, run_scan, verdict_summary

__version__ = "0.1.0"
