"""Tails of the triangular stochastic recursion X_n = A_n X_{n-1} + B_n.

``A_n = [[a_n, y_n a_n], [0, a_n]]``.  The second coordinate of the stationary
solution has a pure power tail ``t^-alpha``; the first picks up a factor
``(log t)^(alpha/2)`` or ``(log t)^alpha`` depending on the sign of ``E y a^alpha``.
"""
from .asymptotics import (
    PredictionReport,
    TailConstants,
    c0_of_K,
    c0_truncated,
    goldie_constants,
    ld_approx,
    predicted_limits,
)
from .config import dump_config, load_config, parse_config
from .cramer import CramerReport, TiltedLaw, check_fixed_point, solve_alpha, spectral_report, tilt
from .estimation import (
    FitReport,
    TailCurve,
    fit_exponents,
    i_n_delta,
    is_tail,
    naive_tail,
    negligibility_diag,
    projection_diag,
    tail_curve,
)
from .model import (
    AffineInLogA,
    CoefficientLaw,
    Constant,
    Discrete,
    Exponential,
    GarchSquare,
    Gaussian,
    LogNormal,
    PowerLaw,
    ScaleFamily,
    garch_preset,
    mellin,
    mellin_log,
    reference_model,
)
from .perpetuity import BlockSample, StationaryPair, choose_D, sample_blocks, simulate_stationary
from .pipeline import ExperimentPlan, run_garch_demo, run_verify

__version__ = "0.1.0"
