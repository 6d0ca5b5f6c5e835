"""Fractional-kernel vortex filament toolkit.

Velocity fields induced by a closed vortex filament under a fractional
Biot-Savart kernel, their mollified on-curve limits as the smoothing scale
vanishes, and an exploratory filament evolver built on top of them.
"""

__version__ = "0.1.0"

from .curve import (
    CurveSpec,
    FrameField,
    FrenetData,
    circle_curve,
    ellipse_curve,
    fit_fourier,
    frenet,
    load_curve,
    normal_frame,
    random_smooth_curve,
    save_curve,
    security_radius,
    with_constant_speed,
)
from .kernel import (
    CurveContext,
    KernelParams,
    QuadratureSpec,
    classical_v,
    kernel_integrand,
    nearest_parameter,
    v_alpha,
)
from .mollify import (
    MollifierSpec,
    TubeContext,
    TubeQuadSpec,
    leading_term_contribution,
    u_eps,
    u_eps_oracle,
)
from .expansion import (
    ExpansionTerms,
    R_value,
    binormal_integral,
    binormal_integral_at_zero,
    expansion_terms,
    expansion_terms_at,
    minimal_budget_exponent,
    remainder_order_fit,
)
from .asymptotics import (
    AsymptoticsReport,
    SweepTable,
    alpha_sweep,
    classical_log_check,
    eps_sweep,
    extract_C,
    fit_power_law,
    model_comparison,
)
from .evolve import SimConfig, Trajectory, run, step
