"""Heat kernels of the fractional Laplacian with gradient drift.

Evaluate and sample the free rotationally symmetric stable density, build
the drifted kernel by the perturbation series, simulate the killed process
in bounded domains, and run the estimate-verification suites.
"""

from .duhamel import (
    FreeKernelValue,
    SeriesTerm,
    conservativeness_check,
    fit_c4,
    free_kernel,
    green_perturbed_ball,
    series_horizon,
    series_term,
)
from .geometry import (
    Domain,
    annulus,
    ball,
    ball_mean_exit_time,
    f_template,
    g_template,
    green_ball_exact,
    green_ball_exact_grad,
    level_set,
    parse_domain,
    three_g_ratio,
    two_balls,
)
from .kato import (
    DriftField,
    KatoProfile,
    kato_modulus,
    kato_profile,
    nb_functional,
    parse_drift,
    scale_amplitude,
    scaled_drift,
    shipped_fields,
)
from .mc_engine import (
    ExitRecord,
    KernelEstimate,
    PathConfig,
    eigen_estimate,
    green_occupation,
    harmonic_value,
    kernel_hybrid,
    kernel_kde,
    kernel_kde_grid,
    levy_jump_count,
    simulate_killed,
    step,
    survival_curve,
)
from .stable_core import (
    JumpKernel,
    StableLaw,
    density,
    grad_density,
    jump_intensity,
    make_law,
    sample_increment,
)
from .verify import SUITES, SuiteReport, write_report

__version__ = "0.1.0"
