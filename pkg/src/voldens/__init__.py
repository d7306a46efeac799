"""Nonparametric estimation of the marginal density of stochastic volatility."""

__version__ = "0.1.0"

from .deconv import (  # noqa: E402
    BandwidthSchedule, DeconvKernel, DensityEstimate, RegimeWarning,
    bandwidth_schedule, default_grid, estimate, estimate_direct, estimate_ecf,
    gamma0, v_h_eval, v_h_l2_norm,
)
from .estimator import LogSquareTransformer, VolatilityDensityEstimator  # noqa: E402
from .kernels import (  # noqa: E402
    KernelSpec, default_kernel, get_kernel, kernel_w, validate_condition_w,
)
from .observe import ObservationSeries  # noqa: E402
from .simmodel import (  # noqa: E402
    ModelSpec, SamplePath, condition_sigma_diagnostic, invariant_density,
    make_model, observe, simulate_path,
)
from .specfun import (  # noqa: E402
    log_gamma_complex, noise_density_k, phi_k, phi_k_asymptotic_magnitude,
)
