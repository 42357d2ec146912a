"""Performance model, two-decoy bounds and intensity optimization for a
polarization-encoding MDI-QKD system."""

from .params import (
    ChannelGeometry,
    FixedAngles,
    GaussianMC,
    IntensitySettings,
    SystemParams,
    ValidationError,
    channel_ratio,
    geometry_for_ratio,
    reduction_angles,
    symmetric_intensities,
    transmittance_from_distance,
    validate_intensities,
)
from .interference import (
    CoincidenceResult,
    DetectorIntensities,
    EncodingPair,
    click_probability,
    coincidence_gains,
    detector_intensities,
    gain_and_qber,
)
from .closedform import (
    NoCoincidencesError,
    bessel_i0,
    binary_entropy,
    g_function,
    qz_ez_closed_form,
    qz_hh_closed_form,
    qz_hv_closed_form,
    r_est,
    second_order_qz_ez,
    y11_e11_true,
)
from .decoy import (
    DecoyBounds,
    DegenerateIntensityError,
    GainTable,
    UnboundedErrorSignal,
    build_gain_table,
    decoy_bounds,
    e11_upper_bound,
    y11_lower_bound,
)
from .keyrate import (
    KeyRateReport,
    asymptotic_rate,
    single_photon_error_x_estimate,
    two_decoy_rate,
)
from .optimize import (
    AsymmetricComparison,
    OptimizationResult,
    SearchResult,
    asymmetric_compare,
    maximize,
    optimal_intensity_sweep,
    optimize_asymptotic,
    optimize_two_decoy,
    theorem1_check,
)
from .asym import fixed_x_scan, log_rate_slope, max_tolerable_x, rig_vs_est_scan

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
