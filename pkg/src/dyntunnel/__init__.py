"""Mode-mode coupling model of resonant pumping through dynamical tunneling in deformed microcavities."""

from .core import (
    ChaoticMode,
    DerivedParams,
    ModeEnsemble,
    PumpDrive,
    SteadyState,
    derive_params,
    efficiency,
    efficiency_from_intensities,
    intensities,
    lineshape,
    lineshape_convolved,
    steady_state_approx,
    steady_state_exact,
    steady_state_linear_solve,
)
from .inverse import Measurement, Quantity, derived_columns, extract, gamma_p_consistency, propagate_uncertainty
from .rays import CavityGeometry, RayBundle, bundle_stats, trace_ray
from .series import interference_rounds, series_resummation_check
from .spectrum import modified_regular_mode, secular_roots
from .transient import energy_balance_report, integrate_envelopes, integrate_rate_equations

__version__ = "0.1.0"
