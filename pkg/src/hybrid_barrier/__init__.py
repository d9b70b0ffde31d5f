"""Hybrid Monte Carlo / heat-potential pricing of barrier options under Heston."""

from .domain import (
    BarrierAboveSpot,
    BarrierContract,
    HestonParams,
    InvalidParam,
    Method,
    NumericalError,
    OptionKind,
    PayoffKind,
    PricingError,
    PricingResult,
    VanillaContract,
    to_log_contract,
    validate_params,
)
from .engine import (
    ComparisonReport,
    ConfigError,
    ExperimentConfig,
    InnerSettings,
    InnerSolverError,
    averaged_green,
    bench,
    load_config,
    price_barrier_hybrid,
    price_barrier_hybrid_strikes,
    run_experiment,
)
from .fdm import FdmPathPricer, PathIncrements
from .mcs2d import Mcs2dConfig, mc2d_barrier_price, mc2d_barrier_prices
from .minpdf import DriftPath, MinimumDensity, joint_pdf_bm, joint_pdf_drifted, joint_pdf_time_dependent
from .paths import conditional_coeffs, simulate_variance_paths
from .potentials import HeatPotentialPricer, Mode, MovingBoundary, VolterraOperator, solve_volterra
from .vanilla import bs_call, bs_put, implied_vol, lewis_lipton_call, lewis_lipton_put
from .willard import willard_mc_price

__version__ = "0.1.0"
