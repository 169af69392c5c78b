"""Lattice discretizations of maps, dynamical robustness, and measure estimates."""

__version__ = "0.1.0"

from .config import ExperimentConfig
from .domains import make_domain
from .dynamics import (
    CycleReport,
    DiscretizedSystem,
    Reason,
    RobustnessVerdict,
    analyze_cycles,
    classify_offsets,
    discretize,
    fixed_points,
    k_of,
    proposition1_check,
    robustness_verdict,
    tarski_iterate,
)
from .estimators import LatticeRounder, RobustOffsetEstimator
from .exceptions import (
    ConfigError,
    DivergenceError,
    InvariantViolation,
    LatlabError,
    PreconditionError,
    ResourceError,
)
from .lattice import (
    DomainSpec,
    ExtentReport,
    GridContext,
    compute_extent,
    enumerate_domain,
    order_bounds,
    round_to_lattice,
    scalar_round,
)
from .maps import (
    ConditionVerdict,
    MapSpec,
    affine_map,
    builtin_map,
    check_margin,
    check_monotone,
    check_self_mapping,
    orthant_conjugate,
    reflect_domain,
)
from .measure import (
    BoundReport,
    MeasureEstimate,
    bounds_report,
    estimate_k_integral,
    estimate_near_fixed_measure,
    estimate_VS,
    q_grid_scan,
)
from .runner import RunReport, emit, run
