"""Ergodic bounded-velocity follower: closed-form control, simulation and learning."""

from .learning import (
    EpisodeState,
    RunRecord,
    apac_episodes,
    apac_run,
    clip,
    delta_estimate,
    doubling_explore_first_run,
    explore_first_run,
    fixed_threshold_run,
)
from .model import (
    DerivedConstants,
    ModelParams,
    ergodic_value,
    hjb_residual,
    optimal_threshold,
    passage_cost,
    phi,
    threshold_drift,
)
from .regret import (
    Algorithm,
    RateFit,
    RegretCurve,
    estimate_regret,
    export_curve,
    fit_fixed_power,
    fit_log_rate,
    fit_power_rate,
    import_curve,
)
from .sde import (
    CoupledPathStats,
    PathStats,
    SimConfig,
    ThresholdSchedule,
    simulate_coupled,
    simulate_first_passage_cost,
    simulate_threshold_path,
)
from .stationary import StationaryLaw, stationary_mean, stationary_second_moment
from .streams import make_stream

__version__ = "0.1.0"
