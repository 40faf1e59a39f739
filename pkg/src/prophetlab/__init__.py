"""Simulation and exact-evaluation toolkit for repeated-sample stopping rules.

The model: each of n base reward distributions spawns k independent copies,
every copy arrives at an independent uniform time in [0, 1], and an online
rule picks at most one reward.  The benchmark is the expected maximum over a
single copy of each base distribution.
"""

from .distributions import (
    AugmentedValue,
    Distribution,
    RandomizedThreshold,
    distribution_from_json,
    distribution_to_json,
    nth_root,
    product_max,
    quantile_threshold,
)
from .errors import (
    ConfigError,
    InvalidInstanceError,
    InvalidParameterError,
    InvalidQuantileError,
    PolicyMismatchError,
    ProphetLabError,
    TooLargeInstanceError,
)
from .exact_oracle import (
    ExactEvaluator,
    IntegrationConfig,
    expected_value_activation,
    expected_value_threshold,
    exceedance_activation,
    exceedance_threshold,
    optimal_online_dp,
    p_tau_multi,
    p_tau_single,
)
from .instance import (
    ArrivalSequence,
    Instance,
    OptLaw,
    instance_from_json,
    instance_to_json,
    load_instance,
    make_instance,
    opt_law,
    sample_arrivals,
)
from .monte_carlo import (
    McConfig,
    estimate_exceedance,
    estimate_expected_value,
    estimate_no_stop,
)
from .policies import (
    ActivationPolicy,
    AdaptiveTwoThreshold,
    StopOutcome,
    ThresholdSchedule,
    ValueBuckets,
    make_adaptive,
    make_blind_schedule,
    make_single_threshold,
    run_policy,
    sort_nonincreasing,
    switch_time_S,
)
from .results import EvalResult

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
