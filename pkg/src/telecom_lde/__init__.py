"""Infinite-source Poisson teletraffic model, its Telecom-process limit and tail asymptotics.

The main entry points are

* ``TailMeasure`` / ``NuMeasure``: closed-form intensity measures;
* ``StableSpec`` with ``cf``, ``cdf``: the limiting stable law;
* ``simulate_workload``, ``simulate_Z_a``, ``simulate_telecom_batch``: exact samplers;
* the large-deviation constants and the ``tail_estimate_*`` estimators;
* ``telecom_lde.experiments.run`` behind the ``telecom-lde`` command.
"""

__version__ = "0.1.0"

from .distributions import (
    Degenerate,
    DiscreteMixture,
    Pareto,
    ParetoDuration,
    RewardLaw,
    TruncatedPareto,
    Uniform,
    duration_from_record,
    law_to_record,
    reward_from_record,
)
from .errors import (
    ConfigurationError,
    CriticalCaseError,
    DomainError,
    ExponentCapError,
    IntegrationError,
    InversionError,
    NonFiniteResultError,
    RegimeWarning,
    ResourceError,
    ResultsParseError,
    TelecomError,
)
from .lde import (
    ConstantEstimate,
    SessionCount,
    TailEstimate,
    exact_tail_probability,
    intermediate_constant_1,
    intermediate_constant_n,
    moderate_asymptotic,
    required_sessions,
    tail_estimate_conditional,
    tail_estimate_crude,
    ultra_asymptotic,
    ultra_constant,
)
from .measures import (
    NuMeasure,
    TailMeasure,
    TelecomParams,
    kernel_ell,
    mu_ell_atom,
    mu_ell_density,
    mu_ell_tail,
    mu_lr_mean_above,
    mu_lr_tail,
    mu_lr_tail_bound,
    nu_tail,
)
from .simulator import (
    ServiceSystemParams,
    SplitConfig,
    TelecomBatch,
    TelecomSample,
    bound_constants,
    centering_Et,
    chernoff_bound,
    exp_moment_small,
    sample_big_jumps,
    simulate_small_part,
    simulate_telecom,
    simulate_telecom_batch,
    simulate_workload,
    simulate_Z_a,
)
from .stable import StableSpec, cdf, cf, sf

import types as _types

__all__ = [k for k, v in dict(globals()).items() if not k.startswith("_") and not isinstance(v, _types.ModuleType)]
