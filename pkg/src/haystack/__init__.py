"""Detecting a sparse, moving signal from sequential coordinate-wise measurements."""
__version__ = "0.1.0"

from .bounds import (
    BlockDecomposition,
    BoundDomainError,
    BoundInputs,
    bounds_table,
    bounds_table_csv,
    lemma2_mc_check,
    miss_probability_bound,
    mu_lower_as_1sparse,
    mu_lower_as_generic,
    mu_lower_na_p0,
    mu_lower_na_p1,
    mu_upper_thm1,
)
from .detector import DetectorConfig, Verdict, detect, detector_T
from .harness import ExperimentSpec, RiskEstimate, estimate_risk, run_experiment_file
from .likelihood import (
    BoundCurvePoint,
    LikelihoodEstimate,
    figure3_sweep,
    lr_exact_1sparse,
    lr_exact_p0,
    lr_exact_p1,
    lr_nested_mc,
    sweep_to_csv,
    tv_bound_estimate,
)
from .nonadaptive import (
    SensingDesign,
    global_sum_test,
    make_subsample_design,
    make_uniform_design,
    subsample_max_test,
)
from .signal_model import (
    BudgetExhausted,
    DynamicsConfig,
    Hypothesis,
    SupportState,
    WorldOracle,
    evolve_support,
    init_support,
    observe,
    simulate_trajectory,
    trajectory_to_csv,
    world_oracle,
)
from .stt import SttVerdict, make_schedule, run_stt
