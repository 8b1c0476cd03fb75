"""Budgeted user-to-arm matching under single-peaked preferences.

Offline exact and approximate solvers, PQ-tree order recovery, online
learners with semi-bandit feedback, and a reproducible experiment harness.
"""

from .core import (
    BadDimensions,
    CostExceedsBudget,
    EntryOutOfRange,
    IndexOutOfRange,
    Instance,
    SPBanditError,
    load_instance,
    matching_feasible,
    matching_value,
    new_instance,
    save_instance,
    selected_arms,
    validate_instance,
)
from .pqtree import CapExceeded, PQTree, ZeroUniverse
from .spstruct import (
    AspReport,
    ExtractOrderFailed,
    NotPSP,
    asp_delta,
    extract_order,
    peaks_of,
    project_to_sp,
)
from .offline import (
    DPTable,
    EmptySubset,
    OfflineSolution,
    SPMatchingSolver,
    TooManyArms,
    assign_to_subset,
    brute_force_opt,
    coverage_value,
    feasible_subsets,
    greedy_max,
    solve_optimal,
    sp_matching,
)
from .bandit import (
    BanditStats,
    ConfidenceBounds,
    RegretTrace,
    maximal_matrix,
    run_cucb_bruteforce,
    run_emc,
    run_greedy_etc,
    run_mvm,
    run_peak_id_mvm,
)
from .sim import (
    AlgoConfig,
    Environment,
    ExperimentPlan,
    GeneratedInstance,
    InsufficientPoints,
    PermutedInstance,
    RunRecord,
    SlopeFit,
    fit_slope,
    fits_from_csv,
    generate_sp_instance,
    generate_sp_theta,
    make_rng,
    permute_columns,
    run_plan,
    simulate,
    subsample_grid,
    write_results_csv,
    read_results_csv,
)

__version__ = "0.1.0"
