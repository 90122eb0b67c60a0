"""Direct estimation of sparse differences between network Laplacians.

The package estimates the difference B2 - B1 between the weighted-Laplacian
system matrices of two conservation-law networks, using only node-potential
observations from each regime. The main entry points are re-exported here;
see the module docstrings for details.
"""

from .errors import (
    CaseFileError,
    CaseIntegrityError,
    CaseParseError,
    ConnectivityError,
    InvalidInputError,
    LapdiffError,
    NearSingularScenarioError,
    NotPsdError,
    NumericalError,
    PluginUndefinedError,
    ReductionError,
    SingularMatrixError,
    SolverDivergedError,
)
from .estimator import (
    DeltaEstimate,
    SolverConfig,
    UniquenessReport,
    dtrace_loss,
    estimate_delta,
    estimate_sqrt_delta,
    exact_delta,
    penalized_objective,
    plugin_delta,
    run_admm,
    uniqueness_check,
)
from .experiments import (
    ExperimentConfig,
    GridDeltaSpec,
    MatpowerBaseSpec,
    RandomBaseSpec,
    SigmaSpec,
    SweepInterrupted,
    SweepResult,
    SweepRow,
    run_instance,
    run_sweep,
    sup_norm_error,
    support_recovered,
    write_sweep_csv,
)
from .linalg import (
    EigenDecomposition,
    as_symmetric,
    eig_sym,
    inv_sqrt_pd,
    off_diagonal_l1,
    soft_threshold,
    solve_pxq,
    sqrt_psd,
    unvec,
    vec,
)
from .matio import (
    read_matrix_csv,
    read_samples_csv,
    write_matrix_csv,
    write_samples_csv,
)
from .matpower import (
    BranchRecord,
    BusRecord,
    PowerCase,
    bundled_case_text,
    case_laplacian,
    format_case,
    load_case118,
    parse_case,
)
from .network import (
    NetworkScenario,
    WeightedGraph,
    assemble_scenario,
    grid_delta,
    laplacian_from_graph,
    lattice_delta,
    random_base_matrix,
    reduce_ground_node,
)
from .sampling import (
    PrecisionFactor,
    precision_factor,
    precision_factor_from_covariance,
    sample_covariance,
    sample_potentials,
    whiten,
)

__version__ = "0.1.0"

__all__ = [
    "BranchRecord",
    "BusRecord",
    "CaseFileError",
    "CaseIntegrityError",
    "CaseParseError",
    "ConnectivityError",
    "DeltaEstimate",
    "EigenDecomposition",
    "ExperimentConfig",
    "GridDeltaSpec",
    "InvalidInputError",
    "LapdiffError",
    "MatpowerBaseSpec",
    "NearSingularScenarioError",
    "NetworkScenario",
    "NotPsdError",
    "NumericalError",
    "PluginUndefinedError",
    "PowerCase",
    "PrecisionFactor",
    "RandomBaseSpec",
    "ReductionError",
    "SigmaSpec",
    "SingularMatrixError",
    "SolverConfig",
    "SolverDivergedError",
    "SweepInterrupted",
    "SweepResult",
    "SweepRow",
    "UniquenessReport",
    "WeightedGraph",
    "as_symmetric",
    "assemble_scenario",
    "bundled_case_text",
    "case_laplacian",
    "dtrace_loss",
    "eig_sym",
    "estimate_delta",
    "estimate_sqrt_delta",
    "exact_delta",
    "format_case",
    "grid_delta",
    "inv_sqrt_pd",
    "laplacian_from_graph",
    "lattice_delta",
    "load_case118",
    "off_diagonal_l1",
    "parse_case",
    "penalized_objective",
    "plugin_delta",
    "precision_factor",
    "precision_factor_from_covariance",
    "random_base_matrix",
    "read_matrix_csv",
    "read_samples_csv",
    "run_admm",
    "run_instance",
    "run_sweep",
    "sample_covariance",
    "sample_potentials",
    "soft_threshold",
    "solve_pxq",
    "sqrt_psd",
    "sup_norm_error",
    "support_recovered",
    "uniqueness_check",
    "unvec",
    "vec",
    "whiten",
]
