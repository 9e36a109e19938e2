"""Uncertainty quantification for borehole heat exchanger arrays.

The package couples a dimension-adaptive sparse-grid collocation engine
to a reduced-order model of a borehole array: a two-pipe resistance
model inside each borehole and an inclined finite-line-source
description of the ground between them.  Drilling deviations (azimuth
and inclination per borehole) enter as bounded random variables and the
study pipeline turns them into statistics of the mean fluid temperature.
"""

__version__ = "0.1.0"

from .distributions import ProductDistribution, RandomVariable, basis_expectation, sample
from .exceptions import (
    DegenerateParametersError,
    EvaluationError,
    IncompleteBatchError,
    InsufficientDataError,
    OutOfDomainError,
    SingularEvaluationError,
    UnrepairableGeometryError,
)
from .sparse_grid import (
    SparseInterpolant,
    build_smolyak,
    compute_surpluses,
    hier_basis_eval,
    interpolant_eval,
    interpolant_eval_many,
    load_interpolant,
    new_nodes,
    nodes,
    num_nodes,
    save_interpolant,
    smolyak_grid,
)
from .adaptive import AdaptiveResult, RefinementConfig, run_adaptive, write_trace_csv
from .statistics import (
    KernelDensity,
    cop,
    kde,
    marginal_surface,
    mean,
    moment,
    quantile_lower_bound,
    resample,
    std,
)
from .geometry import (
    ArrayLayout,
    BoreholeSegment,
    CorrectionRecord,
    DeviationParams,
    correct_geometry,
    grid_layout,
    min_pairwise_distance,
    realize_geometry,
    segment_min_distance,
)
from .borehole import (
    DEFAULT_DOUBLE_U,
    BHEParams,
    f_functions,
    meta_params,
    outlet_and_power,
    profiles,
    required_inlet,
    source_density,
)
from .soil import (
    DEFAULT_SOIL,
    LoadHistory,
    SoilParams,
    WallResponseCache,
    fls_kernel,
    undisturbed_temperature,
    wall_temperature,
)
from .scenario import (
    StudyConfig,
    TavgEvaluator,
    config_from_dict,
    load_config,
    reference_geometry_value,
    run_cell,
    run_study,
    scenario_distribution,
    scenario_domain,
    simulate_operation,
)
