"""Integrated wind farm layout and cable routing optimization.

Selecting turbine positions and routing their collector cables are
solved as one problem: pick a subset of candidate positions whose
production, net of wake interference, covers a quota, and connect it to
the substation by a minimum-cost tree (or by capacity-limited radial
strings), minimizing build plus cable cost together.
"""

from .bounds import (
    ConflictGraph,
    CountBounds,
    count_bounds,
    interference_row_lb,
    k_upper_bound,
    last_layer_cap,
    min_build_cost_selection,
    min_interference,
    mis_quota,
    n_min,
    routing_lower_bound,
    total_interference_lb,
)
from .errors import (
    BudgetError,
    CorrespondenceError,
    InfeasibleError,
    InvariantError,
    IoError,
    ParseError,
    SchemaError,
    UnsupportedModelError,
    WindrouterError,
)
from .graphs import (
    LayeredGraph,
    TransformedGraph,
    aggregate_selection,
    build_layered_graph,
    build_transformed_graph,
    decode_layered_solution,
    encode_solution_layered,
)
from .heuristics import HeuristicResult, cost_bias, sph, sph_radial
from .instances import (
    CostField,
    Position,
    QuotaSpec,
    SiteInstance,
    TurbineSpec,
    WindBin,
    WindRose,
    default_wind_rose,
    expected_turbine_output_mw,
    generate_synthetic_site,
    load_instance,
    quota_for_equivalent_turbines,
    save_instance,
    validate,
)
from .solution import Solution, empty_solution, make_solution, verify_solution
from .solver import (
    SolveResult,
    SolverConfig,
    SplitOutcome,
    SplitValue,
    brute_force_oracle,
    choose_split_value,
    parse_split_spec,
    solve,
    solve_hop,
    solve_with_split,
    solve_with_strategy,
)
from .wake import (
    InterferenceMatrix,
    WakeParams,
    build_interference_matrix,
    pairwise_interference,
    power_output,
    wake_deficit,
)

__version__ = "0.1.0"
