"""fracac: a numerical laboratory for the fractional Allen-Cahn equation.

Forward variational solves on truncated lattices with exact-moment kernel
quadrature, sharp-interface diagnostics across interface-width ladders, and
reconstruction of the potential derivative, source, interface, and
fractional perimeters from interior measurement windows.
"""

from .geometry import (
    Partition,
    PhaseSet,
    box_region,
    curvature_at,
    curvature_residual,
    disc_phase,
    extract_interface,
    first_variation,
    first_variation_fd,
    grid_signed_field,
    halfline_phase,
    halfplane_phase,
    hausdorff_gap,
    interface_points,
    interval_perimeter,
    interval_phase,
    interval_union_perimeter,
    partition_from_field,
    partition_perimeter,
    perimeter,
    snap_to_wells,
)
from .grid import (
    Domain,
    FracContext,
    GridFunction,
    TailModel,
    build_context,
    grid_function_from_callable,
    impose_exterior,
    normalization_constant,
)
from .inverse import (
    Measurement,
    Reconstruction,
    add_noise,
    fit_W1,
    make_measurement,
    potential_from_W1,
    reconstruct,
    recover_f,
    recover_interface_and_perimeter,
    sample_W1_graph,
    uniqueness_harness,
)
from .operator import FracOperator
from .potentials import (
    Potential,
    eval_W,
    eval_W1,
    eval_W2,
    make_multiwell,
    make_polynomial,
    make_quartic,
    validate_conditions,
)
from .solve import (
    SolveConfig,
    SolveError,
    SolveReport,
    gradient,
    solve,
    stability_check,
    total_energy,
)
from .sweep import (
    SweepPlan,
    SweepRecord,
    check_energy_perimeter,
    check_level_sets,
    check_uniform_convergence,
    duality_gaps,
    limit_identity_field,
    make_exterior,
    make_source,
    run_partition_sweep,
    run_sweep,
    warm_start_consistency,
)

__version__ = "0.1.0"
