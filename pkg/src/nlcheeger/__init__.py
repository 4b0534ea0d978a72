"""Nonlocal Cheeger constants, fractional perimeters and eigenvalues on grids.

All solvers are deterministic given their inputs and seeds; types are
immutable after construction and safe to share across threads.
"""

from .geometry import (
    DomainError,
    GridDomain,
    GridSpec,
    ShapeSpec,
    annulus,
    ball,
    box,
    classical_perimeter,
    diameter,
    domain_from_json,
    interval,
    load_mask_file,
    measure,
    poincare_constant,
    rasterize,
    save_mask_file,
)
from .kernel import (
    COMPLEMENT,
    KernelError,
    KernelParams,
    KernelTable,
    TableOnGrid,
    build_table,
    cell_pair_weight,
    covering_params,
    covering_radius,
    interaction,
)
from .functional import (
    FieldError,
    ScalarField,
    SubsetIndicator,
    coarea_check,
    interpolation_bound,
    isoperimetric_deficit,
    isoperimetric_reference,
    load_field_csv,
    nikolskii_bound,
    nikolskii_ratio,
    nonlocal_mean_curvature,
    pointwise_ineq_C1,
    pointwise_ineq_C2,
    s_perimeter,
    save_field_csv,
    seminorm,
)
from .maxflow import BACKEND, CutResult, FlowError, FlowNetwork, dump_dimacs, solve_maxflow
from .cheeger import (
    CheegerResult,
    brute_force_cheeger,
    calibrability_check,
    dual_certificate,
    faber_krahn_cheeger,
    hs_vs_h1,
    s_to_1_sweep,
    solve_cheeger,
    solve_cheeger_classical,
)
from .eigen import (
    EigenError,
    EigenResult,
    faber_krahn_eigen,
    linfty_check,
    p_to_1_sweep,
    solve_eigen,
)

__version__ = "0.1.0"
