"""Liftings of first-order map energies to measure-valued maps on discrete domains."""

from .domain import (
    SpatialDomain,
    SubdomainMask,
    build_circle,
    build_grid2d,
    build_interval,
    full_mask,
    restrict,
)
from .fields import (
    ClassicalMap,
    MeasureField,
    MomentumField,
    TargetGrid,
    continuity_residual,
    embed,
    extract_velocity,
    mollify_y,
    regularize,
    zero_momentum,
)
from .integrand import (
    DataTerm,
    Integrand,
    conjugate,
    convex_table,
    eval_energy,
    eval_W,
    operator_norm_tv,
    p_power,
    perspective,
    prox_perspective,
    quadratic,
    recession,
)
from .lagrangian import (
    Coupling,
    EdgeCostTable,
    LagrangianCertificate,
    check_certificate,
    check_marginals,
    comonotone_coupling,
    coupling_cost,
    default_edge_costs,
    glue_path_coupling,
    parametric_flow_coupling,
    solve_cycle_entropic,
    solve_exact,
    solve_ot2,
    solve_path,
)
from .eulerian import (
    EulerianCertificate,
    EulerianReport,
    check_eulerian_certificate,
    eval_BW,
    solve_eulerian,
    solve_eulerian_localized,
)

__version__ = "0.1.0"
