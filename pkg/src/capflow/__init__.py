"""Capillary star-shaped graphs and their volume-preserving curvature flow."""

from __future__ import annotations

from .grid import (
    Grid,
    GhostedField,
    MODES,
    build_grid,
    boundary_integrate,
    fill_ghost,
    gradient,
    hessian,
    integrate,
    sin_power_antiderivative,
    unit_ball_volume,
    unit_sphere_area,
)
from .geometry import (
    BoundaryDiagnostics,
    GeometryField,
    RadialGraph,
    boundary_diagnostics,
    embed,
    geometry,
    scalar_rhs,
    shape_operator,
    speed,
)
from .functionals import (
    CapFit,
    CapFitFree,
    FunctionalReport,
    ReferenceConstants,
    boundary_length,
    enclosed_volume,
    fit_cap,
    fit_cap_free,
    functional_report,
    inequality_ratios,
    minkowski_residual,
    quermassintegral,
    quermassintegrals,
    reference_constants,
    surface_area,
    wetted_area,
)
from .oracle import (
    CapFunctionals,
    CapSpec,
    cap_functionals,
    cap_gradient,
    cap_graph,
    cap_hessian,
    cap_phi,
    cap_radius_from_point,
    cap_rho,
    cap_wetting_energy_constant,
    convergence_order,
    ellipsoid_curvatures,
    ellipsoid_graph,
)
from .flow import (
    Baseline,
    FlowConfig,
    FlowDiverged,
    FlowState,
    InitialSpec,
    MonitorRecord,
    RunResult,
    build_initial,
    euler_step,
    monitor,
    perturbation_field,
    projected_rhs,
    run,
    stable_dt,
    step,
)

__version__ = "0.1.0"
