"""Capacity-matched perforation lab.

A small numerical laboratory for absorption problems of the form
``-div(A grad u) + mu u = f`` on a plane rectangle, where ``mu`` is a
positive Radon measure built from a closed catalog (area density, point
atoms, line segments).  The lab constructs classical Dirichlet problems on
domains perforated by small balls whose condenser capacity matches the
measure's mass per grid cube, and measures how the perforated solutions
converge to the relaxed (measure-damped) solution.
"""

from .errors import (
    ConfigError,
    ConvergenceFailure,
    GeometryError,
    ResolutionError,
)
from .measures import (
    Box,
    Checkerboard,
    Constant,
    Decomposition,
    MeasureSpec,
    Radial,
    Rect,
    Zero,
    decompose,
    kato_norm,
    mass_on_box,
    mass_on_rect,
    truncate_density,
)
from .operators import EllipticOperator
from .mesh import Field, Mesh, SolveStats
from .capacity import (
    CapacitaryPotential,
    Disk,
    DiskUnion,
    Intersection,
    boundary_average,
    cap_concentric_closed_form,
    cap_variational,
    capacitary_potential,
    hole_radius,
    mu_capacity,
    poincare_modulus_estimate,
)
from .perforation import (
    GridLevel,
    Hole,
    HoleFamily,
    build_holes,
    holes_report,
    interior_cubes,
)
from .pde import (
    FieldMetrics,
    corrector_field,
    energy_functional,
    field_metrics,
    loads,
    solve_dirichlet_perforated,
    solve_relaxed,
)
from .config import ScenarioConfig, parse_config
from .sweep import ConvergenceReport, SweepRow, emit_report, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CapacitaryPotential",
    "Checkerboard",
    "ConfigError",
    "Constant",
    "ConvergenceFailure",
    "ConvergenceReport",
    "Decomposition",
    "Disk",
    "DiskUnion",
    "EllipticOperator",
    "Field",
    "FieldMetrics",
    "GeometryError",
    "GridLevel",
    "Hole",
    "HoleFamily",
    "Intersection",
    "MeasureSpec",
    "Mesh",
    "Radial",
    "Rect",
    "ResolutionError",
    "ScenarioConfig",
    "SolveStats",
    "SweepRow",
    "Zero",
    "boundary_average",
    "build_holes",
    "cap_concentric_closed_form",
    "cap_variational",
    "capacitary_potential",
    "corrector_field",
    "decompose",
    "emit_report",
    "energy_functional",
    "field_metrics",
    "hole_radius",
    "holes_report",
    "interior_cubes",
    "kato_norm",
    "loads",
    "mass_on_box",
    "mass_on_rect",
    "mu_capacity",
    "parse_config",
    "poincare_modulus_estimate",
    "run_sweep",
    "solve_dirichlet_perforated",
    "solve_relaxed",
    "truncate_density",
]
