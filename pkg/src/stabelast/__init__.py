"""Locally stabilised P1-P0 mixed finite elements for nearly incompressible
plane elasticity, with robust residual and local-problem error estimators and
an adaptive refinement driver."""

from .assembly import (
    FORMULATIONS,
    HERRMANN,
    HYDROSTATIC,
    MaterialParams,
    SaddleSystem,
    apply_dirichlet,
    assemble_saddle_system,
    assemble_stabilisation,
    material_from_engineering,
    material_from_lame,
)
from .basis import LocalBubbleSpace, QuadRule, bubble_space, edge_quadrature, p1_eval, quadrature_rule
from .driver import ConvergenceTable, RunConfig, adaptive_loop, compute_rates, emit_csv
from .errors import (
    ConfigError,
    MacroPartitionError,
    MeshTopologyError,
    NoExactSolutionError,
    SolverError,
    UnsupportedElementError,
)
from .estimators import (
    ElementResiduals,
    ErrorIndicators,
    EstimatorWeights,
    dump_indicators,
    element_residuals,
    estimator_weights,
    poisson_indicator,
    project_load,
    residual_indicator,
)
from .kernels import active_backend
from .mesh import (
    EdgeTopology,
    MacroPartition,
    MarkedSet,
    Mesh,
    build_edge_topology,
    derive_macroelements,
    generate_initial_mesh,
    mark_dorfler,
    min_angle,
    read_mesh,
    refine_rgb,
    triangle_areas,
    write_mesh,
)
from .problems import (
    EnergyError,
    ProblemSpec,
    default_material,
    energy_error,
    exact_gradient,
    make_problem,
)
from .solve import MixedSolution, pressure_mean_check, solve_direct, solve_reduced

__version__ = "0.1.0"
