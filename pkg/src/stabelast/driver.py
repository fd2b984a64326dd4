"""Solve -> Estimate -> Mark -> Refine orchestration and convergence tables."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import FORMULATIONS, assemble_saddle_system
from .errors import (
    ConfigError,
    MacroPartitionError,
    MeshTopologyError,
    SolverError,
    UnsupportedElementError,
)
from .estimators import (
    element_residuals,
    estimator_weights,
    poisson_indicator,
    project_load,
    residual_indicator,
)
from .mesh import (
    MarkedSet,
    build_edge_topology,
    derive_macroelements,
    generate_initial_mesh,
    mark_dorfler,
    refine_rgb,
)
from .problems import default_material, energy_error, make_problem
from .solve import pressure_mean_check, solve_direct

__all__ = ["RunConfig", "LevelRow", "ConvergenceTable", "adaptive_loop", "compute_rates", "emit_csv"]

ESTIMATORS = ("residual", "poisson")
REFINEMENTS = ("uniform", "adaptive")

# structured initial levels; the square one reproduces N_0 = 1090
DEFAULT_INITIAL_LEVEL = {"unit_square": 3, "l_shape": 2}


@dataclass(frozen=True)
class RunConfig:
    problem: str  # test1 | test2 | test3 | patch
    formulation: str = "herrmann"
    estimator: str = "poisson"
    refinement: str = "adaptive"
    theta: float = 0.5
    nu: Optional[float] = None
    mu: Optional[float] = None
    E: Optional[float] = None
    max_dof: int = 100_000
    initial_level: Optional[int] = None
    max_levels: int = 100

    def validate(self) -> None:
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.refinement not in REFINEMENTS:
            raise ConfigError(f"refinement must be one of {REFINEMENTS}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must lie in (0, 1)")
        if self.initial_level is not None and self.initial_level < 1:
            raise ConfigError("initial_level must be >= 1")
        if self.max_dof < 1:
            raise ConfigError("max_dof must be positive")


@dataclass
class LevelRow:
    level: int
    dof: int
    eta: float  # the estimator chosen in the config
    theta_osc: float
    exact_error: Optional[float] = None
    effectivity: Optional[float] = None
    rate: Optional[float] = None
    extras: dict = field(default_factory=dict)


@dataclass
class ConvergenceTable:
    rows: list
    tail_rate_estimated: Optional[float] = None
    tail_rate_exact: Optional[float] = None


def _run_material(config: RunConfig):
    return default_material(config.problem, config.formulation, config.nu, config.mu, config.E)


def adaptive_loop(config: RunConfig, keep_meshes: bool = False) -> ConvergenceTable:
    """Iterate Solve -> Estimate -> Mark -> Refine until dof >= max_dof.

    Both estimators are evaluated on every level (marking uses the configured
    one); per-level diagnostics land in LevelRow.extras. dof counts all
    displacement dofs (2 per vertex, boundary included) plus all pressure dofs.
    """
    config.validate()
    material = _run_material(config)
    problem = make_problem(config.problem, material)
    level0 = (
        config.initial_level
        if config.initial_level is not None
        else DEFAULT_INITIAL_LEVEL[problem.domain]
    )
    mesh = generate_initial_mesh(problem.domain, level0)

    rows = []
    meshes = []
    for level in range(config.max_levels):
        try:
            topo = build_edge_topology(mesh)
            macros = derive_macroelements(mesh, topo)
            system = assemble_saddle_system(
                mesh, topo, macros, material, problem.body_force, problem.boundary_data
            )
            solution = solve_direct(system)
            weights = estimator_weights(mesh, topo, material)
            f_h, theta_K = project_load(problem.body_force, mesh, weights.rho_K)
            residuals = element_residuals(solution, f_h, material, mesh, topo)
            areas = system.C_diag * material.kappa
            indicators = residual_indicator(residuals, weights, topo, areas, theta_K)
            eta_PK, eta_P = poisson_indicator(residuals, weights, mesh, topo, material)
            pressure_residual = pressure_mean_check(solution, mesh, topo, material)
        except (
            SolverError,
            MeshTopologyError,
            MacroPartitionError,
            UnsupportedElementError,
        ) as exc:
            exc.args = (f"level {level}: {exc}",)
            raise

        dof = 2 * mesh.n_vertices + mesh.n_triangles
        eta = indicators.global_eta if config.estimator == "residual" else eta_P

        row = LevelRow(level=level, dof=dof, eta=eta, theta_osc=indicators.global_theta)
        if problem.has_exact:
            err = energy_error(solution, problem, mesh)
            row.exact_error = err.total
            row.effectivity = eta / err.total if err.total > 0.0 else None
        positive = indicators.eta_K > 0.0
        ratio = eta_PK[positive] / indicators.eta_K[positive]
        row.extras = {
            "eta_residual": indicators.global_eta,
            "eta_poisson": eta_P,
            "ratio_min": float(ratio.min()) if len(ratio) else None,
            "ratio_max": float(ratio.max()) if len(ratio) else None,
            "pressure_mean_residual": pressure_residual,
            "n_triangles": mesh.n_triangles,
            "n_vertices": mesh.n_vertices,
            "boundary_g_max": float(np.abs(system.dirichlet_values).max(initial=0.0)),
        }
        rows.append(row)
        if keep_meshes:
            meshes.append((mesh, solution, indicators, eta_PK))

        if dof >= config.max_dof:
            break
        if config.refinement == "uniform":
            marked = MarkedSet(np.arange(mesh.n_triangles))
        else:
            eta_sq = indicators.eta_K**2 if config.estimator == "residual" else eta_PK**2
            marked = mark_dorfler(eta_sq, config.theta)
            if len(marked) == 0:
                break
        mesh = refine_rgb(mesh, marked)

    table = ConvergenceTable(rows=rows)
    if len(rows) >= 2:
        compute_rates(table)
    if keep_meshes:
        table.meshes = meshes
    return table


def compute_rates(table: ConvergenceTable) -> ConvergenceTable:
    """Fill per-level rates and least-squares tail rates.

    The per-level rate is -log(e_l / e_{l-1}) / log(N_l / N_{l-1}) on the
    exact error when available, otherwise on the estimated error. Tail rates
    fit the last four rows.
    """
    rows = table.rows
    if len(rows) < 2:
        raise ValueError("need at least two levels to compute rates")
    have_exact = all(r.exact_error is not None for r in rows)
    series = [r.exact_error if have_exact else r.eta for r in rows]
    dofs = [r.dof for r in rows]
    for i in range(1, len(rows)):
        if series[i] > 0.0 and series[i - 1] > 0.0:
            rows[i].rate = -np.log(series[i] / series[i - 1]) / np.log(dofs[i] / dofs[i - 1])

    def tail(values) -> Optional[float]:
        pts = [(n, v) for n, v in zip(dofs, values) if v and v > 0.0]
        if len(pts) < 2:
            return None
        pts = pts[-4:]
        slope = np.polyfit(np.log([n for n, _ in pts]), np.log([v for _, v in pts]), 1)[0]
        return float(-slope)

    table.tail_rate_estimated = tail([r.eta for r in rows])
    table.tail_rate_exact = tail([r.exact_error for r in rows]) if have_exact else None
    return table


def emit_csv(table: ConvergenceTable, path) -> None:
    """Write the table: absent fields become empty cells, floats get 12
    significant digits, LF line endings."""
    if not table.rows:
        raise ValueError("cannot emit an empty table")

    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return f"{v:.12g}"

    with open(path, "w", newline="\n") as fh:
        fh.write("level,dof,eta,theta_osc,exact_error,effectivity,rate\n")
        for r in table.rows:
            fields = [r.level, r.dof, r.eta, r.theta_osc, r.exact_error, r.effectivity, r.rate]
            fh.write(",".join(cell(v) for v in fields) + "\n")
