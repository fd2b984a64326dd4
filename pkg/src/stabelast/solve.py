"""Direct solution of the reduced stabilised saddle-point system."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import MaterialParams, ReducedSystem, SaddleSystem, apply_dirichlet
from .errors import SolverError
from .mesh import EdgeTopology, Mesh

__all__ = ["MixedSolution", "solve_direct", "solve_reduced", "pressure_mean_check"]

RESIDUAL_TOL = 1e-9
PIVOT_WARN_RATIO = 1e-12


@dataclass(frozen=True)
class MixedSolution:
    """P1 nodal displacement and P0 element pressure on one mesh."""

    displacement: np.ndarray  # (nv, 2), includes prescribed boundary values
    pressure: np.ndarray  # (nt,)


def solve_reduced(reduced: ReducedSystem) -> MixedSolution:
    """Factorise and solve; warns on small pivots, raises SolverError when the
    factorisation breaks down (nu too close to 1/2 for the tolerance).

    The system is symmetrically equilibrated first: the blocks differ in
    scale by the size of kappa, and without scaling the pivot check cannot
    tell ill-scaling from near-singularity.
    """
    from scipy.sparse import diags

    K = reduced.K
    row_max = np.maximum(np.abs(K).max(axis=1).toarray().ravel(), 1e-300)
    d = 1.0 / np.sqrt(row_max)
    D = diags(d)
    Ks = (D @ K @ D).tocsc()
    try:
        lu = splu(Ks)
    except RuntimeError as exc:  # scipy signals exactly singular this way
        raise SolverError(f"direct factorisation failed: {exc}") from exc

    udiag = np.abs(lu.U.diagonal())
    if udiag.min() < PIVOT_WARN_RATIO * udiag.max():
        warnings.warn(
            "near-singular factorisation: pivot ratio "
            f"{udiag.min() / udiag.max():.2e} below {PIVOT_WARN_RATIO:.0e}",
            stacklevel=2,
        )

    b = reduced.b
    x = d * lu.solve(d * b)
    if not np.all(np.isfinite(x)):
        raise SolverError("factorisation produced non-finite values")
    bnorm = np.linalg.norm(b)
    if bnorm > 0.0:
        # iterative refinement keeps the residual contract cheap
        for _ in range(2):
            r = b - K @ x
            if np.linalg.norm(r) <= RESIDUAL_TOL * bnorm:
                break
            x = x + d * lu.solve(d * r)
        resid = np.linalg.norm(b - K @ x) / bnorm
        if resid > RESIDUAL_TOL:
            warnings.warn(f"solver residual {resid:.2e} exceeds {RESIDUAL_TOL:.0e}", stacklevel=2)

    n_i = len(reduced.interior_dofs)
    u_flat = np.zeros(reduced.n_u)
    u_flat[reduced.interior_dofs] = x[:n_i]
    u_flat[reduced.dirichlet_dofs] = reduced.dirichlet_values
    return MixedSolution(displacement=u_flat.reshape(-1, 2), pressure=x[n_i:])


def solve_direct(system: SaddleSystem) -> MixedSolution:
    """Eliminate Dirichlet dofs and solve the indefinite system directly."""
    return solve_reduced(apply_dirichlet(system))


def pressure_mean_check(
    solution: MixedSolution,
    mesh: Mesh,
    topology: EdgeTopology,
    params: MaterialParams,
) -> float:
    """Residual of the discrete pressure-mean identity.

    Returns |int_Omega p_h + kappa int_dOmega g_h . n ds| where g_h is the
    interpolated boundary displacement carried by the solution; holds to
    solver accuracy because the stabilisation annihilates constant pressures.
    """
    p = solution.pressure
    verts = mesh.vertices[mesh.triangles]
    d1 = verts[:, 1] - verts[:, 0]
    d2 = verts[:, 2] - verts[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    p_int = float(np.dot(p, areas))

    bd = np.flatnonzero(topology.is_boundary)
    ends = topology.edges[bd]
    g_sum = solution.displacement[ends[:, 0]] + solution.displacement[ends[:, 1]]
    # trapezoid rule is exact for the P1 trace; normals point outward
    flux = 0.5 * topology.edge_length[bd] * np.sum(g_sum * topology.edge_normal[bd], axis=1)
    return abs(p_int + params.kappa * float(flux.sum()))
