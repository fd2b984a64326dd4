"""Assembly of the locally stabilised P1-P0 saddle-point system.

Blocks: displacement stiffness A (epsilon form, optionally minus the
mu-weighted div-div term), divergence coupling Bt, pressure "mass" C scaled by
1/kappa, and the macroelement pressure-jump stabilisation S. Displacement dofs
are interleaved: vertex i carries dofs 2i (x) and 2i+1 (y).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .basis import quadrature_rule
from .errors import MacroPartitionError
from .mesh import EdgeTopology, MacroPartition, Mesh

__all__ = [
    "HERRMANN",
    "HYDROSTATIC",
    "FORMULATIONS",
    "MaterialParams",
    "SaddleSystem",
    "ReducedSystem",
    "material_from_engineering",
    "material_from_lame",
    "assemble_saddle_system",
    "assemble_stabilisation",
    "apply_dirichlet",
    "dump_system",
]

HERRMANN = "herrmann"
HYDROSTATIC = "hydrostatic"
FORMULATIONS = (HERRMANN, HYDROSTATIC)


def _check_formulation(formulation: str) -> str:
    f = formulation.strip().lower()
    if f not in FORMULATIONS:
        raise ValueError(f"unknown formulation {formulation!r}; use one of {FORMULATIONS}")
    return f


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic material with the auxiliary-pressure coefficient kappa.

    kappa = lam for the Herrmann formulation, mu + lam for the Hydrostatic one.
    """

    E: float
    nu: float
    mu: float
    lam: float
    kappa: float
    formulation: str


def material_from_engineering(E: float, nu: float, formulation: str) -> MaterialParams:
    """Material from Young's modulus and Poisson ratio.

    mu = E / (2 (1 + nu)), lam = E nu / ((1 + nu)(1 - 2 nu)). The
    incompressible limit nu = 1/2 makes the system singular and is rejected.
    """
    formulation = _check_formulation(formulation)
    if E <= 0.0:
        raise ValueError("Young's modulus must be positive")
    if not 0.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (0, 1/2); got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    kappa = lam if formulation == HERRMANN else mu + lam
    return MaterialParams(E=E, nu=nu, mu=mu, lam=lam, kappa=kappa, formulation=formulation)


def material_from_lame(mu: float, nu: float, formulation: str) -> MaterialParams:
    """Material from the shear modulus and Poisson ratio (E = 2 mu (1 + nu))."""
    if mu <= 0.0:
        raise ValueError("shear modulus must be positive")
    return material_from_engineering(2.0 * mu * (1.0 + nu), nu, formulation)


@dataclass(frozen=True)
class SaddleSystem:
    """Assembled blocks of [[A, Bt], [Bt^T, -(C + S)]] plus Dirichlet data."""

    A: sp.csr_matrix  # (2 nv, 2 nv)
    Bt: sp.csr_matrix  # (2 nv, nt)
    C_diag: np.ndarray  # (nt,) entries area_K / kappa
    S: sp.csr_matrix  # (nt, nt)
    rhs_u: np.ndarray  # (2 nv,)
    rhs_p: np.ndarray  # (nt,)
    dirichlet_dofs: np.ndarray  # displacement dof indices on the boundary
    dirichlet_values: np.ndarray  # prescribed values, same order

    @property
    def n_u(self) -> int:
        return self.A.shape[0]

    @property
    def n_p(self) -> int:
        return len(self.C_diag)


@dataclass(frozen=True)
class ReducedSystem:
    """Dirichlet-eliminated system K x = b with bookkeeping to re-expand."""

    K: sp.csc_matrix
    b: np.ndarray
    interior_dofs: np.ndarray  # displacement dofs kept, ascending
    n_u: int
    n_p: int
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray


def assemble_stabilisation(
    topology: EdgeTopology, macros: MacroPartition, mu: float
) -> sp.csr_matrix:
    """Pressure-jump stabilisation over macroelement-interior edges.

    Each edge E in Gamma_M between triangles K1, K2 adds
    (h_E^2 / (2 mu)) [[1, -1], [-1, 1]] to the pressure dofs (K1, K2).
    """
    nt = topology.tri_edges.shape[0]
    edges = macros.stab_edges
    if len(edges) and topology.is_boundary[edges].any():
        bad = edges[topology.is_boundary[edges]][0]
        raise MacroPartitionError(f"macro-interior edge {bad} lies on the boundary")
    if len(edges) == 0:
        return sp.csr_matrix((nt, nt))
    k1 = topology.edge_triangles[edges, 0]
    k2 = topology.edge_triangles[edges, 1]
    w = topology.edge_length[edges] ** 2 / (2.0 * mu)
    rows = np.concatenate([k1, k2, k1, k2])
    cols = np.concatenate([k1, k2, k2, k1])
    vals = np.concatenate([w, w, -w, -w])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nt, nt)).tocsr()


def assemble_saddle_system(
    mesh: Mesh,
    topology: EdgeTopology,
    macros: MacroPartition,
    params: MaterialParams,
    body_force,
    boundary_data,
) -> SaddleSystem:
    """Assemble all blocks of the stabilised system.

    `body_force` and `boundary_data` map an (m, 2) array of points to an
    (m, 2) array of values. Dirichlet data is the nodal interpolant of
    `boundary_data` at boundary vertices.
    """
    areas, grads = kernels.tri_geometry(mesh.vertices, mesh.triangles)
    if np.any(areas <= 0.0):
        bad = int(np.argmax(areas <= 0.0))
        raise ValueError(f"triangle {bad} has non-positive area")
    nt = mesh.n_triangles
    nv = mesh.n_vertices
    two_mu = 2.0 * params.mu
    divdiv = params.mu if params.formulation == HYDROSTATIC else 0.0

    K_loc = kernels.local_stiffness(areas, grads, two_mu, divdiv)
    dofs = np.empty((nt, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    A = sp.coo_matrix((K_loc.ravel(), (rows, cols)), shape=(2 * nv, 2 * nv)).tocsr()

    # Bt[dof, K] = b(phi_dof, chi_K) = -area_K * d_dof
    d = np.empty((nt, 6))
    d[:, 0::2] = grads[:, :, 0]
    d[:, 1::2] = grads[:, :, 1]
    bt_vals = (-areas[:, None] * d).ravel()
    bt_rows = dofs.ravel()
    bt_cols = np.repeat(np.arange(nt), 6)
    Bt = sp.coo_matrix((bt_vals, (bt_rows, bt_cols)), shape=(2 * nv, nt)).tocsr()

    C_diag = areas / params.kappa
    S = assemble_stabilisation(topology, macros, params.mu)

    # load vector with the degree-2 rule
    rule = quadrature_rule(2)
    pts = np.einsum("qi,tid->qtd", rule.points, mesh.vertices[mesh.triangles])
    fvals = np.stack([body_force(pts[q]) for q in range(len(rule.weights))])  # (nq, nt, 2)
    # rhs contribution of local vertex i: area * sum_q w_q f(x_q) lam_i(q)
    contrib = np.einsum("q,qi,qtc->tic", rule.weights, rule.points, fvals) * areas[:, None, None]
    rhs_u = np.zeros(2 * nv)
    np.add.at(rhs_u, 2 * mesh.triangles, contrib[:, :, 0])
    np.add.at(rhs_u, 2 * mesh.triangles + 1, contrib[:, :, 1])

    bd_verts = np.flatnonzero(mesh.vertex_on_boundary)
    g_vals = boundary_data(mesh.vertices[bd_verts])
    dirichlet_dofs = np.empty(2 * len(bd_verts), dtype=np.int64)
    dirichlet_dofs[0::2] = 2 * bd_verts
    dirichlet_dofs[1::2] = 2 * bd_verts + 1
    dirichlet_values = np.asarray(g_vals, dtype=float).reshape(len(bd_verts), 2).ravel()

    return SaddleSystem(
        A=A,
        Bt=Bt,
        C_diag=C_diag,
        S=S,
        rhs_u=rhs_u,
        rhs_p=np.zeros(nt),
        dirichlet_dofs=dirichlet_dofs,
        dirichlet_values=dirichlet_values,
    )


def apply_dirichlet(system: SaddleSystem) -> ReducedSystem:
    """Eliminate boundary displacement dofs symmetrically.

    Interior rhs picks up -A[int, bd] g and the pressure rhs -Bt[bd, :]^T g;
    no pressure dof is eliminated (uniqueness comes from the C block).
    """
    n_u = system.n_u
    bd = system.dirichlet_dofs
    g = system.dirichlet_values
    mask = np.ones(n_u, dtype=bool)
    mask[bd] = False
    interior = np.flatnonzero(mask)

    A_ii = system.A[interior][:, interior]
    A_ib = system.A[interior][:, bd]
    Bt_i = system.Bt[interior]
    Bt_b = system.Bt[bd]

    rhs_ui = system.rhs_u[interior] - A_ib @ g
    rhs_p = system.rhs_p - Bt_b.T @ g

    Cs = sp.diags(system.C_diag) + system.S
    K = sp.bmat([[A_ii, Bt_i], [Bt_i.T, -Cs]], format="csc")
    b = np.concatenate([rhs_ui, rhs_p])
    return ReducedSystem(
        K=K,
        b=b,
        interior_dofs=interior,
        n_u=n_u,
        n_p=system.n_p,
        dirichlet_dofs=bd,
        dirichlet_values=g,
    )


def dump_system(system: SaddleSystem, directory) -> None:
    """Write the assembled blocks as MatrixMarket coordinate files."""
    import pathlib

    import scipy.io as sio

    out = pathlib.Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    sio.mmwrite(out / "A.mtx", system.A)
    sio.mmwrite(out / "Bt.mtx", system.Bt)
    sio.mmwrite(out / "C.mtx", sp.diags(system.C_diag))
    sio.mmwrite(out / "S.mtx", system.S)
