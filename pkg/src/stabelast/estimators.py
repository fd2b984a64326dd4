"""A posteriori error estimation: residual indicators eta_K with data
oscillation Theta_K, and the local-problem indicator eta_{P,K} from small
bubble-space solves per element.

All residuals of the P1-P0 pair are piecewise constant, so every norm is a
closed form; only the data oscillation needs quadrature.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .assembly import HYDROSTATIC, MaterialParams
from .basis import quadrature_rule
from .errors import UnsupportedElementError
from .mesh import EdgeTopology, Mesh
from .solve import MixedSolution

__all__ = [
    "EstimatorWeights",
    "ElementResiduals",
    "ErrorIndicators",
    "estimator_weights",
    "project_load",
    "element_residuals",
    "residual_indicator",
    "poisson_indicator",
    "dump_indicators",
]


@dataclass(frozen=True)
class EstimatorWeights:
    rho_K: np.ndarray  # (nt,) h_K (2 mu)^{-1/2}
    rho_E: np.ndarray  # (ne,) h_E (2 mu)^{-1}
    rho_d: float  # 1 / (kappa^{-1} + (2 mu)^{-1})


@dataclass(frozen=True)
class ElementResiduals:
    R_vec: np.ndarray  # (nt, 2) interior residual f_h|_K
    R_div: np.ndarray  # (nt,) div u_h + p_h / kappa
    R_edge: np.ndarray  # (ne, 2) 1/2 (sigma_1 - sigma_2) n, zero on boundary


@dataclass(frozen=True)
class ErrorIndicators:
    eta_RK: np.ndarray
    eta_EK: np.ndarray
    eta_JK: np.ndarray
    eta_K: np.ndarray
    theta_K: np.ndarray
    global_eta: float
    global_theta: float


def estimator_weights(mesh: Mesh, topology: EdgeTopology, params: MaterialParams) -> EstimatorWeights:
    two_mu = 2.0 * params.mu
    h_K = topology.edge_length[topology.tri_edges].max(axis=1)  # element diameter
    return EstimatorWeights(
        rho_K=h_K / np.sqrt(two_mu),
        rho_E=topology.edge_length / two_mu,
        rho_d=1.0 / (1.0 / params.kappa + 1.0 / two_mu),
    )


def project_load(body_force, mesh: Mesh, rho_K) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant L2 projection f_h of f and the oscillation Theta_K.

    Theta_K = rho_K ||f - f_h||_{0,K}; both use the degree-5 rule.
    """
    rule = quadrature_rule(5)
    areas, _ = kernels.tri_geometry(mesh.vertices, mesh.triangles)
    pts = np.einsum("qi,tid->qtd", rule.points, mesh.vertices[mesh.triangles])
    nq, nt = pts.shape[0], pts.shape[1]
    fv = body_force(pts.reshape(nq * nt, 2)).reshape(nq, nt, 2)
    f_h = np.einsum("q,qtc->tc", rule.weights, fv)
    diff = fv - f_h[None]
    osc_sq = np.einsum("q,qtc,qtc->t", rule.weights, diff, diff) * areas
    return f_h, np.asarray(rho_K) * np.sqrt(osc_sq)


def _stress_tensors(solution: MixedSolution, mesh: Mesh, params: MaterialParams):
    areas, grads = kernels.tri_geometry(mesh.vertices, mesh.triangles)
    uv = solution.displacement[mesh.triangles]
    grad_u = np.einsum("tlc,tld->tcd", uv, grads)
    div = grad_u[:, 0, 0] + grad_u[:, 1, 1]
    eps = 0.5 * (grad_u + grad_u.transpose(0, 2, 1))
    sigma = 2.0 * params.mu * eps
    if params.formulation == HYDROSTATIC:
        sigma[:, 0, 0] -= params.mu * div
        sigma[:, 1, 1] -= params.mu * div
    sigma[:, 0, 0] -= solution.pressure
    sigma[:, 1, 1] -= solution.pressure
    return sigma, div, areas


def element_residuals(
    solution: MixedSolution,
    f_h: np.ndarray,
    params: MaterialParams,
    mesh: Mesh,
    topology: EdgeTopology,
) -> ElementResiduals:
    """Constant element and edge residuals of a mixed solution.

    The edge residual uses the fixed edge normal pointing away from
    edge_triangles[:, 0]; the value is orientation-independent.
    """
    if len(solution.pressure) != mesh.n_triangles:
        raise ValueError("solution does not match the mesh")
    sigma, div, _ = _stress_tensors(solution, mesh, params)
    R_div = div + solution.pressure / params.kappa

    R_edge = np.zeros((topology.n_edges, 2))
    interior = ~topology.is_boundary
    t1 = topology.edge_triangles[interior, 0]
    t2 = topology.edge_triangles[interior, 1]
    jump = sigma[t1] - sigma[t2]
    R_edge[interior] = 0.5 * np.einsum("ecd,ed->ec", jump, topology.edge_normal[interior])
    return ElementResiduals(R_vec=np.asarray(f_h, dtype=float), R_div=R_div, R_edge=R_edge)


def residual_indicator(
    residuals: ElementResiduals,
    weights: EstimatorWeights,
    topology: EdgeTopology,
    areas: np.ndarray,
    theta_K: np.ndarray,
) -> ErrorIndicators:
    """Per-element eta_K with components and the global sums.

    Each interior edge contributes its full rho_E ||R_E||^2 to both adjacent
    elements; the 1/2 inside R_E accounts for the sharing.
    """
    eta_RK_sq = weights.rho_K**2 * np.sum(residuals.R_vec**2, axis=1) * areas
    eta_JK_sq = weights.rho_d * residuals.R_div**2 * areas

    edge_term = weights.rho_E * np.sum(residuals.R_edge**2, axis=1) * topology.edge_length
    eta_EK_sq = np.zeros(len(areas))
    interior = ~topology.is_boundary
    np.add.at(eta_EK_sq, topology.edge_triangles[interior, 0], edge_term[interior])
    np.add.at(eta_EK_sq, topology.edge_triangles[interior, 1], edge_term[interior])

    eta_K_sq = eta_RK_sq + eta_EK_sq + eta_JK_sq
    theta_K = np.asarray(theta_K, dtype=float)
    return ErrorIndicators(
        eta_RK=np.sqrt(eta_RK_sq),
        eta_EK=np.sqrt(eta_EK_sq),
        eta_JK=np.sqrt(eta_JK_sq),
        eta_K=np.sqrt(eta_K_sq),
        theta_K=theta_K,
        global_eta=float(np.sqrt(eta_K_sq.sum())),
        global_theta=float(np.sqrt(np.sum(theta_K**2))),
    )


def poisson_indicator(
    residuals: ElementResiduals,
    weights: EstimatorWeights,
    mesh: Mesh,
    topology: EdgeTopology,
    params: MaterialParams,
) -> tuple[np.ndarray, float]:
    """Local-problem indicator: per-element eta_{P,K} and the global value.

    Solves, per element and displacement component, a small SPD system over
    the interior-edge bubbles plus the cubic bubble, and adds the explicit
    pressure part rho_d ||div u_h + p_h / kappa||^2.
    """
    areas, grads = kernels.tri_geometry(mesh.vertices, mesh.triangles)
    rule = quadrature_rule(5)
    energy, nbasis = kernels.local_poisson_energies(
        areas,
        grads,
        topology.tri_edges,
        ~topology.is_boundary,
        topology.edge_length,
        residuals.R_vec,
        residuals.R_edge,
        2.0 * params.mu,
        rule.points,
        rule.weights,
    )
    if np.any(nbasis == 0):
        bad = int(np.argmax(nbasis == 0))
        raise UnsupportedElementError(
            f"triangle {bad} has no interior edge; no local problem space exists"
        )
    eta_sq = energy + weights.rho_d * residuals.R_div**2 * areas
    # the local solves are SPD, but guard roundoff before the square root
    eta_sq = np.maximum(eta_sq, 0.0)
    return np.sqrt(eta_sq), float(np.sqrt(eta_sq.sum()))


def dump_indicators(path, indicators: ErrorIndicators, eta_PK: np.ndarray) -> None:
    """Per-element indicator CSV."""
    with open(path, "w", newline="\n") as fh:
        fh.write("triangle_id,eta_RK,eta_EK,eta_JK,theta_K,eta_K,eta_PK\n")
        for t in range(len(indicators.eta_K)):
            fh.write(
                f"{t},{indicators.eta_RK[t]:.12g},{indicators.eta_EK[t]:.12g},"
                f"{indicators.eta_JK[t]:.12g},{indicators.theta_K[t]:.12g},"
                f"{indicators.eta_K[t]:.12g},{eta_PK[t]:.12g}\n"
            )
