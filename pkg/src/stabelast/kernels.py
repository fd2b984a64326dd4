"""Hot per-element kernels with two interchangeable backends.

The numba backend JIT-compiles plain loops; the numpy backend is a vectorised
fallback. Selection: STABELAST_BACKEND=numpy forces the fallback,
STABELAST_BACKEND=numba requires numba, unset prefers numba when importable.
Both backends produce the same numbers up to floating-point reassociation.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAVE_NUMBA = False

__all__ = [
    "HAVE_NUMBA",
    "active_backend",
    "local_stiffness",
    "local_poisson_energies",
]

_ENV_VAR = "STABELAST_BACKEND"


def active_backend() -> str:
    """Resolve the kernel backend from the environment ("numba" or "numpy")."""
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError(f"{_ENV_VAR}=numba but numba is not importable")
        return "numba"
    if choice:
        raise RuntimeError(f"unrecognised {_ENV_VAR}={choice!r}; use 'numba' or 'numpy'")
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# geometry (cheap; numpy only)


def tri_geometry(vertices, triangles):
    """Areas and barycentric-coordinate gradients per triangle.

    Returns (areas (nt,), grads (nt, 3, 2)) with grads[t, i] the constant
    gradient of the barycentric coordinate of local vertex i.
    """
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g = np.empty((len(triangles), 3, 2))
    g[:, 0, 0] = p[:, 1, 1] - p[:, 2, 1]
    g[:, 0, 1] = p[:, 2, 0] - p[:, 1, 0]
    g[:, 1, 0] = p[:, 2, 1] - p[:, 0, 1]
    g[:, 1, 1] = p[:, 0, 0] - p[:, 2, 0]
    g[:, 2, 0] = p[:, 0, 1] - p[:, 1, 1]
    g[:, 2, 1] = p[:, 1, 0] - p[:, 0, 0]
    g /= area2[:, None, None]
    return 0.5 * area2, g


# ---------------------------------------------------------------------------
# local stiffness: 6x6 displacement blocks per triangle
#
# A_loc = 2 mu |K| (eps(phi_i) : eps(phi_j)) - divdiv_coeff |K| d_i d_j
# with d the elementwise divergence vector (divdiv_coeff = mu selects the
# hydrostatic form, 0 the epsilon-only form).


def _local_stiffness_numpy(areas, grads, two_mu, divdiv_coeff):
    gx = grads[:, :, 0]
    gy = grads[:, :, 1]
    nt = len(areas)
    K = np.empty((nt, 6, 6))
    xx = gx[:, :, None] * gx[:, None, :]
    yy = gy[:, :, None] * gy[:, None, :]
    K[:, 0::2, 0::2] = xx + 0.5 * yy
    K[:, 1::2, 1::2] = yy + 0.5 * xx
    K[:, 0::2, 1::2] = 0.5 * gy[:, :, None] * gx[:, None, :]
    K[:, 1::2, 0::2] = 0.5 * gx[:, :, None] * gy[:, None, :]
    K *= (two_mu * areas)[:, None, None]
    if divdiv_coeff != 0.0:
        d = np.empty((nt, 6))
        d[:, 0::2] = gx
        d[:, 1::2] = gy
        K -= (divdiv_coeff * areas)[:, None, None] * d[:, :, None] * d[:, None, :]
    return K


def _local_stiffness_loops(areas, grads, two_mu, divdiv_coeff):
    nt = len(areas)
    K = np.empty((nt, 6, 6))
    for t in range(nt):
        a = areas[t]
        for i in range(3):
            gxi = grads[t, i, 0]
            gyi = grads[t, i, 1]
            for j in range(3):
                gxj = grads[t, j, 0]
                gyj = grads[t, j, 1]
                K[t, 2 * i, 2 * j] = two_mu * a * (gxi * gxj + 0.5 * gyi * gyj)
                K[t, 2 * i, 2 * j + 1] = two_mu * a * 0.5 * gyi * gxj
                K[t, 2 * i + 1, 2 * j] = two_mu * a * 0.5 * gxi * gyj
                K[t, 2 * i + 1, 2 * j + 1] = two_mu * a * (gyi * gyj + 0.5 * gxi * gxj)
        if divdiv_coeff != 0.0:
            for i in range(6):
                di = grads[t, i // 2, i % 2]
                for j in range(6):
                    dj = grads[t, j // 2, j % 2]
                    K[t, i, j] -= divdiv_coeff * a * di * dj
    return K


# ---------------------------------------------------------------------------
# local bubble-space Poisson solves for the error estimator
#
# Per triangle: basis = (edge bubble 4 lam_a lam_b per interior edge, then the
# cubic bubble 27 lam0 lam1 lam2). Solves the two component problems
#   2 mu (grad e, grad v)_K = (R_K, v)_K - sum_E <R_E, v>_E
# and returns 2 mu ||grad e||_{0,K}^2 (= c . r for M c = r) plus the number of
# basis functions used (0 flags a triangle with no interior edge).
#
# Edge integrals: a bubble integrates to (2/3) h_E over its own edge and
# vanishes on every other edge, so only the own-edge term survives.

_EDGE_A = np.array([1, 2, 0], dtype=np.int64)  # local edge e joins vertices
_EDGE_B = np.array([2, 0, 1], dtype=np.int64)  # _EDGE_A[e], _EDGE_B[e]


def _local_poisson_numpy(
    areas, grads, tri_edges, edge_interior, edge_length, r_vec, r_edge, two_mu, qpts, qwts
):
    nt = len(areas)
    energy = np.zeros(nt)
    nbasis = np.zeros(nt, dtype=np.int64)
    masks = edge_interior[tri_edges]  # (nt, 3)
    pattern = masks[:, 0] * 1 + masks[:, 1] * 2 + masks[:, 2] * 4
    for pat in range(1, 8):
        rows = np.flatnonzero(pattern == pat)
        if len(rows) == 0:
            continue
        loc = np.flatnonzero([pat & 1, pat & 2, pat & 4])
        nb = len(loc)
        n = nb + 1
        nbasis[rows] = n
        m = len(rows)
        nq = len(qwts)
        # stacked bubble gradients at quadrature points: (m, nq, n, 2)
        lam = qpts  # (nq, 3)
        g = grads[rows]  # (m, 3, 2)
        gr = np.empty((m, nq, n, 2))
        vals = np.empty((nq, n))
        for k in range(nb):
            e = loc[k]
            a, b = _EDGE_A[e], _EDGE_B[e]
            vals[:, k] = 4.0 * lam[:, a] * lam[:, b]
            gr[:, :, k, :] = 4.0 * (
                lam[None, :, a, None] * g[:, None, b, :]
                + lam[None, :, b, None] * g[:, None, a, :]
            )
        vals[:, nb] = 27.0 * lam[:, 0] * lam[:, 1] * lam[:, 2]
        gr[:, :, nb, :] = 27.0 * (
            (lam[:, 1] * lam[:, 2])[None, :, None] * g[:, None, 0, :]
            + (lam[:, 0] * lam[:, 2])[None, :, None] * g[:, None, 1, :]
            + (lam[:, 0] * lam[:, 1])[None, :, None] * g[:, None, 2, :]
        )
        M = (two_mu * areas[rows])[:, None, None] * np.einsum(
            "q,mqid,mqjd->mij", qwts, gr, gr
        )
        int_phi = areas[rows, None] * (qwts @ vals)  # (m, n)
        rhs = r_vec[rows, None, :] * int_phi[:, :, None]  # (m, n, 2)
        eids = tri_edges[rows][:, loc]  # (m, nb)
        rhs[:, :nb, :] -= (2.0 / 3.0) * edge_length[eids][:, :, None] * r_edge[eids]
        sol = np.linalg.solve(M, rhs)
        energy[rows] = np.einsum("mnc,mnc->m", sol, rhs)
    return energy, nbasis


def _local_poisson_loops(
    areas, grads, tri_edges, edge_interior, edge_length, r_vec, r_edge, two_mu, qpts, qwts
):
    nt = len(areas)
    nq = len(qwts)
    energy = np.zeros(nt)
    nbasis = np.zeros(nt, dtype=np.int64)
    edge_a = np.array([1, 2, 0], dtype=np.int64)
    edge_b = np.array([2, 0, 1], dtype=np.int64)
    for t in range(nt):
        loc = np.empty(3, dtype=np.int64)
        nb = 0
        for e in range(3):
            if edge_interior[tri_edges[t, e]]:
                loc[nb] = e
                nb += 1
        if nb == 0:
            continue
        n = nb + 1
        nbasis[t] = n
        M = np.zeros((n, n))
        int_phi = np.zeros(n)
        gb = np.empty((n, 2))
        for q in range(nq):
            l0, l1, l2 = qpts[q, 0], qpts[q, 1], qpts[q, 2]
            lam = qpts[q]
            w = qwts[q] * areas[t]
            for k in range(nb):
                e = loc[k]
                a = edge_a[e]
                b = edge_b[e]
                gb[k, 0] = 4.0 * (lam[a] * grads[t, b, 0] + lam[b] * grads[t, a, 0])
                gb[k, 1] = 4.0 * (lam[a] * grads[t, b, 1] + lam[b] * grads[t, a, 1])
                int_phi[k] += w * 4.0 * lam[a] * lam[b]
            gb[nb, 0] = 27.0 * (
                l1 * l2 * grads[t, 0, 0] + l0 * l2 * grads[t, 1, 0] + l0 * l1 * grads[t, 2, 0]
            )
            gb[nb, 1] = 27.0 * (
                l1 * l2 * grads[t, 0, 1] + l0 * l2 * grads[t, 1, 1] + l0 * l1 * grads[t, 2, 1]
            )
            int_phi[nb] += w * 27.0 * l0 * l1 * l2
            for i in range(n):
                for j in range(n):
                    M[i, j] += two_mu * w * (gb[i, 0] * gb[j, 0] + gb[i, 1] * gb[j, 1])
        rhs = np.zeros((n, 2))
        for i in range(n):
            rhs[i, 0] = r_vec[t, 0] * int_phi[i]
            rhs[i, 1] = r_vec[t, 1] * int_phi[i]
        for k in range(nb):
            eid = tri_edges[t, loc[k]]
            scale = (2.0 / 3.0) * edge_length[eid]
            rhs[k, 0] -= scale * r_edge[eid, 0]
            rhs[k, 1] -= scale * r_edge[eid, 1]
        sol = np.linalg.solve(M, rhs)
        acc = 0.0
        for i in range(n):
            acc += sol[i, 0] * rhs[i, 0] + sol[i, 1] * rhs[i, 1]
        energy[t] = acc
    return energy, nbasis


if HAVE_NUMBA:
    _local_stiffness_numba = numba.njit(cache=True)(_local_stiffness_loops)
    _local_poisson_numba = numba.njit(cache=True)(_local_poisson_loops)


def local_stiffness(areas, grads, two_mu, divdiv_coeff=0.0):
    """(nt, 6, 6) local displacement blocks; see module docstring for backends."""
    if active_backend() == "numba":
        return _local_stiffness_numba(areas, grads, float(two_mu), float(divdiv_coeff))
    return _local_stiffness_numpy(areas, grads, float(two_mu), float(divdiv_coeff))


def local_poisson_energies(
    areas, grads, tri_edges, edge_interior, edge_length, r_vec, r_edge, two_mu, qpts, qwts
):
    """Displacement energies 2 mu ||grad e_K||^2 of the local bubble solves.

    Returns (energy (nt,), nbasis (nt,)); nbasis == 0 marks a triangle with no
    interior edge (the caller decides whether that is an error).
    """
    args = (
        np.ascontiguousarray(areas, dtype=np.float64),
        np.ascontiguousarray(grads, dtype=np.float64),
        np.ascontiguousarray(tri_edges, dtype=np.int64),
        np.ascontiguousarray(edge_interior, dtype=np.bool_),
        np.ascontiguousarray(edge_length, dtype=np.float64),
        np.ascontiguousarray(r_vec, dtype=np.float64),
        np.ascontiguousarray(r_edge, dtype=np.float64),
        float(two_mu),
        np.ascontiguousarray(qpts, dtype=np.float64),
        np.ascontiguousarray(qwts, dtype=np.float64),
    )
    if active_backend() == "numba":
        return _local_poisson_numba(*args)
    return _local_poisson_numpy(*args)
