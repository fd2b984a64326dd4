import numpy as np
import pytest

import stabelast as se


@pytest.fixture
def square_mesh():
    """32-triangle structured unit square (level 1)."""
    return se.generate_initial_mesh("unit_square", 1)


@pytest.fixture
def square_mesh_fine():
    """512-triangle structured unit square (level 3, the N0=1090 grid)."""
    return se.generate_initial_mesh("unit_square", 3)


@pytest.fixture
def two_triangle_mesh():
    """The raw 2-triangle split of the unit square (root triangles)."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return se.Mesh(
        vertices=verts,
        triangles=tris,
        vertex_on_boundary=np.ones(4, dtype=bool),
        parent=np.full(2, -1, dtype=np.int64),
        kind=np.zeros(2, dtype=np.int8),
    )


def solve_problem(problem_id, formulation, level=1, nu=None, mu=None, E=None):
    """Assemble and solve one level; returns the pieces tests poke at."""
    mat = se.default_material(problem_id, formulation, nu=nu, mu=mu, E=E)
    prob = se.make_problem(problem_id, mat)
    mesh = se.generate_initial_mesh(prob.domain, level)
    topo = se.build_edge_topology(mesh)
    macros = se.derive_macroelements(mesh, topo)
    system = se.assemble_saddle_system(mesh, topo, macros, mat, prob.body_force, prob.boundary_data)
    solution = se.solve_direct(system)
    return mat, prob, mesh, topo, macros, system, solution
