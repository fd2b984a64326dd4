"""Conforming triangular meshes with edge topology, macroelement partitioning,
bulk (Doerfler) marking and red-green-blue refinement.

Meshes are immutable snapshots; refinement returns a new mesh. Every triangle
carries a sibling-group label (`parent`) and the kind of the refinement event
that created it, which is what the macroelement partition is derived from.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MacroPartitionError, MeshTopologyError

__all__ = [
    "Mesh",
    "EdgeTopology",
    "MacroPartition",
    "MarkedSet",
    "KIND_ROOT",
    "KIND_RED",
    "KIND_GREEN",
    "KIND_BLUE",
    "generate_initial_mesh",
    "build_edge_topology",
    "derive_macroelements",
    "mark_dorfler",
    "refine_rgb",
    "triangle_areas",
    "min_angle",
    "write_mesh",
    "read_mesh",
]

KIND_ROOT, KIND_RED, KIND_GREEN, KIND_BLUE = 0, 1, 2, 3
_KIND_NAMES = ("root", "red", "green", "blue")
_KIND_IDS = {name: i for i, name in enumerate(_KIND_NAMES)}

# local edge e is opposite vertex e
_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (nv, 2) float
    triangles: np.ndarray  # (nt, 3) int, counterclockwise
    vertex_on_boundary: np.ndarray  # (nv,) bool
    parent: np.ndarray  # (nt,) int sibling-group label, -1 for root
    kind: np.ndarray  # (nt,) int8, KIND_* of the creating refinement

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


@dataclass(frozen=True)
class EdgeTopology:
    edges: np.ndarray  # (ne, 2) vertex pairs, sorted within each pair
    edge_length: np.ndarray  # (ne,)
    edge_triangles: np.ndarray  # (ne, 2) adjacent triangles, -1 if boundary
    is_boundary: np.ndarray  # (ne,) bool
    tri_edges: np.ndarray  # (nt, 3) edge index opposite each local vertex
    edge_normal: np.ndarray  # (ne, 2) unit normal, away from edge_triangles[:, 0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class MacroPartition:
    macro_of: np.ndarray  # (nt,) macroelement id per triangle
    interior_edges: list  # per macro: np.ndarray of edge ids (Gamma_M)

    @property
    def n_macros(self) -> int:
        return len(self.interior_edges)

    @property
    def stab_edges(self) -> np.ndarray:
        """All macro-interior edges, concatenated."""
        if not self.interior_edges:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.asarray(g, dtype=np.int64) for g in self.interior_edges])


@dataclass(frozen=True)
class MarkedSet:
    marked: np.ndarray  # sorted triangle indices

    def __len__(self) -> int:
        return len(self.marked)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def min_angle(mesh: Mesh) -> float:
    """Smallest interior angle over all triangles, in degrees."""
    p = mesh.vertices[mesh.triangles]
    worst = np.inf
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.sum(a * b, axis=1) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        )
        worst = min(worst, np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))).min())
    return float(worst)


def _base_mesh(domain: str) -> Mesh:
    if domain == "unit_square":
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        tris = np.array([[0, 1, 2], [0, 2, 3]])
    elif domain == "l_shape":
        verts = np.array(
            [
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [0.0, 1.0],
                [-1.0, 0.0],
                [-1.0, 1.0],
                [0.0, -1.0],
                [1.0, -1.0],
            ]
        )
        # each unit square split by the diagonal parallel to (1, 1)
        tris = np.array(
            [
                [0, 1, 2],
                [0, 2, 3],
                [4, 0, 3],
                [4, 3, 5],
                [6, 7, 1],
                [6, 1, 0],
            ]
        )
    else:
        raise ValueError(f"unknown domain {domain!r}; use 'unit_square' or 'l_shape'")
    nv, nt = len(verts), len(tris)
    mesh = Mesh(
        vertices=verts,
        triangles=tris,
        vertex_on_boundary=np.ones(nv, dtype=bool),  # recomputed below
        parent=np.full(nt, -1, dtype=np.int64),
        kind=np.full(nt, KIND_ROOT, dtype=np.int8),
    )
    return _with_boundary_flags(mesh)


def _with_boundary_flags(mesh: Mesh) -> Mesh:
    topo = build_edge_topology(mesh)
    flags = np.zeros(mesh.n_vertices, dtype=bool)
    flags[topo.edges[topo.is_boundary].ravel()] = True
    return Mesh(mesh.vertices, mesh.triangles, flags, mesh.parent, mesh.kind)


def generate_initial_mesh(domain: str, refinement_level: int) -> Mesh:
    """Structured mesh of the unit square or L-shaped domain.

    The base split (2 or 6 right-isosceles triangles) is uniformly
    red-refined `refinement_level + 1` times so that every triangle has a red
    parent and the macroelement partition is defined from the start.
    """
    if refinement_level < 1:
        raise ValueError("refinement_level must be >= 1")
    mesh = _base_mesh(domain)
    for _ in range(refinement_level + 1):
        mesh = refine_rgb(mesh, MarkedSet(np.arange(mesh.n_triangles)))
    return mesh


def build_edge_topology(mesh: Mesh) -> EdgeTopology:
    """Enumerate undirected edges, their adjacency and oriented normals."""
    tris = mesh.triangles
    nt = len(tris)
    raw = np.empty((3 * nt, 2), dtype=np.int64)
    for e, (a, b) in enumerate(_EDGE_VERTS):
        raw[e::3, 0] = tris[:, a]
        raw[e::3, 1] = tris[:, b]
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse, counts = np.unique(
        raw_sorted, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    if counts.max(initial=0) > 2:
        bad = int(np.argmax(counts))
        raise MeshTopologyError(
            f"edge {tuple(edges[bad])} is shared by {counts[bad]} triangles; mesh is not conforming"
        )
    ne = len(edges)
    tri_edges = np.empty((nt, 3), dtype=np.int64)
    tri_edges[:, 0] = inverse[0::3]
    tri_edges[:, 1] = inverse[1::3]
    tri_edges[:, 2] = inverse[2::3]

    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    owner = order // 3  # triangle of each half-edge, grouped by edge
    starts = np.searchsorted(inverse[order], np.arange(ne))
    edge_tris[:, 0] = owner[starts]
    second = counts == 2
    edge_tris[second, 1] = owner[starts[second] + 1]

    vec = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    length = np.linalg.norm(vec, axis=1)
    if np.any(length <= 0.0):
        raise MeshTopologyError("zero-length edge")
    normal = np.column_stack([vec[:, 1], -vec[:, 0]]) / length[:, None]
    # orient away from the first adjacent triangle
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    cent = mesh.vertices[tris[edge_tris[:, 0]]].mean(axis=1)
    flip = np.sum(normal * (cent - mid), axis=1) > 0.0
    normal[flip] *= -1.0

    return EdgeTopology(
        edges=edges,
        edge_length=length,
        edge_triangles=edge_tris,
        is_boundary=counts == 1,
        tri_edges=tri_edges,
        edge_normal=normal,
    )


class _UnionFind:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, i: int) -> int:
        while self.p[i] != i:
            self.p[i] = self.p[self.p[i]]
            i = self.p[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb)] = min(ra, rb)


def derive_macroelements(mesh: Mesh, topology: EdgeTopology | None = None) -> MacroPartition:
    """Partition the triangles into macroelements from their sibling groups.

    Groups that lost members to later refinement are split into edge-connected
    components; a component that ends up as a single triangle is merged into
    the neighbouring macro across its lowest-index interior edge so that every
    macroelement keeps jump-stabilised edges.
    """
    if np.any(mesh.kind == KIND_ROOT):
        bad = int(np.argmax(mesh.kind == KIND_ROOT))
        raise MacroPartitionError(
            f"triangle {bad} has a root parent; refine the mesh before partitioning"
        )
    topo = topology if topology is not None else build_edge_topology(mesh)
    nt = mesh.n_triangles

    uf = _UnionFind(nt)
    interior = ~topo.is_boundary
    e_int = np.flatnonzero(interior)
    t1 = topo.edge_triangles[e_int, 0]
    t2 = topo.edge_triangles[e_int, 1]
    same_group = mesh.parent[t1] == mesh.parent[t2]
    for a, b in zip(t1[same_group], t2[same_group]):
        uf.union(int(a), int(b))

    comp = np.fromiter((uf.find(i) for i in range(nt)), dtype=np.int64, count=nt)

    # merge singleton components into a neighbouring component
    sizes = np.bincount(comp, minlength=nt)
    tri_int_edges = [[] for _ in range(nt)]
    for e, (a, b) in zip(e_int, zip(t1, t2)):
        tri_int_edges[a].append(int(e))
        tri_int_edges[b].append(int(e))
    for t in range(nt):
        root = uf.find(t)
        if sizes[comp[t]] != 1 or not tri_int_edges[t]:
            continue
        e = min(tri_int_edges[t])
        a, b = topo.edge_triangles[e]
        other = int(b) if int(a) == t else int(a)
        uf.union(root, uf.find(other))

    comp = np.fromiter((uf.find(i) for i in range(nt)), dtype=np.int64, count=nt)
    roots, macro_of = np.unique(comp, return_inverse=True)
    n_macros = len(roots)

    interior_edges: list[list[int]] = [[] for _ in range(n_macros)]
    both_in = macro_of[t1] == macro_of[t2]
    for e, m in zip(e_int[both_in], macro_of[t1[both_in]]):
        interior_edges[m].append(int(e))
    return MacroPartition(
        macro_of=macro_of,
        interior_edges=[np.array(g, dtype=np.int64) for g in interior_edges],
    )


def mark_dorfler(indicator_squares, theta: float) -> MarkedSet:
    """Minimal set of triangles carrying a theta fraction of the squared total.

    Sorts descending (ties broken by lower index) and takes the shortest
    prefix with cumulative sum >= theta * total.
    """
    eta2 = np.asarray(indicator_squares, dtype=float)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if np.any(eta2 < 0.0):
        raise ValueError("indicator squares must be nonnegative")
    total = eta2.sum()
    if total <= 0.0:
        warnings.warn("all error indicators are zero; nothing to mark", stacklevel=2)
        return MarkedSet(np.empty(0, dtype=np.int64))
    order = np.argsort(-eta2, kind="stable")
    csum = np.cumsum(eta2[order])
    k = int(np.searchsorted(csum, theta * total - 1e-14 * total)) + 1
    return MarkedSet(np.sort(order[:k]))


def _longest_local_edge(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    lengths = np.empty((mesh.n_triangles, 3))
    for e, (a, b) in enumerate(_EDGE_VERTS):
        lengths[:, e] = np.linalg.norm(p[:, a] - p[:, b], axis=1)
    return np.argmax(lengths, axis=1)  # first max wins on ties


def refine_rgb(mesh: Mesh, marked: MarkedSet) -> Mesh:
    """Red-green-blue refinement of the marked triangles plus conforming closure.

    Marked triangles are red-refined. Closure marks the longest edge of any
    triangle that has a marked edge, iterating to a fixed point, after which a
    triangle with 3 marked edges is red, 2 blue, 1 green (the single marked
    edge is then necessarily its longest).
    """
    if len(marked) == 0:
        return mesh
    topo = build_edge_topology(mesh)
    nt, nv, ne = mesh.n_triangles, mesh.n_vertices, topo.n_edges
    tri_edges = topo.tri_edges
    longest = _longest_local_edge(mesh)

    edge_marked = np.zeros(ne, dtype=bool)
    edge_marked[tri_edges[marked.marked].ravel()] = True
    while True:
        has_any = edge_marked[tri_edges].any(axis=1)
        long_edge = tri_edges[np.arange(nt), longest]
        need = has_any & ~edge_marked[long_edge]
        if not need.any():
            break
        edge_marked[long_edge[need]] = True

    # midpoint vertex for each marked edge
    new_vid = np.full(ne, -1, dtype=np.int64)
    split = np.flatnonzero(edge_marked)
    new_vid[split] = nv + np.arange(len(split))
    midpoints = 0.5 * (
        mesh.vertices[topo.edges[split, 0]] + mesh.vertices[topo.edges[split, 1]]
    )
    vertices = np.vstack([mesh.vertices, midpoints])
    on_boundary = np.concatenate([mesh.vertex_on_boundary, topo.is_boundary[split]])

    new_tris: list[tuple[int, int, int]] = []
    new_parent: list[int] = []
    new_kind: list[int] = []
    kept_from: list[int] = []  # old index of each kept triangle, same order as emitted

    def emit(tri, parent, kind):
        new_tris.append(tri)
        new_parent.append(parent)
        new_kind.append(kind)

    for t in range(nt):
        em = edge_marked[tri_edges[t]]
        count = int(em.sum())
        v = mesh.triangles[t]
        m = [new_vid[tri_edges[t, e]] for e in range(3)]
        if count == 0:
            emit(tuple(v), -1, int(mesh.kind[t]))  # parent fixed up below
            kept_from.append(t)
            continue
        if count == 3:
            emit((v[0], m[2], m[1]), t, KIND_RED)
            emit((m[2], v[1], m[0]), t, KIND_RED)
            emit((m[1], m[0], v[2]), t, KIND_RED)
            emit((m[2], m[0], m[1]), t, KIND_RED)
            continue
        ell = int(longest[t])
        c, a, b = ell, (ell + 1) % 3, (ell + 2) % 3  # edge ell joins v[a], v[b]
        if count == 1:
            if not em[ell]:
                raise MeshTopologyError("closure failed: single marked edge is not the longest")
            emit((v[c], v[a], m[ell]), t, KIND_GREEN)
            emit((v[c], m[ell], v[b]), t, KIND_GREEN)
            continue
        # count == 2: blue, the longest edge plus one other
        if not em[ell]:
            raise MeshTopologyError("closure failed: longest edge unmarked in blue case")
        other = [e for e in range(3) if em[e] and e != ell][0]
        mL, mS = m[ell], m[other]
        if other == b:  # second marked edge is (v[c], v[a])
            emit((v[c], mS, mL), t, KIND_BLUE)
            emit((mS, v[a], mL), t, KIND_BLUE)
            emit((v[c], mL, v[b]), t, KIND_BLUE)
        else:  # other == a: second marked edge is (v[b], v[c])
            emit((v[c], v[a], mL), t, KIND_BLUE)
            emit((v[c], mL, mS), t, KIND_BLUE)
            emit((mL, v[b], mS), t, KIND_BLUE)

    parent = np.array(new_parent, dtype=np.int64)
    kind = np.array(new_kind, dtype=np.int8)
    if kept_from:
        # rows emitted by the count == 0 branch, in old-index order
        kept_rows = np.array(
            [i for i, p in enumerate(new_parent) if p == -1], dtype=np.int64
        )
        old_labels = mesh.parent[np.array(kept_from, dtype=np.int64)]
        nonroot = old_labels >= 0
        _, inv = np.unique(old_labels[nonroot], return_inverse=True)
        parent[kept_rows[nonroot]] = nt + inv  # fresh labels, clear of 0..nt-1
        parent[kept_rows[~nonroot]] = -1

    return Mesh(
        vertices=vertices,
        triangles=np.array(new_tris, dtype=np.int64),
        vertex_on_boundary=on_boundary,
        parent=parent,
        kind=kind,
    )


def write_mesh(mesh: Mesh, path) -> None:
    """ASCII mesh format: `nv nt`, then vertex lines `x y flag`, then
    triangle lines `v0 v1 v2 parent_id kind`."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for (x, y), flag in zip(mesh.vertices, mesh.vertex_on_boundary):
            fh.write(f"{x:.17g} {y:.17g} {int(flag)}\n")
        for tri, par, kd in zip(mesh.triangles, mesh.parent, mesh.kind):
            fh.write(f"{tri[0]} {tri[1]} {tri[2]} {par} {_KIND_NAMES[kd]}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        tokens: list[str] = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    it = iter(tokens)
    nv, nt = int(next(it)), int(next(it))
    verts = np.empty((nv, 2))
    flags = np.empty(nv, dtype=bool)
    for i in range(nv):
        verts[i, 0] = float(next(it))
        verts[i, 1] = float(next(it))
        flags[i] = bool(int(next(it)))
    tris = np.empty((nt, 3), dtype=np.int64)
    parent = np.empty(nt, dtype=np.int64)
    kind = np.empty(nt, dtype=np.int8)
    for i in range(nt):
        tris[i] = [int(next(it)), int(next(it)), int(next(it))]
        parent[i] = int(next(it))
        kind[i] = _KIND_IDS[next(it)]
    return Mesh(verts, tris, flags, parent, kind)
