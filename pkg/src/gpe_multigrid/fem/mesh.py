"""
mesh.py

Conforming triangulations of the computing domains with refinement genealogy.

Vertex indices survive refinement (new vertices are appended), every cell knows the cell
of the previous level it came from, and every vertex knows the edge it bisects. Chains of
meshes linked through `parent` are what makes the finite element spaces nested.

Cells follow the newest-vertex convention: for a cell (p0, p1, p2) the newest vertex is
p0 and the refinement edge is (p1, p2).

Author: Nathan Swanson
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from gpe_multigrid.errors import MeshError
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import DomainKind, DomainSpec

# local edge i is the edge opposite local vertex i
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    vertex_parents: np.ndarray
    level: int = 0
    parent_cell: np.ndarray | None = None
    parent: Mesh | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @cached_property
    def _edge_data(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        nc = self.n_cells
        local = np.sort(self.cells[:, LOCAL_EDGES], axis=2)  # (nc, 3, 2)
        keys = local[..., 0].astype(np.int64) * self.n_vertices + local[..., 1]
        unique_keys, inverse, counts = np.unique(keys.ravel(), return_inverse=True, return_counts=True)
        edges = np.stack([unique_keys // self.n_vertices, unique_keys % self.n_vertices], axis=1)
        cell_edges = inverse.reshape(nc, 3)

        flat_edges = cell_edges.ravel()
        flat_cells = np.repeat(np.arange(nc), 3)
        order = np.argsort(flat_edges, kind="stable")
        e_sorted, c_sorted = flat_edges[order], flat_cells[order]
        first = np.ones(e_sorted.size, dtype=bool)
        first[1:] = e_sorted[1:] != e_sorted[:-1]
        edge_cells = np.full((edges.shape[0], 2), -1, dtype=np.int64)
        edge_cells[e_sorted[first], 0] = c_sorted[first]
        second = ~first
        edge_cells[e_sorted[second], 1] = c_sorted[second]
        return edges, cell_edges, edge_cells, counts

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, shape (ne, 2)."""
        return self._edge_data[0]

    @property
    def cell_edges(self) -> np.ndarray:
        """Edge index of the local edge opposite each local vertex, shape (nc, 3)."""
        return self._edge_data[1]

    @property
    def edge_cells(self) -> np.ndarray:
        """The (at most two) cells sharing each edge; -1 pads boundary edges."""
        return self._edge_data[2]

    @cached_property
    def cell_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        return self.edge_lengths[self.cell_edges].max(axis=1)

    @property
    def max_diameter(self) -> float:
        return float(self.cell_diameters.max())

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.boundary_facets.ravel()] = True
        return flags

    def validate(self) -> None:
        """Raise MeshError unless the mesh is conforming, positively oriented and tiles its parent."""
        if np.any(self.cell_areas <= 0):
            bad = int(np.argmin(self.cell_areas))
            msg = f"cell {bad} has non-positive area {self.cell_areas[bad]:.3e}"
            raise MeshError("negative-volume", msg)

        counts = self._edge_data[3]
        if np.any(counts > 2):
            msg = "an edge is shared by more than two cells"
            raise MeshError("nonconforming", msg)
        single = {tuple(e) for e in self.edges[counts == 1]}
        listed = {tuple(e) for e in np.sort(self.boundary_facets, axis=1)}
        if single != listed:
            msg = f"{len(single ^ listed)} edges disagree between the cell graph and the boundary facets"
            raise MeshError("nonconforming", msg)

        if self.parent is not None:
            self._validate_genealogy()

    def _validate_genealogy(self) -> None:
        parent = self.parent
        if not np.array_equal(self.vertices[: parent.n_vertices], parent.vertices):
            msg = "coarse vertices moved during refinement"
            raise MeshError("genealogy", msg)
        area_sum = np.bincount(self.parent_cell, weights=self.cell_areas, minlength=parent.n_cells)
        if not np.allclose(area_sum, parent.cell_areas, rtol=0.0, atol=1e-12):
            msg = "children do not tile their parent cell"
            raise MeshError("genealogy", msg)
        lam = barycentric(parent, self.parent_cell, self.vertices[self.cells])
        if np.any(lam < -1e-12):
            msg = "a child vertex lies outside its parent cell"
            raise MeshError("genealogy", msg)


@dataclass(frozen=True, eq=False)
class CellEmbedding:
    coarse: Mesh
    fine: Mesh
    fine_to_coarse: np.ndarray

    @cached_property
    def _grouping(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.fine_to_coarse, kind="stable")
        offsets = np.zeros(self.coarse.n_cells + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.fine_to_coarse, minlength=self.coarse.n_cells), out=offsets[1:])
        return order, offsets

    def children(self, coarse_cell: int) -> np.ndarray:
        order, offsets = self._grouping
        return order[offsets[coarse_cell] : offsets[coarse_cell + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self._grouping[1])


def barycentric(mesh: Mesh, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of points[..., :] with respect to mesh.cells[cells], shape (..., 3)."""
    p = mesh.vertices[mesh.cells[cells]]  # (n, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns x1-x0, x2-x0
    inv = np.linalg.inv(jac)
    rel = points - p[:, None, 0, :] if points.ndim == 3 else points - p[:, 0, :]
    if points.ndim == 3:
        l12 = np.einsum("nij,nkj->nki", inv, rel)
        return np.concatenate([1.0 - l12.sum(axis=2, keepdims=True), l12], axis=2)
    l12 = np.einsum("nij,nj->ni", inv, rel)
    return np.concatenate([1.0 - l12.sum(axis=1, keepdims=True), l12], axis=1)


def _boundary_from_cells(cells: np.ndarray, n_vertices: int) -> np.ndarray:
    local = np.sort(cells[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    keys = local[:, 0].astype(np.int64) * n_vertices + local[:, 1]
    unique_keys, counts = np.unique(keys, return_counts=True)
    single = unique_keys[counts == 1]
    return np.stack([single // n_vertices, single % n_vertices], axis=1)


def build_initial_mesh(spec: DomainSpec) -> Mesh:
    """Structured level-0 triangulation; every square is cut along its lower-left to upper-right diagonal."""
    if spec.kind == DomainKind.UNIT_CUBE:
        msg = "unit_cube needs the d=3 pipeline, which is not available"
        gpe_logger.critical(msg)
        raise MeshError("unsupported-dimension", msg)

    n = spec.initial_subdivision
    per_side = 2 * n if spec.kind == DomainKind.L_SHAPE else n
    h = 1.0 / n

    xs = np.arange(per_side + 1) * h
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(per_side), np.arange(per_side), indexing="xy")
    i, j = i.ravel(), j.ravel()
    if spec.kind == DomainKind.L_SHAPE:
        keep = ~((i >= n) & (j >= n))
        i, j = i[keep], j[keep]

    stride = per_side + 1
    ll = j * stride + i
    lr = ll + 1
    ul = ll + stride
    ur = ul + 1
    cells = np.stack([np.stack([lr, ur, ll], axis=1), np.stack([ul, ll, ur], axis=1)], axis=1).reshape(-1, 3)

    used, cells = np.unique(cells, return_inverse=True)
    cells = cells.reshape(-1, 3)
    vertices = grid[used]
    boundary = _boundary_from_cells(cells, vertices.shape[0])
    mesh = Mesh(
        vertices=vertices,
        cells=cells,
        boundary_facets=boundary,
        vertex_parents=np.full((vertices.shape[0], 2), -1, dtype=np.int64),
    )
    gpe_logger.debug(f"initial {spec.kind} mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells")
    return mesh


def _split_boundary(mesh: Mesh, edge_keys: np.ndarray, midpoints: np.ndarray, n_key: int) -> np.ndarray:
    facets = np.sort(mesh.boundary_facets, axis=1)
    keys = facets[:, 0].astype(np.int64) * n_key + facets[:, 1]
    pos = np.minimum(np.searchsorted(edge_keys, keys), edge_keys.size - 1)
    hit = edge_keys[pos] == keys
    mid = midpoints[pos[hit]]
    split = np.concatenate(
        [np.stack([facets[hit, 0], mid], axis=1), np.stack([mid, facets[hit, 1]], axis=1)],
        axis=0,
    )
    return np.sort(np.concatenate([facets[~hit], split], axis=0), axis=1)


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: every triangle is replaced by four similar children."""
    nv = m.n_vertices
    edges, cell_edges = m.edges, m.cell_edges
    midpoints = nv + np.arange(edges.shape[0])
    vertices = np.concatenate([m.vertices, 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])])

    p0, p1, p2 = m.cells.T
    m12, m20, m01 = midpoints[cell_edges[:, 0]], midpoints[cell_edges[:, 1]], midpoints[cell_edges[:, 2]]
    children = np.stack(
        [
            np.stack([p0, m01, m20], axis=1),
            np.stack([m01, p1, m12], axis=1),
            np.stack([m20, m12, p2], axis=1),
            np.stack([m12, m20, m01], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    n_key = vertices.shape[0]
    edge_keys = edges[:, 0].astype(np.int64) * n_key + edges[:, 1]
    return Mesh(
        vertices=vertices,
        cells=children,
        boundary_facets=_split_boundary(m, edge_keys, midpoints, n_key),
        vertex_parents=np.concatenate([np.full((nv, 2), -1, dtype=np.int64), edges]),
        level=m.level + 1,
        parent_cell=np.repeat(np.arange(m.n_cells), 4),
        parent=m,
    )


def refine_adaptive(m: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked cells plus the closure needed for conformity.

    An empty marking returns `m` itself.
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64).ravel())
    if marked.size == 0:
        return m
    if marked[0] < 0 or marked[-1] >= m.n_cells:
        msg = f"marked cells must lie in [0, {m.n_cells})"
        raise MeshError("bad-marking", msg)

    nv = m.n_vertices
    cell_edges = m.cell_edges
    edge_marked = np.zeros(m.edges.shape[0], dtype=bool)
    edge_marked[cell_edges[marked, 0]] = True
    # closure: a cell with any marked edge must also have its refinement edge marked
    while True:
        touched = edge_marked[cell_edges].any(axis=1)
        pending = touched & ~edge_marked[cell_edges[:, 0]]
        if not pending.any():
            break
        edge_marked[cell_edges[pending, 0]] = True

    split_edges = m.edges[edge_marked]
    midpoints = nv + np.arange(split_edges.shape[0])
    vertices = np.concatenate(
        [m.vertices, 0.5 * (m.vertices[split_edges[:, 0]] + m.vertices[split_edges[:, 1]])]
    )
    n_key = vertices.shape[0]
    edge_keys = split_edges[:, 0].astype(np.int64) * n_key + split_edges[:, 1]  # sorted, edges are

    cells = m.cells.copy()
    origin = np.arange(m.n_cells)
    while True:
        a = np.minimum(cells[:, 1], cells[:, 2]).astype(np.int64)
        b = np.maximum(cells[:, 1], cells[:, 2])
        keys = a * n_key + b
        pos = np.minimum(np.searchsorted(edge_keys, keys), edge_keys.size - 1)
        hit = edge_keys[pos] == keys
        if not hit.any():
            break
        mid = midpoints[pos[hit]]
        p0, p1, p2 = cells[hit].T
        cells = np.concatenate(
            [cells[~hit], np.stack([mid, p0, p1], axis=1), np.stack([mid, p2, p0], axis=1)]
        )
        origin = np.concatenate([origin[~hit], origin[hit], origin[hit]])

    order = np.argsort(origin, kind="stable")
    return Mesh(
        vertices=vertices,
        cells=cells[order],
        boundary_facets=_split_boundary(m, edge_keys, midpoints, n_key),
        vertex_parents=np.concatenate([np.full((nv, 2), -1, dtype=np.int64), split_edges]),
        level=m.level + 1,
        parent_cell=origin[order],
        parent=m,
    )


def ancestry(coarse: Mesh, fine: Mesh) -> list[Mesh]:
    """Meshes on the genealogy chain from `fine` up to, but excluding, `coarse`."""
    chain = []
    current = fine
    while current is not coarse:
        if current.parent is None:
            msg = "fine mesh is not a refinement descendant of the coarse mesh"
            raise MeshError("not-a-descendant", msg)
        chain.append(current)
        current = current.parent
    return chain


def nesting_map(coarse: Mesh, fine: Mesh) -> CellEmbedding:
    fine_to_coarse = np.arange(fine.n_cells)
    for mesh in ancestry(coarse, fine):
        fine_to_coarse = mesh.parent_cell[fine_to_coarse]
    return CellEmbedding(coarse=coarse, fine=fine, fine_to_coarse=fine_to_coarse)


def write_mesh(mesh: Mesh, path: Path | str) -> None:
    """Plain-text dump: "d nv nc", then vertex coordinates, then 0-based cells."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_cells}"]
    lines += [" ".join(f"{x:.17g}" for x in vertex) for vertex in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in cell) for cell in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
