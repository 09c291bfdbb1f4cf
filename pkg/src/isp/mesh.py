"""Structured meshes of the unit interval and the unit square.

Node ordering is lexicographic (by x in 1D, by (y, x) in 2D) so that the
sparsity pattern of every assembled matrix is fixed for a given resolution.
Every grid square is cut along its lower-left to upper-right diagonal.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["Mesh", "build_interval_mesh", "build_unit_square_mesh", "write_mesh"]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh with boundary facets.

    Attributes
    ----------
    dim : int
        Spatial dimension (1 or 2).
    nodes : ndarray, shape (node_count, dim)
    cells : ndarray, shape (cell_count, dim + 1)
        Node indices; triangles are counterclockwise.
    facets : ndarray, shape (facet_count, dim)
        Node indices of each boundary facet (a point in 1D, an edge in 2D).
    normals : ndarray, shape (facet_count, dim)
        Outward unit normal of each boundary facet.
    """

    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    normals: np.ndarray
    _measures: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("nodes", "cells", "facets", "normals"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "_measures", _cell_measures(self.nodes, self.cells))
        self._measures.setflags(write=False)

    @property
    def node_count(self):
        return self.nodes.shape[0]

    @property
    def cell_count(self):
        return self.cells.shape[0]

    @property
    def boundary_facets(self):
        """List of ``(node-index tuple, outward normal)`` pairs."""
        return [
            (tuple(int(k) for k in f), tuple(float(c) for c in n))
            for f, n in zip(self.facets, self.normals)
        ]

    def cell_measures(self):
        """Length (1D) or signed area (2D) of every cell."""
        return self._measures

    def facet_measures(self):
        """Boundary facet measures; points count 1 in 1D."""
        if self.dim == 1:
            return np.ones(self.facets.shape[0])
        edges = self.nodes[self.facets[:, 1]] - self.nodes[self.facets[:, 0]]
        return np.hypot(edges[:, 0], edges[:, 1])

    def boundary_nodes(self):
        return np.unique(self.facets.ravel())


def _cell_measures(nodes, cells):
    if nodes.shape[1] == 1:
        return nodes[cells[:, 1], 0] - nodes[cells[:, 0], 0]
    p0, p1, p2 = (nodes[cells[:, k]] for k in range(3))
    e1 = p1 - p0
    e2 = p2 - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _check_count(name, value):
    if int(value) != value or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def build_interval_mesh(n_elems):
    """Uniform mesh of [0, 1] with ``n_elems`` elements."""
    n = _check_count("n_elems", n_elems)
    nodes = (np.arange(n + 1, dtype=float) / n).reshape(-1, 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]])
    normals = np.array([[-1.0], [1.0]])
    return Mesh(1, nodes, cells, facets, normals)


def build_unit_square_mesh(nx, ny):
    """Structured triangulation of the unit square with ``2*nx*ny`` triangles."""
    nx = _check_count("nx", nx)
    ny = _check_count("ny", ny)
    x = np.arange(nx + 1, dtype=float) / nx
    y = np.arange(ny + 1, dtype=float) / ny
    xx, yy = np.meshgrid(x, y)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    # interleave so the two halves of a square are adjacent
    cells = np.empty((2 * nx * ny, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper

    ix = np.arange(nx)
    iy = np.arange(ny)
    bottom = np.column_stack([idx(ix, 0), idx(ix + 1, 0)])
    right = np.column_stack([idx(nx, iy), idx(nx, iy + 1)])
    top = np.column_stack([idx(ix + 1, ny), idx(ix, ny)])[::-1]
    left = np.column_stack([idx(0, iy + 1), idx(0, iy)])[::-1]
    facets = np.vstack([bottom, right, top, left])
    normals = np.vstack([
        np.tile([0.0, -1.0], (nx, 1)),
        np.tile([1.0, 0.0], (ny, 1)),
        np.tile([0.0, 1.0], (nx, 1)),
        np.tile([-1.0, 0.0], (ny, 1)),
    ])
    return Mesh(2, nodes, cells, facets, normals)


def write_mesh(mesh, path):
    """Debug dump: one node per line, then one cell per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in mesh.nodes:
            fh.write(" ".join(repr(float(c)) for c in p) + "\n")
        for c in mesh.cells:
            fh.write(" ".join(str(int(k)) for k in c) + "\n")
