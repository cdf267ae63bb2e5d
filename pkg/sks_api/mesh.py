"""Uniform periodic triangular meshes of the square [0, L]^2."""
from dataclasses import dataclass
from typing import Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

# Corner offsets (in cells) of the two triangles of one grid cell. Both are
# counterclockwise and share the lower-left -> upper-right diagonal.
_LOWER = np.array([[0, 0], [1, 0], [1, 1]])
_UPPER = np.array([[0, 0], [1, 1], [0, 1]])


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """Structured triangulation of the flat torus of period L.

    Vertex ids follow (i mod N) + N * (j mod N), so vertices on x = L and
    y = L are the same objects as those on x = 0 and y = 0. Triangle 2c is
    the lower triangle of cell c = i + N * j and 2c + 1 the upper one.
    """
    L: float
    N: int
    vertices: np.ndarray    # (N^2, 2) representative coordinates in [0, L)^2
    triangles: np.ndarray   # (2N^2, 3) vertex ids, counterclockwise
    corners: np.ndarray     # (2N^2, 3, 2) unwrapped corner coordinates
    areas: np.ndarray       # (2N^2,)
    grads: np.ndarray       # (2N^2, 3, 2) constant barycentric gradients

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def n_vertices(self) -> int:
        return self.N * self.N

    @property
    def n_triangles(self) -> int:
        return 2 * self.N * self.N

    def vertex_id(self, i, j):
        return np.mod(i, self.N) + self.N * np.mod(j, self.N)

    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)


def _triangle_geometry(corners: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p0, p1, p2 = corners[:, 0], corners[:, 1], corners[:, 2]
    e1 = p1 - p0
    e2 = p2 - p0
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # grad lambda_i = (y_{i+1} - y_{i+2}, x_{i+2} - x_{i+1}) / (2A)
    grads = np.empty(corners.shape)
    for i in range(3):
        a = corners[:, (i + 1) % 3]
        b = corners[:, (i + 2) % 3]
        grads[:, i, 0] = (a[:, 1] - b[:, 1]) / (2.0 * areas)
        grads[:, i, 1] = (b[:, 0] - a[:, 0]) / (2.0 * areas)
    return areas, grads


def build_uniform(N: int, L: float = 1.0) -> PeriodicMesh:
    """Build the N x N periodic mesh of [0, L]^2 with 2N^2 triangles."""
    if int(N) != N or N < 2:
        raise ValueError(f"Mesh needs N >= 2 cells per side, got N={N}")
    if not np.isfinite(L) or L <= 0:
        raise ValueError(f"Period L must be a positive length, got L={L}")
    N = int(N)
    L = float(L)
    h = L / N

    jj, ii = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    vertices = np.column_stack([ii * h, jj * h])

    cell_origin = np.column_stack([ii, jj])  # cell c = i + N*j, same order as vertices
    n_cells = N * N
    offsets = np.stack([_LOWER, _UPPER])      # (2, 3, 2)
    # (n_cells, 2, 3, 2) integer grid positions of every corner
    grid = cell_origin[:, None, None, :] + offsets[None, :, :, :]
    grid = grid.reshape(2 * n_cells, 3, 2)

    triangles = np.mod(grid[..., 0], N) + N * np.mod(grid[..., 1], N)
    corners = grid * h
    areas, grads = _triangle_geometry(corners)

    logger.debug(f"[MESH] Built periodic mesh N={N}, L={L}, h={h}")
    return PeriodicMesh(
        L=L,
        N=N,
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        corners=corners,
        areas=areas,
        grads=grads,
    )


def refine(mesh: PeriodicMesh) -> PeriodicMesh:
    """Uniform refinement: N -> 2N. Coarse vertices keep their coordinates."""
    return build_uniform(2 * mesh.N, mesh.L)


def wrap(mesh: PeriodicMesh, points) -> np.ndarray:
    """Map points of R^2 into [0, L)^2."""
    pts = np.mod(np.asarray(points, dtype=float), mesh.L)
    # np.mod can return L itself for tiny negative inputs
    pts[pts >= mesh.L] = 0.0
    return pts


def locate_many(mesh: PeriodicMesh, points) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised point location.

    Returns the triangle index of every point and its barycentric coordinates
    with respect to that triangle's (unwrapped) corners.
    """
    pts = wrap(mesh, np.atleast_2d(points))
    scaled = pts / mesh.h
    ij = np.minimum(np.floor(scaled).astype(np.int64), mesh.N - 1)
    xi = scaled[:, 0] - ij[:, 0]
    eta = scaled[:, 1] - ij[:, 1]
    cell = ij[:, 0] + mesh.N * ij[:, 1]

    lower = xi >= eta
    bary = np.empty((len(pts), 3))
    bary[lower, 0] = 1.0 - xi[lower]
    bary[lower, 1] = xi[lower] - eta[lower]
    bary[lower, 2] = eta[lower]
    upper = ~lower
    bary[upper, 0] = 1.0 - eta[upper]
    bary[upper, 1] = xi[upper]
    bary[upper, 2] = eta[upper] - xi[upper]
    np.clip(bary, 0.0, 1.0, out=bary)

    tri = 2 * cell + upper.astype(np.int64)
    return tri, bary


def locate(mesh: PeriodicMesh, point) -> Tuple[int, np.ndarray]:
    """Locate a single point: (triangle index, barycentric coordinates)."""
    tri, bary = locate_many(mesh, np.asarray(point, dtype=float).reshape(1, 2))
    return int(tri[0]), bary[0]
