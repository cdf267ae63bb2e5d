"""Discrete norms, nested-mesh prolongation and pathwise error functionals."""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.sparse as sp

from sks_api.assembly import FormMatrices, assemble_static
from sks_api.linalg import SparseMatrix
from sks_api.mesh import PeriodicMesh, locate_many

logger = logging.getLogger(__name__)

TIME_MATCH_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Coefficient snapshots of one run at increasing times."""
    times: np.ndarray   # (S,)
    u: np.ndarray       # (S, n)
    sigma: np.ndarray   # (S, 2n)
    c: np.ndarray       # (S, n)
    mesh: PeriodicMesh
    forms: Optional[FormMatrices] = None

    def __post_init__(self):
        if len(self.times) != len(self.u) or len(self.times) != len(self.sigma) or len(self.times) != len(self.c):
            raise ValueError("Snapshot counts differ between times, u, sigma and c")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")


def _check_nested(coarse: PeriodicMesh, fine: PeriodicMesh):
    if fine.N != 2 * coarse.N or fine.L != coarse.L:
        raise ValueError(
            f"Meshes are not nested: coarse N={coarse.N}, L={coarse.L}; fine N={fine.N}, L={fine.L}"
        )


def prolongation_matrix(coarse: PeriodicMesh, fine: PeriodicMesh) -> SparseMatrix:
    """(n_fine, n_coarse) matrix evaluating a coarse P1 function at the fine vertices."""
    _check_nested(coarse, fine)
    tri, bary = locate_many(coarse, fine.vertices)
    rows = np.repeat(np.arange(fine.n_vertices), 3)
    cols = coarse.triangles[tri].ravel()
    P = sp.coo_matrix((bary.ravel(), (rows, cols)), shape=(fine.n_vertices, coarse.n_vertices)).tocsr()
    P.eliminate_zeros()
    return P


def prolong_scalar(coarse: PeriodicMesh, coeffs, fine: PeriodicMesh, P: Optional[SparseMatrix] = None) -> np.ndarray:
    """Exact representation of a coarse P1 function on the refined mesh."""
    coeffs = np.asarray(coeffs, dtype=float)
    P = P if P is not None else prolongation_matrix(coarse, fine)
    return P @ coeffs


def prolong_vector(coarse: PeriodicMesh, coeffs, fine: PeriodicMesh, P: Optional[SparseMatrix] = None) -> np.ndarray:
    """prolong_scalar applied to both components of interleaved vector coefficients."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(coarse.n_vertices, 2)
    P = P if P is not None else prolongation_matrix(coarse, fine)
    return (P @ coeffs).reshape(-1)


def restrict_to_coarse(fine: PeriodicMesh, coeffs, coarse: PeriodicMesh) -> np.ndarray:
    """Pick the fine values at the coarse vertices (injection)."""
    _check_nested(coarse, fine)
    i = np.arange(coarse.N)
    jj, ii = np.meshgrid(i, i, indexing="ij")
    ids = fine.vertex_id(2 * ii.ravel(), 2 * jj.ravel())
    return np.asarray(coeffs)[ids]


def _forms(mesh: PeriodicMesh, forms: Optional[FormMatrices]) -> FormMatrices:
    return forms if forms is not None else assemble_static(mesh)


def _quadratic(A: SparseMatrix, x: np.ndarray) -> float:
    return float(np.sqrt(max(float(x @ (A @ x)), 0.0)))


def l2_disc(mesh: PeriodicMesh, coeffs, forms: Optional[FormMatrices] = None) -> float:
    """L2 norm of a P1 scalar: sqrt(x^T M_u x)."""
    return _quadratic(_forms(mesh, forms).M_u, np.asarray(coeffs, dtype=float))


def h1_equiv_disc(mesh: PeriodicMesh, coeffs, forms: Optional[FormMatrices] = None) -> float:
    """Equivalent H1 norm of a P1 vector field: L2 + divergence + rot, i.e. sqrt(x^T A_sigma x)."""
    return _quadratic(_forms(mesh, forms).A_sigma, np.asarray(coeffs, dtype=float))


def grad_seminorm(mesh: PeriodicMesh, coeffs, forms: Optional[FormMatrices] = None) -> float:
    """||grad u|| for a P1 scalar: sqrt(x^T K x)."""
    return _quadratic(_forms(mesh, forms).K, np.asarray(coeffs, dtype=float))


def _match_times(coarse_times: np.ndarray, ref_times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(ref_times, coarse_times)
    out = np.empty(len(coarse_times), dtype=np.int64)
    for n, (t, i) in enumerate(zip(coarse_times, idx)):
        scale = TIME_MATCH_RTOL * max(1.0, abs(t))
        for cand in (i - 1, i):
            if 0 <= cand < len(ref_times) and abs(ref_times[cand] - t) <= scale:
                out[n] = cand
                break
        else:
            raise ValueError(f"Reference trajectory has no snapshot at t={t}")
    return out


def path_error(coarse: TrajectoryRecord, ref: TrajectoryRecord) -> Tuple[float, float, float]:
    """Max over the coarse times t_1..t_M of the (u, c, sigma) differences on the fine mesh.

    Norms are L2 for u and c and the equivalent H1 norm for sigma. t_0 only
    counts when the coarse record holds a single snapshot.
    """
    _check_nested(coarse.mesh, ref.mesh)
    ref_idx = _match_times(coarse.times, ref.times)
    fine = ref.mesh
    forms = _forms(fine, ref.forms)
    P = prolongation_matrix(coarse.mesh, fine)

    start = 1 if len(coarse.times) > 1 else 0
    err_u = err_c = err_sigma = 0.0
    for s in range(start, len(coarse.times)):
        r = ref_idx[s]
        du = P @ coarse.u[s] - ref.u[r]
        dc = P @ coarse.c[s] - ref.c[r]
        ds = prolong_vector(coarse.mesh, coarse.sigma[s], fine, P=P) - ref.sigma[r]
        err_u = max(err_u, _quadratic(forms.M_u, du))
        err_c = max(err_c, _quadratic(forms.M_u, dc))
        err_sigma = max(err_sigma, _quadratic(forms.A_sigma, ds))
    return err_u, err_c, err_sigma


def mc_aggregate(errors: Sequence[float]) -> float:
    """Root mean square over Monte Carlo samples."""
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise ValueError("Cannot aggregate an empty list of sample errors")
    return float(np.sqrt(np.mean(e * e)))
