"""P1 finite element assembly on periodic meshes.

Scalar unknowns live on vertices (one dof per vertex). Vector unknowns are
interleaved: dof 2v is the x-component at vertex v, dof 2v + 1 the
y-component. Every form is assembled row = test function, column = trial
function, so ``A @ coeffs`` evaluates the form against each test function.

rot is the scalar curl, rot s = d s_2/dx - d s_1/dy.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple
import logging

import numpy as np

from sks_api.linalg import SparseMatrix, from_arrays, solve_spd
from sks_api.mesh import PeriodicMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    name: str
    degree: int
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sum to 1 (multiply by the triangle area)


# Exact for polynomials of degree 2: every bilinear form among P1 functions,
# including the sigma-weighted convection form, is integrated exactly.
EDGE_MIDPOINT = QuadratureRule(
    name="edge_midpoint",
    degree=2,
    points=np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    weights=np.full(3, 1.0 / 3.0),
)

_A4, _B4 = 0.445948490915965, 0.091576213509771
_W4A, _W4B = 0.223381589678011, 0.109951743655322
# Six-point degree-4 rule, used only to load analytic initial data.
SIX_POINT = QuadratureRule(
    name="six_point",
    degree=4,
    points=np.array([
        [1 - 2 * _A4, _A4, _A4],
        [_A4, 1 - 2 * _A4, _A4],
        [_A4, _A4, 1 - 2 * _A4],
        [1 - 2 * _B4, _B4, _B4],
        [_B4, 1 - 2 * _B4, _B4],
        [_B4, _B4, 1 - 2 * _B4],
    ]),
    weights=np.array([_W4A, _W4A, _W4A, _W4B, _W4B, _W4B]),
)


@dataclass(frozen=True, eq=False)
class FormMatrices:
    """Time-independent operators of the scheme on one mesh."""
    M_u: SparseMatrix       # (phi_j, phi_i)
    K: SparseMatrix         # (grad phi_j, grad phi_i)
    A_sigma: SparseMatrix   # (s, p) + (div s, div p) + (rot s, rot p)
    B_mix: SparseMatrix     # (psi_j, div Phi_i), shape (2n, n)
    B_div: SparseMatrix     # (div Phi_j, psi_i), shape (n, 2n)
    G_b: SparseMatrix       # (b . grad phi_j, phi_i)
    b: Tuple[float, float]
    quadrature_degree: int
    mass_weights: np.ndarray  # row sums of M_u, i.e. integrals of the hat functions


def quadrature_points(mesh: PeriodicMesh, rule: QuadratureRule) -> np.ndarray:
    """Physical coordinates (n_triangles, nq, 2) of a rule's points."""
    return np.einsum("qa,tad->tqd", rule.points, mesh.corners)


def _scalar_pattern(mesh: PeriodicMesh):
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], (len(tri), 3, 3))
    cols = np.broadcast_to(tri[:, None, :], (len(tri), 3, 3))
    return rows, cols


def _vector_dofs(mesh: PeriodicMesh) -> np.ndarray:
    """(n_triangles, 6) global vector dofs ordered (a, d) -> 2a + d."""
    tri = mesh.triangles
    return np.stack([2 * tri, 2 * tri + 1], axis=-1).reshape(len(tri), 6)


def _vector_div_rot(mesh: PeriodicMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Divergence and rot of the six local vector basis functions."""
    g = mesh.grads
    div = g.reshape(len(g), 6)  # div(phi_a e_d) = d phi_a / dx_d
    rot = np.stack([-g[:, :, 1], g[:, :, 0]], axis=-1).reshape(len(g), 6)
    return div, rot


def _local_mass(mesh: PeriodicMesh, rule: QuadratureRule) -> np.ndarray:
    P = rule.points
    ref = np.einsum("q,qa,qb->ab", rule.weights, P, P)
    return mesh.areas[:, None, None] * ref[None, :, :]


def assemble_static(mesh: PeriodicMesh, b: Sequence[float] = (1.0, 0.0)) -> FormMatrices:
    """Assemble every time-independent matrix of the scheme on ``mesh``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (2,) or not np.all(np.isfinite(b)):
        raise ValueError(f"Noise direction b must be a finite 2-vector, got {b}")
    rule = EDGE_MIDPOINT
    n = mesh.n_vertices
    nt = mesh.n_triangles
    areas = mesh.areas
    g = mesh.grads
    rows, cols = _scalar_pattern(mesh)

    mass_loc = _local_mass(mesh, rule)
    M_u = from_arrays(n, n, rows, cols, mass_loc)

    stiff_loc = areas[:, None, None] * np.einsum("tad,tbd->tab", g, g)
    K = from_arrays(n, n, rows, cols, stiff_loc)

    # (b . grad phi_c) phi_a integrated: the trial gradient is constant.
    phi_int = np.einsum("q,qa->a", rule.weights, rule.points)  # = 1/3 each
    bgrad = np.einsum("tcd,d->tc", g, b)
    noise_loc = areas[:, None, None] * phi_int[None, :, None] * bgrad[:, None, :]
    G_b = from_arrays(n, n, rows, cols, noise_loc)

    vdofs = _vector_dofs(mesh)
    div, rot = _vector_div_rot(mesh)
    vmass = np.zeros((nt, 6, 6))
    vmass[:, 0::2, 0::2] = mass_loc
    vmass[:, 1::2, 1::2] = mass_loc
    a_loc = vmass + areas[:, None, None] * (div[:, :, None] * div[:, None, :] + rot[:, :, None] * rot[:, None, :])
    vrows = np.broadcast_to(vdofs[:, :, None], (nt, 6, 6))
    vcols = np.broadcast_to(vdofs[:, None, :], (nt, 6, 6))
    A_sigma = from_arrays(2 * n, 2 * n, vrows, vcols, a_loc)

    # (psi_c, div Phi_I): row = vector test dof I, column = scalar trial c
    mix_loc = areas[:, None, None] * div[:, :, None] * phi_int[None, None, :]
    mrows = np.broadcast_to(vdofs[:, :, None], (nt, 6, 3))
    mcols = np.broadcast_to(mesh.triangles[:, None, :], (nt, 6, 3))
    B_mix = from_arrays(2 * n, n, mrows, mcols, mix_loc)
    B_div = from_arrays(n, 2 * n, mcols, mrows, mix_loc)

    mass_weights = np.asarray(M_u.sum(axis=0)).ravel()
    logger.debug(f"[ASSEMBLY] Static forms on N={mesh.N}: n={n}, nnz(A_sigma)={A_sigma.nnz}")
    return FormMatrices(
        M_u=M_u,
        K=K,
        A_sigma=A_sigma,
        B_mix=B_mix,
        B_div=B_div,
        G_b=G_b,
        b=(float(b[0]), float(b[1])),
        quadrature_degree=rule.degree,
        mass_weights=mass_weights,
    )


def assemble_convection(mesh: PeriodicMesh, sigma_coeffs) -> SparseMatrix:
    """C[i, j] = integral of phi_j (sigma_h . grad phi_i) for the P1 field sigma_h."""
    sigma = np.asarray(sigma_coeffs, dtype=float)
    n = mesh.n_vertices
    if sigma.shape != (2 * n,):
        raise ValueError(f"sigma needs {2 * n} coefficients on N={mesh.N}, got shape {sigma.shape}")
    rule = EDGE_MIDPOINT
    P = rule.points
    sig_nodes = sigma.reshape(n, 2)[mesh.triangles]             # (nt, 3, 2)
    sig_q = np.einsum("qk,tkd->tqd", P, sig_nodes)             # (nt, nq, 2)
    sig_dot_grad = np.einsum("tqd,tad->tqa", sig_q, mesh.grads)  # sigma_q . grad phi_a
    conv_loc = mesh.areas[:, None, None] * np.einsum("q,tqa,qc->tac", rule.weights, sig_dot_grad, P)
    rows, cols = _scalar_pattern(mesh)
    return from_arrays(n, n, rows, cols, conv_loc)


def project_scalar(
    mesh: PeriodicMesh,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    forms: Optional[FormMatrices] = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """L2 projection of a pointwise function onto the P1 space."""
    rule = SIX_POINT
    xq = quadrature_points(mesh, rule)
    values = np.broadcast_to(np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float), xq.shape[:2])
    loc = mesh.areas[:, None] * np.einsum("q,tq,qa->ta", rule.weights, values, rule.points)
    n = mesh.n_vertices
    load = np.bincount(mesh.triangles.ravel(), weights=loc.ravel(), minlength=n)
    M_u = forms.M_u if forms is not None else assemble_static(mesh).M_u
    coeffs, _ = solve_spd(M_u, load, tol=tol)
    return coeffs


def project_vector(
    mesh: PeriodicMesh,
    g: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]],
    div_g: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    rot_g: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    forms: Optional[FormMatrices] = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """Projection onto the vector P1 space in the (mass + div-div + rot-rot) inner product.

    The derivatives of ``g`` are supplied analytically; ``None`` stands for
    an identically zero divergence or rot.
    """
    rule = SIX_POINT
    xq = quadrature_points(mesh, rule)
    x, y = xq[..., 0], xq[..., 1]
    gx, gy = g(x, y)
    gx = np.broadcast_to(np.asarray(gx, dtype=float), x.shape)
    gy = np.broadcast_to(np.asarray(gy, dtype=float), x.shape)
    dv = np.zeros(x.shape) if div_g is None else np.broadcast_to(np.asarray(div_g(x, y), dtype=float), x.shape)
    rv = np.zeros(x.shape) if rot_g is None else np.broadcast_to(np.asarray(rot_g(x, y), dtype=float), x.shape)

    w = rule.weights
    P = rule.points
    div, rot = _vector_div_rot(mesh)
    mass_part = np.empty((mesh.n_triangles, 3, 2))
    mass_part[:, :, 0] = np.einsum("q,tq,qa->ta", w, gx, P)
    mass_part[:, :, 1] = np.einsum("q,tq,qa->ta", w, gy, P)
    loc = mass_part.reshape(-1, 6)
    loc = loc + np.einsum("q,tq->t", w, dv)[:, None] * div + np.einsum("q,tq->t", w, rv)[:, None] * rot
    loc = mesh.areas[:, None] * loc

    n = mesh.n_vertices
    load = np.bincount(_vector_dofs(mesh).ravel(), weights=loc.ravel(), minlength=2 * n)
    A_sigma = forms.A_sigma if forms is not None else assemble_static(mesh).A_sigma
    coeffs, _ = solve_spd(A_sigma, load, tol=tol)
    return coeffs
