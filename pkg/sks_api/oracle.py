"""Dense brute-force assembly used to check the sparse assembly.

Loops triangle by triangle, recovers each barycentric function from the
inverse of the affine corner matrix (no shared code with assembly.py) and
integrates with a collapsed Gauss-Legendre rule that is exact for degree 7.
Only meant for small meshes.
"""
from typing import Dict, Sequence

import numpy as np

from sks_api.mesh import PeriodicMesh


def collapsed_gauss_rule(n: int = 4):
    """Reference-triangle rule: points (x, y) with x, y >= 0, x + y <= 1; weights sum to 1/2."""
    xi, wi = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (xi + 1.0)
    ws = 0.5 * wi
    pts = []
    wts = []
    for a in range(n):
        for c in range(n):
            x = s[a]
            y = s[c] * (1.0 - s[a])
            pts.append((x, y))
            wts.append(ws[a] * ws[c] * (1.0 - s[a]))
    return np.array(pts), np.array(wts)


def dense_forms(mesh: PeriodicMesh, b: Sequence[float] = (1.0, 0.0), sigma=None) -> Dict[str, np.ndarray]:
    """Dense versions of every assembled operator (and C(sigma) when sigma is given)."""
    n = mesh.n_vertices
    b = np.asarray(b, dtype=float)
    ref_pts, ref_wts = collapsed_gauss_rule(4)
    out = {
        "M_u": np.zeros((n, n)),
        "K": np.zeros((n, n)),
        "G_b": np.zeros((n, n)),
        "A_sigma": np.zeros((2 * n, 2 * n)),
        "B_mix": np.zeros((2 * n, n)),
        "B_div": np.zeros((n, 2 * n)),
    }
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float).reshape(n, 2)
        out["C"] = np.zeros((n, n))

    for t in range(mesh.n_triangles):
        p = mesh.corners[t]
        verts = mesh.triangles[t]
        T = np.vstack([p[:, 0], p[:, 1], np.ones(3)])
        coef = np.linalg.inv(T)          # lambda(x) = coef @ [x, y, 1]
        grad = coef[:, :2]
        jac = abs(np.linalg.det(T))      # = 2 * area
        phys = p[0] + np.outer(ref_pts[:, 0], p[1] - p[0]) + np.outer(ref_pts[:, 1], p[2] - p[0])
        weights = ref_wts * jac
        lam = (coef @ np.vstack([phys[:, 0], phys[:, 1], np.ones(len(phys))])).T  # (nq, 3)

        for qi in range(len(weights)):
            w = weights[qi]
            phi = lam[qi]
            if sigma is not None:
                sig_q = phi @ sigma[verts]
            for a in range(3):
                ia = verts[a]
                for c in range(3):
                    ic = verts[c]
                    out["M_u"][ia, ic] += w * phi[a] * phi[c]
                    out["K"][ia, ic] += w * grad[a] @ grad[c]
                    out["G_b"][ia, ic] += w * (b @ grad[c]) * phi[a]
                    if sigma is not None:
                        out["C"][ia, ic] += w * phi[c] * (sig_q @ grad[a])
                    for d in range(2):
                        div_ad = grad[a][d]
                        out["B_mix"][2 * ia + d, ic] += w * phi[c] * div_ad
                        out["B_div"][ic, 2 * ia + d] += w * phi[c] * div_ad
                        for e in range(2):
                            div_ce = grad[c][e]
                            rot_ad = -grad[a][1] if d == 0 else grad[a][0]
                            rot_ce = -grad[c][1] if e == 0 else grad[c][0]
                            mass = phi[a] * phi[c] if d == e else 0.0
                            out["A_sigma"][2 * ia + d, 2 * ic + e] += w * (mass + div_ad * div_ce + rot_ad * rot_ce)
    return out
