"""Built-in checks run by the ``selftest`` subcommand.

Each check returns a CheckResult instead of raising so the command can
report every failure at once.
"""
from dataclasses import dataclass
from typing import List, Sequence
import logging

import numpy as np
from scipy.linalg import eigh

from sks_api.assembly import assemble_convection, assemble_static
from sks_api.mesh import build_uniform
from sks_api.models import Discretization, ModelParams
from sks_api.oracle import dense_forms
from sks_api.scheme import SchemeState, run, step_u
from sks_api.stochastic import generate

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-12
MASS_RTOL = 1e-9
HEAT_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_assembly_oracle(sizes: Sequence[int] = (2, 3, 4), seed: int = 0) -> CheckResult:
    """Sparse forms against the dense quadrature oracle, C(sigma) for a random sigma included."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N in sizes:
        mesh = build_uniform(N)
        b = tuple(rng.uniform(-1.0, 1.0, size=2))
        forms = assemble_static(mesh, b)
        sigma = rng.standard_normal(2 * mesh.n_vertices)
        dense = dense_forms(mesh, b=b, sigma=sigma)
        sparse = {
            "M_u": forms.M_u,
            "K": forms.K,
            "G_b": forms.G_b,
            "A_sigma": forms.A_sigma,
            "B_mix": forms.B_mix,
            "B_div": forms.B_div,
            "C": assemble_convection(mesh, sigma),
        }
        for name, A in sparse.items():
            diff = float(np.abs(A.toarray() - dense[name]).max())
            worst = max(worst, diff)
            if diff > ORACLE_TOL:
                return CheckResult("assembly_oracle", False, f"{name} on N={N} differs by {diff:.3e}")
    return CheckResult("assembly_oracle", True, f"max entry difference {worst:.3e}")


def check_mass_conservation(draws: int = 20, N: int = 8, M: int = 64, seed: int = 0) -> CheckResult:
    """Random parameters and data; mass drift at every step stays below 1e-9 relative."""
    rng = np.random.default_rng(seed)
    mesh = build_uniform(N)
    worst = 0.0
    for d in range(draws):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        params = ModelParams(
            nu=rng.uniform(0.1, 5.0),
            chi=rng.uniform(0.1, 5.0),
            delta=rng.uniform(0.0, 10.0),
            b=(float(np.cos(angle)), float(np.sin(angle))),
        )
        forms = assemble_static(mesh, params.b)
        u = 1.0 + 0.5 * rng.standard_normal(mesh.n_vertices)
        state = SchemeState(m=0, u=u, sigma=np.zeros(2 * mesh.n_vertices), c=u.copy())
        k = 1.0 / M
        disc = Discretization(N=N, k=k, T=1.0)
        result = run(mesh, params, disc, generate(seed + d, 1.0, k), state, forms=forms)
        mass0 = result.diagnostics[0].mass
        drift = max(abs(diag.mass - mass0) for diag in result.diagnostics) / (1.0 + abs(mass0))
        worst = max(worst, drift)
        if drift > MASS_RTOL:
            return CheckResult("mass_conservation", False, f"draw {d} drifts by {drift:.3e} ({params})")
    return CheckResult("mass_conservation", True, f"max relative drift {worst:.3e}")


def check_heat_reduction(N: int = 4, k: float = 0.05, nu: float = 1.0) -> CheckResult:
    """chi = delta = 0: one step multiplies each discrete eigenmode by the Crank-Nicolson factor."""
    mesh = build_uniform(N)
    params = ModelParams(nu=nu, chi=0.0, delta=0.0)
    forms = assemble_static(mesh, params.b)
    lam, modes = eigh(forms.K.toarray(), forms.M_u.toarray())
    zero_sigma = np.zeros(2 * mesh.n_vertices)
    worst = 0.0
    for i in range(len(lam)):
        u0 = modes[:, i]
        rho = (1.0 - 0.5 * k * nu * lam[i]) / (1.0 + 0.5 * k * nu * lam[i])
        state = SchemeState(m=0, u=u0, sigma=zero_sigma, c=u0)
        u1, _ = step_u(state, zero_sigma, params, k, 0.0, mesh, forms)
        diff = float(np.abs(u1 - rho * u0).max() / max(np.abs(u0).max(), 1e-300))
        worst = max(worst, diff)
        if diff > HEAT_TOL or abs(rho) >= 1.0 + 1e-14:
            return CheckResult("heat_reduction", False, f"mode {i} (lambda={lam[i]:.4g}) off by {diff:.3e}")
    return CheckResult("heat_reduction", True, f"max mode deviation {worst:.3e} over {len(lam)} modes")


def run_selftest() -> List[CheckResult]:
    results = [check_assembly_oracle(), check_mass_conservation(), check_heat_reduction()]
    for r in results:
        if r.passed:
            logger.info(f"[SELFTEST] {r.name}: passed ({r.detail})")
        else:
            logger.error(f"[SELFTEST] {r.name}: FAILED ({r.detail})")
    return results
