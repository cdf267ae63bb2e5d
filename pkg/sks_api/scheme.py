"""Crank-Nicolson splitting mixed finite element scheme.

Solves, on the torus D = [0, L]^2,

    du = [nu Lap u - chi div(u grad c)] dt + delta b . grad u o dW(t),
    -Lap c + c = u,

with Stratonovich noise (o dW). Writing sigma = grad c, one step from t_m
to t_{m+1} = t_m + k is

    (sigma', p) + (div sigma', div p) + (rot sigma', rot p) = -(u, div p)
    (u' - u, v) + k nu (grad u*, grad v) = k chi (u* sigma*, grad v)
                                           + delta dW_m (b . grad u*, v)
    (c', q) = (div sigma', q) + (u', q)

where primes are new values and * denotes the midpoint average. The midpoint
rule realises the Stratonovich integral directly; the equivalent Ito form
carries the drift correction (delta^2 / 2) div(B grad u), B = b b^T, which is
not stepped here.

Each step is linear: sigma' only needs u, and sigma* = (sigma + sigma') / 2
is known before the u-solve.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence
import logging

import numpy as np

from sks_api.assembly import FormMatrices, assemble_convection, assemble_static, project_scalar, project_vector
from sks_api.linalg import DEFAULT_TOL, SolveReport, SolverError, solve_general, solve_spd
from sks_api.mesh import PeriodicMesh
from sks_api.models import Discretization, ModelParams
from sks_api.norms import TrajectoryRecord
from sks_api.stochastic import WienerPath, steps_per

logger = logging.getLogger(__name__)

MASS_DRIFT_RTOL = 1e-9


@dataclass
class SchemeState:
    m: int
    u: np.ndarray
    sigma: np.ndarray
    c: np.ndarray
    reports: Dict[str, SolveReport] = field(default_factory=dict, repr=False)


@dataclass
class StepDiagnostics:
    m: int
    t: float
    mass: float
    min_u: float
    max_u: float
    l2_u: float
    sigma_h1: float
    c_l2: float
    reports: Dict[str, SolveReport] = field(default_factory=dict)
    state: Optional[SchemeState] = field(default=None, repr=False)  # set only while observers run


@dataclass
class StabilityReport:
    kappa1: float
    value: float
    satisfied: bool


@dataclass
class RunResult:
    state: SchemeState
    diagnostics: List[StepDiagnostics]
    trajectory: Optional[TrajectoryRecord] = None


class StepFailure(Exception):
    """Raised when one step of a realisation cannot be completed."""

    def __init__(self, msg: str, m: int, t: float, dW: float, cause: Optional[SolverError] = None):
        self.m = m
        self.t = t
        self.dW = dW
        self.cause = cause
        super().__init__(msg)


Observer = Callable[[int, float, StepDiagnostics], None]


def initialize(
    mesh: PeriodicMesh,
    params: ModelParams,
    u0: Callable,
    c0: Callable,
    grad_c0: Callable,
    lap_c0: Optional[Callable] = None,
    forms: Optional[FormMatrices] = None,
) -> SchemeState:
    """Project the initial data: u^0 = P_u u0, sigma^0 = P_sigma grad c0, c^0 = P_c c0."""
    forms = forms or assemble_static(mesh, params.b)
    u = project_scalar(mesh, u0, forms=forms)
    sigma = project_vector(mesh, grad_c0, div_g=lap_c0, rot_g=None, forms=forms)
    c = project_scalar(mesh, c0, forms=forms)
    return SchemeState(m=0, u=u, sigma=sigma, c=c)


def initialize_from(mesh: PeriodicMesh, params: ModelParams, data, forms: Optional[FormMatrices] = None) -> SchemeState:
    """initialize() for an InitialData instance."""
    return initialize(mesh, params, data.u0, data.c0, data.grad_c0, data.lap_c0, forms=forms)


def step_sigma(state: SchemeState, forms: FormMatrices, tol: float = DEFAULT_TOL):
    """sigma^{m+1} from A_sigma sigma = -B_mix u^m."""
    return solve_spd(forms.A_sigma, -(forms.B_mix @ state.u), tol=tol)


def u_system(
    u: np.ndarray,
    sigma_half: np.ndarray,
    params: ModelParams,
    k: float,
    dW: float,
    mesh: PeriodicMesh,
    forms: FormMatrices,
):
    """Left-hand matrix and right-hand side of the u-step."""
    C = assemble_convection(mesh, sigma_half)
    implicit = (0.5 * k * params.nu) * forms.K - (0.5 * k * params.chi) * C - (0.5 * params.delta * dW) * forms.G_b
    lhs = (forms.M_u + implicit).tocsr()
    rhs = forms.M_u @ u - implicit @ u
    return lhs, rhs


def step_u(
    state: SchemeState,
    sigma_next: np.ndarray,
    params: ModelParams,
    k: float,
    dW: float,
    mesh: PeriodicMesh,
    forms: FormMatrices,
    tol: float = DEFAULT_TOL,
    solver: str = "lu",
):
    """u^{m+1} from the Crank-Nicolson u-equation with sigma^{m+1/2}."""
    sigma_half = 0.5 * (state.sigma + sigma_next)
    lhs, rhs = u_system(state.u, sigma_half, params, k, dW, mesh, forms)
    return solve_general(lhs, rhs, tol=tol, method=solver)


def step_c(sigma_next: np.ndarray, u_next: np.ndarray, forms: FormMatrices, tol: float = DEFAULT_TOL):
    """c^{m+1} from M c = B_div sigma^{m+1} + M u^{m+1}."""
    return solve_spd(forms.M_u, forms.B_div @ sigma_next + forms.M_u @ u_next, tol=tol)


def diagnose(state: SchemeState, t: float, forms: FormMatrices, reports=None) -> StepDiagnostics:
    u = state.u
    return StepDiagnostics(
        m=state.m,
        t=t,
        mass=float(forms.mass_weights @ u),
        min_u=float(u.min()),
        max_u=float(u.max()),
        l2_u=float(np.sqrt(max(u @ (forms.M_u @ u), 0.0))),
        sigma_h1=float(np.sqrt(max(state.sigma @ (forms.A_sigma @ state.sigma), 0.0))),
        c_l2=float(np.sqrt(max(state.c @ (forms.M_u @ state.c), 0.0))),
        reports=reports or {},
        state=state,
    )


def advance(
    state: SchemeState,
    params: ModelParams,
    k: float,
    dW: float,
    mesh: PeriodicMesh,
    forms: FormMatrices,
    tol: float = DEFAULT_TOL,
    solver: str = "lu",
) -> SchemeState:
    """One full step: sigma-solve, u-solve, c-recovery."""
    t = state.m * k
    try:
        sigma_next, rep_sigma = step_sigma(state, forms, tol=tol)
        u_next, rep_u = step_u(state, sigma_next, params, k, dW, mesh, forms, tol=tol, solver=solver)
        c_next, rep_c = step_c(sigma_next, u_next, forms, tol=tol)
    except SolverError as e:
        raise StepFailure(
            f"Step m={state.m} (t={t:.6g}, dW={dW:.6g}) failed: {e}", m=state.m, t=t, dW=dW, cause=e
        ) from e
    return SchemeState(
        m=state.m + 1,
        u=u_next,
        sigma=sigma_next,
        c=c_next,
        reports={"sigma": rep_sigma, "u": rep_u, "c": rep_c},
    )


def run(
    mesh: PeriodicMesh,
    params: ModelParams,
    disc: Discretization,
    path: Optional[WienerPath],
    state0: SchemeState,
    forms: Optional[FormMatrices] = None,
    observers: Sequence[Observer] = (),
    record_every: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    solver: str = "lu",
) -> RunResult:
    """March state0 through M = T / k steps on one Wiener path.

    ``record_every`` stores u, sigma, c every that many steps (and at t = 0)
    in a TrajectoryRecord. ``path`` may be None only when delta = 0.
    """
    if mesh.N != disc.N:
        raise ValueError(f"Mesh has N={mesh.N} but the discretization asks for N={disc.N}")
    forms = forms or assemble_static(mesh, params.b)
    M, k = disc.M, disc.k

    if path is not None:
        r = steps_per(k, path.k0)
        if r * M > path.n_steps:
            raise ValueError(f"Wiener path covers T={path.T}, run needs T={disc.T}")
        dWs = path.increments[: r * M].reshape(M, r).sum(axis=1) if M else np.zeros(0)
    elif params.delta == 0 or M == 0:
        dWs = np.zeros(M)
    else:
        raise ValueError("A Wiener path is required when delta > 0")

    state = state0
    mass0 = float(forms.mass_weights @ state.u)
    recorder = _Recorder(mesh, forms, record_every) if record_every else None
    diag = diagnose(state, 0.0, forms)
    diagnostics = [diag]
    if recorder:
        recorder(state.m, 0.0, diag)
    diag.state = None

    for m in range(M):
        t_next = (m + 1) * k
        try:
            state = advance(state, params, k, float(dWs[m]), mesh, forms, tol=tol, solver=solver)
        except StepFailure as e:
            logger.error(f"[STEP] {e}")
            raise
        diag = diagnose(state, t_next, forms, reports=state.reports)
        diagnostics.append(diag)
        drift = abs(diag.mass - mass0)
        if drift > MASS_DRIFT_RTOL * (1.0 + abs(mass0)):
            logger.warning(f"[STEP] Mass drift {drift:.3e} at m={state.m} exceeds tolerance")
        logger.debug(
            f"[STEP] m={state.m} t={t_next:.6g} dW={dWs[m]:+.4e} mass={diag.mass:.12g} "
            f"min_u={diag.min_u:.4g} max_u={diag.max_u:.4g}"
        )
        if recorder:
            recorder(state.m, t_next, diag)
        for observer in observers:
            observer(state.m, t_next, diag)
        diag.state = None

    return RunResult(state=state, diagnostics=diagnostics, trajectory=recorder.record() if recorder else None)


class _Recorder:
    """Observer that keeps (u, sigma, c) snapshots every ``every`` steps."""

    def __init__(self, mesh: PeriodicMesh, forms: FormMatrices, every: int):
        self.mesh = mesh
        self.forms = forms
        self.every = every
        self.times: List[float] = []
        self.u: List[np.ndarray] = []
        self.sigma: List[np.ndarray] = []
        self.c: List[np.ndarray] = []

    def __call__(self, m: int, t: float, diag: StepDiagnostics):
        if m % self.every:
            return
        self.times.append(t)
        self.u.append(diag.state.u)
        self.sigma.append(diag.state.sigma)
        self.c.append(diag.state.c)

    def record(self) -> TrajectoryRecord:
        return TrajectoryRecord(
            times=np.array(self.times),
            u=np.array(self.u),
            sigma=np.array(self.sigma),
            c=np.array(self.c),
            mesh=self.mesh,
            forms=self.forms,
        )


def check_stability_criterion(
    params: ModelParams, T: float, k: float, u0_l2: float, C_L: float = 1.0
) -> StabilityReport:
    """Advisory check of 1 - 32 chi^2 C_L^4 T kappa1 / nu > 0.

    kappa1 = ||u0||^2 + (3 chi^2 C_L^4 k / nu) ||u0||^4, with u0_l2 = ||u0||.
    C_L is the Ladyzhenskaya constant, supplied by the caller.
    """
    if C_L <= 0:
        raise ValueError(f"C_L must be positive, got {C_L}")
    chi2 = params.chi ** 2
    cl4 = C_L ** 4
    norm2 = u0_l2 ** 2
    kappa1 = norm2 + (3.0 * chi2 * cl4 * k / params.nu) * norm2 ** 2
    value = 1.0 - 32.0 * chi2 * cl4 * T * kappa1 / params.nu
    report = StabilityReport(kappa1=kappa1, value=value, satisfied=value > 0)
    if not report.satisfied:
        logger.warning(f"[STABILITY] Criterion not satisfied: value={value:.4g} (kappa1={kappa1:.4g}, C_L={C_L})")
    else:
        logger.info(f"[STABILITY] Criterion satisfied: value={value:.4g}")
    return report
