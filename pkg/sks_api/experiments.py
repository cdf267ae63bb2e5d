"""Monte Carlo drivers: convergence, inverse-k and blow-up studies.

A convergence sample j draws one Wiener path with seed base_seed + j and runs
the coarse level (N, k) and its reference (2N, k/4) on that same path. The
pathwise errors are reduced over samples in sample order, so results do not
depend on how joblib schedules the work.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import time

import numpy as np
import pandas as pd
from joblib import Memory, Parallel, delayed

from sks_api.assembly import FormMatrices, assemble_static
from sks_api.initial_data import get_initial_data
from sks_api.mesh import PeriodicMesh, build_uniform
from sks_api.models import Discretization, ExperimentConfig, Level, ModelParams
from sks_api.norms import TrajectoryRecord, l2_disc, mc_aggregate, path_error
from sks_api.scheme import RunResult, SchemeState, StepFailure, check_stability_criterion, initialize_from, run
from sks_api.stochastic import generate, resolve_k0, sample_seed

logger = logging.getLogger(__name__)

REFERENCE_TIME_FACTOR = 4

CONVERGENCE_COLUMNS = [
    "level", "h", "k", "J", "err_u", "err_c", "err_sigma", "rate_u", "rate_c", "rate_sigma", "excluded",
]
INVERSE_K_COLUMNS = ["h", "k", "J", "err_u", "err_c", "err_sigma", "excluded"]
BLOWUP_COLUMNS = ["tM", "J", "min_u", "max_u", "mass", "linf_mean_field"]
BLOWUP_SERIES_COLUMNS = ["step", "t", "min_u", "max_u"]
FIELD_COLUMNS = ["vertex_x", "vertex_y", "mean_u"]


@dataclass
class LevelResult:
    N: int
    h: float
    k: float
    J: int
    err_u: float
    err_c: float
    err_sigma: float
    excluded: int = 0


@dataclass
class ErrorReport:
    kind: str
    levels: List[LevelResult]
    rates: Dict[str, Optional[float]] = field(default_factory=lambda: {"u": None, "c": None, "sigma": None})
    J: int = 0
    seeds: List[int] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def excluded(self) -> int:
        return sum(lv.excluded for lv in self.levels)

    @property
    def all_excluded(self) -> bool:
        """True when some level has no usable sample."""
        return any(lv.excluded >= lv.J for lv in self.levels)

    def to_frame(self) -> pd.DataFrame:
        if self.kind == "inverse_k":
            rows = [[lv.h, lv.k, lv.J, lv.err_u, lv.err_c, lv.err_sigma, lv.excluded] for lv in self.levels]
            return pd.DataFrame(rows, columns=INVERSE_K_COLUMNS)
        rate = [self.rates.get(name) for name in ("u", "c", "sigma")]
        rate = [np.nan if r is None else r for r in rate]
        rows = [
            [i, lv.h, lv.k, lv.J, lv.err_u, lv.err_c, lv.err_sigma, *rate, lv.excluded]
            for i, lv in enumerate(self.levels)
        ]
        return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)


@dataclass
class BlowupReport:
    final_times: List[float]
    J: int
    mesh: PeriodicMesh
    mean_fields: List[np.ndarray]   # sample mean of u at each final time
    mean_min_u: np.ndarray          # per step, sample mean of min_u
    mean_max_u: np.ndarray
    k: float
    mass_weights: np.ndarray
    initial_mass: float = float("nan")  # mass of the projected u^0
    excluded: int = 0
    control: Optional["BlowupReport"] = None

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for tM, u in zip(self.final_times, self.mean_fields):
            rows.append([
                tM,
                self.J,
                float(u.min()),
                float(u.max()),
                float(self.mass_weights @ u),
                float(np.abs(u).max()),
            ])
        return pd.DataFrame(rows, columns=BLOWUP_COLUMNS)

    def series_frame(self) -> pd.DataFrame:
        steps = np.arange(len(self.mean_min_u))
        return pd.DataFrame(
            {"step": steps, "t": steps * self.k, "min_u": self.mean_min_u, "max_u": self.mean_max_u},
            columns=BLOWUP_SERIES_COLUMNS,
        )

    def field_frame(self, i: int) -> pd.DataFrame:
        v = self.mesh.vertices
        return pd.DataFrame(
            {"vertex_x": v[:, 0], "vertex_y": v[:, 1], "mean_u": self.mean_fields[i]},
            columns=FIELD_COLUMNS,
        )


def estimate_rate(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.shape != errors.shape or hs.size < 2:
        raise ValueError(f"Need at least two (h, error) pairs of equal length, got {hs.size} and {errors.size}")
    if np.any(hs <= 0) or np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise ValueError(f"Rate fit needs positive finite values, got hs={hs.tolist()}, errors={errors.tolist()}")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


@lru_cache(maxsize=16)
def _setup(N: int, params: ModelParams, initial_data: str) -> Tuple[PeriodicMesh, FormMatrices, SchemeState]:
    """Mesh, static forms and projected initial state, cached per worker process."""
    mesh = build_uniform(N, params.L)
    forms = assemble_static(mesh, params.b)
    state0 = initialize_from(mesh, params, get_initial_data(initial_data, params.L), forms=forms)
    return mesh, forms, state0


def _trajectory(
    params: ModelParams,
    initial_data: str,
    N: int,
    k: float,
    T: float,
    seed: int,
    k0: float,
    record_every: int,
    solver: str,
) -> TrajectoryRecord:
    mesh, forms, state0 = _setup(N, params, initial_data)
    disc = Discretization(N=N, k=k, T=T)
    path = generate(seed, T, k0) if params.delta > 0 else None
    return run(mesh, params, disc, path, state0, forms=forms, record_every=record_every, solver=solver).trajectory


def _paired_sample(config: ExperimentConfig, level: Level, j: int, k0: float):
    """Pathwise (err_u, err_c, err_sigma) of sample j, or the failure message."""
    seed = sample_seed(config.base_seed, j)
    reference = _trajectory
    if config.reference_cache_dir:
        reference = Memory(config.reference_cache_dir, verbose=0).cache(_trajectory)
    try:
        coarse = _trajectory(config.params, config.initial_data, level.N, level.k, config.T, seed, k0, 1, config.solver)
        ref = reference(
            config.params,
            config.initial_data,
            2 * level.N,
            level.k / REFERENCE_TIME_FACTOR,
            config.T,
            seed,
            k0,
            REFERENCE_TIME_FACTOR,
            config.solver,
        )
    except StepFailure as e:
        return j, seed, None, str(e)
    return j, seed, path_error(coarse, ref), None


def _experiment_k0(config: ExperimentConfig, reference: bool) -> float:
    ks = [lv.k for lv in config.levels]
    if reference:
        ks += [k / REFERENCE_TIME_FACTOR for k in ks]
    return resolve_k0(config.k0, ks)


def _stability_advisory(config: ExperimentConfig, T: float):
    level = config.levels[0]
    mesh, forms, state0 = _setup(level.N, config.params, config.initial_data)
    check_stability_criterion(config.params, T, level.k, l2_disc(mesh, state0.u, forms))


def _level_errors(config: ExperimentConfig, level: Level, k0: float, threads: int) -> LevelResult:
    outcomes = Parallel(n_jobs=threads)(
        delayed(_paired_sample)(config, level, j, k0) for j in range(config.J)
    )
    errs = []
    excluded = 0
    for j, seed, err, failure in outcomes:
        if err is None:
            excluded += 1
            logger.warning(f"[SAMPLE] Sample {j} (seed={seed}) excluded at N={level.N}, k={level.k}: {failure}")
            continue
        logger.debug(f"[SAMPLE] j={j} seed={seed} err_u={err[0]:.4e} err_c={err[1]:.4e} err_sigma={err[2]:.4e}")
        errs.append(err)

    if errs:
        arr = np.array(errs)
        agg = [mc_aggregate(arr[:, i]) for i in range(3)]
    else:
        logger.warning(f"[LEVEL] Every sample excluded at N={level.N}, k={level.k}")
        agg = [np.nan] * 3
    result = LevelResult(
        N=level.N,
        h=config.params.L / level.N,
        k=level.k,
        J=config.J,
        err_u=agg[0],
        err_c=agg[1],
        err_sigma=agg[2],
        excluded=excluded,
    )
    logger.info(
        f"[LEVEL] N={level.N} k={level.k:.6g}: err_u={result.err_u:.4e} err_c={result.err_c:.4e} "
        f"err_sigma={result.err_sigma:.4e} ({excluded} excluded)"
    )
    return result


def _fit_rates(levels: List[LevelResult]) -> Dict[str, Optional[float]]:
    rates: Dict[str, Optional[float]] = {"u": None, "c": None, "sigma": None}
    if len(levels) < 2:
        return rates
    hs = [lv.h for lv in levels]
    for name in rates:
        errors = [getattr(lv, f"err_{name}") for lv in levels]
        for a, b in zip(range(len(levels)), range(1, len(levels))):
            if errors[a] > 0 and errors[b] > 0:
                pair = np.log(errors[a] / errors[b]) / np.log(hs[a] / hs[b])
                logger.info(f"[RATE] {name}: h={hs[a]:.4g} -> {hs[b]:.4g} observed rate {pair:.3f}")
        try:
            rates[name] = estimate_rate(hs, errors)
        except ValueError as e:
            logger.warning(f"[RATE] No rate for {name}: {e}")
    logger.info("[RATE] Least-squares rates: " + ", ".join(f"{n}={r}" for n, r in rates.items()))
    return rates


def convergence_study(config: ExperimentConfig, threads: Optional[int] = None) -> ErrorReport:
    """Strong-error study: coarse (N, k) against reference (2N, k/4) per level, rates fitted against h."""
    start = time.perf_counter()
    threads = threads or config.threads or 1
    k0 = _experiment_k0(config, reference=True)
    logger.info(f"[RUN] Convergence study '{config.test_id}': {len(config.levels)} levels, J={config.J}, k0={k0}")
    _stability_advisory(config, config.T)
    levels = [_level_errors(config, level, k0, threads) for level in config.levels]
    report = ErrorReport(
        kind="convergence",
        levels=levels,
        rates=_fit_rates(levels),
        J=config.J,
        seeds=[sample_seed(config.base_seed, j) for j in range(config.J)],
        wall_clock=time.perf_counter() - start,
    )
    logger.info(f"[RUN] Convergence study done in {report.wall_clock:.1f}s, {report.excluded} samples excluded")
    return report


def inverse_k_study(config: ExperimentConfig, threads: Optional[int] = None) -> ErrorReport:
    """Same paired protocol at fixed N over a list of time steps; no rate is fitted."""
    if len({lv.N for lv in config.levels}) != 1:
        raise ValueError("An inverse_k study keeps N fixed across levels")
    start = time.perf_counter()
    threads = threads or config.threads or 1
    k0 = _experiment_k0(config, reference=True)
    logger.info(f"[RUN] Inverse-k study '{config.test_id}': N={config.levels[0].N}, J={config.J}, k0={k0}")
    _stability_advisory(config, config.T)
    levels = [_level_errors(config, level, k0, threads) for level in config.levels]
    report = ErrorReport(
        kind="inverse_k",
        levels=levels,
        J=config.J,
        seeds=[sample_seed(config.base_seed, j) for j in range(config.J)],
        wall_clock=time.perf_counter() - start,
    )
    logger.info(f"[RUN] Inverse-k study done in {report.wall_clock:.1f}s, {report.excluded} samples excluded")
    return report


def _blowup_sample(config: ExperimentConfig, params: ModelParams, j: int, k0: float):
    """Snapshots of u at every final time and the per-step min/max series of one sample."""
    level = config.levels[0]
    seed = sample_seed(config.base_seed, j)
    horizon = max(config.final_times)
    mesh, forms, state0 = _setup(level.N, params, config.initial_data)
    disc = Discretization(N=level.N, k=level.k, T=horizon)
    capture = {Discretization(N=level.N, k=level.k, T=t).M: i for i, t in enumerate(config.final_times)}
    snapshots: List[Optional[np.ndarray]] = [None] * len(config.final_times)
    if 0 in capture:
        snapshots[capture[0]] = state0.u

    def observer(m, t, diag):
        if m in capture:
            snapshots[capture[m]] = diag.state.u

    path = generate(seed, horizon, k0) if params.delta > 0 else None
    try:
        result = run(mesh, params, disc, path, state0, forms=forms, observers=[observer], solver=config.solver)
    except StepFailure as e:
        return j, seed, None, str(e)
    series = np.array([[d.min_u, d.max_u] for d in result.diagnostics])
    return j, seed, (np.array(snapshots), series), None


def _blowup_average(config: ExperimentConfig, params: ModelParams, J: int, threads: int) -> BlowupReport:
    level = config.levels[0]
    k0 = resolve_k0(config.k0, [level.k])
    mesh, forms, state0 = _setup(level.N, params, config.initial_data)
    outcomes = Parallel(n_jobs=threads)(delayed(_blowup_sample)(config, params, j, k0) for j in range(J))

    fields = None
    series = None
    used = 0
    for j, seed, out, failure in outcomes:
        if out is None:
            logger.warning(f"[SAMPLE] Blow-up sample {j} (seed={seed}) excluded: {failure}")
            continue
        snaps, s = out
        fields = snaps.copy() if fields is None else fields + snaps
        series = s.copy() if series is None else series + s
        used += 1
        logger.debug(f"[SAMPLE] j={j} seed={seed} max_u(tM)={snaps.max(axis=1).tolist()}")

    n_times = len(config.final_times)
    if used:
        fields /= used
        series /= used
    else:
        fields = np.full((n_times, mesh.n_vertices), np.nan)
        series = np.full((Discretization(N=level.N, k=level.k, T=max(config.final_times)).M + 1, 2), np.nan)
    return BlowupReport(
        final_times=list(config.final_times),
        J=J,
        mesh=mesh,
        mean_fields=list(fields),
        mean_min_u=series[:, 0],
        mean_max_u=series[:, 1],
        k=level.k,
        mass_weights=forms.mass_weights,
        initial_mass=float(forms.mass_weights @ state0.u),
        excluded=J - used,
    )


def blowup_study(config: ExperimentConfig, threads: Optional[int] = None) -> BlowupReport:
    """Sample mean of u at each final time, plus the per-step min/max series.

    With ``include_control`` the deterministic (delta = 0) run is attached
    as ``report.control``.
    """
    if not config.final_times:
        raise ValueError("A blowup study needs final_times")
    threads = threads or config.threads or 1
    level = config.levels[0]
    logger.info(
        f"[BLOWUP] '{config.test_id}': N={level.N}, k={level.k}, final times {config.final_times}, J={config.J}"
    )
    _stability_advisory(config, max(config.final_times))
    report = _blowup_average(config, config.params, config.J, threads)
    for tM, u in zip(report.final_times, report.mean_fields):
        logger.info(f"[BLOWUP] tM={tM:g}: max E[u]={np.nanmax(u):.6g}, min E[u]={np.nanmin(u):.6g}")
    if config.include_control:
        control_params = config.params.model_copy(update={"delta": 0.0})
        report.control = _blowup_average(config, control_params, 1, 1)
        for tM, u in zip(report.control.final_times, report.control.mean_fields):
            logger.info(f"[BLOWUP] control tM={tM:g}: max u={np.nanmax(u):.6g}")
    return report


def single_run(config: ExperimentConfig, seed: Optional[int] = None) -> Tuple[PeriodicMesh, RunResult]:
    """One realisation on the first configured level over [0, T]."""
    level = config.levels[0]
    seed = config.base_seed if seed is None else seed
    mesh, forms, state0 = _setup(level.N, config.params, config.initial_data)
    disc = Discretization(N=level.N, k=level.k, T=config.T)
    check_stability_criterion(config.params, config.T, level.k, l2_disc(mesh, state0.u, forms))
    path = generate(seed, config.T, resolve_k0(config.k0, [level.k])) if config.params.delta > 0 else None
    logger.info(f"[RUN] Single run N={level.N}, k={level.k}, T={config.T}, seed={seed}")
    result = run(mesh, config.params, disc, path, state0, forms=forms, solver=config.solver)
    return mesh, result


def run_frame(result: RunResult) -> pd.DataFrame:
    rows = [[d.m, d.t, d.mass, d.min_u, d.max_u, d.l2_u, d.sigma_h1, d.c_l2] for d in result.diagnostics]
    return pd.DataFrame(rows, columns=["m", "t", "mass", "min_u", "max_u", "l2_u", "sigma_h1", "c_l2"])


def run_field_frame(mesh: PeriodicMesh, result: RunResult) -> pd.DataFrame:
    v = mesh.vertices
    return pd.DataFrame(
        {"vertex_x": v[:, 0], "vertex_y": v[:, 1], "u": result.state.u, "c": result.state.c},
        columns=["vertex_x", "vertex_y", "u", "c"],
    )
