"""Monte Carlo drivers, rate fitting, initial data and presets."""
from logging import getLogger
from pathlib import Path
import runpy
import sys

import numpy as np
import pandas as pd
import pytest

from sks_api.assembly import assemble_static
from sks_api.experiments import (
    CONVERGENCE_COLUMNS,
    INVERSE_K_COLUMNS,
    BLOWUP_COLUMNS,
    blowup_study,
    convergence_study,
    estimate_rate,
    inverse_k_study,
    single_run,
)
from sks_api.initial_data import get_initial_data, get_initial_data_description, list_initial_data_types
from sks_api.mesh import build_uniform
from sks_api.models import ExperimentConfig, Level, ModelParams
from sks_api.presets import get_preset, list_presets
from sks_api.scheme import initialize_from

logger = getLogger(__name__)


def _small_convergence(**kw) -> ExperimentConfig:
    base = dict(
        test_id="small",
        kind="convergence",
        params=ModelParams(delta=1.0),
        levels=[Level(N=2, k=0.25), Level(N=4, k=0.0625)],
        T=0.25,
        J=3,
        base_seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_estimate_rate_examples():
    assert estimate_rate([0.2, 0.1], [0.1, 0.05]) == pytest.approx(1.0)
    assert estimate_rate([0.2, 0.1], [0.04, 0.01]) == pytest.approx(2.0)
    assert estimate_rate([0.2, 0.1, 0.05], [0.3, 0.3, 0.3]) == pytest.approx(0.0, abs=1e-12)


def test_estimate_rate_rejects_bad_input():
    with pytest.raises(ValueError):
        estimate_rate([0.2, 0.1], [0.1, 0.0])
    with pytest.raises(ValueError):
        estimate_rate([0.1], [0.1])
    with pytest.raises(ValueError):
        estimate_rate([-0.2, 0.1], [0.1, 0.2])


def test_convergence_report_shape():
    report = convergence_study(_small_convergence(), threads=1)
    frame = report.to_frame()
    assert list(frame.columns) == CONVERGENCE_COLUMNS
    assert len(frame) == 2
    assert report.excluded == 0
    assert all(np.isfinite(frame[["err_u", "err_c", "err_sigma"]].to_numpy()).ravel())
    assert all(r is not None for r in report.rates.values())
    assert report.seeds == [5, 6, 7]
    assert frame["rate_u"].nunique() == 1


def test_single_level_has_no_rate():
    report = convergence_study(_small_convergence(levels=[Level(N=2, k=0.25)]), threads=1)
    assert report.rates == {"u": None, "c": None, "sigma": None}
    assert report.to_frame()["rate_u"].isna().all()


def test_convergence_is_reproducible():
    a = convergence_study(_small_convergence(), threads=1).to_frame()
    b = convergence_study(_small_convergence(), threads=1).to_frame()
    pd.testing.assert_frame_equal(a, b, check_exact=True)


@pytest.mark.slow
def test_threads_do_not_change_results():
    a = convergence_study(_small_convergence(J=4), threads=1).to_frame()
    b = convergence_study(_small_convergence(J=4), threads=2).to_frame()
    pd.testing.assert_frame_equal(a, b, check_exact=True)


def test_excluded_samples_are_counted(monkeypatch):
    from sks_api import experiments
    from sks_api.scheme import StepFailure

    def failing(*args, **kwargs):
        raise StepFailure("forced", m=0, t=0.0, dW=0.0)

    monkeypatch.setattr(experiments, "_trajectory", failing)
    report = convergence_study(_small_convergence(), threads=1)
    assert report.excluded == 6
    assert report.all_excluded
    assert np.isnan(report.levels[0].err_u)


def test_inverse_k_report():
    config = _small_convergence(kind="inverse_k", levels=[Level(N=4, k=0.125), Level(N=4, k=0.0625)], J=2)
    frame = inverse_k_study(config, threads=1).to_frame()
    assert list(frame.columns) == INVERSE_K_COLUMNS
    assert frame["h"].tolist() == [0.25, 0.25]


def test_inverse_k_needs_fixed_n():
    with pytest.raises(ValueError):
        _small_convergence(kind="inverse_k")


def test_single_run_diagnostics():
    config = _small_convergence(kind="run")
    mesh, result = single_run(config, seed=1)
    assert mesh.N == 2
    assert len(result.diagnostics) == 2
    assert result.diagnostics[-1].mass == pytest.approx(result.diagnostics[0].mass, rel=1e-9)


def test_small_blowup_study():
    config = ExperimentConfig(
        test_id="small_blowup",
        kind="blowup",
        params=ModelParams(chi=4 * np.pi, delta=1.0),
        initial_data="gaussian_blowup",
        levels=[Level(N=8, k=1e-5)],
        final_times=[2e-5, 5e-5],
        J=2,
        include_control=True,
    )
    report = blowup_study(config, threads=1)
    frame = report.to_frame()
    assert list(frame.columns) == BLOWUP_COLUMNS
    assert len(frame) == 2
    assert len(report.series_frame()) == 6
    assert list(report.field_frame(0).columns) == ["vertex_x", "vertex_y", "mean_u"]
    assert report.control is not None and report.control.J == 1
    assert frame["J"].tolist() == [2, 2]
    mesh = build_uniform(8)
    forms = assemble_static(mesh, config.params.b)
    state0 = initialize_from(mesh, config.params, get_initial_data("gaussian_blowup"), forms=forms)
    assert report.initial_mass == pytest.approx(float(forms.mass_weights @ state0.u), rel=1e-12)
    assert np.all(np.abs(frame["mass"].to_numpy() - report.initial_mass) <= 1e-8 * abs(report.initial_mass))
    control_mass = report.control.to_frame()["mass"].to_numpy()
    assert np.all(np.abs(control_mass - report.control.initial_mass) <= 1e-8 * abs(report.control.initial_mass))


def test_initial_data_registry():
    assert set(list_initial_data_types()) >= {"sine_bump", "gaussian_blowup", "fourier_mode", "constant", "zero"}
    with pytest.raises(ValueError):
        get_initial_data("square_wave")
    assert "blow-up" in get_initial_data_description("gaussian_blowup")
    assert float(get_initial_data("sine_bump").rot_grad_c0(0.3, 0.7)) == 0.0


def test_gaussian_blowup_is_centred():
    data = get_initial_data("gaussian_blowup", L=1.0)
    assert float(data.u0(0.5, 0.5)) == pytest.approx(1000.0)
    assert float(data.c0(0.5, 0.5)) == pytest.approx(500.0)
    gx, gy = data.grad_c0(0.5, 0.5)
    assert float(gx) == pytest.approx(0.0) and float(gy) == pytest.approx(0.0)


def test_initial_data_derivatives_match_finite_differences():
    eps = 1e-5
    for name in ("sine_bump", "fourier_mode", "gaussian_blowup"):
        data = get_initial_data(name)
        x, y = 0.37, 0.61
        gx, gy = data.grad_c0(x, y)
        assert gx == pytest.approx((data.c0(x + eps, y) - data.c0(x - eps, y)) / (2 * eps), rel=1e-6)
        assert gy == pytest.approx((data.c0(x, y + eps) - data.c0(x, y - eps)) / (2 * eps), rel=1e-6)
        lap = (data.c0(x + eps, y) + data.c0(x - eps, y) + data.c0(x, y + eps) + data.c0(x, y - eps)
               - 4 * data.c0(x, y)) / eps ** 2
        assert data.lap_c0(x, y) == pytest.approx(lap, rel=1e-3)


def test_presets_validate():
    for name in list_presets():
        config = get_preset(name)
        assert ExperimentConfig.model_validate(config.model_dump()) == config
    assert get_preset("test4").params.chi == pytest.approx(4 * np.pi)
    with pytest.raises(ValueError):
        get_preset("test9")


def test_shipped_configs_match_presets():
    configs = Path(__file__).resolve().parents[1] / "configs"
    for name in list_presets():
        shipped = ExperimentConfig.model_validate_json((configs / f"{name}.json").read_text())
        assert shipped == get_preset(name), name


def test_write_preset_configs_script(tmp_path, monkeypatch):
    script = Path(__file__).resolve().parents[1] / "scripts" / "write_preset_configs.py"
    monkeypatch.setattr(sys, "argv", [str(script), "--dst", str(tmp_path), "--only", "test1", "heat_control"])
    runpy.run_path(str(script), run_name="__main__")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["heat_control.json", "test1.json"]
    written = ExperimentConfig.model_validate_json((tmp_path / "test1.json").read_text())
    assert written == get_preset("test1")


@pytest.mark.slow
def test_heat_reduction_rate():
    report = convergence_study(get_preset("heat_control"), threads=1)
    logger.info(f"heat reduction rates {report.rates}")
    assert report.rates["u"] == pytest.approx(2.0, abs=0.3)


def _desk(name, **update):
    return get_preset(name).model_copy(update=update)


@pytest.mark.super_slow
def test_strong_convergence_with_balanced_step():
    report = convergence_study(_desk("test1", J=50), threads=-1)
    logger.info(f"test1 rates {report.rates}")
    assert report.excluded == 0
    for name in ("u", "c", "sigma"):
        assert report.rates[name] == pytest.approx(1.0, abs=0.35)


@pytest.mark.super_slow
def test_deterministic_rates_with_balanced_step():
    report = convergence_study(get_preset("test1_control"), threads=-1)
    logger.info(f"test1_control rates {report.rates}")
    assert report.excluded == 0
    assert report.rates["u"] > 1.3
    assert report.rates["c"] > 1.3
    assert report.rates["sigma"] > 0.6


@pytest.mark.super_slow
def test_noise_does_not_reduce_errors():
    noisy = convergence_study(_desk("test1", J=50), threads=-1)
    control = convergence_study(get_preset("test1_control"), threads=-1)
    for a, b in zip(control.levels, noisy.levels):
        logger.info(f"N={a.N}: err_u {a.err_u:.4e} vs {b.err_u:.4e}, err_sigma {a.err_sigma:.4e} vs {b.err_sigma:.4e}")
        assert a.err_u <= b.err_u
        assert a.err_c <= b.err_c
        assert a.err_sigma <= b.err_sigma
    assert noisy.rates["u"] < control.rates["u"]


@pytest.mark.super_slow
def test_errors_grow_as_step_shrinks():
    report = inverse_k_study(_desk("test2", J=50), threads=-1)
    errs = [lv.err_u for lv in report.levels]
    logger.info(f"test2 err_u {errs}")
    assert errs[-1] > errs[0]
    assert sum(b < a for a, b in zip(errs, errs[1:])) <= 1
    control = inverse_k_study(_desk("test2_control"))
    cerrs = [lv.err_u for lv in control.levels]
    assert cerrs[-1] <= cerrs[0] * 1.05


@pytest.mark.super_slow
def test_small_noise_rates():
    config = _desk("test3", J=25, levels=[Level(N=N, k=1.0 / 2048) for N in (4, 8, 16)])
    report = convergence_study(config, threads=-1)
    logger.info(f"test3 rates {report.rates}")
    assert report.rates["u"] == pytest.approx(2.0, abs=0.4)
    assert report.rates["c"] == pytest.approx(2.0, abs=0.4)
    assert report.rates["sigma"] == pytest.approx(1.0, abs=0.4)


@pytest.mark.super_slow
def test_blowup_mean_field_grows():
    report = blowup_study(_desk("test4", J=10, include_control=False), threads=-1)
    frame = report.to_frame()
    logger.info(f"test4\n{frame}")
    assert np.all(np.diff(frame["max_u"].to_numpy()) > 0)
    mass = frame["mass"].to_numpy()
    assert np.all(np.abs(mass - report.initial_mass) <= 1e-8 * abs(report.initial_mass))
