"""Command-line surface: exit codes, output files and reproducibility."""
import json
import logging

import pytest

from app import EXIT_CONFIG, EXIT_OK, build_parser, main
from sks_api.experiments import CONVERGENCE_COLUMNS
from sks_api.models import ExperimentConfig, Level, ModelParams


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("SKS_SEED", "SKS_OUT_DIR", "SKS_THREADS"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def small_config(tmp_path):
    config = ExperimentConfig(
        test_id="cli_small",
        params=ModelParams(delta=1.0),
        levels=[Level(N=2, k=0.25), Level(N=4, k=0.0625)],
        T=0.25,
        J=2,
    )
    path = tmp_path / "small.json"
    path.write_text(config.model_dump_json(indent=2))
    return path


def _run(*args):
    return main([str(a) for a in args])


def test_selftest_passes():
    assert _run("selftest") == EXIT_OK


def test_missing_config_is_a_config_error(tmp_path, caplog):
    missing = tmp_path / "nope.json"
    with caplog.at_level(logging.ERROR):
        assert _run("convergence", "--config", missing, "--out", tmp_path / "out") == EXIT_CONFIG
    assert str(missing) in caplog.text


def test_unknown_flag_is_a_config_error():
    assert _run("convergence", "--frobnicate") == EXIT_CONFIG


def test_no_subcommand_is_a_config_error():
    assert _run() == EXIT_CONFIG


def test_needs_config_or_preset(tmp_path):
    assert _run("run", "--out", tmp_path) == EXIT_CONFIG


def test_invalid_config_is_a_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"levels": [], "J": 4}))
    assert _run("convergence", "--config", bad, "--out", tmp_path / "out") == EXIT_CONFIG


def test_parser_lists_subcommands():
    parser = build_parser()
    args = parser.parse_args(["blowup", "--preset", "test4", "--samples", "3"])
    assert args.subcommand == "blowup"
    assert args.samples == 3


def test_run_writes_tables(small_config, tmp_path):
    out = tmp_path / "run"
    assert _run("run", "--config", small_config, "--seed", 3, "--out", out) == EXIT_OK
    assert (out / "run.csv").read_text().splitlines()[0] == "m,t,mass,min_u,max_u,l2_u,sigma_h1,c_l2"
    assert len((out / "run.csv").read_text().splitlines()) == 2 + 1
    assert len((out / "run_field.csv").read_text().splitlines()) == 4 + 1
    effective = json.loads((out / "effective_config.json").read_text())
    assert effective["kind"] == "run"
    assert effective["base_seed"] == 3


def test_convergence_header(small_config, tmp_path):
    out = tmp_path / "conv"
    assert _run("convergence", "--config", small_config, "--threads", 1, "--out", out) == EXIT_OK
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == ",".join(CONVERGENCE_COLUMNS)
    assert len(lines) == 3


def test_repeat_runs_are_byte_identical(small_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run("convergence", "--config", small_config, "--seed", 11, "--threads", 1, "--out", out) == EXIT_OK
    assert (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()


def test_env_seed_is_echoed_and_reproducible(small_config, tmp_path, monkeypatch):
    monkeypatch.setenv("SKS_SEED", "17")
    first = tmp_path / "first"
    assert _run("convergence", "--config", small_config, "--threads", 1, "--out", first) == EXIT_OK
    effective = first / "effective_config.json"
    assert json.loads(effective.read_text())["base_seed"] == 17

    monkeypatch.delenv("SKS_SEED")
    second = tmp_path / "second"
    assert _run("convergence", "--config", effective, "--threads", 1, "--out", second) == EXIT_OK
    assert (first / "convergence.csv").read_bytes() == (second / "convergence.csv").read_bytes()


def test_env_out_dir(small_config, tmp_path, monkeypatch):
    monkeypatch.setenv("SKS_OUT_DIR", str(tmp_path / "from_env"))
    assert _run("run", "--config", small_config) == EXIT_OK
    assert (tmp_path / "from_env" / "run.csv").is_file()


def test_bad_env_seed(small_config, tmp_path, monkeypatch):
    monkeypatch.setenv("SKS_SEED", "seven")
    assert _run("run", "--config", small_config, "--out", tmp_path) == EXIT_CONFIG
