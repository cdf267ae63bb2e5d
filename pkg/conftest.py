"""Pytest configuration and fixtures.

Ensures the project directory is in the Python path so `app`, `results`
and `sks_api` import without installing the package.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).resolve().parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from sks_api.assembly import assemble_static  # noqa: E402
from sks_api.mesh import build_uniform  # noqa: E402
from sks_api.models import ModelParams  # noqa: E402


@pytest.fixture
def mesh4():
    return build_uniform(4)


@pytest.fixture
def forms4(mesh4):
    return assemble_static(mesh4)


@pytest.fixture
def mesh8():
    return build_uniform(8)


@pytest.fixture
def forms8(mesh8):
    return assemble_static(mesh8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_params():
    """nu = chi = delta = 1, b = (1, 0), the parameters of the convergence tests."""
    return ModelParams()


@pytest.fixture(autouse=True)
def _log_file_in_tmp(tmp_path, monkeypatch):
    """Keep CLI log files out of the working tree."""
    monkeypatch.setenv("SKS_LOG_FILE", str(tmp_path / "sks_test.log"))
