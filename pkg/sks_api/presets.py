"""Named experiment configurations for the four reference tests and their controls."""
import math
from typing import Callable, Dict, List

from sks_api.models import ExperimentConfig, Level, ModelParams

BLOWUP_TIMES = [3e-5, 5e-5, 9e-5, 2e-4]


def _test1() -> ExperimentConfig:
    # k = h^2 balances the k^(-1/2) h^2 term
    return ExperimentConfig(
        test_id="test1",
        kind="convergence",
        params=ModelParams(nu=1.0, chi=1.0, delta=1.0),
        initial_data="sine_bump",
        levels=[Level(N=N, k=1.0 / (N * N)) for N in (2, 4, 8, 16)],
        T=1.0,
        J=400,
    )


def _test1_control() -> ExperimentConfig:
    cfg = _test1()
    return cfg.model_copy(update={"test_id": "test1_control", "params": cfg.params.model_copy(update={"delta": 0.0}), "J": 1})


def _test2() -> ExperimentConfig:
    return ExperimentConfig(
        test_id="test2",
        kind="inverse_k",
        params=ModelParams(nu=1.0, chi=1.0, delta=10.0),
        initial_data="sine_bump",
        levels=[Level(N=10, k=1.0 / d) for d in (128, 256, 512, 1024)],
        T=1.0,
        J=400,
    )


def _test2_control() -> ExperimentConfig:
    cfg = _test2()
    return cfg.model_copy(update={"test_id": "test2_control", "params": cfg.params.model_copy(update={"delta": 0.0}), "J": 1})


def _test3() -> ExperimentConfig:
    return ExperimentConfig(
        test_id="test3",
        kind="convergence",
        params=ModelParams(nu=1.0, chi=1.0, delta=0.1),
        initial_data="sine_bump",
        levels=[Level(N=N, k=1.0 / 2048) for N in (4, 8, 16, 32)],
        T=1.0,
        J=400,
    )


def _test4() -> ExperimentConfig:
    return ExperimentConfig(
        test_id="test4",
        kind="blowup",
        params=ModelParams(nu=1.0, chi=4.0 * math.pi, delta=1.0),
        initial_data="gaussian_blowup",
        levels=[Level(N=60, k=1e-6)],
        final_times=list(BLOWUP_TIMES),
        J=400,
        include_control=True,
    )


def _test4_control() -> ExperimentConfig:
    cfg = _test4()
    return cfg.model_copy(update={
        "test_id": "test4_control",
        "params": cfg.params.model_copy(update={"delta": 0.0}),
        "J": 1,
        "include_control": False,
    })


def _heat_control() -> ExperimentConfig:
    # chi = delta = 0: Crank-Nicolson heat equation, expected L2 rate 2 with k = h.
    # nu = 0.01 keeps k nu lambda small on the coarsest level.
    return ExperimentConfig(
        test_id="heat_control",
        kind="convergence",
        params=ModelParams(nu=0.01, chi=0.0, delta=0.0),
        initial_data="fourier_mode",
        levels=[Level(N=N, k=1.0 / N) for N in (4, 8, 16, 32)],
        T=1.0,
        J=1,
    )


PRESET_REGISTRY: Dict[str, Callable[[], ExperimentConfig]] = {
    "test1": _test1,
    "test1_control": _test1_control,
    "test2": _test2,
    "test2_control": _test2_control,
    "test3": _test3,
    "test4": _test4,
    "test4_control": _test4_control,
    "heat_control": _heat_control,
}

PRESET_DESCRIPTIONS = {
    "test1": "Strong convergence with k = h^2, h = 1/2..1/16, delta = 1.",
    "test1_control": "Test 1 without noise; the deterministic rates.",
    "test2": "Error growth as k shrinks at fixed h = 1/10, delta = 10.",
    "test2_control": "Test 2 without noise; errors should not grow.",
    "test3": "Small noise delta = 0.1 at k = 1/2048, h = 1/4..1/32.",
    "test4": "Blow-up of E[u] for chi = 4 pi with Gaussian data, h = 1/60, k = 1e-6.",
    "test4_control": "Test 4 without noise.",
    "heat_control": "chi = delta = 0 self-convergence with k = h, nu = 0.01.",
}


def get_preset(name: str) -> ExperimentConfig:
    """Get a fresh experiment configuration by preset name.

    Raises:
        ValueError: If name is not recognized
    """
    if name not in PRESET_REGISTRY:
        raise ValueError(f"Unknown preset: {name}. Available: {list(PRESET_REGISTRY.keys())}")
    return PRESET_REGISTRY[name]()


def get_preset_description(name: str) -> str:
    return PRESET_DESCRIPTIONS.get(name, "No description available.")


def list_presets() -> List[str]:
    return list(PRESET_REGISTRY.keys())
