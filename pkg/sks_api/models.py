"""Typed configuration for runs, experiments and the command line."""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

STEP_RTOL = 1e-12


class ModelParams(BaseModel):
    """Coefficients of the stochastic Keller-Segel system on the torus of period L."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    nu: float = Field(1.0, gt=0)      # diffusion
    chi: float = Field(1.0, ge=0)     # chemotactic sensitivity
    delta: float = Field(1.0, ge=0)   # noise intensity
    b: Tuple[float, float] = (1.0, 0.0)  # noise direction
    L: float = Field(1.0, gt=0)


class Discretization(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    N: int = Field(..., ge=2)
    k: float = Field(..., gt=0)
    T: float = Field(..., ge=0)

    @property
    def M(self) -> int:
        return int(round(self.T / self.k))

    @model_validator(mode="after")
    def _steps_fit_horizon(self):
        M = round(self.T / self.k)
        if abs(M * self.k - self.T) > STEP_RTOL * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not an integer number of steps k={self.k}")
        return self


class Level(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    N: int = Field(..., ge=2)
    k: float = Field(..., gt=0)


class ExperimentConfig(BaseModel):
    """One experiment; JSON config files map onto these fields one-to-one."""
    model_config = ConfigDict(extra="forbid")

    test_id: str = "custom"
    kind: Literal["run", "convergence", "inverse_k", "blowup"] = "convergence"
    params: ModelParams = ModelParams()
    initial_data: str = "sine_bump"
    levels: List[Level] = Field(default_factory=list)
    T: float = Field(1.0, gt=0)
    final_times: List[float] = Field(default_factory=list)  # blowup only
    J: int = Field(400, ge=1)
    base_seed: int = Field(0, ge=0)
    k0: float = Field(1.0 / 2048, gt=0)
    out_dir: str = "out"
    threads: Optional[int] = Field(None, ge=1)
    include_control: bool = False
    reference_cache_dir: Optional[str] = None
    solver: Literal["lu", "bicgstab"] = "lu"

    @field_validator("final_times")
    @classmethod
    def _increasing(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"final_times must be strictly increasing, got {v}")
        if any(t <= 0 for t in v):
            raise ValueError(f"final_times must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def _levels_present(self):
        if not self.levels:
            raise ValueError(f"Experiment kind '{self.kind}' needs at least one level")
        if self.kind == "blowup" and not self.final_times:
            raise ValueError("A blowup experiment needs final_times")
        if self.kind == "inverse_k" and len({lv.N for lv in self.levels}) != 1:
            raise ValueError("An inverse_k study keeps N fixed across levels")
        return self

    @property
    def horizon(self) -> float:
        return max(self.final_times) if self.kind == "blowup" else self.T


class CliConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    subcommand: Literal["run", "convergence", "inverse-k", "blowup", "selftest"]
    config_path: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0)
    samples: Optional[int] = Field(None, ge=1)
    out: Optional[str] = None
    threads: Optional[int] = Field(None, ge=1)
    k0: Optional[float] = Field(None, gt=0)
    verbosity: int = 0
