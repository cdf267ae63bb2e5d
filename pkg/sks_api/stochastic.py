"""Seeded scalar Brownian paths stored at a fine resolution k0.

Coarse runs (step k = r * k0) and reference runs (step k / 4) of the same
Monte Carlo sample read their increments from one stored path, so both see
the same W(t) at every shared time.

Increments are rounded to the lattice 2^-40. Any partial sum of lattice
values below 2^12 in magnitude is exact in binary64, so coarse increments
telescope to W(T) bitwise whatever the grouping.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Union
import logging
import struct

import numpy as np

logger = logging.getLogger(__name__)

GENERATOR_ID = "numpy-philox4x64-ziggurat-lattice40/v1"
LATTICE = 2.0 ** -40
DEFAULT_K0 = 1.0 / 2048
_MAGIC = b"SKSW"
_ALIGN_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class WienerPath:
    T: float
    k0: float
    increments: np.ndarray  # length T / k0, each ~ Normal(0, k0)
    seed: int
    generator_id: str = GENERATOR_ID

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    def W(self, t: float) -> float:
        """Value of the path at a resolution-aligned time t (W(0) = 0)."""
        return float(np.sum(self.increments[:self.index(t)]))

    def index(self, t: float) -> int:
        return _aligned_count(t, self.k0, what="time")

    def coarse_increments(self, k: float) -> np.ndarray:
        """All increments of the step-k grid, k an integer multiple of k0."""
        r = steps_per(k, self.k0)
        if self.n_steps % r:
            raise ValueError(f"Step k={k} does not divide the path horizon T={self.T}")
        return self.increments.reshape(-1, r).sum(axis=1)


def _aligned_count(value: float, unit: float, what: str = "value") -> int:
    ratio = value / unit
    count = int(round(ratio))
    if abs(ratio - count) > _ALIGN_RTOL * max(1.0, abs(ratio)):
        raise ValueError(f"{what}={value} is not an integer multiple of the Wiener resolution k0={unit}")
    return count


def steps_per(k: float, k0: float) -> int:
    """Number of fine increments in one step of size k."""
    r = _aligned_count(k, k0, what="k")
    if r < 1:
        raise ValueError(f"Time step k={k} is smaller than the Wiener resolution k0={k0}")
    return r


def resolve_k0(k0: float, step_sizes) -> float:
    """Path resolution for an experiment: min(k0, smallest k), every k a multiple of it."""
    resolution = min([float(k0)] + [float(k) for k in step_sizes])
    for k in step_sizes:
        steps_per(k, resolution)
    return resolution


def generate(seed: int, T: float, k0: float = DEFAULT_K0) -> WienerPath:
    """Draw i.i.d. Normal(0, k0) increments covering [0, T]."""
    if T <= 0 or k0 <= 0:
        raise ValueError(f"Horizon and resolution must be positive, got T={T}, k0={k0}")
    n = _aligned_count(T, k0, what="T")
    if n < 1:
        raise ValueError(f"T={T} shorter than one step of k0={k0}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    raw = rng.standard_normal(n) * np.sqrt(k0)
    increments = np.round(raw / LATTICE) * LATTICE
    logger.debug(f"[PATH] seed={seed} T={T} k0={k0} n={n} W(T)={increments.sum():.6f}")
    return WienerPath(T=float(T), k0=float(k0), increments=increments, seed=int(seed))


def increment(path: WienerPath, t_a: float, t_b: float) -> float:
    """W(t_b) - W(t_a) for resolution-aligned times t_a < t_b."""
    if not t_a < t_b:
        raise ValueError(f"Need t_a < t_b, got t_a={t_a}, t_b={t_b}")
    a = path.index(t_a)
    b = path.index(t_b)
    if a < 0 or b > path.n_steps:
        raise ValueError(f"Interval [{t_a}, {t_b}] outside the path horizon [0, {path.T}]")
    return float(np.sum(path.increments[a:b]))


def sample_seed(base_seed: int, sample_index: int) -> int:
    """Seed of Monte Carlo sample j; shared by every level of that sample."""
    return int(base_seed) + int(sample_index)


def dump_path(path: WienerPath, file: Union[str, Path]) -> None:
    """Binary dump: magic, seed (u64), T, k0 (f64), n (u64), id length (u16), id, then '<f8' increments."""
    gid = path.generator_id.encode("utf-8")
    header = _MAGIC + struct.pack("<QddQH", path.seed & (2**64 - 1), path.T, path.k0, path.n_steps, len(gid)) + gid
    with open(file, "wb") as fh:
        fh.write(header)
        fh.write(path.increments.astype("<f8").tobytes())


def load_path(file: Union[str, Path]) -> WienerPath:
    data = Path(file).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{file} is not a Wiener path dump")
    fixed = struct.calcsize("<QddQH")
    seed, T, k0, n, id_len = struct.unpack("<QddQH", data[4:4 + fixed])
    offset = 4 + fixed
    gid = data[offset:offset + id_len].decode("utf-8")
    offset += id_len
    increments = np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(float)
    return WienerPath(T=T, k0=k0, increments=increments, seed=seed, generator_id=gid)
