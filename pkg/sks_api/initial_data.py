"""Initial conditions (u0, c0) for the experiments."""
from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np


class InitialData(ABC):
    """Initial density u0 and chemoattractant c0 with analytic derivatives of c0.

    Functions take coordinates of the mesh square [0, L]^2. Data defined on
    a centred square is shifted by ``offset`` before evaluation.
    """

    offset: Tuple[float, float] = (0.0, 0.0)

    def __init__(self, L: float = 1.0):
        self.L = L

    def _local(self, x, y):
        return np.asarray(x) - self.offset[0], np.asarray(y) - self.offset[1]

    def u0(self, x, y):
        return self._u0(*self._local(x, y))

    def c0(self, x, y):
        return self._c0(*self._local(x, y))

    def grad_c0(self, x, y):
        return self._grad_c0(*self._local(x, y))

    def lap_c0(self, x, y):
        """Divergence of grad c0, i.e. the Laplacian of c0."""
        return self._lap_c0(*self._local(x, y))

    def rot_grad_c0(self, x, y):
        # rot of a gradient vanishes
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    @abstractmethod
    def _u0(self, x, y):
        pass

    @abstractmethod
    def _c0(self, x, y):
        pass

    @abstractmethod
    def _grad_c0(self, x, y):
        pass

    @abstractmethod
    def _lap_c0(self, x, y):
        pass

    @abstractmethod
    def get_name(self) -> str:
        pass


class SineBump(InitialData):
    """u0 = c0 = sin(pi x / L) sin(pi y / L)."""

    def _bump(self, x, y):
        w = np.pi / self.L
        return np.sin(w * x) * np.sin(w * y)

    def _u0(self, x, y):
        return self._bump(x, y)

    def _c0(self, x, y):
        return self._bump(x, y)

    def _grad_c0(self, x, y):
        w = np.pi / self.L
        return (w * np.cos(w * x) * np.sin(w * y), w * np.sin(w * x) * np.cos(w * y))

    def _lap_c0(self, x, y):
        w = np.pi / self.L
        return -2.0 * w * w * self._bump(x, y)

    def get_name(self) -> str:
        return "Sine bump"


class FourierMode(InitialData):
    """u0 = c0 = sin(2 pi x / L) sin(2 pi y / L), smooth on the torus."""

    def _mode(self, x, y):
        w = 2.0 * np.pi / self.L
        return np.sin(w * x) * np.sin(w * y)

    def _u0(self, x, y):
        return self._mode(x, y)

    def _c0(self, x, y):
        return self._mode(x, y)

    def _grad_c0(self, x, y):
        w = 2.0 * np.pi / self.L
        return (w * np.cos(w * x) * np.sin(w * y), w * np.sin(w * x) * np.cos(w * y))

    def _lap_c0(self, x, y):
        w = 2.0 * np.pi / self.L
        return -2.0 * w * w * self._mode(x, y)

    def get_name(self) -> str:
        return "Fourier mode"


class GaussianBlowup(InitialData):
    """Concentrated data on the centred square [-L/2, L/2]^2.

    u0 = 1000 exp(-100 r^2), c0 = 500 exp(-50 r^2).
    """

    U_PEAK, U_RATE = 1000.0, 100.0
    C_PEAK, C_RATE = 500.0, 50.0

    def __init__(self, L: float = 1.0):
        super().__init__(L)
        self.offset = (0.5 * L, 0.5 * L)

    def _u0(self, x, y):
        return self.U_PEAK * np.exp(-self.U_RATE * (x * x + y * y))

    def _c0(self, x, y):
        return self.C_PEAK * np.exp(-self.C_RATE * (x * x + y * y))

    def _grad_c0(self, x, y):
        c = self._c0(x, y)
        return (-2.0 * self.C_RATE * x * c, -2.0 * self.C_RATE * y * c)

    def _lap_c0(self, x, y):
        a = self.C_RATE
        return self._c0(x, y) * (4.0 * a * a * (x * x + y * y) - 4.0 * a)

    def get_name(self) -> str:
        return "Gaussian blow-up"


class Constant(InitialData):
    """u0 = c0 = 1."""

    def _u0(self, x, y):
        return np.ones(np.broadcast(x, y).shape)

    def _c0(self, x, y):
        return np.ones(np.broadcast(x, y).shape)

    def _grad_c0(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return (z, z)

    def _lap_c0(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def get_name(self) -> str:
        return "Constant"


class Zero(Constant):
    """u0 = c0 = 0."""

    def _u0(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def _c0(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def get_name(self) -> str:
        return "Zero"


INITIAL_DATA_REGISTRY = {
    "sine_bump": SineBump,
    "fourier_mode": FourierMode,
    "gaussian_blowup": GaussianBlowup,
    "constant": Constant,
    "zero": Zero,
}

INITIAL_DATA_DESCRIPTIONS = {
    "sine_bump": "sin(pi x) sin(pi y) for u0 and c0 (convergence and inverse-k tests).",
    "fourier_mode": "sin(2 pi x) sin(2 pi y) for u0 and c0; smooth on the torus.",
    "gaussian_blowup": "1000 exp(-100 r^2) and 500 exp(-50 r^2) centred in the square (blow-up test).",
    "constant": "u0 = c0 = 1; the scheme keeps it fixed.",
    "zero": "u0 = c0 = 0; the zero solution.",
}


def get_initial_data(name: str = "sine_bump", L: float = 1.0) -> InitialData:
    """Get initial data by registry name.

    Raises:
        ValueError: If name is not recognized
    """
    if name not in INITIAL_DATA_REGISTRY:
        raise ValueError(f"Unknown initial data: {name}. Available: {list(INITIAL_DATA_REGISTRY.keys())}")
    return INITIAL_DATA_REGISTRY[name](L)


def get_initial_data_description(name: str) -> str:
    return INITIAL_DATA_DESCRIPTIONS.get(name, "No description available.")


def list_initial_data_types() -> List[str]:
    return list(INITIAL_DATA_REGISTRY.keys())
