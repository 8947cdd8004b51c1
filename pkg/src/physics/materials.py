"""
Material models: absorption, scattering kernel and its energy-collapsed forms.

A kernel is either SMOOTH, given as a density theta(c, E' -> E) per steradian
per keV, or ENERGY_DELTA, where the outgoing energy is a deterministic
function of the incoming energy and the scattering cosine and only an
amplitude per steradian is needed. Every kernel is written as
rho(x) * theta_hat so that spatial dependence factors out.
"""

import abc
import enum
import logging
from typing import Any, Dict, Tuple

import numpy as np

from src.angular.angular_mesh import SPHERE_MEASURE
from src.physics.compton import (
    WATER_ELECTRON_DENSITY, compton_in_energies, compton_out_energy, klein_nishina, min_admissible_cosine
)
from src.quadrature.rules import gauss_legendre, map_rule

logger = logging.getLogger(__name__)


class KernelKind(enum.Enum):
    SMOOTH = "smooth"
    ENERGY_DELTA = "energy_delta"


class MaterialModel(abc.ABC):
    """
    Base class for cross-section models on a truncated energy range.

    Attributes:
        dimension: Spatial dimension, selects the circle or the sphere
        alpha_value: Absorption cross section in 1/m
        density_value: Spatial scale rho of the kernel
        energy_range: (E_min, E_max) in keV; in-scatter from outside is dropped
    """
    name: str = "abstract"
    kind: KernelKind = KernelKind.SMOOTH

    def __init__(self, dimension: int, alpha: float = 0.0, density: float = 1.0,
                 energy_range: Tuple[float, float] = (0.0, np.inf)) -> None:
        if dimension not in (2, 3):
            raise ValueError(f"Model dimension must be 2 or 3, got {dimension}")
        if alpha < 0.0:
            raise ValueError(f"Absorption cross section must be non-negative, got {alpha}")
        if density <= 0.0:
            raise ValueError(f"Kernel density must be positive, got {density}")
        if not energy_range[0] < energy_range[1]:
            raise ValueError(f"Invalid energy range {energy_range}")
        self.dimension: int = dimension
        self.alpha_value: float = float(alpha)
        self.density_value: float = float(density)
        self.energy_range: Tuple[float, float] = (float(energy_range[0]), float(energy_range[1]))

    @property
    def sphere_measure(self) -> float:
        return SPHERE_MEASURE[self.dimension]

    def alpha(self, x: np.ndarray, energy: float) -> np.ndarray:
        """Absorption at points of shape (n, d)."""
        return np.full(np.asarray(x).reshape(-1, self.dimension).shape[0], self.alpha_value)

    def density(self, x: np.ndarray) -> np.ndarray:
        """Kernel scale rho at points of shape (n, d)."""
        return np.full(np.asarray(x).reshape(-1, self.dimension).shape[0], self.density_value)

    @abc.abstractmethod
    def removal_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        """Out-scatter kernel integrated over all outgoing energies, per unit rho, at cosines c."""

    @abc.abstractmethod
    def in_scatter_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        """In-scatter kernel integrated over admissible incoming energies, per unit rho."""

    def admissible_cosine(self, energy: float) -> float:
        """Lowest scattering cosine with an in-range incoming energy for in-scatter to this energy."""
        return -1.0

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "alpha": self.alpha_value,
            "density": self.density_value,
            "energy_range": list(self.energy_range),
        }


class EnergyDeltaModel(MaterialModel):
    """Kernel rho * amplitude(E', c) * delta(E - out_energy(E', c))."""
    kind = KernelKind.ENERGY_DELTA

    @abc.abstractmethod
    def amplitude(self, e_in, c) -> np.ndarray:
        """Scattering amplitude per steradian per unit rho."""

    @abc.abstractmethod
    def out_energy(self, e_in, c) -> np.ndarray:
        """Outgoing energy for an incoming energy and cosine."""

    @abc.abstractmethod
    def in_energies(self, e_out, c) -> np.ndarray:
        """Incoming energy reaching e_out at cosine c, NaN when inadmissible."""

    @abc.abstractmethod
    def in_jacobian(self, e_out, c) -> np.ndarray:
        """|d out_energy / dE'|^-1 at the incoming energy."""

    def removal_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return np.broadcast_to(self.amplitude(energy, c), c.shape).astype(float)

    def in_scatter_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        e_in = np.broadcast_to(self.in_energies(energy, c), c.shape)
        admissible = np.isfinite(e_in) & (e_in <= self.energy_range[1] * (1.0 + 1e-14))
        result = np.zeros(c.shape)
        if np.any(admissible):
            result[admissible] = (self.amplitude(e_in[admissible], c[admissible]) *
                                  self.in_jacobian(energy, c[admissible]))
        return result


class IsotropicModel(EnergyDeltaModel):
    """
    Energy-preserving isotropic scattering theta = sigma_s / |S|.

    beta = gamma = sigma_s, so the positivity constant is alpha.
    """
    name = "isotropic"

    def __init__(self, dimension: int, alpha: float = 1.0, sigma_s: float = 1.0,
                 energy_range: Tuple[float, float] = (0.0, np.inf)) -> None:
        super().__init__(dimension, alpha, 1.0, energy_range)
        if sigma_s < 0.0:
            raise ValueError(f"Scattering cross section must be non-negative, got {sigma_s}")
        self.sigma_s: float = float(sigma_s)

    def amplitude(self, e_in, c) -> np.ndarray:
        shape = np.broadcast(np.asarray(e_in), np.asarray(c)).shape
        return np.full(shape, self.sigma_s / self.sphere_measure)

    def out_energy(self, e_in, c) -> np.ndarray:
        return np.broadcast_to(np.asarray(e_in, dtype=float), np.broadcast(np.asarray(e_in), np.asarray(c)).shape)

    def in_energies(self, e_out, c) -> np.ndarray:
        return self.out_energy(e_out, c)

    def in_jacobian(self, e_out, c) -> np.ndarray:
        return np.ones(np.broadcast(np.asarray(e_out), np.asarray(c)).shape)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "sigma_s": self.sigma_s}


class ComptonWaterModel(EnergyDeltaModel):
    """Klein-Nishina scattering on the electrons of water with Compton kinematics."""
    name = "compton_water"

    def __init__(self, dimension: int, alpha: float = 0.0, density: float = WATER_ELECTRON_DENSITY,
                 energy_range: Tuple[float, float] = (500.0, 1000.0)) -> None:
        super().__init__(dimension, alpha, density, energy_range)

    def amplitude(self, e_in, c) -> np.ndarray:
        return np.asarray(klein_nishina(e_in, compton_out_energy(e_in, c), c))

    def out_energy(self, e_in, c) -> np.ndarray:
        return np.asarray(compton_out_energy(e_in, c))

    def in_energies(self, e_out, c) -> np.ndarray:
        return compton_in_energies(e_out, c)

    def in_jacobian(self, e_out, c) -> np.ndarray:
        return (compton_in_energies(e_out, c) / np.asarray(e_out, dtype=float)) ** 2

    def admissible_cosine(self, energy: float) -> float:
        return float(max(-1.0, min_admissible_cosine(energy, self.energy_range[1])))


class SmoothModel(MaterialModel):
    """Kernel given as a density in outgoing energy; energy collapses use split Gauss rules."""
    kind = KernelKind.SMOOTH
    energy_points: int = 24

    @abc.abstractmethod
    def kernel(self, c, e_in, e_out) -> np.ndarray:
        """theta_hat(c, e_in -> e_out) per steradian per keV per unit rho."""

    def _energy_segments(self, energy: float):
        e_min, e_max = self.energy_range
        rule = gauss_legendre(self.energy_points)
        for lo, hi in ((e_min, energy), (energy, e_max)):
            if hi > lo:
                mapped = map_rule(rule, (lo, hi))
                yield mapped.nodes, mapped.weights

    def removal_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        total = np.zeros(c.shape)
        for nodes, weights in self._energy_segments(energy):
            total += self.kernel(c[..., None], energy, nodes) @ weights
        return total

    def in_scatter_density(self, energy: float, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        total = np.zeros(c.shape)
        for nodes, weights in self._energy_segments(energy):
            total += self.kernel(c[..., None], nodes, energy) @ weights
        return total


class DownscatterModel(SmoothModel):
    """
    Smooth down-scatter kernel, uniform in outgoing energy and isotropic in angle.

    theta(c, E' -> E) = sigma_s / (|S| (E' - E_min)) for E_min < E < E', so
    every particle above E_min scatters with total rate beta = sigma_s.
    """
    name = "downscatter"

    def __init__(self, dimension: int, alpha: float = 1.0, sigma_s: float = 0.5,
                 energy_range: Tuple[float, float] = (1.0, 2.0)) -> None:
        super().__init__(dimension, alpha, 1.0, energy_range)
        if not np.isfinite(energy_range[1]):
            raise ValueError("The down-scatter model needs a finite energy range")
        if sigma_s < 0.0:
            raise ValueError(f"Scattering cross section must be non-negative, got {sigma_s}")
        self.sigma_s: float = float(sigma_s)

    def kernel(self, c, e_in, e_out) -> np.ndarray:
        e_in = np.asarray(e_in, dtype=float)
        e_out = np.asarray(e_out, dtype=float)
        e_min = self.energy_range[0]
        shape = np.broadcast(np.asarray(c), e_in, e_out).shape
        inside = (e_out > e_min) & (e_out < e_in)
        with np.errstate(divide='ignore'):
            value = self.sigma_s / (self.sphere_measure * (e_in - e_min))
        return np.broadcast_to(np.where(inside, value, 0.0), shape).astype(float)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "sigma_s": self.sigma_s}


MODELS = {
    IsotropicModel.name: IsotropicModel,
    ComptonWaterModel.name: ComptonWaterModel,
    DownscatterModel.name: DownscatterModel,
}


def make_model(name: str, dimension: int, **parameters: Any) -> MaterialModel:
    """
    Instantiate a model by name.

    Raises:
        ValueError: For unknown model names or invalid parameters
    """
    if name not in MODELS:
        raise ValueError(f"Unknown material model '{name}' (available: {', '.join(sorted(MODELS))})")
    try:
        model = MODELS[name](dimension, **parameters)
    except TypeError as e:
        raise ValueError(f"Invalid parameters for model '{name}': {e}")
    logger.debug("Created material model %s", model.describe())
    return model
