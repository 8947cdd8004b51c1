"""Manufactured solutions u(x, mu, E) with their spatial gradients."""

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

ArrayFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

# upper energy scale of the polyenergetic solution (keV)
GAUSSIAN_E_MAX = 1000.0


@dataclass(frozen=True)
class ExactSolution:
    """
    Closed-form solution with its gradient in x.

    Both callables broadcast over leading axes: x and mu of shape (..., d),
    energy of shape (...) or scalar. The gradient has shape (..., d).

    Attributes:
        name: Registry name
        value: u(x, mu, E)
        gradient: grad_x u(x, mu, E)
    """
    name: str
    value: ArrayFunction
    gradient: ArrayFunction

    def __call__(self, x, mu, energy) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float), np.asarray(mu, dtype=float), np.asarray(energy, dtype=float))

    def grad(self, x, mu, energy) -> np.ndarray:
        return self.gradient(np.asarray(x, dtype=float), np.asarray(mu, dtype=float),
                             np.asarray(energy, dtype=float))

    def streaming(self, x, mu, energy) -> np.ndarray:
        """mu . grad_x u."""
        return np.sum(np.asarray(mu, dtype=float) * self.grad(x, mu, energy), axis=-1)


def _shape(x, mu, energy):
    return np.broadcast_shapes(x.shape[:-1], mu.shape[:-1], np.shape(energy))


def _constant_value(x, mu, energy):
    return np.ones(_shape(x, mu, energy))


def _constant_gradient(x, mu, energy):
    return np.zeros(_shape(x, mu, energy) + (x.shape[-1],))


def _smooth_part(x):
    return x[..., 0] * np.cos(x[..., 1]) + x[..., 1] * np.sin(x[..., 0])


def _smooth_gradient(x):
    grad = np.zeros(x.shape)
    grad[..., 0] = np.cos(x[..., 1]) + x[..., 1] * np.cos(x[..., 0])
    grad[..., 1] = -x[..., 0] * np.sin(x[..., 1]) + np.sin(x[..., 0])
    return grad


def _mono_angular(mu):
    return 1.0 + mu[..., 0] ** 2


def _mono_value(x, mu, energy):
    return np.broadcast_to(_mono_angular(mu) * _smooth_part(x), _shape(x, mu, energy)).copy()


def _mono_gradient(x, mu, energy):
    grad = _mono_angular(mu)[..., None] * _smooth_gradient(x)
    return np.broadcast_to(grad, _shape(x, mu, energy) + (x.shape[-1],)).copy()


def _chebyshev4(t):
    t2 = t * t
    return 8.0 * t2 * t2 - 8.0 * t2 + 1.0


def _chebyshev_angular(mu):
    # cos(4 phi): phi is the polar angle from the z-axis in 3D, the planar angle in 2D
    t = mu[..., 2] if mu.shape[-1] == 3 else mu[..., 0]
    return _chebyshev4(t)


def _chebyshev_value(x, mu, energy):
    return np.broadcast_to(_chebyshev_angular(mu) * _smooth_part(x), _shape(x, mu, energy)).copy()


def _chebyshev_gradient(x, mu, energy):
    grad = _chebyshev_angular(mu)[..., None] * _smooth_gradient(x)
    return np.broadcast_to(grad, _shape(x, mu, energy) + (x.shape[-1],)).copy()


def _gaussian_value(x, mu, energy):
    e = np.asarray(energy, dtype=float) / GAUSSIAN_E_MAX
    projection = np.sum(x * mu, axis=-1)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        cutoff = np.where(e < 1.0, np.exp(-1.0 / (1.0 - e * e)), 0.0)
    return np.broadcast_to(np.exp(-(e * projection) ** 2) * cutoff, _shape(x, mu, energy)).copy()


def _gaussian_gradient(x, mu, energy):
    e = np.asarray(energy, dtype=float) / GAUSSIAN_E_MAX
    projection = np.sum(x * mu, axis=-1)
    factor = -2.0 * e * e * projection * _gaussian_value(x, mu, energy)
    return np.broadcast_to(factor[..., None] * mu, _shape(x, mu, energy) + (x.shape[-1],)).copy()


EXACT_SOLUTIONS: Dict[str, ExactSolution] = {
    "constant": ExactSolution("constant", _constant_value, _constant_gradient),
    "mono_2d": ExactSolution("mono_2d", _mono_value, _mono_gradient),
    "chebyshev_t4": ExactSolution("chebyshev_t4", _chebyshev_value, _chebyshev_gradient),
    "compton_gaussian": ExactSolution("compton_gaussian", _gaussian_value, _gaussian_gradient),
}


def make_exact(name: str) -> ExactSolution:
    """
    Look up a manufactured solution by name.

    Raises:
        ValueError: For unknown names
    """
    if name not in EXACT_SOLUTIONS:
        raise ValueError(f"Unknown exact solution '{name}' (available: {', '.join(sorted(EXACT_SOLUTIONS))})")
    return EXACT_SOLUTIONS[name]
