"""Total out-scatter beta, in-scatter gamma and the positivity constant c0."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from src.energy.energy_grid import EnergyGrid
from src.physics.materials import MaterialModel
from src.quadrature.rules import gauss_legendre, map_rule

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200


def sphere_cosine_integral(func: Callable[[np.ndarray], np.ndarray], dimension: int,
                           c_min: float = -1.0, order: Optional[int] = None) -> float:
    """
    Integral over the unit sphere (or circle) of a function of mu . mu'.

    For d=3 the measure is 2 pi dc; for d=2 it is 2 d(delta) with c = cos(delta).
    The integration is restricted to cosines c >= c_min.

    Args:
        func: Vectorised function of the cosine
        dimension: 2 or 3
        c_min: Lower cosine cut-off
        order: Fixed Gauss point count; adaptive scipy quad when None
    """
    c_min = max(float(c_min), -1.0)
    if c_min >= 1.0:
        return 0.0
    if dimension == 3:
        lo, hi, scale = c_min, 1.0, 2.0 * np.pi

        def transformed(t):
            return func(t)
    else:
        lo, hi, scale = 0.0, float(np.arccos(c_min)), 2.0

        def transformed(t):
            return func(np.cos(t))

    if order is not None:
        rule = map_rule(gauss_legendre(order), (lo, hi))
        return scale * float(np.dot(rule.weights, transformed(rule.nodes)))
    value, _ = integrate.quad(lambda t: float(transformed(np.array([t]))[0]), lo, hi,
                              epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    return scale * value


def beta_gamma(model: MaterialModel, x: np.ndarray, energy: float,
               order: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Total out-scatter and in-scatter cross sections at spatial points.

    Energy integrals are collapsed by the model (analytically for delta
    kernels), the angular integral is a one-dimensional cosine integral.

    Args:
        model: Material model
        x: Points of shape (n, d)
        energy: Energy in keV
        order: Fixed Gauss order for the cosine integral (adaptive when None)

    Returns:
        (beta, gamma) in 1/m, each of shape (n,)
    """
    d = model.dimension
    beta_hat = sphere_cosine_integral(lambda c: model.removal_density(energy, c), d, -1.0, order)
    gamma_hat = sphere_cosine_integral(lambda c: model.in_scatter_density(energy, c), d,
                                       model.admissible_cosine(energy), order)
    rho = model.density(x)
    return rho * beta_hat, rho * gamma_hat


@dataclass
class PositivityReport:
    """
    Minimum of alpha + (beta - gamma) / 2 over a sample lattice.

    Attributes:
        c0_min: Smallest sampled value in 1/m
        argmin_x: Spatial sample attaining the minimum
        argmin_energy: Energy sample attaining the minimum (keV)
        n_spatial: Number of spatial samples
        n_energy: Number of energy samples
    """
    c0_min: float
    argmin_x: np.ndarray
    argmin_energy: float
    n_spatial: int
    n_energy: int
    values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 0)))

    @property
    def positive(self) -> bool:
        return self.c0_min > 0.0


def check_positivity(model: MaterialModel, grid: EnergyGrid, samples: np.ndarray,
                     order: Optional[int] = None) -> PositivityReport:
    """
    Evaluate c0 = alpha + (beta - gamma) / 2 on spatial samples x group Gauss nodes.

    A non-positive minimum is logged as a warning; the solver may still run.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, model.dimension)
    energies = np.concatenate([grid.nodes(g) for g in range(grid.n_groups)])
    values = np.empty((samples.shape[0], energies.size))
    for j, energy in enumerate(energies):
        beta, gamma = beta_gamma(model, samples, float(energy), order)
        values[:, j] = model.alpha(samples, float(energy)) + 0.5 * (beta - gamma)
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    report = PositivityReport(float(values[i, j]), samples[i].copy(), float(energies[j]),
                              samples.shape[0], energies.size, values)
    if not report.positive:
        logger.warning("Positivity condition violated: c0_min = %.6g 1/m at x=%s, E=%.6g keV",
                       report.c0_min, report.argmin_x.tolist(), report.argmin_energy)
    else:
        logger.info("Positivity constant c0_min = %.6g 1/m", report.c0_min)
    return report
