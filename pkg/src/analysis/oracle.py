"""
Reference evaluation of the in-scatter operator S[u](x, mu, E) for closed-form u.

The angular integral is taken in a frame aligned with mu: the relative angle
in 2D, the polar angle and azimuth about mu in 3D. Composite Gauss panels are
doubled until successive values agree. Energy-delta kernels are collapsed
onto their kinematic curve; smooth kernels add composite panels in E'.
"""

import logging
from typing import Tuple

import numpy as np

from src.analysis.exact import ExactSolution
from src.errors import OracleError
from src.physics.materials import EnergyDeltaModel, KernelKind, MaterialModel, SmoothModel
from src.quadrature.rules import gauss_legendre, map_rule

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-10
PANEL_POINTS = 8
MAX_REFINEMENTS = {2: 9, 3: 6}
# points per chunk of spatial points, bounds the size of the integrand arrays
CHUNK = 4096


def _composite(lo: float, hi: float, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    rule = gauss_legendre(PANEL_POINTS)
    edges = np.linspace(lo, hi, panels + 1)
    mapped = [map_rule(rule, (a, b)) for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate([m.nodes for m in mapped]), np.concatenate([m.weights for m in mapped])


def _frame(mu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(mu)))] = 1.0
    e1 = np.cross(mu, axis)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(mu, e1)


def sphere_rule(mu: np.ndarray, c_min: float, level: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Directions mu' with mu . mu' >= c_min and their weights.

    Returns:
        (directions (k, d), cosines (k,), weights (k,))
    """
    mu = np.asarray(mu, dtype=float)
    d = mu.shape[0]
    spread = float(np.arccos(np.clip(c_min, -1.0, 1.0)))
    panels = 2 ** (level + 1)
    if d == 2:
        delta, weights = _composite(-spread, spread, panels)
        phi = np.arctan2(mu[1], mu[0]) + delta
        directions = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return directions, np.cos(delta), weights
    theta, w_theta = _composite(0.0, spread, panels)
    n_psi = 8 * 2 ** level
    psi = 2.0 * np.pi * np.arange(n_psi) / n_psi
    e1, e2 = _frame(mu)
    sin_t, cos_t = np.sin(theta)[:, None, None], np.cos(theta)[:, None, None]
    ring = np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2
    directions = (cos_t * mu + sin_t * ring[None, :, :]).reshape(-1, 3)
    weights = np.repeat(w_theta * np.sin(theta), n_psi) * (2.0 * np.pi / n_psi)
    return directions, np.repeat(np.cos(theta), n_psi), weights


def _delta_value(exact: ExactSolution, model: EnergyDeltaModel, x: np.ndarray, mu: np.ndarray, energy: float,
                 level: int) -> np.ndarray:
    directions, c, weights = sphere_rule(mu, model.admissible_cosine(energy), level)
    e_in = np.broadcast_to(np.asarray(model.in_energies(energy, c), dtype=float), c.shape)
    admissible = np.isfinite(e_in) & (e_in <= model.energy_range[1] * (1.0 + 1e-14))
    density = np.zeros(c.shape)
    if np.any(admissible):
        density[admissible] = (model.amplitude(e_in[admissible], c[admissible]) *
                               model.in_jacobian(energy, c[admissible]) * weights[admissible])
    e_safe = np.where(admissible, e_in, energy)
    result = np.empty(x.shape[0])
    for start in range(0, x.shape[0], CHUNK):
        block = x[start:start + CHUNK]
        values = exact(block[:, None, :], directions[None, :, :], e_safe[None, :])
        result[start:start + CHUNK] = values @ density
    return result


def _smooth_value(exact: ExactSolution, model: SmoothModel, x: np.ndarray, mu: np.ndarray, energy: float,
                  level: int) -> np.ndarray:
    directions, c, weights = sphere_rule(mu, -1.0, level)
    e_min, e_max = model.energy_range
    nodes, e_weights = [], []
    for lo, hi in ((e_min, energy), (energy, e_max)):
        if hi > lo:
            n, w = _composite(lo, hi, 2 ** level)
            nodes.append(n)
            e_weights.append(w)
    if not nodes:
        return np.zeros(x.shape[0])
    e_in, w_e = np.concatenate(nodes), np.concatenate(e_weights)
    kernel = model.kernel(c[:, None], e_in[None, :], energy) * weights[:, None] * w_e[None, :]
    result = np.empty(x.shape[0])
    chunk = max(1, CHUNK // max(1, e_in.size // PANEL_POINTS))
    for start in range(0, x.shape[0], chunk):
        block = x[start:start + chunk]
        values = exact(block[:, None, None, :], directions[None, :, None, :], e_in[None, None, :])
        result[start:start + chunk] = np.einsum("nkj,kj->n", values, kernel)
    return result


def scattering_oracle(exact: ExactSolution, model: MaterialModel, x: np.ndarray, mu: np.ndarray, energy: float,
                      tolerance: float = ORACLE_TOLERANCE) -> np.ndarray:
    """
    In-scatter S[u](x, mu, E) including the spatial density rho(x).

    Args:
        exact: Closed-form solution
        model: Material model
        x: Spatial points, shape (n, d)
        mu: Unit direction, shape (d,)
        energy: Energy in keV
        tolerance: Stop once the change under refinement is below tolerance * max(1, |S|)

    Returns:
        Array of shape (n,)

    Raises:
        OracleError: If the refinement limit is reached first
    """
    x = np.asarray(x, dtype=float).reshape(-1, model.dimension)
    mu = np.asarray(mu, dtype=float)
    energy = float(energy)
    if model.kind == KernelKind.ENERGY_DELTA:
        def evaluate(level: int) -> np.ndarray:
            return _delta_value(exact, model, x, mu, energy, level)
    else:
        def evaluate(level: int) -> np.ndarray:
            return _smooth_value(exact, model, x, mu, energy, level)

    previous = evaluate(0)
    change = np.inf
    for level in range(1, MAX_REFINEMENTS[model.dimension] + 1):
        current = evaluate(level)
        change = float(np.max(np.abs(current - previous), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(current), initial=0.0)))
        if change <= tolerance * scale:
            return model.density(x) * current
        previous = current
    raise OracleError(f"Scattering oracle for '{exact.name}' did not converge at mu={mu.tolist()}, "
                      f"E={energy:.6g} keV: last change {change:.3e} exceeds {tolerance:.1e}")
