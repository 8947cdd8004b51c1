"""
Error norms of a discrete flux against a closed-form solution.

All three norms are assembled in one pass over (group, patch). The discrete
flux is evaluated in angle and energy either at the scheme's own nodes or,
for error measurement, on oversampled Gauss rules through the nodal bases.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import sparse

from config.run_config import SolverConfig
from src.analysis.exact import ExactSolution
from src.assembly.dofmap import ASSEMBLY_ORDER_OFFSET, NORM_ORDER_OFFSET, SpatialSampling
from src.assembly.scattering import ScatterMoments, build_scatter_moments, scatter_sources
from src.assembly.transport import transport_assembler
from src.physics.materials import IsotropicModel, MaterialModel
from src.physics.positivity import beta_gamma
from src.quadrature.rules import gauss_legendre, map_rule
from src.solver.flux import FluxState
from src.solver.source_iteration import Discretisation, Problem, ordinate_removal

logger = logging.getLogger(__name__)

QUADRATURES = ("oversampled", "scheme")
# extra points per direction in angle and energy for error measurement
OVERSAMPLE_POINTS = 3


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    dg: float
    streamline: float

    def to_dict(self) -> Dict[str, float]:
        return {"l2": self.l2, "dg": self.dg, "streamline": self.streamline}


def _phase_samples(flux: FluxState, discretisation: Discretisation, quadrature: str
                   ) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """
    Yield (energies, energy weights, directions, direction weights, coefficients) per (group, patch).

    Coefficients have shape (n_energies, n_directions, N_X).
    """
    grid, ordinates = discretisation.grid, discretisation.ordinates
    for g in range(grid.n_groups):
        values = flux.group(g)
        for patch in discretisation.angular.patches:
            index = ordinates.patch_ordinates(patch.index)
            local = values[:, index, :]
            if quadrature == "scheme":
                yield grid.nodes(g), grid.weights(g), ordinates.directions[index], ordinates.weights[index], local
                continue
            e_rule = map_rule(gauss_legendre(grid.n_nodes(g) + OVERSAMPLE_POINTS), grid.group_interval(g))
            reference, directions, weights = patch.quadrature(patch.degree + 1 + OVERSAMPLE_POINTS)
            e_basis = grid.group_basis(g).values(e_rule.nodes)
            a_basis = patch.basis_values(reference)
            coefficients = np.einsum("el,ak,lkx->eax", e_basis, a_basis, local)
            yield e_rule.nodes, e_rule.weights, directions, weights, coefficients


def _c0(model: MaterialModel, points: np.ndarray, energy: float) -> np.ndarray:
    beta, gamma = beta_gamma(model, points, energy)
    return np.maximum(model.alpha(points, energy) + 0.5 * (beta - gamma), 0.0)


def error_norms(flux: FluxState, exact: Optional[ExactSolution], discretisation: Discretisation,
                model: MaterialModel, quadrature: str = "oversampled") -> ErrorNorms:
    """
    L2, DG-energy and streamline norms of u - u_h over space x sphere x energy.

    DG^2 = ||sqrt(c0) e||^2 + 1/2 sum_F |mu . n| [[e]]^2 + 1/2 sum_boundary |mu . n| e^2
    and the streamline norm adds sum_k tau_k ||mu . grad e||^2 with
    tau_k = h_perp / max(p_k, 1)^2. With exact None the norms of u_h are returned.

    Args:
        flux: Complete discrete flux
        exact: Closed-form solution or None
        discretisation: Discretisation of the flux
        model: Model supplying c0 = alpha + (beta - gamma) / 2
        quadrature: "oversampled" for error measurement, "scheme" for the scheme's own rules
    """
    if quadrature not in QUADRATURES:
        raise ValueError(f"quadrature must be one of {QUADRATURES}, got '{quadrature}'")
    dofmap = discretisation.dofmap
    offset = NORM_ORDER_OFFSET if quadrature == "oversampled" else ASSEMBLY_ORDER_OFFSET
    s: SpatialSampling = dofmap.sampling(offset)
    degrees = discretisation.mesh.degrees
    tau_element = np.array([m.h_perp / max(int(p), 1) ** 2 for m, p in zip(dofmap.metrics, degrees)])
    tau = tau_element[s.element]
    jump = (s.owner_trace - s.neighbour_trace).tocsr()
    interior = ~s.boundary
    c0_cache: Dict[float, np.ndarray] = {}

    l2_sq = volume_sq = face_sq = streamline_sq = 0.0
    for energies, e_weights, directions, a_weights, coefficients in _phase_samples(flux, discretisation, quadrature):
        n_e, n_a, n_x = coefficients.shape
        flat = coefficients.reshape(-1, n_x).T
        volume = np.asarray(s.values @ flat).reshape(-1, n_e, n_a)
        streaming = sum(np.asarray(g @ flat).reshape(-1, n_e, n_a) * directions[None, None, :, axis]
                        for axis, g in enumerate(s.gradients))
        owner = np.asarray(s.owner_trace @ flat).reshape(-1, n_e, n_a)
        jumps = np.asarray(jump @ flat).reshape(-1, n_e, n_a)
        if exact is not None:
            x = s.points[:, None, None, :]
            mu = directions[None, None, :, :]
            e = energies[None, :, None]
            volume = exact(x, mu, e) - volume
            streaming = exact.streaming(x, mu, e) - streaming
            owner = exact(s.face_points[:, None, None, :], mu, e) - owner
        jumps = -jumps
        weights = np.outer(e_weights, a_weights)

        c0 = np.empty((s.points.shape[0], n_e))
        for k, energy in enumerate(energies):
            key = float(energy)
            if key not in c0_cache:
                c0_cache[key] = _c0(model, s.points, key)
            c0[:, k] = c0_cache[key]

        squared = volume ** 2
        l2_sq += float(np.einsum("q,qea,ea->", s.weights, squared, weights))
        volume_sq += float(np.einsum("q,qe,qea,ea->", s.weights, c0, squared, weights))
        normal_flux = np.abs(s.face_normals @ directions.T)
        face = np.where(interior[:, None, None], jumps ** 2, owner ** 2)
        face_sq += 0.5 * float(np.einsum("f,fa,fea,ea->", s.face_weights, normal_flux, face, weights))
        streamline_sq += float(np.einsum("q,q,qea,ea->", s.weights, tau, streaming ** 2, weights))

    dg_sq = volume_sq + face_sq
    norms = ErrorNorms(float(np.sqrt(l2_sq)), float(np.sqrt(dg_sq)), float(np.sqrt(dg_sq + streamline_sq)))
    logger.debug("Error norms (%s): %s", quadrature, norms.to_dict())
    return norms


def l2_error(flux: FluxState, exact: Optional[ExactSolution], discretisation: Discretisation,
             model: Optional[MaterialModel] = None, quadrature: str = "oversampled") -> float:
    """||u - u_h|| in L2 over space x sphere x energy."""
    if model is None:
        model = IsotropicModel(discretisation.dimension, alpha=1.0, sigma_s=0.0)
    return error_norms(flux, exact, discretisation, model, quadrature).l2


def dg_norm_error(flux: FluxState, exact: Optional[ExactSolution], discretisation: Discretisation,
                  model: MaterialModel, quadrature: str = "oversampled") -> float:
    return error_norms(flux, exact, discretisation, model, quadrature).dg


def streamline_norm_error(flux: FluxState, exact: Optional[ExactSolution], discretisation: Discretisation,
                          model: MaterialModel, quadrature: str = "oversampled") -> float:
    return error_norms(flux, exact, discretisation, model, quadrature).streamline


def discrete_bilinear_form(flux: FluxState, problem: Problem, removal: str = "discrete",
                           moments: Optional[ScatterMoments] = None) -> float:
    """
    b(v, v) of the fully discrete scheme, sum over groups, nodes and ordinates of
    v^T A v minus v^T S v, using the same operators as the solver.
    """
    disc = problem.discretisation
    settings = SolverConfig(removal=removal)
    moments = moments or build_scatter_moments(disc.grid, disc.ordinates, problem.model)
    assembler = transport_assembler(disc.dofmap)
    rho_mass = disc.rho_mass(problem.model)
    total = 0.0
    for g in range(disc.grid.n_groups):
        values = flux.group(g)
        scattered = scatter_sources(flux, g, moments, disc.ordinates, rho_mass)
        nodes, node_weights = disc.grid.nodes(g), disc.grid.weights(g)
        for l, energy in enumerate(nodes):
            beta = ordinate_removal(problem, settings, float(energy))
            for m, mu in enumerate(disc.ordinates.directions):
                weight = float(node_weights[l] * disc.ordinates.weights[m])
                operator: sparse.csr_matrix = assembler.operator(mu, float(energy), weight, problem.model,
                                                                 float(beta[m]))
                v = values[l, m]
                total += float(v @ (operator @ v)) - float(v @ scattered[l, m])
    return total
