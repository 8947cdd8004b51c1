"""
Energy-collapsed scattering moments and the discrete scattering operator.

For a source group g' and target group g the moment

  Theta^{j,i}_{g',g}(c) = int_g int_g' theta_hat(c, E' -> E) phi^j_{g'}(E') phi^i_g(E) dE' dE

is tabulated at every ordinate-pair cosine c = mu_m . mu_n. The spatial
factor rho(x) enters through a rho-weighted mass matrix, so the table is
shared by all elements. Only pairs with g' <= g are stored.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Optional, Tuple

import numpy as np
from scipy import sparse

from src.angular.angular_mesh import OrdinateSet
from src.energy.energy_grid import EnergyGrid
from src.errors import SolverError
from src.physics.materials import EnergyDeltaModel, KernelKind, MaterialModel, SmoothModel
from src.physics.positivity import sphere_cosine_integral
from src.quadrature.rules import gauss_legendre, map_rule, map_simplex_rule, simplex_rule

if TYPE_CHECKING:
    from src.solver.flux import FluxState

logger = logging.getLogger(__name__)

# extra Gauss points beyond the exact count for the basis product
ENERGY_OVERSAMPLE = 4
SMOOTH_OVERSAMPLE = 8


def exact_removal(model: MaterialModel, energy: float) -> float:
    """Out-scatter per unit rho, integrated exactly over the sphere."""
    return sphere_cosine_integral(lambda c: model.removal_density(energy, c), model.dimension)


def discrete_removal(model: MaterialModel, ordinates: OrdinateSet, energy: float) -> np.ndarray:
    """
    Out-scatter per unit rho with the ordinate rule, one value per ordinate.

    beta_h(mu_m, E) = sum_n w_n removal_density(E, mu_m . mu_n) balances the
    discrete in-scatter exactly for energy-preserving kernels.
    """
    return model.removal_density(energy, ordinates.cosines()) @ ordinates.weights


def _delta_moments(model: EnergyDeltaModel, grid: EnergyGrid, source: int, target: int,
                   cosines: np.ndarray) -> np.ndarray:
    lo_s, hi_s = grid.group_interval(source)
    lo_t, hi_t = grid.group_interval(target)
    c = cosines.reshape(-1)
    a = np.maximum(lo_t, np.asarray(model.out_energy(lo_s, c), dtype=float))
    b = np.minimum(hi_t, np.asarray(model.out_energy(hi_s, c), dtype=float))
    valid = b > a
    n_j, n_i = grid.n_nodes(source), grid.n_nodes(target)
    result = np.zeros((n_j, n_i, c.size))
    if not np.any(valid):
        return result.reshape(n_j, n_i, *cosines.shape)

    rule = gauss_legendre(n_j + n_i + ENERGY_OVERSAMPLE)
    t = 0.5 * (rule.nodes + 1.0)
    cv, av, bv = c[valid], a[valid], b[valid]
    energy = av[:, None] + (bv - av)[:, None] * t[None, :]
    weight = 0.5 * (bv - av)[:, None] * rule.weights[None, :]
    cc = np.broadcast_to(cv[:, None], energy.shape)
    e_in = np.asarray(model.in_energies(energy, cc), dtype=float)
    # a point can miss its pre-image by round-off at the sub-interval ends
    e_in = np.clip(np.where(np.isfinite(e_in), e_in, lo_s), lo_s, hi_s)
    density = model.amplitude(e_in, cc) * model.in_jacobian(energy, cc) * weight
    phi_j = grid.group_basis(source).values(e_in.ravel()).reshape(*e_in.shape, n_j)
    phi_i = grid.group_basis(target).values(energy.ravel()).reshape(*energy.shape, n_i)
    result[:, :, valid] = np.einsum("kp,kpj,kpi->jik", density, phi_j, phi_i)
    return result.reshape(n_j, n_i, *cosines.shape)


def _smooth_moments(model: SmoothModel, grid: EnergyGrid, source: int, target: int,
                    cosines: np.ndarray) -> np.ndarray:
    lo_s, hi_s = grid.group_interval(source)
    lo_t, hi_t = grid.group_interval(target)
    n_j, n_i = grid.n_nodes(source), grid.n_nodes(target)
    if source != target:
        n = (n_j + n_i) // 2 + SMOOTH_OVERSAMPLE
        e_src = map_rule(gauss_legendre(n), (lo_s, hi_s))
        e_tgt = map_rule(gauss_legendre(n), (lo_t, hi_t))
        grid_src, grid_tgt = np.meshgrid(e_src.nodes, e_tgt.nodes, indexing="ij")
        e_in, e_out = grid_src.ravel(), grid_tgt.ravel()
        weights = np.outer(e_src.weights, e_tgt.weights).ravel()
    else:
        # triangles below and above the diagonal E = E', each collapsed at (lo, lo)
        # where kernels singular at the bottom of the range blow up
        reference = simplex_rule(2 * (n_i + SMOOTH_OVERSAMPLE), 2)
        below = map_simplex_rule(reference, np.array([[hi_s, lo_t], [lo_s, lo_t], [hi_s, hi_t]]))
        above = map_simplex_rule(reference, np.array([[lo_s, hi_t], [lo_s, lo_t], [hi_s, hi_t]]))
        points = np.vstack([below.points, above.points])
        e_in, e_out = points[:, 0], points[:, 1]
        weights = np.concatenate([below.weights, above.weights])
    phi_j = grid.group_basis(source).values(e_in)
    phi_i = grid.group_basis(target).values(e_out)
    kernel = model.kernel(cosines[..., None], e_in, e_out) * weights
    return np.einsum("...p,pj,pi->ji...", kernel, phi_j, phi_i)


def moment_block(model: MaterialModel, grid: EnergyGrid, source: int, target: int,
                 cosines: np.ndarray) -> np.ndarray:
    """
    Theta^{j,i}_{source,target} at an array of cosines.

    Returns:
        Array of shape (n_nodes(source), n_nodes(target), *cosines.shape)
    """
    cosines = np.asarray(cosines, dtype=float)
    if model.kind == KernelKind.ENERGY_DELTA:
        return _delta_moments(model, grid, source, target, cosines)
    return _smooth_moments(model, grid, source, target, cosines)


@dataclass
class ScatterMoments:
    """
    Tabulated ordinate-weighted moments T[j, i, m, n] = w_n Theta^{j,i}_{g',g}(mu_m . mu_n).

    Attributes:
        n_groups: Number of energy groups
        blocks: Moment tables keyed by (source group, target group)
    """
    n_groups: int
    blocks: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)

    def block(self, source: int, target: int) -> Optional[np.ndarray]:
        return self.blocks.get((source, target))

    def has_in_group(self, g: int) -> bool:
        block = self.blocks.get((g, g))
        return block is not None and bool(np.any(block != 0.0))

    def upscatter_norm(self) -> float:
        """Largest absolute moment stored for a source group below its target."""
        values = [float(np.max(np.abs(b))) for (s, t), b in self.blocks.items() if s > t and b.size]
        return max(values, default=0.0)


def build_scatter_moments(grid: EnergyGrid, ordinates: OrdinateSet, model: MaterialModel,
                          threads: int = 1) -> ScatterMoments:
    """
    Tabulate Theta for every group pair g' <= g at all ordinate-pair cosines.

    Delta kernels are collapsed onto their kinematic curve; smooth kernels use
    oversampled tensor Gauss rules, and triangle rules on the diagonal block.
    """
    cosines = ordinates.cosines()
    pairs = [(s, t) for t in range(grid.n_groups) for s in range(t + 1)]

    def tabulate(pair: Tuple[int, int]) -> np.ndarray:
        theta = moment_block(model, grid, pair[0], pair[1], cosines)
        return theta * ordinates.weights[None, None, None, :]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        tables = list(pool.map(tabulate, pairs))
    moments = ScatterMoments(grid.n_groups, dict(zip(pairs, tables)))
    logger.info("Built scattering moments for %d group pairs on %d ordinates", len(pairs), len(ordinates))
    return moments


def inject_upscatter(moments: ScatterMoments, source: int, target: int, value: float = 1.0) -> None:
    """Test hook: store a non-zero moment from a lower-energy group into a higher one."""
    if source <= target:
        raise ValueError(f"Up-scatter needs source > target, got {source} -> {target}")
    reference = next(iter(moments.blocks.values()))
    moments.blocks[(source, target)] = np.full(reference.shape, value)


def scatter_sources(flux: 'FluxState', target: int, moments: ScatterMoments, ordinates: OrdinateSet,
                    rho_mass: sparse.spmatrix, sources: Optional[range] = None) -> np.ndarray:
    """
    Scattering right-hand sides for every (node, ordinate) of a target group.

    Result[i, m] = w_m M_rho sum_{g'} sum_j sum_n T[j, i, m, n] U_{g', j, n}.
    Accumulation runs in ascending source group order.

    Args:
        flux: Current flux; must hold every source group used
        target: Target group g
        moments: Tabulated moments
        ordinates: Ordinate set of the flux
        rho_mass: rho-weighted spatial mass matrix
        sources: Source groups to include (default all g' <= g)

    Returns:
        Array of shape (n_nodes(g), M, N_X)

    Raises:
        SolverError: If a required source group has no flux
    """
    sources = range(target + 1) if sources is None else sources
    total = None
    for source in sources:
        if source > target:
            continue
        block = moments.block(source, target)
        if block is None:
            continue
        if not flux.has_group(source):
            raise SolverError(f"Scattering into group {target} needs the flux of group {source}")
        part = np.einsum("jimn,jnx->imx", block, flux.group(source))
        total = part if total is None else total + part
    n_i = flux.grid.n_nodes(target)
    if total is None:
        return np.zeros((n_i, len(ordinates), flux.n_dofs))
    spatial = np.asarray((rho_mass @ total.reshape(-1, flux.n_dofs).T).T).reshape(total.shape)
    return ordinates.weights[None, :, None] * spatial


def apply_scattering(flux: 'FluxState', target: Tuple[int, int, int], moments: ScatterMoments,
                     ordinates: OrdinateSet, rho_mass: sparse.spmatrix) -> np.ndarray:
    """Scattering right-hand side for one (group, node, ordinate) target."""
    g, i, m = target
    return scatter_sources(flux, g, moments, ordinates, rho_mass)[i, m]
