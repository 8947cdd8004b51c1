"""
Multigroup discrete-ordinates driver.

Groups are solved from high to low energy. Within a group, source iteration
lags the scattering term: every iteration evaluates the scattering sources
of all (energy node, ordinate) pairs against a frozen flux, then solves one
independent sparse transport system per pair.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg

from config.run_config import SolverConfig
from src.angular.angular_mesh import AngularMesh, OrdinateSet, ordinate_set
from src.assembly.dofmap import DofMap
from src.assembly.scattering import (ScatterMoments, build_scatter_moments, discrete_removal, exact_removal,
                                     scatter_sources)
from src.assembly.transport import DataFunction, TransportAssembler, transport_assembler
from src.energy.energy_grid import EnergyGrid
from src.errors import SingularOperatorError, SolverError
from src.mesh.spatial_mesh import SpatialMesh
from src.physics.materials import MaterialModel
from src.solver.flux import FluxState

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Discretisation:
    """
    Spatial, angular and energy discretisations of one run.

    Attributes:
        mesh: Spatial mesh
        dofmap: Spatial degrees of freedom on the mesh
        angular: Cubed-sphere angular mesh
        ordinates: Scheme ordinates (q+1 Gauss points per patch direction)
        grid: Energy groups
    """
    mesh: SpatialMesh
    dofmap: DofMap
    angular: AngularMesh
    ordinates: OrdinateSet
    grid: EnergyGrid

    @property
    def dimension(self) -> int:
        return self.mesh.dimension

    @property
    def n_spatial(self) -> int:
        return self.dofmap.n_dofs

    @property
    def n_dofs(self) -> int:
        """dim V_X * dim V_S * dim V_E."""
        return self.n_spatial * len(self.ordinates) * self.grid.total_nodes

    @property
    def monoenergetic(self) -> bool:
        return self.grid.n_groups == 1 and self.grid.degrees[0] == 0

    @property
    def domain_dimension(self) -> int:
        """Dimension d_D of the phase space the unknown lives on."""
        return 2 * self.dimension - 1 if self.monoenergetic else 2 * self.dimension

    @property
    def h_spatial(self) -> float:
        return max(m.diameter for m in self.dofmap.metrics)

    @property
    def h_angular(self) -> float:
        return float(np.pi / (2 * self.angular.n))

    @property
    def h_energy(self) -> float:
        return max(self.grid.width(g) for g in range(self.grid.n_groups))

    def rho_mass(self, model: MaterialModel) -> sparse.csr_matrix:
        sampling = self.dofmap.sampling()
        return sampling.mass(model.density(sampling.points))

    def mass(self) -> sparse.csr_matrix:
        return self.dofmap.sampling().mass()


def build_discretisation(mesh: SpatialMesh, angular: AngularMesh, grid: EnergyGrid) -> Discretisation:
    if mesh.dimension != angular.dimension:
        raise ValueError(f"Spatial dimension {mesh.dimension} does not match angular dimension {angular.dimension}")
    discretisation = Discretisation(mesh, DofMap(mesh), angular, ordinate_set(angular), grid)
    logger.info("Discretisation: N_X=%d, M=%d ordinates, %d energy nodes, N=%d", discretisation.n_spatial,
                len(discretisation.ordinates), grid.total_nodes, discretisation.n_dofs)
    return discretisation


@dataclass(frozen=True, eq=False)
class Problem:
    """
    Transport problem on a discretisation.

    Attributes:
        discretisation: Meshes, ordinates and energy grid
        model: Material model
        source: Volume source f(x, mu, E), or None
        inflow: Inflow boundary datum g(x, mu, E), or None
    """
    discretisation: Discretisation
    model: MaterialModel
    source: Optional[DataFunction] = None
    inflow: Optional[DataFunction] = None


@dataclass
class GroupReport:
    group: int
    iterations: int = 0
    residuals: List[float] = field(default_factory=list)
    converged: bool = False
    factorizations: int = 0
    scatter_time: float = 0.0
    solve_time: float = 0.0
    assembly_time: float = 0.0


@dataclass
class SolveReport:
    """
    Per-group history of a multigroup solve.

    Attributes:
        groups: One GroupReport per solved group, in solve order
        threads: Worker threads used for per-ordinate work
    """
    groups: List[GroupReport] = field(default_factory=list)
    threads: int = 1

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.groups)

    @property
    def iterations(self) -> List[int]:
        return [r.iterations for r in self.groups]

    @property
    def factorizations(self) -> int:
        return sum(r.factorizations for r in self.groups)

    def timings(self) -> Dict[str, float]:
        return {
            "assembly": sum(r.assembly_time for r in self.groups),
            "scatter": sum(r.scatter_time for r in self.groups),
            "solve": sum(r.solve_time for r in self.groups),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "converged": self.converged,
            "threads": self.threads,
            "factorizations": self.factorizations,
            "timings": self.timings(),
            "groups": [
                {
                    "group": r.group,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "factorizations": r.factorizations,
                    "residuals": list(r.residuals),
                }
                for r in self.groups
            ],
        }


def factorize(matrix: sparse.spmatrix, direction: np.ndarray, energy: float) -> linalg.SuperLU:
    """
    Sparse LU factorization of one transport operator.

    Raises:
        SingularOperatorError: If the factorization fails or is exactly singular
    """
    try:
        factor = linalg.splu(sparse.csc_matrix(matrix))
    except RuntimeError as e:
        raise SingularOperatorError(direction, energy, e)
    diagonal = factor.U.diagonal()
    if diagonal.size and np.any(diagonal == 0.0):
        raise SingularOperatorError(direction, energy)
    return factor


def solve_ordinate(matrix: sparse.spmatrix, rhs: np.ndarray, factor: Optional[linalg.SuperLU] = None,
                   direction: Optional[np.ndarray] = None, energy: float = float('nan')) -> np.ndarray:
    """
    Solve one spatial transport system A x = rhs.

    Args:
        matrix: Square sparse operator
        rhs: Right-hand side
        factor: Cached factorization of matrix, computed when None
        direction: Ordinate reported on failure
        energy: Energy node reported on failure

    Raises:
        ValueError: If the operator is not square or sizes disagree
        SingularOperatorError: If the operator cannot be factorized
    """
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Transport operator must be square, got {matrix.shape}")
    if rhs.shape[0] != matrix.shape[0]:
        raise ValueError(f"Right-hand side has {rhs.shape[0]} entries for an operator of size {matrix.shape[0]}")
    if factor is None:
        direction = np.zeros(0) if direction is None else direction
        factor = factorize(matrix, direction, energy)
    solution = factor.solve(rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularOperatorError(np.zeros(0) if direction is None else direction, energy)
    return solution


def ordinate_removal(problem: Problem, settings: SolverConfig, energy: float) -> np.ndarray:
    """Removal per unit rho at every ordinate, shape (M,)."""
    ordinates = problem.discretisation.ordinates
    if settings.removal == "exact":
        return np.full(len(ordinates), exact_removal(problem.model, energy))
    return discrete_removal(problem.model, ordinates, energy)


def _iterate_norm(values: np.ndarray, mass: sparse.spmatrix, energy_weights: np.ndarray,
                  ordinate_weights: np.ndarray) -> float:
    flat = values.reshape(-1, values.shape[-1])
    quadratic = np.einsum("kx,kx->k", flat, np.asarray((mass @ flat.T).T)).reshape(values.shape[:2])
    return float(np.sqrt(max(float(energy_weights @ quadratic @ ordinate_weights), 0.0)))


def source_iteration(g: int, flux: FluxState, problem: Problem, moments: ScatterMoments,
                     settings: SolverConfig, pool: Optional[ThreadPoolExecutor] = None) -> GroupReport:
    """
    Solve group g by source iteration and store its flux.

    A U^r = S U^{r-1} + F, where F holds the loads and the scattering from
    the already solved groups g' < g. Operators are factorized once per
    (node, ordinate) and reused across iterations.

    Args:
        g: Group index
        flux: Flux holding every group g' < g; group g is written on return
        problem: Transport problem
        moments: Scattering moments of the run
        settings: Tolerance, iteration cap or fixed iteration count
        pool: Executor for the per-(node, ordinate) work; serial when None

    Returns:
        GroupReport; converged is False when the cap was reached

    Raises:
        SolverError: If a higher-energy group has not been solved yet
        SingularOperatorError: If a transport operator is singular
    """
    missing = [s for s in range(g) if not flux.has_group(s)]
    if missing:
        raise SolverError(f"Group {g} cannot be solved before groups {missing}")

    disc = problem.discretisation
    ordinates = disc.ordinates
    nodes, node_weights = disc.grid.nodes(g), disc.grid.weights(g)
    tasks = [(l, m) for l in range(len(nodes)) for m in range(len(ordinates))]
    assembler: TransportAssembler = transport_assembler(disc.dofmap)
    rho_mass = disc.rho_mass(problem.model)
    mass = disc.mass()
    report = GroupReport(g)
    run = pool.map if pool is not None else map

    start = time.perf_counter()
    removal = [ordinate_removal(problem, settings, float(e)) for e in nodes]

    def prepare(task: Tuple[int, int]) -> Tuple[linalg.SuperLU, np.ndarray]:
        l, m = task
        mu, energy = ordinates.directions[m], float(nodes[l])
        weight = float(node_weights[l] * ordinates.weights[m])
        operator = assembler.operator(mu, energy, weight, problem.model, float(removal[l][m]))
        load = assembler.load(mu, energy, weight, problem.source, problem.inflow)
        return factorize(operator, mu, energy), load

    prepared = list(run(prepare, tasks))
    factors = [p[0] for p in prepared]
    report.factorizations = len(factors)
    shape = flux.group_shape(g)
    fixed = np.stack([p[1] for p in prepared]).reshape(shape)
    report.assembly_time = time.perf_counter() - start

    start = time.perf_counter()
    if g > 0:
        fixed = fixed + scatter_sources(flux, g, moments, ordinates, rho_mass, range(g))
    report.scatter_time += time.perf_counter() - start

    in_group = moments.has_in_group(g)
    limit = settings.fixed_iterations or settings.max_iterations
    current = np.zeros(shape)
    first_norm = 0.0
    for iteration in range(1, limit + 1):
        start = time.perf_counter()
        rhs = fixed
        if in_group and iteration > 1:
            flux.set_group(g, current)
            rhs = fixed + scatter_sources(flux, g, moments, ordinates, rho_mass, range(g, g + 1))
        report.scatter_time += time.perf_counter() - start

        start = time.perf_counter()
        flat_rhs = rhs.reshape(len(tasks), -1)

        def solve(k: int) -> np.ndarray:
            return factors[k].solve(flat_rhs[k])

        updated = np.stack(list(run(solve, range(len(tasks))))).reshape(shape)
        report.solve_time += time.perf_counter() - start
        if not np.all(np.isfinite(updated)):
            l, m = np.unravel_index(int(np.argmax(~np.isfinite(updated).all(axis=2))), shape[:2])
            raise SingularOperatorError(ordinates.directions[m], float(nodes[l]))

        residual = _iterate_norm(updated - current, mass, node_weights, ordinates.weights)
        if iteration == 1:
            first_norm = residual
        report.residuals.append(residual)
        report.iterations = iteration
        current = updated
        logger.debug("Group %d iteration %d: residual %.3e", g, iteration, residual)

        if settings.fixed_iterations is not None:
            continue
        if not in_group or residual <= settings.tolerance * first_norm:
            report.converged = True
            break

    if settings.fixed_iterations is not None:
        report.converged = True
    flux.set_group(g, current)
    if report.converged:
        logger.info("Group %d converged after %d iterations (residual %.3e)", g, report.iterations,
                    report.residuals[-1])
    else:
        logger.warning("Group %d did not converge in %d iterations (residual %.3e, target %.3e)", g,
                       report.iterations, report.residuals[-1], settings.tolerance * first_norm)
    return report


def multigroup_solve(problem: Problem, settings: Optional[SolverConfig] = None,
                     moments: Optional[ScatterMoments] = None, flux: Optional[FluxState] = None,
                     groups: Optional[Iterable[int]] = None) -> Tuple[FluxState, SolveReport]:
    """
    Solve all groups from high to low energy.

    Args:
        problem: Transport problem
        settings: Solver settings (defaults when None)
        moments: Precomputed scattering moments; built from the model when None
        flux: Flux to continue from, holding already solved groups
        groups: Groups to solve, in order (default every group)

    Returns:
        (flux, report). A non-converged group keeps its last iterate and
        marks the report as not converged.
    """
    settings = settings or SolverConfig()
    disc = problem.discretisation
    threads = settings.worker_count
    flux = flux if flux is not None else FluxState(disc.grid, disc.ordinates, disc.n_spatial)
    order = list(range(disc.grid.n_groups)) if groups is None else list(groups)
    report = SolveReport(threads=threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        if moments is None:
            moments = build_scatter_moments(disc.grid, disc.ordinates, problem.model, threads)
        for g in order:
            report.groups.append(source_iteration(g, flux, problem, moments, settings, pool))
    logger.info("Multigroup solve finished: iterations %s, %d factorizations, converged=%s",
                report.iterations, report.factorizations, report.converged)
    return flux, report
