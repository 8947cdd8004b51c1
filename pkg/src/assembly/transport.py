"""
Upwind DG transport operators and load vectors for a single ordinate and energy node.

The operator realises omega * a_mu^E on the spatial DG space:

  volume:   (mu . grad w + (alpha + rho * removal) w) v
  inflow:   -(mu . n) [[w]] v+ on interior faces, -(mu . n) w+ v+ on the boundary

Faces tangential to mu carry no term since their integrand has the factor mu . n.
"""

import logging
from typing import Callable, Optional

import numpy as np
from scipy import io, sparse

from src.angular.angular_mesh import Patch
from src.assembly.dofmap import ASSEMBLY_ORDER_OFFSET, DofMap, SpatialSampling
from src.mesh.spatial_mesh import SpatialMesh
from src.physics.materials import MaterialModel

logger = logging.getLogger(__name__)

DataFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class TransportAssembler:
    """
    Assembles operators and loads from a cached spatial sampling.

    The direction-independent pieces (streaming matrices per axis and the
    face jump map) are built once; each (mu, E) operator is then a handful
    of sparse products.
    """

    def __init__(self, dofmap: DofMap, offset: int = ASSEMBLY_ORDER_OFFSET) -> None:
        self.dofmap: DofMap = dofmap
        self.sampling: SpatialSampling = dofmap.sampling(offset)
        s = self.sampling
        weighted = (s.values.T @ sparse.diags(s.weights)).tocsr()
        # entry (i, j) = integral of d_a phi_j * phi_i
        self._streaming = [(weighted @ g).tocsr() for g in s.gradients]
        self._jump = (s.owner_trace - s.neighbour_trace).tocsr()

    def operator(self, mu: np.ndarray, energy: float, weight: float, model: MaterialModel,
                 removal: float) -> sparse.csr_matrix:
        """
        Scaled transport operator for one ordinate and energy node.

        Args:
            mu: Unit direction
            energy: Energy node in keV
            weight: Product of the angular and energy quadrature weights
            model: Material model supplying alpha and rho
            removal: Out-scatter per unit rho at (mu, E)
        """
        s = self.sampling
        mu = np.asarray(mu, dtype=float)
        sigma = model.alpha(s.points, energy) + removal * model.density(s.points)
        matrix = s.mass(sigma)
        for axis, streaming in enumerate(self._streaming):
            if mu[axis] != 0.0:
                matrix = matrix + mu[axis] * streaming
        flux = s.face_normals @ mu
        inflow = sparse.diags(s.face_weights * np.maximum(-flux, 0.0))
        outflow = sparse.diags(s.face_weights * np.maximum(flux, 0.0))
        matrix = matrix + s.owner_trace.T @ inflow @ self._jump - s.neighbour_trace.T @ outflow @ self._jump
        matrix = (weight * matrix).tocsr()
        matrix.eliminate_zeros()
        return matrix

    def load(self, mu: np.ndarray, energy: float, weight: float, source: Optional[DataFunction],
             inflow_data: Optional[DataFunction]) -> np.ndarray:
        """Scaled load omega * (integral of f v - inflow boundary integral of (mu . n) g v)."""
        s = self.sampling
        mu = np.asarray(mu, dtype=float)
        load = np.zeros(self.dofmap.n_dofs)
        if source is not None:
            load += s.values.T @ (s.weights * np.asarray(source(s.points, mu, energy), dtype=float))
        if inflow_data is not None:
            flux = s.face_normals @ mu
            mask = s.boundary & (flux < 0.0)
            if np.any(mask):
                values = np.asarray(inflow_data(s.face_points[mask], mu, energy), dtype=float)
                load -= s.owner_trace[mask].T @ (s.face_weights[mask] * flux[mask] * values)
        return weight * load


def transport_assembler(dofmap: DofMap) -> TransportAssembler:
    """Assembler cached on the DofMap."""
    assembler = dofmap.cache.get("transport")
    if assembler is None:
        assembler = TransportAssembler(dofmap)
        dofmap.cache["transport"] = assembler
    return assembler


def _check_mesh(mesh: SpatialMesh, dofmap: DofMap) -> None:
    if dofmap.mesh is not mesh:
        raise ValueError("The DofMap was built for a different mesh")


def assemble_transport(mu: np.ndarray, energy: float, weight: float, mesh: SpatialMesh,
                       model: MaterialModel, dofmap: DofMap, removal: Optional[float] = None) -> sparse.csr_matrix:
    """
    Sparse operator weight * a_mu^E(w, v).

    Args:
        mu: Unit direction
        energy: Energy in keV
        weight: Quadrature weight scaling the operator
        mesh: Spatial mesh
        model: Material model
        dofmap: Spatial degrees of freedom on the mesh
        removal: Out-scatter per unit rho; the exact angular integral when None

    Returns:
        CSR matrix of shape (N_X, N_X), rows indexed by test functions
    """
    _check_mesh(mesh, dofmap)
    if removal is None:
        from src.assembly.scattering import exact_removal
        removal = exact_removal(model, energy)
    return transport_assembler(dofmap).operator(mu, energy, weight, model, removal)


def assemble_load(mu: np.ndarray, energy: float, weight: float, source: Optional[DataFunction],
                  inflow_data: Optional[DataFunction], mesh: SpatialMesh, dofmap: DofMap) -> np.ndarray:
    """
    Load vector weight * l_mu^E(v).

    Args:
        source: Volume source f(x, mu, E) evaluated at points of shape (n, d), or None
        inflow_data: Boundary datum g(x, mu, E) on the inflow boundary, or None
    """
    _check_mesh(mesh, dofmap)
    return transport_assembler(dofmap).load(mu, energy, weight, source, inflow_data)


def coupled_streaming_block(patch: Patch, energy: float, mesh: SpatialMesh, model: MaterialModel,
                            dofmap: DofMap, removal: float = 0.0,
                            n_points: Optional[int] = None) -> sparse.csr_matrix:
    """
    Angular block of one patch assembled with explicit angular quadrature.

    Entry ((i, a), (j, b)) is sum_k w_k phi_i(mu_k) phi_j(mu_k) a_{mu_k}(phi_b, phi_a),
    with the patch's mapped Gauss rule of n_points per direction (q+1 by default).
    Angular index i is the slow index.
    """
    _check_mesh(mesh, dofmap)
    assembler = transport_assembler(dofmap)
    reference, directions, weights = patch.quadrature(n_points)
    basis = patch.basis_values(reference)
    size = patch.n_basis * dofmap.n_dofs
    block = sparse.csr_matrix((size, size))
    for k in range(len(weights)):
        operator = assembler.operator(directions[k], energy, 1.0, model, removal)
        block = block + sparse.kron(weights[k] * np.outer(basis[k], basis[k]), operator, format="csr")
    return block.tocsr()


def block_diagonal_streaming(patch: Patch, energy: float, mesh: SpatialMesh, model: MaterialModel,
                             dofmap: DofMap, removal: float = 0.0) -> sparse.csr_matrix:
    """diag(w_1 A_{mu_1}, ..., w_K A_{mu_K}) over the patch's own ordinates."""
    _check_mesh(mesh, dofmap)
    assembler = transport_assembler(dofmap)
    _, directions, weights = patch.quadrature()
    blocks = [assembler.operator(mu, energy, w, model, removal) for mu, w in zip(directions, weights)]
    return sparse.block_diag(blocks, format="csr")


def dump_operator(matrix: sparse.spmatrix, path: str) -> None:
    """Write an operator as Matrix Market coordinate text."""
    io.mmwrite(path, sparse.coo_matrix(matrix))
    logger.info("Wrote %dx%d operator with %d nonzeros to %s", matrix.shape[0], matrix.shape[1], matrix.nnz, path)
