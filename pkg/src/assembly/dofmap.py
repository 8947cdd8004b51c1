"""Spatial degrees of freedom: centroid-scaled monomials on polytopic elements."""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy import sparse

from src.mesh.geometry import ElementMetrics, element_metrics, face_rule, volume_rule
from src.mesh.spatial_mesh import SpatialMesh

logger = logging.getLogger(__name__)

# 2p+2 for products of local polynomials, plus 2 for data terms
ASSEMBLY_ORDER_OFFSET = 4
# error norms oversample the scheme by 3
NORM_ORDER_OFFSET = 5


def monomial_exponents(degree: int, dimension: int) -> np.ndarray:
    """Exponents of all monomials of total degree <= degree in graded lexicographic order."""
    rows = []
    for total in range(degree + 1):
        for combo in itertools.product(range(total, -1, -1), repeat=dimension):
            if sum(combo) == total:
                rows.append(combo)
    return np.array(rows, dtype=int).reshape(-1, dimension)


@dataclass(frozen=True, eq=False)
class ElementBasis:
    """
    Monomials ((x - centroid) / scale)^e on one element.

    Attributes:
        centroid: Expansion point
        scale: Element diameter, keeps the monomials O(1)
        exponents: Array of shape (n_basis, d)
    """
    centroid: np.ndarray
    scale: float
    exponents: np.ndarray

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values at points of shape (n, d), returned as (n, n_basis)."""
        z = (np.asarray(points, dtype=float) - self.centroid) / self.scale
        return np.prod(z[:, None, :] ** self.exponents[None, :, :], axis=2)

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Spatial gradients, shape (n, n_basis, d)."""
        z = (np.asarray(points, dtype=float) - self.centroid) / self.scale
        powers = z[:, None, :] ** self.exponents[None, :, :]
        result = np.zeros(powers.shape)
        for axis in range(z.shape[1]):
            e = self.exponents[:, axis]
            lowered = np.where(e > 0, e - 1, 0)
            factor = e * z[:, None, axis] ** lowered[None, :] / self.scale
            others = np.prod(np.delete(powers, axis, axis=2), axis=2)
            result[:, :, axis] = factor * others
        return result


@dataclass(frozen=True, eq=False)
class SpatialSampling:
    """
    Quadrature points of every element and face with sparse basis evaluation maps.

    The maps turn a global coefficient vector into values at points, so every
    spatial integral becomes a weighted product of sparse matrices.

    Attributes:
        points: Volume quadrature points, shape (Q, d)
        weights: Volume weights, shape (Q,)
        element: Element owning each volume point
        values: Basis values, CSR of shape (Q, N_X)
        gradients: One CSR per axis with the basis derivatives, each (Q, N_X)
        face_points: Face quadrature points, shape (F, d)
        face_weights: Face weights, shape (F,)
        face_index: Face owning each face point
        face_normals: Owner-outward unit normal at each face point, shape (F, d)
        boundary: Whether each face point lies on the domain boundary
        owner_trace: Owner basis values at face points, CSR (F, N_X)
        neighbour_trace: Neighbour basis values at face points, zero rows on the boundary
    """
    points: np.ndarray
    weights: np.ndarray
    element: np.ndarray
    values: sparse.csr_matrix
    gradients: List[sparse.csr_matrix]
    face_points: np.ndarray
    face_weights: np.ndarray
    face_index: np.ndarray
    face_normals: np.ndarray
    boundary: np.ndarray
    owner_trace: sparse.csr_matrix
    neighbour_trace: sparse.csr_matrix

    def mass(self, coefficient: Optional[np.ndarray] = None) -> sparse.csr_matrix:
        """Block-diagonal mass matrix, optionally weighted by a coefficient at the volume points."""
        w = self.weights if coefficient is None else self.weights * coefficient
        return (self.values.T @ sparse.diags(w) @ self.values).tocsr()


class DofMap:
    """
    Global numbering of the local monomial bases of a mesh.

    Element k owns the contiguous block offsets[k]:offsets[k+1]; its basis
    spans P_{p_k} about the element centroid, scaled by the diameter.
    """

    def __init__(self, mesh: SpatialMesh) -> None:
        self.mesh: SpatialMesh = mesh
        self.metrics: List[ElementMetrics] = [element_metrics(e) for e in mesh.elements]
        self.bases: List[ElementBasis] = [
            ElementBasis(m.centroid, m.diameter, monomial_exponents(int(p), mesh.dimension))
            for m, p in zip(self.metrics, mesh.degrees)
        ]
        sizes = np.array([len(b) for b in self.bases], dtype=int)
        self.offsets: np.ndarray = np.concatenate([[0], np.cumsum(sizes)])
        self._samplings: Dict[int, SpatialSampling] = {}
        self.cache: Dict[str, object] = {}
        logger.debug("DofMap with %d spatial dofs on %d elements", self.n_dofs, mesh.n_elements)

    @property
    def n_dofs(self) -> int:
        return int(self.offsets[-1])

    @property
    def dimension(self) -> int:
        return self.mesh.dimension

    def dofs(self, k: int) -> np.ndarray:
        return np.arange(self.offsets[k], self.offsets[k + 1])

    def constant_vector(self, value: float = 1.0) -> np.ndarray:
        """Coefficients of the globally constant function."""
        v = np.zeros(self.n_dofs)
        v[self.offsets[:-1]] = value
        return v

    def evaluate(self, coefficients: np.ndarray, k: int, points: np.ndarray) -> np.ndarray:
        """Value of a discrete function on element k at points of shape (n, d)."""
        return self.bases[k].values(points) @ np.asarray(coefficients)[self.dofs(k)]

    def sampling(self, offset: int = ASSEMBLY_ORDER_OFFSET) -> SpatialSampling:
        """Sampling with element rules of total degree 2 p_k + offset (cached per offset)."""
        if offset not in self._samplings:
            self._samplings[offset] = self._build_sampling(offset)
        return self._samplings[offset]

    def _build_sampling(self, offset: int) -> SpatialSampling:
        mesh = self.mesh
        n = self.n_dofs
        points, weights, owner = [], [], []
        rows, cols, vals = [], [], []
        grad_vals: List[List[np.ndarray]] = [[] for _ in range(mesh.dimension)]
        start = 0
        for k, element in enumerate(mesh.elements):
            rule = volume_rule(element, 2 * int(mesh.degrees[k]) + offset)
            basis = self.bases[k]
            phi = basis.values(rule.points)
            dphi = basis.gradients(rule.points)
            q = np.arange(start, start + len(rule))
            rr, cc = np.meshgrid(q, self.dofs(k), indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(phi.ravel())
            for axis in range(mesh.dimension):
                grad_vals[axis].append(dphi[:, :, axis].ravel())
            points.append(rule.points)
            weights.append(rule.weights)
            owner.append(np.full(len(rule), k))
            start += len(rule)
        shape = (start, n)
        row_index, col_index = np.concatenate(rows), np.concatenate(cols)
        values = sparse.csr_matrix((np.concatenate(vals), (row_index, col_index)), shape=shape)
        gradients = [sparse.csr_matrix((np.concatenate(g), (row_index, col_index)), shape=shape)
                     for g in grad_vals]

        f_points, f_weights, f_index, f_normals, f_boundary = [], [], [], [], []
        o_rows, o_cols, o_vals, n_rows, n_cols, n_vals = [], [], [], [], [], []
        start = 0
        for face in mesh.faces:
            degree = int(mesh.degrees[face.owner])
            if not face.is_boundary:
                degree = max(degree, int(mesh.degrees[face.neighbour]))
            rule = face_rule(mesh.vertices[list(face.vertex_ids)], 2 * degree + offset)
            q = np.arange(start, start + len(rule))
            for element, r_list, c_list, v_list in ((face.owner, o_rows, o_cols, o_vals),
                                                    (face.neighbour, n_rows, n_cols, n_vals)):
                if element < 0:
                    continue
                rr, cc = np.meshgrid(q, self.dofs(element), indexing="ij")
                r_list.append(rr.ravel())
                c_list.append(cc.ravel())
                v_list.append(self.bases[element].values(rule.points).ravel())
            f_points.append(rule.points)
            f_weights.append(rule.weights)
            f_index.append(np.full(len(rule), face.index))
            f_normals.append(np.tile(face.normal, (len(rule), 1)))
            f_boundary.append(np.full(len(rule), face.is_boundary))
            start += len(rule)
        face_shape = (start, n)

        def trace(r_list, c_list, v_list) -> sparse.csr_matrix:
            if not r_list:
                return sparse.csr_matrix(face_shape)
            return sparse.csr_matrix((np.concatenate(v_list), (np.concatenate(r_list), np.concatenate(c_list))),
                                     shape=face_shape)

        sampling = SpatialSampling(
            np.vstack(points), np.concatenate(weights), np.concatenate(owner), values, gradients,
            np.vstack(f_points), np.concatenate(f_weights), np.concatenate(f_index), np.vstack(f_normals),
            np.concatenate(f_boundary), trace(o_rows, o_cols, o_vals), trace(n_rows, n_cols, n_vals))
        logger.debug("Spatial sampling (offset %d): %d volume and %d face points", offset,
                     sampling.points.shape[0], sampling.face_points.shape[0])
        return sampling
