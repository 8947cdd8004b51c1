import itertools
from typing import Sequence

import numpy as np

from src.quadrature.rules import QuadratureRule


class NodalBasis:
    """
    Lagrange basis on a one-dimensional node set, evaluated in barycentric form.

    Basis function i is one at node i and zero at every other node.
    """

    def __init__(self, nodes: Sequence[float]) -> None:
        self.nodes: np.ndarray = np.asarray(nodes, dtype=float).reshape(-1)
        if self.nodes.size == 0:
            raise ValueError("A nodal basis needs at least one node")
        scale = max(1.0, float(np.max(np.abs(self.nodes))))
        gaps = np.abs(self.nodes[:, None] - self.nodes[None, :]) + np.eye(self.nodes.size) * scale
        if np.min(gaps) <= 1e-14 * scale:
            raise ValueError(f"Nodal basis nodes must be distinct, got {self.nodes.tolist()}")
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        self.barycentric_weights: np.ndarray = 1.0 / np.prod(diff, axis=1)

    @property
    def degree(self) -> int:
        return self.nodes.size - 1

    def __len__(self) -> int:
        return self.nodes.size

    def values(self, x: Sequence[float]) -> np.ndarray:
        """
        Evaluate every basis function at the given points.

        Args:
            x: Evaluation points

        Returns:
            Array of shape (len(x), n_nodes)
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        diff = x[:, None] - self.nodes[None, :]
        on_node = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.barycentric_weights[None, :] / diff
            result = terms / np.sum(terms, axis=1, keepdims=True)
        hits = np.any(on_node, axis=1)
        if np.any(hits):
            result[hits] = on_node[hits].astype(float)
        return result

    def derivatives(self, x: Sequence[float]) -> np.ndarray:
        """First derivatives of every basis function, shape (len(x), n_nodes)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.nodes.size
        result = np.zeros((x.size, n))
        if n == 1:
            return result
        diff = x[:, None] - self.nodes[None, :]
        for j in range(n):
            total = np.zeros(x.size)
            for m in range(n):
                if m == j:
                    continue
                keep = [k for k in range(n) if k != j and k != m]
                total += np.prod(diff[:, keep], axis=1) if keep else 1.0
            result[:, j] = self.barycentric_weights[j] * total
        return result


def nodal_basis(rule: QuadratureRule) -> NodalBasis:
    """Lagrange basis interpolating at the points of a 1D rule."""
    return NodalBasis(rule.nodes)


class TensorNodalBasis:
    """
    Tensor product of a 1D nodal basis on (-1, 1)^dim.

    Local index ordering matches tensor_rule: lexicographic, first axis slowest.
    """

    def __init__(self, basis: NodalBasis, dim: int) -> None:
        self.basis = basis
        self.dim = dim
        self.multi_index: np.ndarray = np.array(
            list(itertools.product(range(len(basis)), repeat=dim)), dtype=int
        ).reshape(-1, dim)

    def __len__(self) -> int:
        return self.multi_index.shape[0]

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points of shape (n, dim), returned as (n, n_basis)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        result = np.ones((points.shape[0], len(self)))
        for axis in range(self.dim):
            axis_values = self.basis.values(points[:, axis])
            result *= axis_values[:, self.multi_index[:, axis]]
        return result
