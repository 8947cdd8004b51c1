"""Cubed-sphere (d=3) and squared-circle (d=2) angular meshes and ordinate sets."""

import functools
import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.quadrature.nodal import TensorNodalBasis, nodal_basis
from src.quadrature.rules import QuadratureRule, gauss_legendre, tensor_rule

logger = logging.getLogger(__name__)

SPHERE_MEASURE = {2: 2.0 * np.pi, 3: 4.0 * np.pi}


def chart(p: np.ndarray) -> np.ndarray:
    """
    Radial projection p / |p| from the surface of [-1, 1]^d to the unit sphere.

    Raises:
        ValueError: If any input point is the zero vector
    """
    p = np.asarray(p, dtype=float)
    norms = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("The chart is undefined at the origin")
    return p / norms


def chart_jacobian(p: np.ndarray) -> np.ndarray:
    """
    Surface Jacobian of the radial chart at points on a face of [-1, 1]^d.

    On the face x_a = +-1 the arc-length (d=2) or area (d=3) element of the
    image is |p|^-d times the flat face element.
    """
    p = np.asarray(p, dtype=float)
    return np.linalg.norm(p, axis=-1) ** (-p.shape[-1])


@functools.lru_cache(maxsize=None)
def _angular_basis(degree: int, dim: int) -> TensorNodalBasis:
    return TensorNodalBasis(nodal_basis(gauss_legendre(degree + 1)), dim)


@functools.lru_cache(maxsize=None)
def _reference_rule(n_points: int, dim: int) -> QuadratureRule:
    return tensor_rule(gauss_legendre(n_points), dim)


@dataclass(frozen=True)
class Patch:
    """
    Affine cell on one face of [-1, 1]^d, parametrised by the reference cell [-1, 1]^(d-1).

    Attributes:
        index: Global patch number
        face_axis: Axis normal to the cube face carrying the patch
        face_sign: +1 or -1, which of the two faces along face_axis
        lower: Lower corner of the patch in the face's free coordinates
        width: Edge length of the patch on the face
        degree: Angular polynomial degree q
    """
    index: int
    face_axis: int
    face_sign: int
    lower: Tuple[float, ...]
    width: float
    degree: int

    @property
    def dimension(self) -> int:
        return len(self.lower) + 1

    @property
    def free_axes(self) -> Tuple[int, ...]:
        return tuple(a for a in range(self.dimension) if a != self.face_axis)

    @property
    def n_basis(self) -> int:
        return (self.degree + 1) ** (self.dimension - 1)

    def surface_points(self, reference: np.ndarray) -> np.ndarray:
        """Points on the cube surface for reference coordinates of shape (k, d-1)."""
        reference = np.asarray(reference, dtype=float).reshape(-1, self.dimension - 1)
        points = np.empty((reference.shape[0], self.dimension))
        points[:, self.face_axis] = self.face_sign
        free = np.asarray(self.lower) + 0.5 * (reference + 1.0) * self.width
        points[:, list(self.free_axes)] = free
        return points

    def directions(self, reference: np.ndarray) -> np.ndarray:
        return chart(self.surface_points(reference))

    def jacobian(self, reference: np.ndarray) -> np.ndarray:
        """Sphere measure per unit reference measure at the given reference points."""
        scale = (0.5 * self.width) ** (self.dimension - 1)
        return chart_jacobian(self.surface_points(reference)) * scale

    def basis_values(self, reference: np.ndarray) -> np.ndarray:
        """All mapped Lagrangian basis functions, shape (k, n_basis)."""
        basis = _angular_basis(self.degree, self.dimension - 1)
        return basis.values(np.asarray(reference, dtype=float).reshape(-1, self.dimension - 1))

    def quadrature(self, n_points: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Mapped tensor Gauss rule on the patch image.

        Args:
            n_points: Points per direction (default q+1, the scheme's ordinates)

        Returns:
            (reference points, unit directions, weights including the chart Jacobian)
        """
        n = self.degree + 1 if n_points is None else n_points
        rule = _reference_rule(n, self.dimension - 1)
        return rule.points, self.directions(rule.points), rule.weights * self.jacobian(rule.points)


class AngularMesh:
    """Tiling of the unit sphere by radially projected patches of the cube surface."""

    def __init__(self, dimension: int, n: int, degrees: Sequence[int]) -> None:
        if dimension not in (2, 3):
            raise ValueError(f"Angular dimension must be 2 or 3, got {dimension}")
        if n < 1:
            raise ValueError(f"Need at least one patch per face edge, got n={n}")
        per_face = n ** (dimension - 1)
        n_patches = 2 * dimension * per_face
        if len(degrees) != n_patches:
            raise ValueError(f"Got {len(degrees)} patch degrees for {n_patches} patches")
        if any(q < 0 for q in degrees):
            raise ValueError("Angular polynomial degrees must be non-negative")

        self.dimension: int = dimension
        self.n: int = n
        self.width: float = 2.0 / n
        self.patches: List[Patch] = []
        for axis in range(dimension):
            for sign in (1, -1):
                for cell in itertools.product(range(n), repeat=dimension - 1):
                    lower = tuple(-1.0 + k * self.width for k in cell)
                    index = len(self.patches)
                    self.patches.append(Patch(index, axis, sign, lower, self.width, int(degrees[index])))

    def __len__(self) -> int:
        return len(self.patches)

    @property
    def measure(self) -> float:
        return SPHERE_MEASURE[self.dimension]

    def locate(self, mu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Invert the chart for unit directions of shape (k, d).

        Returns:
            (patch index per direction, reference coordinates of shape (k, d-1))
        """
        mu = np.asarray(mu, dtype=float).reshape(-1, self.dimension)
        axis = np.argmax(np.abs(mu), axis=1)
        rows = np.arange(mu.shape[0])
        lead = mu[rows, axis]
        sign = np.where(lead > 0.0, 1, -1)
        surface = mu / np.abs(lead)[:, None]
        per_face = self.n ** (self.dimension - 1)
        patch = (2 * axis + (sign < 0)) * per_face
        reference = np.empty((mu.shape[0], self.dimension - 1))
        free_axes = [[a for a in range(self.dimension) if a != ax] for ax in range(self.dimension)]
        stride = per_face
        for slot in range(self.dimension - 1):
            stride //= self.n
            coord = surface[rows, [free_axes[a][slot] for a in axis]]
            cell = np.clip(np.floor((coord + 1.0) / self.width).astype(int), 0, self.n - 1)
            patch = patch + cell * stride
            reference[:, slot] = 2.0 * (coord - (-1.0 + cell * self.width)) / self.width - 1.0
        return patch, reference


def build_angular_mesh(d: int, n: int, q: int) -> AngularMesh:
    """
    Cubed-sphere mesh with uniform degree.

    Args:
        d: Spatial dimension (2 for the circle, 3 for the sphere)
        n: Patches per face edge; 4n patches for d=2, 6n^2 for d=3
        q: Angular polynomial degree on every patch

    Raises:
        ValueError: If n < 1, q < 0 or d is not 2 or 3
    """
    if q < 0:
        raise ValueError(f"Angular degree must be non-negative, got q={q}")
    if d not in (2, 3):
        raise ValueError(f"Angular dimension must be 2 or 3, got {d}")
    mesh = AngularMesh(d, n, [q] * (2 * d * n ** (d - 1)))
    logger.debug("Built %dD angular mesh with %d patches (q=%d)", d, len(mesh), q)
    return mesh


@dataclass(frozen=True, eq=False)
class OrdinateSet:
    """
    Discrete ordinates with their weights, in patch then tensor-lexicographic order.

    Attributes:
        directions: Unit vectors, shape (M, d)
        weights: Mapped Gauss weights times the chart Jacobian, shape (M,)
        patch: Patch index of each ordinate
        local: Local tensor index of each ordinate within its patch
        reference: Reference coordinates of each ordinate, shape (M, d-1)
    """
    directions: np.ndarray
    weights: np.ndarray
    patch: np.ndarray
    local: np.ndarray
    reference: np.ndarray

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]

    def patch_ordinates(self, patch: int) -> np.ndarray:
        return np.flatnonzero(self.patch == patch)

    def cosines(self) -> np.ndarray:
        """Matrix of mu_m . mu_n, clipped to [-1, 1]."""
        return np.clip(self.directions @ self.directions.T, -1.0, 1.0)


def ordinate_set(mesh: AngularMesh, n_points: Optional[int] = None) -> OrdinateSet:
    """
    Collect the mapped tensor Gauss points of every patch.

    Args:
        mesh: Angular mesh
        n_points: Points per direction on every patch; defaults to q+1 (the
            Lagrangian ordinates of the scheme)
    """
    directions, weights, patch, local, reference = [], [], [], [], []
    for p in mesh.patches:
        ref, mu, w = p.quadrature(n_points)
        directions.append(mu)
        weights.append(w)
        patch.append(np.full(len(w), p.index))
        local.append(np.arange(len(w)))
        reference.append(ref)
    return OrdinateSet(np.vstack(directions), np.concatenate(weights), np.concatenate(patch),
                       np.concatenate(local), np.vstack(reference))


def eval_angular_basis(patch: Patch, i: int, reference: np.ndarray) -> np.ndarray:
    """
    Value of mapped Lagrangian basis function i of a patch at reference points.

    Raises:
        IndexError: If i is outside the patch's local space
    """
    if i < 0 or i >= patch.n_basis:
        raise IndexError(f"Basis index {i} out of range for patch {patch.index} with {patch.n_basis} functions")
    values = patch.basis_values(reference)[:, i]
    return values if values.size > 1 else values[0]
