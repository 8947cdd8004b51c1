"""Gauss-Legendre, tensor-product and collapsed simplex quadrature rules."""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.special import roots_jacobi

NEWTON_TOLERANCE = 1e-15
MAX_NEWTON_STEPS = 100
MAX_SIMPLEX_ORDER = 40


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Quadrature rule on a reference or physical domain.

    Attributes:
        points: Array of shape (n, dim) with the quadrature points
        weights: Array of shape (n,) of strictly positive weights
        exactness_degree: Polynomial degree integrated exactly
    """
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if points.shape[0] == 1 and np.ndim(self.points) == 1:
            points = points.T
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.shape[0] != weights.shape[0]:
            raise ValueError(f"Point count {points.shape[0]} does not match weight count {weights.shape[0]}")
        if np.any(weights <= 0.0):
            raise ValueError("Quadrature weights must be strictly positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        """Point coordinates of a one-dimensional rule as a flat array."""
        if self.dimension != 1:
            raise ValueError("nodes is only defined for one-dimensional rules")
        return self.points[:, 0]

    def __len__(self) -> int:
        return self.weights.shape[0]

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """
        Apply the rule to a vectorised integrand.

        Args:
            func: Called with shape (n,) coordinates for 1D rules, (n, dim) otherwise

        Returns:
            Weighted sum of the integrand values
        """
        arg = self.nodes if self.dimension == 1 else self.points
        return float(np.dot(self.weights, np.asarray(func(arg), dtype=float)))


def _legendre_with_derivative(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(n: int) -> QuadratureRule:
    """
    Gauss-Legendre rule with n points on (-1, 1).

    Nodes are the roots of P_n found by Newton iteration from Chebyshev-like
    initial guesses, then symmetrised so the rule is bit-stable.

    Args:
        n: Number of points (n >= 1)

    Returns:
        Rule exact for polynomials of degree 2n - 1

    Raises:
        ValueError: If n < 1
    """
    if n < 1:
        raise ValueError(f"Gauss-Legendre rule needs at least one point, got n={n}")
    if n == 1:
        return QuadratureRule(np.zeros((1, 1)), np.array([2.0]), 1)

    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(MAX_NEWTON_STEPS):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOLERANCE:
            break
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre_with_derivative(n, x)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(x.reshape(-1, 1), weights, 2 * n - 1)


def map_rule(rule: QuadratureRule, interval: Tuple[float, float]) -> QuadratureRule:
    """
    Affine image of a rule on (-1, 1) onto (a, b).

    Raises:
        ValueError: If a >= b
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError(f"Interval must satisfy a < b, got ({a}, {b})")
    half = 0.5 * (b - a)
    points = 0.5 * (a + b) + half * rule.nodes
    return QuadratureRule(points.reshape(-1, 1), rule.weights * half, rule.exactness_degree)


def tensor_rule(rule: QuadratureRule, dim: int) -> QuadratureRule:
    """Tensor product of a 1D rule on (-1, 1)^dim in lexicographic order (first axis slowest)."""
    if dim < 1:
        raise ValueError(f"Tensor dimension must be positive, got {dim}")
    nodes = rule.nodes
    index = np.array(list(itertools.product(range(len(rule)), repeat=dim)), dtype=int)
    points = nodes[index]
    weights = np.prod(rule.weights[index], axis=1)
    return QuadratureRule(points, weights, rule.exactness_degree)


def _jacobi_on_unit_interval(n: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    # Gauss-Jacobi for weight (1 - s)^alpha on (0, 1)
    xi, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + xi), w * 0.5 ** (alpha + 1.0)


def simplex_rule(order: int, d: int) -> QuadratureRule:
    """
    Collapsed-coordinate rule on the reference simplex.

    The reference triangle is {x, y >= 0, x + y <= 1} (area 1/2) and the
    reference tetrahedron {x, y, z >= 0, x + y + z <= 1} (volume 1/6). The
    Duffy map absorbs its Jacobian into Gauss-Jacobi weights, so all weights
    stay positive.

    Args:
        order: Total polynomial degree to integrate exactly (1 <= order <= 40)
        d: Simplex dimension, 2 or 3

    Raises:
        ValueError: For an unsupported order or dimension
    """
    if d not in (2, 3):
        raise ValueError(f"Simplex rules exist for d=2 or d=3, got d={d}")
    if order < 1 or order > MAX_SIMPLEX_ORDER:
        raise ValueError(f"Unsupported simplex rule order {order} (supported: 1..{MAX_SIMPLEX_ORDER})")
    n = (order + 2) // 2
    legendre = gauss_legendre(n)
    t_leg = 0.5 * (1.0 + legendre.nodes)
    w_leg = 0.5 * legendre.weights

    if d == 2:
        s, ws = _jacobi_on_unit_interval(n, 1.0)
        ss, tt = np.meshgrid(s, t_leg, indexing="ij")
        ww = np.outer(ws, w_leg)
        points = np.column_stack([ss.ravel(), (tt * (1.0 - ss)).ravel()])
        return QuadratureRule(points, ww.ravel(), order)

    s, ws = _jacobi_on_unit_interval(n, 2.0)
    t, wt = _jacobi_on_unit_interval(n, 1.0)
    ss, tt, rr = np.meshgrid(s, t, t_leg, indexing="ij")
    ww = ws[:, None, None] * wt[None, :, None] * w_leg[None, None, :]
    x = ss
    y = tt * (1.0 - ss)
    z = rr * (1.0 - ss) * (1.0 - tt)
    points = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return QuadratureRule(points, ww.ravel(), order)


def map_simplex_rule(rule: QuadratureRule, vertices: np.ndarray) -> QuadratureRule:
    """
    Push a reference simplex rule onto a physical simplex.

    The simplex may be embedded in a higher-dimensional space (a triangle in
    3D); weights are scaled by the Gram determinant of the affine map.
    """
    vertices = np.asarray(vertices, dtype=float)
    origin = vertices[0]
    jac = (vertices[1:] - origin).T
    gram = jac.T @ jac
    scale = math.sqrt(abs(np.linalg.det(gram)))
    if scale <= 0.0:
        raise ValueError("Cannot map a quadrature rule onto a degenerate simplex")
    points = origin + rule.points @ jac.T
    return QuadratureRule(points, rule.weights * scale, rule.exactness_degree)


SIMPLEX_MEASURE = {2: 0.5, 3: 1.0 / 6.0}
