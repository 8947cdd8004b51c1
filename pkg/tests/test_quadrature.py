import math
import unittest

import numpy as np

from src.quadrature.nodal import NodalBasis, TensorNodalBasis, nodal_basis
from src.quadrature.rules import (
    QuadratureRule, gauss_legendre, map_rule, map_simplex_rule, simplex_rule, tensor_rule
)


class TestGaussLegendre(unittest.TestCase):

    def test_exactness_up_to_twelve_points(self) -> None:
        """Test the n-point rule integrates x^k exactly for k <= 2n-1."""
        for n in range(1, 13):
            rule = gauss_legendre(n)
            self.assertEqual(rule.exactness_degree, 2 * n - 1)
            for k in range(2 * n):
                exact = 0.0 if k % 2 else 2.0 / (k + 1)
                self.assertAlmostEqual(rule.integrate(lambda x: x ** k), exact, delta=1e-13)

    def test_two_point_nodes(self) -> None:
        """Test the two-point rule sits at +-1/sqrt(3) with unit weights."""
        rule = gauss_legendre(2)
        np.testing.assert_allclose(rule.nodes, [-0.5773502691896258, 0.5773502691896258], atol=1e-15)
        np.testing.assert_allclose(rule.weights, [1.0, 1.0], atol=1e-15)

    def test_one_point_rule(self) -> None:
        """Test the midpoint rule."""
        rule = gauss_legendre(1)
        self.assertEqual(rule.nodes.tolist(), [0.0])
        self.assertEqual(rule.weights.tolist(), [2.0])

    def test_nodes_symmetric_and_sorted(self) -> None:
        """Test nodes are ascending and mirror-symmetric."""
        rule = gauss_legendre(7)
        self.assertTrue(np.all(np.diff(rule.nodes) > 0))
        np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])

    def test_zero_points_rejected(self) -> None:
        """Test that n=0 raises ValueError."""
        with self.assertRaises(ValueError):
            gauss_legendre(0)


class TestMappedRules(unittest.TestCase):

    def test_map_rule_midpoint(self) -> None:
        """Test the one-point rule mapped to (500, 1000)."""
        rule = map_rule(gauss_legendre(1), (500.0, 1000.0))
        self.assertEqual(rule.nodes.tolist(), [750.0])
        self.assertEqual(rule.weights.tolist(), [500.0])

    def test_map_rule_two_points(self) -> None:
        """Test the two-point rule mapped to (0, 2)."""
        rule = map_rule(gauss_legendre(2), (0.0, 2.0))
        np.testing.assert_allclose(rule.nodes, [1 - 1 / math.sqrt(3), 1 + 1 / math.sqrt(3)], atol=1e-15)
        self.assertAlmostEqual(rule.integrate(lambda x: x ** 3), 4.0, delta=1e-13)

    def test_map_rule_rejects_empty_interval(self) -> None:
        """Test a >= b raises ValueError."""
        with self.assertRaises(ValueError):
            map_rule(gauss_legendre(3), (1.0, 1.0))

    def test_tensor_rule_ordering_and_exactness(self) -> None:
        """Test lexicographic ordering and exactness of a 2D tensor rule."""
        rule = tensor_rule(gauss_legendre(2), 2)
        self.assertEqual(len(rule), 4)
        np.testing.assert_allclose(rule.points[1], [-1 / math.sqrt(3), 1 / math.sqrt(3)])
        self.assertAlmostEqual(rule.integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2), 4.0 / 9.0, delta=1e-14)

    def test_rejects_non_positive_weights(self) -> None:
        """Test a rule with a zero weight is rejected."""
        with self.assertRaises(ValueError):
            QuadratureRule(np.zeros((2, 1)), np.array([1.0, 0.0]), 1)


class TestSimplexRule(unittest.TestCase):

    def test_triangle_monomials(self) -> None:
        """Test x^a y^b integrates to a! b! / (a+b+2)! for a+b <= order."""
        order = 8
        rule = simplex_rule(order, 2)
        for a in range(order + 1):
            for b in range(order + 1 - a):
                exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                value = rule.integrate(lambda p: p[:, 0] ** a * p[:, 1] ** b)
                self.assertAlmostEqual(value, exact, delta=1e-14)

    def test_tetrahedron_monomials(self) -> None:
        """Test x^a y^b z^c integrates to a! b! c! / (a+b+c+3)!."""
        rule = simplex_rule(5, 3)
        for a, b, c in [(0, 0, 0), (1, 0, 0), (2, 1, 0), (1, 1, 1), (0, 0, 5), (2, 2, 1)]:
            exact = math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)
            value = rule.integrate(lambda p: p[:, 0] ** a * p[:, 1] ** b * p[:, 2] ** c)
            self.assertAlmostEqual(value, exact, delta=1e-14)

    def test_area_and_linear_moment(self) -> None:
        """Test the reference triangle has area 1/2 and integral of x+y equal to 1/3."""
        rule = simplex_rule(2, 2)
        self.assertAlmostEqual(float(np.sum(rule.weights)), 0.5, delta=1e-14)
        self.assertAlmostEqual(rule.integrate(lambda p: p[:, 0] + p[:, 1]), 1.0 / 3.0, delta=1e-14)

    def test_points_inside_simplex(self) -> None:
        """Test every collapsed point lies inside the reference simplex."""
        for d in (2, 3):
            rule = simplex_rule(7, d)
            self.assertTrue(np.all(rule.points > 0.0))
            self.assertTrue(np.all(np.sum(rule.points, axis=1) < 1.0))

    def test_unsupported_order(self) -> None:
        """Test orders outside 1..40 are rejected."""
        with self.assertRaises(ValueError):
            simplex_rule(0, 2)
        with self.assertRaises(ValueError):
            simplex_rule(41, 3)
        with self.assertRaises(ValueError):
            simplex_rule(4, 4)

    def test_mapped_triangle_in_space(self) -> None:
        """Test mapping onto a triangle embedded in 3D scales by its area."""
        vertices = np.array([[0.0, 0.0, 1.0], [2.0, 0.0, 1.0], [0.0, 3.0, 1.0]])
        rule = map_simplex_rule(simplex_rule(3, 2), vertices)
        self.assertAlmostEqual(float(np.sum(rule.weights)), 3.0, delta=1e-13)
        self.assertAlmostEqual(rule.integrate(lambda p: p[:, 0]), 2.0, delta=1e-13)


class TestNodalBasis(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a degree-3 basis on Gauss nodes."""
        self.basis: NodalBasis = nodal_basis(gauss_legendre(4))

    def test_kronecker_property(self) -> None:
        """Test basis i at node j equals delta_ij."""
        np.testing.assert_allclose(self.basis.values(self.basis.nodes), np.eye(4), atol=1e-13)

    def test_partition_of_unity(self) -> None:
        """Test the basis sums to one anywhere."""
        x = np.linspace(-1.0, 1.0, 17)
        np.testing.assert_allclose(np.sum(self.basis.values(x), axis=1), 1.0, atol=1e-12)

    def test_derivatives_match_finite_differences(self) -> None:
        """Test derivatives against central differences."""
        x = np.array([-0.9, -0.3, 0.1, 0.77])
        step = 1e-6
        fd = (self.basis.values(x + step) - self.basis.values(x - step)) / (2 * step)
        np.testing.assert_allclose(self.basis.derivatives(x), fd, atol=1e-7)

    def test_derivatives_sum_to_zero(self) -> None:
        """Test the derivative of the partition of unity vanishes."""
        x = np.linspace(-1.0, 1.0, 9)
        np.testing.assert_allclose(np.sum(self.basis.derivatives(x), axis=1), 0.0, atol=1e-11)

    def test_constant_basis(self) -> None:
        """Test a single node gives the constant function one."""
        basis = nodal_basis(gauss_legendre(1))
        self.assertEqual(basis.degree, 0)
        np.testing.assert_array_equal(basis.values([-0.5, 0.25]), [[1.0], [1.0]])
        np.testing.assert_array_equal(basis.derivatives([0.3]), [[0.0]])

    def test_repeated_nodes_rejected(self) -> None:
        """Test duplicate nodes raise ValueError."""
        with self.assertRaises(ValueError):
            NodalBasis([0.0, 0.5, 0.5])

    def test_tensor_basis_kronecker(self) -> None:
        """Test the tensor basis is Lagrangian on the tensor rule points."""
        tensor = TensorNodalBasis(nodal_basis(gauss_legendre(3)), 2)
        points = tensor_rule(gauss_legendre(3), 2).points
        np.testing.assert_allclose(tensor.values(points), np.eye(9), atol=1e-13)


if __name__ == '__main__':
    unittest.main()
