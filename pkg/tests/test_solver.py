import unittest

import numpy as np
from scipy import sparse

from config.run_config import SolverConfig
from src.angular.angular_mesh import build_angular_mesh, ordinate_set
from src.assembly.dofmap import DofMap
from src.assembly.scattering import build_scatter_moments
from src.assembly.transport import assemble_load, assemble_transport
from src.energy.energy_grid import build_energy_grid
from src.errors import SingularOperatorError, SolverError
from src.mesh.spatial_mesh import structured_quad_mesh
from src.physics.materials import DownscatterModel, IsotropicModel
from src.solver.flux import FluxState
from src.solver.source_iteration import (
    Problem, build_discretisation, multigroup_solve, ordinate_removal, solve_ordinate, source_iteration
)


def _constant(value: float):
    def data(x, mu, energy):
        return np.full(np.asarray(x).shape[0], value)
    return data


def _discretisation(cells: int = 2, p: int = 1, n: int = 1, q: int = 1, groups: int = 1):
    return build_discretisation(structured_quad_mesh(cells, cells, degree=p), build_angular_mesh(2, n, q),
                                build_energy_grid(1.0, 2.0, groups))


class TestSolveOrdinate(unittest.TestCase):

    def test_single_element(self) -> None:
        """Test [1] x = 1 gives x = 1."""
        np.testing.assert_allclose(solve_ordinate(sparse.csr_matrix([[1.0]]), np.array([1.0])), [1.0])

    def test_recovers_known_solution(self) -> None:
        """Test a diagonally dominant random system is solved to 1e-10 relative."""
        rng = np.random.default_rng(11)
        matrix = sparse.random(40, 40, density=0.1, random_state=rng, format='csr') + 10.0 * sparse.eye(40)
        expected = rng.standard_normal(40)
        solution = solve_ordinate(matrix, matrix @ expected)
        self.assertLessEqual(np.linalg.norm(solution - expected), 1e-10 * np.linalg.norm(expected))

    def test_shape_errors(self) -> None:
        """Test non-square operators and mismatched right-hand sides raise ValueError."""
        with self.assertRaises(ValueError):
            solve_ordinate(sparse.csr_matrix(np.ones((2, 3))), np.ones(2))
        with self.assertRaises(ValueError):
            solve_ordinate(sparse.eye(3, format='csr'), np.ones(2))

    def test_singular_operator(self) -> None:
        """Test a singular operator raises SingularOperatorError naming the ordinate."""
        with self.assertRaises(SingularOperatorError) as context:
            solve_ordinate(sparse.csr_matrix((2, 2)), np.ones(2), direction=np.array([1.0, 0.0]), energy=750.0)
        self.assertEqual(context.exception.direction, (1.0, 0.0))
        self.assertIn("Troubleshooting suggestions", str(context.exception))

    def test_constant_transport(self) -> None:
        """Test unit inflow through a non-absorbing 2x2 grid stays 1 in every element."""
        mesh = structured_quad_mesh(2, 2)
        dofmap = DofMap(mesh)
        mu = np.array([1.0, 0.0])
        model = IsotropicModel(2, alpha=0.0, sigma_s=0.0)
        matrix = assemble_transport(mu, 1.0, 1.0, mesh, model, dofmap, removal=0.0)
        load = assemble_load(mu, 1.0, 1.0, None, _constant(1.0), mesh, dofmap)
        np.testing.assert_allclose(solve_ordinate(matrix, load), np.ones(4), atol=1e-14)

    def test_scaling_does_not_change_the_solution(self) -> None:
        """Test scaling operator and load by the same weight leaves the solution unchanged."""
        mesh = structured_quad_mesh(3, 2, degree=1)
        dofmap = DofMap(mesh)
        mu = np.array([0.6, -0.8])
        model = IsotropicModel(2, alpha=1.0, sigma_s=0.0)
        unit = solve_ordinate(assemble_transport(mu, 1.0, 1.0, mesh, model, dofmap, removal=0.0),
                              assemble_load(mu, 1.0, 1.0, _constant(2.0), _constant(1.0), mesh, dofmap))
        scaled = solve_ordinate(assemble_transport(mu, 1.0, 0.05, mesh, model, dofmap, removal=0.0),
                                assemble_load(mu, 1.0, 0.05, _constant(2.0), _constant(1.0), mesh, dofmap))
        np.testing.assert_allclose(scaled, unit, rtol=1e-10, atol=1e-13)


class TestSourceIteration(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a small monoenergetic discretisation."""
        self.disc = _discretisation()
        self.settings = SolverConfig(tolerance=1e-12, max_iterations=200, threads=1)

    def test_pure_absorber_takes_one_iteration(self) -> None:
        """Test no scattering converges after the first sweep."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=1.0, sigma_s=0.0), _constant(1.0), None)
        flux, report = multigroup_solve(problem, self.settings)
        self.assertTrue(report.converged)
        self.assertEqual(report.iterations, [1])
        fixed, fixed_report = multigroup_solve(problem, SolverConfig(fixed_iterations=1, threads=1))
        self.assertTrue(fixed_report.converged)
        np.testing.assert_array_equal(fixed.group(0), flux.group(0))

    def test_constant_solution_is_reproduced(self) -> None:
        """Test inflow 1 and source alpha give flux 1 in every coefficient."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=1.0, sigma_s=1.0), _constant(1.0), _constant(1.0))
        flux, report = multigroup_solve(problem, self.settings)
        self.assertTrue(report.converged)
        expected = self.disc.dofmap.constant_vector()
        np.testing.assert_allclose(flux.group(0), np.broadcast_to(expected, flux.group_shape(0)), atol=1e-9)

    def test_contraction_factor(self) -> None:
        """Test scattering ratio 0.5 with vacuum inflow contracts by at most 0.55 per sweep."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=1.0, sigma_s=1.0), _constant(1.0), None)
        _, report = multigroup_solve(problem, SolverConfig(tolerance=1e-10, threads=1))
        residuals = report.groups[0].residuals
        self.assertGreater(len(residuals), 3)
        self.assertLessEqual(residuals[-1] / residuals[-2], 0.55)

    def test_fixed_iterations_never_fail(self) -> None:
        """Test fixed-iteration mode runs exactly the requested sweeps."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=1.0, sigma_s=1.0), _constant(1.0), None)
        _, report = multigroup_solve(problem, SolverConfig(fixed_iterations=3, threads=1))
        self.assertEqual(report.iterations, [3])
        self.assertTrue(report.converged)

    def test_iteration_cap_reports_failure(self) -> None:
        """Test hitting the cap keeps the last iterate and flags the report."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=0.1, sigma_s=1.0), _constant(1.0), None)
        flux, report = multigroup_solve(problem, SolverConfig(tolerance=1e-14, max_iterations=2, threads=1))
        self.assertFalse(report.converged)
        self.assertTrue(flux.has_group(0))
        self.assertEqual(report.to_dict()["groups"][0]["iterations"], 2)

    def test_single_group_matches_source_iteration(self) -> None:
        """Test the multigroup driver reduces to one source iteration for one group."""
        model = IsotropicModel(2, alpha=1.0, sigma_s=0.5)
        problem = Problem(self.disc, model, _constant(1.0), _constant(0.5))
        flux, _ = multigroup_solve(problem, self.settings)
        direct = FluxState(self.disc.grid, self.disc.ordinates, self.disc.n_spatial)
        moments = build_scatter_moments(self.disc.grid, self.disc.ordinates, model)
        source_iteration(0, direct, problem, moments, self.settings)
        np.testing.assert_allclose(direct.group(0), flux.group(0), rtol=1e-12, atol=1e-14)

    def test_removal_modes(self) -> None:
        """Test exact removal is one value for all ordinates and discrete removal follows the weights."""
        problem = Problem(self.disc, IsotropicModel(2, alpha=1.0, sigma_s=1.0))
        exact = ordinate_removal(problem, SolverConfig(removal="exact"), 1.5)
        discrete = ordinate_removal(problem, SolverConfig(removal="discrete"), 1.5)
        np.testing.assert_allclose(exact, 1.0, rtol=1e-10)
        np.testing.assert_allclose(discrete, self.disc.ordinates.weights.sum() / (2.0 * np.pi), rtol=1e-13)


class TestMultigroup(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a two-group down-scatter problem."""
        self.disc = _discretisation(groups=2)
        self.model = DownscatterModel(2, alpha=1.0, sigma_s=0.5, energy_range=(1.0, 2.0))
        self.problem = Problem(self.disc, self.model, _constant(1.0), None)
        self.settings = SolverConfig(tolerance=1e-12, threads=1)

    def test_reversed_order_rejected(self) -> None:
        """Test solving the lower group first raises SolverError."""
        with self.assertRaises(SolverError):
            multigroup_solve(self.problem, self.settings, groups=[1, 0])

    def test_prefix_is_reproduced(self) -> None:
        """Test re-solving group 0 alone gives the same flux as the full solve."""
        full, report = multigroup_solve(self.problem, self.settings)
        self.assertEqual(len(report.groups), 2)
        prefix, _ = multigroup_solve(self.problem, self.settings, groups=[0])
        np.testing.assert_array_equal(prefix.group(0), full.group(0))
        self.assertFalse(prefix.has_group(1))

    def test_continuing_from_a_prefix(self) -> None:
        """Test solving group 1 on top of a stored group 0 matches the full solve."""
        full, _ = multigroup_solve(self.problem, self.settings)
        prefix, _ = multigroup_solve(self.problem, self.settings, groups=[0])
        resumed, _ = multigroup_solve(self.problem, self.settings, flux=prefix, groups=[1])
        np.testing.assert_array_equal(resumed.group(1), full.group(1))

    def test_lower_group_is_fed_by_downscatter(self) -> None:
        """Test a source in the upper group reaches the lower group through scattering."""

        def upper_only(x, mu, energy):
            return np.full(np.asarray(x).shape[0], 1.0 if energy > 1.5 else 0.0)

        flux, _ = multigroup_solve(Problem(self.disc, self.model, upper_only, None), self.settings)
        self.assertGreater(float(np.max(flux.scalar_flux(1))), 0.0)

    def test_thread_count_does_not_change_results(self) -> None:
        """Test one and four worker threads produce bitwise identical fluxes."""
        serial, _ = multigroup_solve(self.problem, SolverConfig(tolerance=1e-12, threads=1))
        threaded, report = multigroup_solve(self.problem, SolverConfig(tolerance=1e-12, threads=4))
        self.assertEqual(report.threads, 4)
        np.testing.assert_array_equal(serial.to_array(), threaded.to_array())

    def test_report_dictionary(self) -> None:
        """Test the report lists every group with its residual history."""
        _, report = multigroup_solve(self.problem, self.settings)
        document = report.to_dict()
        self.assertTrue(document["converged"])
        self.assertEqual([g["group"] for g in document["groups"]], [0, 1])
        self.assertEqual(document["factorizations"], 2 * len(self.disc.ordinates))
        self.assertEqual(set(document["timings"]), {"assembly", "scatter", "solve"})


class TestFluxState(unittest.TestCase):

    def test_shape_and_finiteness_checked(self) -> None:
        """Test wrong shapes and non-finite values are rejected."""
        ordinates = ordinate_set(build_angular_mesh(2, 1, 0))
        flux = FluxState(build_energy_grid(1.0, 2.0, 1), ordinates, 3)
        with self.assertRaises(ValueError):
            flux.set_group(0, np.zeros((1, 4, 2)))
        with self.assertRaises(ValueError):
            flux.set_group(0, np.full((1, 4, 3), np.nan))
        with self.assertRaises(KeyError):
            flux.group(0)
        self.assertTrue(flux.is_empty)
        self.assertEqual(flux.to_array().shape, (0, 4, 3))


if __name__ == '__main__':
    unittest.main()
