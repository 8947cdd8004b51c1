import math
import unittest

import numpy as np

from src.analysis.convergence import ConvergenceRecord, eoc, records_frame
from src.analysis.exact import EXACT_SOLUTIONS, make_exact
from src.analysis.forcing import manufactured_forcing
from src.analysis.norms import discrete_bilinear_form, dg_norm_error, error_norms, l2_error, streamline_norm_error
from src.analysis.oracle import scattering_oracle, sphere_rule
from src.angular.angular_mesh import SPHERE_MEASURE, build_angular_mesh
from src.energy.energy_grid import build_energy_grid
from src.errors import OracleError
from src.mesh.spatial_mesh import structured_quad_mesh
from src.physics.materials import ComptonWaterModel, IsotropicModel
from src.solver.flux import FluxState
from src.solver.source_iteration import Problem, build_discretisation


def _record(level: int, n_dofs: int, h: float, l2: float, d_domain: int = 3) -> ConvergenceRecord:
    return ConvergenceRecord(level, n_dofs, (h, h, 1.0), (0, 0, 0), d_domain, {"l2": l2, "dg": 2.0 * l2})


class TestExactSolutions(unittest.TestCase):

    def test_gradients_match_finite_differences(self) -> None:
        """Test every registered gradient against central differences."""
        rng = np.random.default_rng(5)
        step = 1e-6
        for name, exact in EXACT_SOLUTIONS.items():
            for d in (2, 3):
                x = rng.uniform(0.0, 1.0, (6, d))
                mu = rng.standard_normal((6, d))
                mu /= np.linalg.norm(mu, axis=1, keepdims=True)
                energy = 700.0 if name == "compton_gaussian" else 1.5
                grad = exact.grad(x, mu, energy)
                for axis in range(d):
                    shift = np.zeros(d)
                    shift[axis] = step
                    numeric = (exact(x + shift, mu, energy) - exact(x - shift, mu, energy)) / (2 * step)
                    np.testing.assert_allclose(grad[:, axis], numeric, rtol=1e-6, atol=1e-8,
                                               err_msg=f"{name} d={d} axis={axis}")

    def test_chebyshev_angular_factor(self) -> None:
        """Test cos(4 phi) uses the polar angle in 3D."""
        exact = make_exact("chebyshev_t4")
        x = np.array([[math.pi / 2, 0.0, 0.0]])
        phi = 0.3
        mu = np.array([[math.sin(phi), 0.0, math.cos(phi)]])
        self.assertAlmostEqual(float(exact(x, mu, 1.0)[0]), math.cos(4 * phi) * math.pi / 2, places=12)

    def test_gaussian_vanishes_at_the_top_energy(self) -> None:
        """Test the polyenergetic solution is zero at E = 1000 keV."""
        exact = make_exact("compton_gaussian")
        self.assertEqual(float(exact(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]), 1000.0)[0]), 0.0)

    def test_unknown_name(self) -> None:
        """Test an unknown solution name raises ValueError."""
        with self.assertRaises(ValueError):
            make_exact("missing")


class TestScatteringOracle(unittest.TestCase):

    def test_isotropic_constant(self) -> None:
        """Test S[1] = sigma_s for isotropic scattering on the circle and the sphere."""
        exact = make_exact("constant")
        for d in (2, 3):
            model = IsotropicModel(d, alpha=1.0, sigma_s=1.0)
            mu = np.eye(d)[0]
            value = scattering_oracle(exact, model, np.full((3, d), 0.5), mu, 1.5)
            np.testing.assert_allclose(value, 1.0, atol=1e-9)

    def test_chebyshev_on_the_sphere(self) -> None:
        """Test S[u] = -(1/15)(x cos y + y sin x) for u = T4(mu_z)(x cos y + y sin x)."""
        exact = make_exact("chebyshev_t4")
        model = IsotropicModel(3, alpha=1.0, sigma_s=1.0)
        x = np.array([[0.2, 0.7, 0.1], [0.9, 0.4, 0.5]])
        smooth = x[:, 0] * np.cos(x[:, 1]) + x[:, 1] * np.sin(x[:, 0])
        value = scattering_oracle(exact, model, x, np.array([0.0, 0.6, 0.8]), 1.0)
        np.testing.assert_allclose(value, -smooth / 15.0, atol=1e-8)

    def test_sphere_rule_measures(self) -> None:
        """Test the refinement rules integrate 1 to the sphere measure."""
        for d in (2, 3):
            mu = np.eye(d)[d - 1]
            _, _, weights = sphere_rule(mu, -1.0, 2)
            self.assertAlmostEqual(float(weights.sum()), SPHERE_MEASURE[d], places=10)

    def test_compton_oracle_is_positive(self) -> None:
        """Test Compton in-scatter of a positive solution is positive and finite."""
        model = ComptonWaterModel(2)
        value = scattering_oracle(make_exact("compton_gaussian"), model, np.array([[0.3, 0.6]]),
                                  np.array([0.6, 0.8]), 700.0, tolerance=1e-8)
        self.assertTrue(np.all(np.isfinite(value)))
        self.assertGreater(float(value[0]), 0.0)

    def test_unreachable_tolerance(self) -> None:
        """Test an unreachable tolerance raises OracleError."""
        model = ComptonWaterModel(2)
        with self.assertRaises(OracleError):
            scattering_oracle(make_exact("compton_gaussian"), model, np.array([[0.3, 0.6]]),
                              np.array([0.6, 0.8]), 700.0, tolerance=0.0)


class TestForcing(unittest.TestCase):

    def test_constant_solution(self) -> None:
        """Test u = 1 with alpha = beta = 1 gives f = 1 and g = 1."""
        model = IsotropicModel(2, alpha=1.0, sigma_s=1.0)
        source, inflow = manufactured_forcing(make_exact("constant"), model)
        x = np.array([[0.1, 0.2], [0.8, 0.9]])
        mu = np.array([0.6, 0.8])
        np.testing.assert_allclose(source(x, mu, 1.5), 1.0, atol=1e-9)
        np.testing.assert_allclose(inflow(x, mu, 1.5), 1.0)

    def test_residual_of_mono_solution(self) -> None:
        """Test f - mu . grad u - (alpha + beta) u + S[u] vanishes for the 2D solution."""
        model = IsotropicModel(2, alpha=1.0, sigma_s=0.5)
        exact = make_exact("mono_2d")
        source, _ = manufactured_forcing(exact, model)
        x = np.array([[0.3, 0.4]])
        mu = np.array([0.0, 1.0])
        scattered = scattering_oracle(exact, model, x, mu, 1.0)
        expected = exact.streaming(x, mu[None, :], 1.0) + 1.5 * exact(x, mu[None, :], 1.0) - scattered
        np.testing.assert_allclose(source(x, mu, 1.0), expected, rtol=1e-9)


class TestEoc(unittest.TestCase):

    def test_exact_powers(self) -> None:
        """Test errors 0.25 and 0.0625 at h 0.5 and 0.25 give slope 2."""
        rates = eoc([_record(0, 16, 0.5, 0.25), _record(1, 128, 0.25, 0.0625)])
        self.assertAlmostEqual(float(rates["l2_eoc_h"].iloc[0]), 2.0, places=12)
        self.assertAlmostEqual(float(rates["l2_eoc_n"].iloc[0]), 2.0, places=12)
        self.assertAlmostEqual(float(rates["dg_eoc_h"].iloc[0]), 2.0, places=12)
        self.assertEqual(rates["from_level"].tolist(), [0])

    def test_single_record(self) -> None:
        """Test one record raises ValueError."""
        with self.assertRaises(ValueError):
            eoc([_record(0, 16, 0.5, 0.25)])

    def test_non_increasing_dofs(self) -> None:
        """Test a ladder whose N does not grow raises ValueError."""
        with self.assertRaises(ValueError):
            eoc([_record(0, 64, 0.5, 0.25), _record(1, 64, 0.25, 0.0625)])

    def test_records_frame_columns(self) -> None:
        """Test the table carries sizes, degrees and one column per norm."""
        frame = records_frame([_record(0, 16, 0.5, 0.25)])
        for column in ("level", "n_dofs", "h_x", "h_s", "h_e", "p", "q", "r", "d_domain", "l2_error", "dg_error"):
            self.assertIn(column, frame.columns)


class TestErrorNorms(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a unit-square, unit-energy discretisation."""
        self.disc = build_discretisation(structured_quad_mesh(2, 2, degree=1), build_angular_mesh(2, 2, 1),
                                         build_energy_grid(1.0, 2.0, 1))
        self.model = IsotropicModel(2, alpha=1.0, sigma_s=1.0)
        self.constant = make_exact("constant")

    def test_measure_of_phase_space(self) -> None:
        """Test ||1 - 0|| over unit square x circle x unit interval is sqrt(2 pi)."""
        zero = FluxState.filled(self.disc.grid, self.disc.ordinates, self.disc.n_spatial)
        scheme = l2_error(zero, self.constant, self.disc, quadrature="scheme")
        self.assertAlmostEqual(scheme, math.sqrt(self.disc.ordinates.weights.sum()), places=11)
        self.assertAlmostEqual(l2_error(zero, self.constant, self.disc) / math.sqrt(2 * math.pi), 1.0, delta=1e-5)

    def test_exact_discrete_function(self) -> None:
        """Test every norm vanishes when the flux reproduces the solution."""
        flux = FluxState.filled(self.disc.grid, self.disc.ordinates, self.disc.n_spatial,
                                self.disc.dofmap.constant_vector())
        norms = error_norms(flux, self.constant, self.disc, self.model)
        self.assertLess(norms.l2, 1e-12)
        self.assertLess(norms.dg, 1e-12)
        self.assertLess(norms.streamline, 1e-12)

    def test_norm_ordering(self) -> None:
        """Test streamline >= DG for a random flux against a smooth solution."""
        flux = FluxState.filled(self.disc.grid, self.disc.ordinates, self.disc.n_spatial,
                                rng=np.random.default_rng(2))
        exact = make_exact("mono_2d")
        dg = dg_norm_error(flux, exact, self.disc, self.model)
        streamline = streamline_norm_error(flux, exact, self.disc, self.model)
        self.assertGreater(dg, 0.0)
        self.assertGreaterEqual(streamline, dg)

    def test_single_element_boundary_terms(self) -> None:
        """Test a constant error on one element only sees alpha and the boundary flux."""
        disc = build_discretisation(structured_quad_mesh(1, 1), build_angular_mesh(2, 1, 0),
                                    build_energy_grid(1.0, 2.0, 1))
        zero = FluxState.filled(disc.grid, disc.ordinates, disc.n_spatial)
        dg = error_norms(zero, self.constant, disc, self.model, quadrature="scheme").dg
        # each axis ordinate sees |mu . n| = 1 on two opposite faces
        weights = disc.ordinates.weights
        expected = math.sqrt(float(np.sum(weights)) * (1.0 + 0.5 * 2.0))
        self.assertAlmostEqual(dg, expected, places=10)

    def test_unknown_quadrature(self) -> None:
        """Test an unknown quadrature mode raises ValueError."""
        zero = FluxState.filled(self.disc.grid, self.disc.ordinates, self.disc.n_spatial)
        with self.assertRaises(ValueError):
            error_norms(zero, None, self.disc, self.model, quadrature="coarse")


class TestCoercivity(unittest.TestCase):

    def test_bilinear_form_dominates_dg_norm(self) -> None:
        """Test b(v, v) >= |||v|||^2 for random discrete functions."""
        disc = build_discretisation(structured_quad_mesh(2, 2, degree=1), build_angular_mesh(2, 1, 1),
                                    build_energy_grid(1.0, 2.0, 1))
        model = IsotropicModel(2, alpha=1.0, sigma_s=1.0)
        problem = Problem(disc, model)
        rng = np.random.default_rng(0)
        for _ in range(5):
            v = FluxState.filled(disc.grid, disc.ordinates, disc.n_spatial, rng=rng)
            form = discrete_bilinear_form(v, problem)
            norm = error_norms(v, None, disc, model, quadrature="scheme").dg
            self.assertGreaterEqual(form, norm ** 2 * (1.0 - 1e-10))


if __name__ == '__main__':
    unittest.main()
