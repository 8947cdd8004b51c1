import os
import tempfile
import unittest

import numpy as np
from scipy import io, sparse

from src.angular.angular_mesh import SPHERE_MEASURE, build_angular_mesh, ordinate_set
from src.assembly.dofmap import DofMap, monomial_exponents
from src.assembly.scattering import (
    apply_scattering, build_scatter_moments, discrete_removal, exact_removal, inject_upscatter, moment_block,
    scatter_sources
)
from src.assembly.transport import (
    assemble_load, assemble_transport, block_diagonal_streaming, coupled_streaming_block, dump_operator
)
from src.energy.energy_grid import build_energy_grid
from src.errors import SolverError
from src.mesh.spatial_mesh import structured_quad_mesh
from src.physics.materials import ComptonWaterModel, DownscatterModel, IsotropicModel
from src.solver.flux import FluxState


def _one(x, mu, energy):
    return np.ones(np.asarray(x).shape[0])


class TestDofMap(unittest.TestCase):

    def test_monomial_exponents(self) -> None:
        """Test graded ordering and the dimension of P_p."""
        np.testing.assert_array_equal(monomial_exponents(1, 2), [[0, 0], [1, 0], [0, 1]])
        self.assertEqual(len(monomial_exponents(2, 3)), 10)
        self.assertEqual(len(monomial_exponents(3, 2)), 10)

    def test_offsets_and_constant(self) -> None:
        """Test contiguous element blocks and the constant function."""
        dofmap = DofMap(structured_quad_mesh(2, 2, degree=1))
        self.assertEqual(dofmap.n_dofs, 12)
        np.testing.assert_array_equal(dofmap.dofs(1), [3, 4, 5])
        constant = dofmap.constant_vector(2.5)
        points = np.array([[0.6, 0.1], [0.9, 0.4]])
        np.testing.assert_allclose(dofmap.evaluate(constant, 1, points), 2.5, atol=1e-14)

    def test_p0_mass_is_element_areas(self) -> None:
        """Test the p=0 mass matrix holds the element areas."""
        dofmap = DofMap(structured_quad_mesh(2, 2))
        mass = dofmap.sampling().mass().toarray()
        np.testing.assert_allclose(mass, 0.25 * np.eye(4), atol=1e-14)

    def test_sampling_is_cached(self) -> None:
        """Test repeated sampling requests share one object."""
        dofmap = DofMap(structured_quad_mesh(1, 1))
        self.assertIs(dofmap.sampling(), dofmap.sampling())


class TestTransportAssembly(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a non-absorbing model."""
        self.void = IsotropicModel(2, alpha=0.0, sigma_s=0.0)

    def test_single_element_inflow(self) -> None:
        """Test one unit square at p=0 gives the 1x1 matrix [1] from its inflow face."""
        mesh = structured_quad_mesh(1, 1)
        matrix = assemble_transport(np.array([1.0, 0.0]), 1.0, 1.0, mesh, self.void, DofMap(mesh), removal=0.0)
        np.testing.assert_allclose(matrix.toarray(), [[1.0]], atol=1e-14)

    def test_upwind_coupling(self) -> None:
        """Test the downstream element couples to its upstream neighbour only."""
        mesh = structured_quad_mesh(2, 2)
        matrix = assemble_transport(np.array([1.0, 0.0]), 1.0, 1.0, mesh, self.void, DofMap(mesh),
                                    removal=0.0).toarray()
        # element 0 is bottom-left, element 1 its right neighbour
        self.assertAlmostEqual(matrix[1, 0], -0.5, places=14)
        self.assertAlmostEqual(matrix[0, 1], 0.0, places=14)
        self.assertAlmostEqual(matrix[1, 1], 0.5, places=14)
        self.assertAlmostEqual(matrix[0, 0], 0.5, places=14)
        self.assertAlmostEqual(matrix[2, 0], 0.0, places=14)

    def test_constant_quadratic_form(self) -> None:
        """Test v^T A v for v = 1 equals omega (sigma |Omega| + inflow measure weighted by |mu . n|)."""
        mesh = structured_quad_mesh(3, 3, degree=1)
        dofmap = DofMap(mesh)
        model = IsotropicModel(2, alpha=0.7, sigma_s=0.0)
        mu = np.array([0.6, 0.8])
        matrix = assemble_transport(mu, 1.0, 0.3, mesh, model, dofmap, removal=0.0)
        v = dofmap.constant_vector()
        self.assertAlmostEqual(float(v @ (matrix @ v)), 0.3 * (0.7 + 0.6 + 0.8), places=12)

    def test_removal_enters_the_mass_term(self) -> None:
        """Test removal adds rho * beta * mass on top of the absorption."""
        mesh = structured_quad_mesh(2, 1)
        dofmap = DofMap(mesh)
        mu = np.array([0.0, 1.0])
        without = assemble_transport(mu, 1.0, 1.0, mesh, self.void, dofmap, removal=0.0)
        with_removal = assemble_transport(mu, 1.0, 1.0, mesh, self.void, dofmap, removal=2.0)
        np.testing.assert_allclose((with_removal - without).toarray(), 2.0 * dofmap.sampling().mass().toarray(),
                                   atol=1e-14)

    def test_default_removal_is_exact(self) -> None:
        """Test the exact angular removal is used when none is given."""
        mesh = structured_quad_mesh(1, 1)
        dofmap = DofMap(mesh)
        model = IsotropicModel(2, alpha=0.0, sigma_s=1.5)
        mu = np.array([1.0, 0.0])
        default = assemble_transport(mu, 1.0, 1.0, mesh, model, dofmap)
        explicit = assemble_transport(mu, 1.0, 1.0, mesh, model, dofmap, removal=exact_removal(model, 1.0))
        np.testing.assert_allclose(default.toarray(), explicit.toarray(), atol=1e-12)

    def test_other_mesh_rejected(self) -> None:
        """Test a DofMap from another mesh raises ValueError."""
        mesh = structured_quad_mesh(1, 1)
        with self.assertRaises(ValueError):
            assemble_transport(np.array([1.0, 0.0]), 1.0, 1.0, mesh, self.void,
                               DofMap(structured_quad_mesh(1, 1)), removal=0.0)

    def test_load_vectors(self) -> None:
        """Test zero data, a unit source and a unit inflow on the unit square."""
        mesh = structured_quad_mesh(1, 1)
        dofmap = DofMap(mesh)
        mu = np.array([1.0, 0.0])
        np.testing.assert_array_equal(assemble_load(mu, 1.0, 2.0, None, None, mesh, dofmap), [0.0])
        np.testing.assert_allclose(assemble_load(mu, 1.0, 2.0, _one, None, mesh, dofmap), [2.0], atol=1e-14)
        np.testing.assert_allclose(assemble_load(mu, 1.0, 2.0, None, _one, mesh, dofmap), [2.0], atol=1e-14)

    def test_dump_operator(self) -> None:
        """Test Matrix Market output reads back unchanged."""
        mesh = structured_quad_mesh(2, 2)
        matrix = assemble_transport(np.array([1.0, 0.0]), 1.0, 1.0, mesh, self.void, DofMap(mesh), removal=0.0)
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, 'operator.mtx')
            dump_operator(matrix, path)
            np.testing.assert_allclose(sparse.csr_matrix(io.mmread(path)).toarray(), matrix.toarray())


class TestBlockDiagonal(unittest.TestCase):

    def test_coupled_block_is_block_diagonal(self) -> None:
        """Test the coupled patch block equals diag(w_k A_k) at the patch's own nodes."""
        mesh = structured_quad_mesh(2, 2, degree=1)
        dofmap = DofMap(mesh)
        model = IsotropicModel(2, alpha=1.0, sigma_s=1.0)
        for q in (1, 2, 3):
            patch = build_angular_mesh(2, 1, q).patches[0]
            coupled = coupled_streaming_block(patch, 1.5, mesh, model, dofmap, removal=1.0)
            diagonal = block_diagonal_streaming(patch, 1.5, mesh, model, dofmap, removal=1.0)
            scale = float(abs(diagonal).max())
            self.assertLessEqual(float(abs(coupled - diagonal).max()), 1e-12 * scale)

    def test_overintegration_couples_ordinates(self) -> None:
        """Test more angular points than nodes leave off-diagonal angular blocks."""
        mesh = structured_quad_mesh(1, 1, degree=1)
        dofmap = DofMap(mesh)
        model = IsotropicModel(2, alpha=1.0, sigma_s=0.0)
        patch = build_angular_mesh(2, 1, 1).patches[0]
        coupled = coupled_streaming_block(patch, 1.0, mesh, model, dofmap, n_points=4).toarray()
        n = dofmap.n_dofs
        self.assertGreater(float(np.max(np.abs(coupled[:n, n:]))), 1e-8)


class TestScattering(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a two-group Compton grid and a small ordinate set."""
        self.compton = ComptonWaterModel(2, energy_range=(500.0, 1000.0))
        self.grid = build_energy_grid(500.0, 1000.0, 2)
        self.ordinates = ordinate_set(build_angular_mesh(2, 1, 1))

    def test_isotropic_moment(self) -> None:
        """Test Theta = width / |S| for the unit isotropic kernel at r=0."""
        for d in (2, 3):
            model = IsotropicModel(d, alpha=1.0, sigma_s=1.0)
            grid = build_energy_grid(1.0, 2.0, 1)
            theta = moment_block(model, grid, 0, 0, np.array([-0.5, 0.3, 1.0]))
            np.testing.assert_allclose(theta, 1.0 / SPHERE_MEASURE[d], rtol=1e-13)

    def test_compton_has_no_upscatter(self) -> None:
        """Test only pairs with source <= target are stored and none carry up-scatter."""
        moments = build_scatter_moments(self.grid, self.ordinates, self.compton)
        self.assertEqual(set(moments.blocks), {(0, 0), (0, 1), (1, 1)})
        self.assertEqual(moments.upscatter_norm(), 0.0)
        self.assertGreater(float(np.max(moments.block(0, 1))), 0.0)

    def test_forward_scatter_stays_in_group(self) -> None:
        """Test no energy is exchanged between groups at c = 1."""
        theta = moment_block(self.compton, self.grid, 0, 1, np.array([1.0]))
        np.testing.assert_array_equal(theta, 0.0)
        self.assertGreater(float(moment_block(self.compton, self.grid, 0, 0, np.array([1.0]))[0, 0, 0]), 0.0)

    def test_smooth_downscatter(self) -> None:
        """Test the smooth down-scatter kernel fills the lower group only."""
        model = DownscatterModel(2, energy_range=(1.0, 2.0))
        grid = build_energy_grid(1.0, 2.0, 2)
        moments = build_scatter_moments(grid, self.ordinates, model, threads=2)
        self.assertEqual(moments.upscatter_norm(), 0.0)
        self.assertGreater(float(np.min(moments.block(0, 1))), 0.0)

    def test_injected_upscatter_is_reported(self) -> None:
        """Test the injection hook shows up in the up-scatter norm."""
        moments = build_scatter_moments(self.grid, self.ordinates, self.compton)
        inject_upscatter(moments, 1, 0)
        self.assertEqual(moments.upscatter_norm(), 1.0)
        with self.assertRaises(ValueError):
            inject_upscatter(moments, 0, 1)

    def test_discrete_removal_balances_isotropic_inscatter(self) -> None:
        """Test the ordinate removal equals sigma_s times the normalised weight sum."""
        model = IsotropicModel(2, alpha=0.0, sigma_s=2.0)
        removal = discrete_removal(model, self.ordinates, 1.0)
        expected = 2.0 * self.ordinates.weights.sum() / SPHERE_MEASURE[2]
        np.testing.assert_allclose(removal, expected, rtol=1e-13)


class TestApplyScattering(unittest.TestCase):

    def setUp(self) -> None:
        """Set up a monoenergetic isotropic problem on a 2x2 grid."""
        self.dofmap = DofMap(structured_quad_mesh(2, 2, degree=1))
        self.grid = build_energy_grid(1.0, 2.0, 1)
        self.ordinates = ordinate_set(build_angular_mesh(2, 2, 1))
        self.model = IsotropicModel(2, alpha=1.0, sigma_s=1.0)
        self.moments = build_scatter_moments(self.grid, self.ordinates, self.model)
        self.mass = self.dofmap.sampling().mass()

    def test_zero_flux(self) -> None:
        """Test zero flux scatters nothing."""
        flux = FluxState.filled(self.grid, self.ordinates, self.dofmap.n_dofs)
        np.testing.assert_array_equal(apply_scattering(flux, (0, 0, 3), self.moments, self.ordinates, self.mass),
                                      0.0)

    def test_constant_flux(self) -> None:
        """Test flux 1 scatters w_m * width * integral of the test functions."""
        flux = FluxState.filled(self.grid, self.ordinates, self.dofmap.n_dofs, self.dofmap.constant_vector())
        sampling = self.dofmap.sampling()
        direct = sampling.values.T @ sampling.weights
        normalised = self.ordinates.weights.sum() / SPHERE_MEASURE[2]
        for m in (0, 5):
            expected = self.ordinates.weights[m] * self.grid.width(0) * normalised * direct
            result = apply_scattering(flux, (0, 0, m), self.moments, self.ordinates, self.mass)
            np.testing.assert_allclose(result, expected, atol=1e-10)

    def test_rotation_relabels_output(self) -> None:
        """Test a quarter turn of the flux permutes the scattering output the same way."""
        rng = np.random.default_rng(3)
        flux = FluxState.filled(self.grid, self.ordinates, self.dofmap.n_dofs, rng=rng)
        rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
        rotated = self.ordinates.directions @ rotation.T
        target = np.array([int(np.argmin(np.linalg.norm(self.ordinates.directions - r, axis=1))) for r in rotated])
        turned = FluxState(self.grid, self.ordinates, self.dofmap.n_dofs)
        values = np.empty_like(flux.group(0))
        values[:, target, :] = flux.group(0)
        turned.set_group(0, values)
        before = scatter_sources(flux, 0, self.moments, self.ordinates, self.mass)
        after = scatter_sources(turned, 0, self.moments, self.ordinates, self.mass)
        np.testing.assert_allclose(after[:, target, :], before, atol=1e-12)

    def test_missing_source_group(self) -> None:
        """Test scattering from an unsolved group raises SolverError."""
        grid = build_energy_grid(1.0, 2.0, 2)
        model = DownscatterModel(2, energy_range=(1.0, 2.0))
        moments = build_scatter_moments(grid, self.ordinates, model)
        flux = FluxState(grid, self.ordinates, self.dofmap.n_dofs)
        with self.assertRaises(SolverError):
            scatter_sources(flux, 1, moments, self.ordinates, self.mass)


if __name__ == '__main__':
    unittest.main()
