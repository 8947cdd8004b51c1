"""Turns a RunConfig into meshes, a model and a transport problem."""

import logging
from typing import Optional, Tuple

import numpy as np

from config.run_config import RunConfig
from src.analysis.exact import ExactSolution, make_exact
from src.analysis.forcing import manufactured_forcing
from src.angular.angular_mesh import build_angular_mesh
from src.assembly.transport import DataFunction
from src.energy.energy_grid import EnergyGrid, build_energy_grid
from src.mesh.spatial_mesh import SpatialMesh, load_mesh, structured_hex_mesh, structured_quad_mesh
from src.physics.materials import MaterialModel, make_model
from src.solver.source_iteration import Discretisation, Problem, build_discretisation

logger = logging.getLogger(__name__)


def build_mesh(config: RunConfig) -> SpatialMesh:
    spatial = config.spatial
    if spatial.mesh:
        return load_mesh(spatial.mesh, spatial.degree)
    if spatial.dimension == 2:
        bbox = spatial.bbox or (0.0, 1.0, 0.0, 1.0)
        return structured_quad_mesh(int(spatial.cells[0]), int(spatial.cells[1]), bbox, spatial.degree)
    bbox = spatial.bbox or (0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
    return structured_hex_mesh(int(spatial.cells[0]), int(spatial.cells[1]), int(spatial.cells[2]), bbox,
                               spatial.degree)


def build_grid(config: RunConfig) -> EnergyGrid:
    energy = config.energy
    return build_energy_grid(energy.e_min, energy.e_max, energy.groups, energy.degree, energy.boundaries)


def build_model(config: RunConfig) -> MaterialModel:
    """Model with its energy range defaulting to the configured cut-offs."""
    parameters = dict(config.model.parameters)
    if "energy_range" in parameters:
        parameters["energy_range"] = tuple(parameters["energy_range"])
    else:
        parameters["energy_range"] = (config.energy.e_min, config.energy.e_max)
    return make_model(config.model.name, config.spatial.dimension, **parameters)


def _constant(value: float) -> Optional[DataFunction]:
    if value == 0.0:
        return None

    def data(x: np.ndarray, mu: np.ndarray, energy: float) -> np.ndarray:
        return np.full(np.asarray(x).shape[0], value)

    return data


def build_problem(config: RunConfig, discretisation: Optional[Discretisation] = None
                  ) -> Tuple[Problem, Optional[ExactSolution]]:
    """
    Discretisation, model and data of a run.

    With problem.exact set, the source and inflow are manufactured from the
    named solution; otherwise constant source and inflow values are used.
    """
    if discretisation is None:
        angular = build_angular_mesh(config.angular.dimension, config.angular.patches, config.angular.degree)
        discretisation = build_discretisation(build_mesh(config), angular, build_grid(config))
    model = build_model(config)
    exact = make_exact(config.problem.exact) if config.problem.exact else None
    if exact is not None:
        source, inflow = manufactured_forcing(exact, model)
    else:
        source, inflow = _constant(config.problem.source), _constant(config.problem.inflow)
    logger.info("Problem: model %s, exact solution %s", model.name, exact.name if exact else "none")
    return Problem(discretisation, model, source, inflow), exact
