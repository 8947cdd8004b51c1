"""Volume source and inflow data that make a closed-form u solve the transport equation."""

import logging
from typing import Dict, Tuple

import numpy as np

from src.analysis.exact import ExactSolution
from src.analysis.oracle import ORACLE_TOLERANCE, scattering_oracle
from src.assembly.scattering import exact_removal
from src.assembly.transport import DataFunction
from src.physics.materials import MaterialModel

logger = logging.getLogger(__name__)


def manufactured_forcing(exact: ExactSolution, model: MaterialModel,
                         tolerance: float = ORACLE_TOLERANCE) -> Tuple[DataFunction, DataFunction]:
    """
    f = mu . grad u + (alpha + beta) u - S[u] and g = u.

    beta is integrated exactly over the sphere once per energy and S[u] is
    always evaluated by the scattering oracle.

    Returns:
        (f, g), each called as func(x (n, d), mu (d,), E) -> (n,)
    """
    removal: Dict[float, float] = {}

    def source(x: np.ndarray, mu: np.ndarray, energy: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mu = np.asarray(mu, dtype=float)
        energy = float(energy)
        if energy not in removal:
            removal[energy] = exact_removal(model, energy)
        u = exact(x, mu[None, :], energy)
        sigma = model.alpha(x, energy) + model.density(x) * removal[energy]
        return exact.streaming(x, mu[None, :], energy) + sigma * u - scattering_oracle(exact, model, x, mu, energy,
                                                                                        tolerance)

    def inflow(x: np.ndarray, mu: np.ndarray, energy: float) -> np.ndarray:
        return exact(np.asarray(x, dtype=float), np.asarray(mu, dtype=float)[None, :], float(energy))

    logger.debug("Manufactured forcing for '%s' with model '%s'", exact.name, model.name)
    return source, inflow
