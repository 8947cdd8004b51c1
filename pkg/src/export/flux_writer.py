import json
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.solver.flux import FluxState
from src.solver.source_iteration import Discretisation, SolveReport

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")
FLOAT_FORMAT = '%.17g'


def write_csv(frame: pd.DataFrame, file_path: str, header: Sequence[str]) -> None:
    """Write a table preceded by '#' comment lines."""
    with open(file_path, 'w', newline='') as f:
        for line in header:
            f.write(f"# {line}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)


class FluxWriter:
    """
    Writes discrete fluxes as CSV summaries, coefficient dumps and parquet tables.

    Every CSV starts with comment lines naming the units and the hash of the
    run configuration.
    """

    def __init__(self, config_hash: str = "") -> None:
        self.config_hash: str = config_hash

    def _header(self, title: str, units: str) -> List[str]:
        return [title, f"units: {units}", f"config_hash: {self.config_hash}"]

    def _centroids(self, discretisation: Discretisation) -> Dict[str, np.ndarray]:
        centroids = np.array([m.centroid for m in discretisation.dofmap.metrics])
        return {AXES[a]: centroids[:, a] for a in range(discretisation.dimension)}

    def write_summary(self, flux: FluxState, discretisation: Discretisation, file_path: str) -> None:
        """Scalar flux sum_m w_m u_h(x_k, mu_m, E_l) at every element centroid, per group and node."""
        if flux.is_empty:
            raise ValueError("Flux cannot be empty.")
        offsets = discretisation.dofmap.offsets[:-1]
        centroids = self._centroids(discretisation)
        n_elements = offsets.size
        parts = []
        for g, _ in flux.items():
            # monomials are centred at the centroid, so coefficient 0 is the centroid value
            scalar = flux.scalar_flux(g)[:, offsets]
            for l, energy in enumerate(discretisation.grid.nodes(g)):
                part = {"element": np.arange(n_elements)}
                part.update(centroids)
                part.update({"group": g, "node": l, "energy": float(energy), "scalar_flux": scalar[l]})
                parts.append(pd.DataFrame(part))
        frame = pd.concat(parts, ignore_index=True)
        write_csv(frame, file_path, self._header("boltzdg scalar flux at element centroids",
                                                 "x [m], energy [keV], scalar_flux [1/(m^2 keV)]"))
        logger.info("Wrote flux summary with %d rows to %s", len(frame), file_path)

    def write_coefficients(self, flux: FluxState, discretisation: Discretisation, file_path: str) -> None:
        """Coefficient 0 of every (element, group, node, ordinate)."""
        frame = self._coefficient_frame(flux, discretisation, leading_only=True)
        write_csv(frame, file_path, self._header("boltzdg angular flux coefficient 0",
                                                 "x [m], energy [keV], coefficient_0 [1/(m^2 sr keV)]"))
        logger.info("Wrote coefficient dump with %d rows to %s", len(frame), file_path)

    def write_parquet(self, flux: FluxState, discretisation: Discretisation, file_path: str) -> None:
        """Full coefficient table, one row per element, local basis function, group, node and ordinate."""
        frame = self._coefficient_frame(flux, discretisation, leading_only=False)
        frame.to_parquet(file_path, index=False)
        logger.info("Wrote %d coefficient rows to %s", len(frame), file_path)

    def _coefficient_frame(self, flux: FluxState, discretisation: Discretisation,
                           leading_only: bool) -> pd.DataFrame:
        if flux.is_empty:
            raise ValueError("Flux cannot be empty.")
        dofmap = discretisation.dofmap
        ordinates = discretisation.ordinates
        element_of = np.repeat(np.arange(dofmap.mesh.n_elements), np.diff(dofmap.offsets))
        local_of = np.arange(dofmap.n_dofs) - dofmap.offsets[element_of]
        columns = np.flatnonzero(local_of == 0) if leading_only else np.arange(dofmap.n_dofs)
        centroids = np.array([m.centroid for m in dofmap.metrics])
        parts = []
        for g, values in flux.items():
            energies = discretisation.grid.nodes(g)
            n_l, n_m = values.shape[:2]
            node, ordinate, dof = np.meshgrid(np.arange(n_l), np.arange(n_m), columns, indexing="ij")
            node, ordinate, dof = node.ravel(), ordinate.ravel(), dof.ravel()
            part: Dict[str, Any] = {"element": element_of[dof]}
            if not leading_only:
                part["basis"] = local_of[dof]
            for a in range(discretisation.dimension):
                part[AXES[a]] = centroids[element_of[dof], a]
            part.update({"group": g, "node": node, "energy": energies[node], "ordinate": ordinate})
            for a in range(discretisation.dimension):
                part[f"mu_{AXES[a]}"] = ordinates.directions[ordinate, a]
            part["coefficient_0" if leading_only else "coefficient"] = values[node, ordinate, dof]
            parts.append(pd.DataFrame(part))
        return pd.concat(parts, ignore_index=True)


def write_report(report: SolveReport, file_path: str, extra: Optional[Dict[str, Any]] = None) -> None:
    """Solve report as indented JSON."""
    document = report.to_dict()
    if extra:
        document.update(extra)
    with open(file_path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
