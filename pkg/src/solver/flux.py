"""Angular flux coefficients U[g][l, m, :] for every group, energy node and ordinate."""

from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from src.angular.angular_mesh import OrdinateSet
from src.energy.energy_grid import EnergyGrid


class FluxState:
    """
    Spatial coefficient vectors indexed by (group, energy node, ordinate).

    A group is present once it has been written; groups are stored as arrays
    of shape (n_nodes(g), M, N_X).
    """

    def __init__(self, grid: EnergyGrid, ordinates: OrdinateSet, n_dofs: int) -> None:
        self.grid: EnergyGrid = grid
        self.ordinates: OrdinateSet = ordinates
        self.n_dofs: int = int(n_dofs)
        self._groups: Dict[int, np.ndarray] = {}

    def group_shape(self, g: int) -> Tuple[int, int, int]:
        return self.grid.n_nodes(g), len(self.ordinates), self.n_dofs

    def has_group(self, g: int) -> bool:
        return g in self._groups

    @property
    def solved_groups(self) -> Tuple[int, ...]:
        return tuple(sorted(self._groups))

    @property
    def is_empty(self) -> bool:
        return not self._groups

    def group(self, g: int) -> np.ndarray:
        if g not in self._groups:
            raise KeyError(f"No flux stored for group {g}")
        return self._groups[g]

    def set_group(self, g: int, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != self.group_shape(g):
            raise ValueError(f"Group {g} flux must have shape {self.group_shape(g)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Group {g} flux contains non-finite values")
        self._groups[g] = values

    def drop_group(self, g: int) -> None:
        self._groups.pop(g, None)

    def coefficients(self, g: int, l: int, m: int) -> np.ndarray:
        return self.group(g)[l, m]

    def items(self) -> Iterator[Tuple[int, np.ndarray]]:
        for g in self.solved_groups:
            yield g, self._groups[g]

    def scalar_flux(self, g: int) -> np.ndarray:
        """Ordinate-weighted sum over directions, shape (n_nodes(g), N_X)."""
        return np.einsum("m,lmx->lx", self.ordinates.weights, self.group(g))

    def to_array(self) -> np.ndarray:
        """All groups stacked along the energy node axis, shape (total_nodes, M, N_X)."""
        if self.is_empty:
            return np.zeros((0, len(self.ordinates), self.n_dofs))
        return np.concatenate([self._groups[g] for g in self.solved_groups], axis=0)

    def copy(self) -> 'FluxState':
        clone = FluxState(self.grid, self.ordinates, self.n_dofs)
        clone._groups = {g: v.copy() for g, v in self._groups.items()}
        return clone

    @classmethod
    def filled(cls, grid: EnergyGrid, ordinates: OrdinateSet, n_dofs: int, value: Optional[np.ndarray] = None,
               rng: Optional[np.random.Generator] = None) -> 'FluxState':
        """Flux with every group set to a constant coefficient vector, or random when rng is given."""
        state = cls(grid, ordinates, n_dofs)
        for g in range(grid.n_groups):
            shape = state.group_shape(g)
            if rng is not None:
                state.set_group(g, rng.standard_normal(shape))
            else:
                vector = np.zeros(n_dofs) if value is None else np.asarray(value, dtype=float)
                state.set_group(g, np.broadcast_to(vector, shape).copy())
        return state
