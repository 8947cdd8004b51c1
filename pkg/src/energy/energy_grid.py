"""Energy groups with Gauss-Legendre nodes and Lagrangian energy bases."""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.quadrature.nodal import NodalBasis
from src.quadrature.rules import QuadratureRule, gauss_legendre, map_rule


class EnergyGrid:
    """
    Partition E_max = E_0 > E_1 > ... > E_N = E_min of the energy interval.

    Group g (0-based) is the interval (E_{g+1}, E_g), so group 0 carries the
    highest energies. Each group owns an (r_g+1)-point Gauss rule whose nodes
    are the Lagrangian interpolation points of that group.
    """

    def __init__(self, boundaries: Sequence[float], degrees: Union[int, Sequence[int]] = 0) -> None:
        self.boundaries: np.ndarray = np.asarray(boundaries, dtype=float).reshape(-1)
        if self.boundaries.size < 2:
            raise ValueError("An energy grid needs at least two boundaries")
        if np.any(np.diff(self.boundaries) >= 0.0):
            raise ValueError(f"Energy boundaries must be strictly decreasing, got {self.boundaries.tolist()}")
        if self.boundaries[-1] <= 0.0:
            raise ValueError(f"Energy boundaries must be positive, got E_min={self.boundaries[-1]}")
        n_groups = self.boundaries.size - 1
        if np.isscalar(degrees):
            degrees = [int(degrees)] * n_groups
        if len(degrees) != n_groups:
            raise ValueError(f"Got {len(degrees)} group degrees for {n_groups} groups")
        if any(r < 0 for r in degrees):
            raise ValueError("Energy polynomial degrees must be non-negative")
        self.degrees: List[int] = [int(r) for r in degrees]
        self.rules: List[QuadratureRule] = [
            map_rule(gauss_legendre(r + 1), self.group_interval(g)) for g, r in enumerate(self.degrees)
        ]
        self._bases: List[NodalBasis] = [NodalBasis(rule.nodes) for rule in self.rules]

    @property
    def n_groups(self) -> int:
        return self.boundaries.size - 1

    @property
    def e_max(self) -> float:
        return float(self.boundaries[0])

    @property
    def e_min(self) -> float:
        return float(self.boundaries[-1])

    def group_interval(self, g: int) -> Tuple[float, float]:
        """(lower, upper) energy of group g."""
        return float(self.boundaries[g + 1]), float(self.boundaries[g])

    def width(self, g: int) -> float:
        lo, hi = self.group_interval(g)
        return hi - lo

    def nodes(self, g: int) -> np.ndarray:
        return self.rules[g].nodes

    def weights(self, g: int) -> np.ndarray:
        return self.rules[g].weights

    def n_nodes(self, g: int) -> int:
        return self.degrees[g] + 1

    @property
    def total_nodes(self) -> int:
        return sum(self.n_nodes(g) for g in range(self.n_groups))

    def group_basis(self, g: int) -> NodalBasis:
        return self._bases[g]

    def group_of(self, energy: float) -> int:
        """Index of the group containing an energy; interior boundaries belong to the lower group."""
        if energy < self.e_min or energy > self.e_max:
            raise ValueError(f"Energy {energy} keV outside ({self.e_min}, {self.e_max})")
        g = int(np.searchsorted(-self.boundaries, -energy, side='right')) - 1
        return min(max(g, 0), self.n_groups - 1)


def build_energy_grid(e_min: float, e_max: float, n_groups: int, degree: Union[int, Sequence[int]] = 0,
                      boundaries: Optional[Sequence[float]] = None) -> EnergyGrid:
    """
    Uniform (or explicit) group partition of (e_min, e_max).

    Args:
        e_min: Lower energy cut-off in keV
        e_max: Upper energy cut-off in keV
        n_groups: Number of groups
        degree: Energy polynomial degree, uniform or per group
        boundaries: Optional explicit decreasing boundary list from e_max to e_min

    Raises:
        ValueError: If e_min >= e_max, n_groups < 1 or boundaries are inconsistent
    """
    if not 0.0 < e_min < e_max:
        raise ValueError(f"Energy interval must satisfy 0 < e_min < e_max, got ({e_min}, {e_max})")
    if n_groups < 1:
        raise ValueError(f"Need at least one energy group, got {n_groups}")
    if boundaries is None:
        boundaries = np.linspace(e_max, e_min, n_groups + 1)
    elif len(boundaries) != n_groups + 1:
        raise ValueError(f"Expected {n_groups + 1} boundaries for {n_groups} groups, got {len(boundaries)}")
    elif not (np.isclose(boundaries[0], e_max) and np.isclose(boundaries[-1], e_min)):
        raise ValueError("Explicit boundaries must start at e_max and end at e_min")
    return EnergyGrid(boundaries, degree)
