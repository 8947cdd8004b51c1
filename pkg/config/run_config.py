import copy
import dataclasses
import hashlib
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.errors import ConfigurationError

REMOVAL_MODES = ("discrete", "exact")
NORM_QUADRATURES = ("oversampled", "scheme")


@dataclass
class SpatialConfig:
    """
    Spatial mesh source and polynomial degree.

    Attributes:
        dimension: Spatial dimension (2 or 3)
        mesh: JSON mesh file; the structured generator is used when empty
        cells: Cells per direction for the generator
        bbox: Generator bounding box (x0, x1, y0, y1[, z0, z1]), unit box when empty
        degree: Uniform spatial polynomial degree p
    """
    dimension: int = 2
    mesh: str = ""
    cells: List[int] = field(default_factory=lambda: [4, 4])
    bbox: List[float] = field(default_factory=list)
    degree: int = 0

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if self.dimension not in (2, 3):
            raise ValueError(f"spatial.dimension must be 2 or 3, got {self.dimension}")
        if self.degree < 0:
            raise ValueError(f"spatial.degree must be non-negative, got {self.degree}")
        if any(int(c) < 1 for c in self.cells):
            raise ValueError(f"spatial.cells must be positive, got {self.cells}")

    def validate(self) -> List[str]:
        issues = []
        if not self.mesh and len(self.cells) != self.dimension:
            issues.append(f"spatial.cells needs {self.dimension} entries for a {self.dimension}D grid, "
                          f"got {self.cells}")
        if self.bbox and len(self.bbox) != 2 * self.dimension:
            issues.append(f"spatial.bbox needs {2 * self.dimension} entries, got {self.bbox}")
        if self.bbox and any(self.bbox[2 * a] >= self.bbox[2 * a + 1] for a in range(len(self.bbox) // 2)):
            issues.append(f"spatial.bbox bounds must increase, got {self.bbox}")
        if self.mesh and not os.path.exists(self.mesh):
            issues.append(f"spatial.mesh file not found: {self.mesh}")
        return issues


@dataclass
class AngularConfig:
    """
    Cubed-sphere angular mesh.

    Attributes:
        dimension: Dimension of the ambient space of the sphere (2 or 3)
        patches: Patches per face edge n (4n patches in 2D, 6n^2 in 3D)
        degree: Angular polynomial degree q
    """
    dimension: int = 2
    patches: int = 1
    degree: int = 0

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if self.dimension not in (2, 3):
            raise ValueError(f"angular.dimension must be 2 or 3, got {self.dimension}")
        if self.patches < 1:
            raise ValueError(f"angular.patches must be at least 1, got {self.patches}")
        if self.degree < 0:
            raise ValueError(f"angular.degree must be non-negative, got {self.degree}")

    def validate(self) -> List[str]:
        return []


@dataclass
class EnergyConfig:
    """
    Energy groups in keV.

    Attributes:
        e_min: Lower cut-off
        e_max: Upper cut-off
        groups: Number of groups
        degree: Energy polynomial degree r
        boundaries: Optional explicit decreasing boundaries from e_max to e_min
    """
    e_min: float = 1.0
    e_max: float = 2.0
    groups: int = 1
    degree: int = 0
    boundaries: Optional[List[float]] = None

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if self.groups < 1:
            raise ValueError(f"energy.groups must be at least 1, got {self.groups}")
        if self.degree < 0:
            raise ValueError(f"energy.degree must be non-negative, got {self.degree}")

    def validate(self) -> List[str]:
        issues = []
        if not 0.0 < self.e_min < self.e_max:
            issues.append(f"energy.e_min ({self.e_min}) and energy.e_max ({self.e_max}) must satisfy "
                          f"0 < e_min < e_max")
        if self.boundaries is not None:
            if len(self.boundaries) != self.groups + 1:
                issues.append(f"energy.boundaries needs {self.groups + 1} entries, got {len(self.boundaries)}")
            elif any(b >= a for a, b in zip(self.boundaries, self.boundaries[1:])):
                issues.append("energy.boundaries must be strictly decreasing")
        return issues


@dataclass
class ModelConfig:
    """
    Material model selection.

    Attributes:
        name: Registered model name ("isotropic", "compton_water", "downscatter")
        parameters: Keyword overrides passed to the model constructor
    """
    name: str = "isotropic"
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if not self.name:
            raise ValueError("model.name cannot be empty")

    def validate(self) -> List[str]:
        from src.physics.materials import MODELS

        if self.name not in MODELS:
            return [f"model.name '{self.name}' is unknown (available: {', '.join(sorted(MODELS))})"]
        return []


@dataclass
class ProblemConfig:
    """
    Problem data.

    Attributes:
        exact: Manufactured solution name; forcing and inflow data are derived from it
        source: Constant volume source used when no exact solution is given
        inflow: Constant inflow boundary value used when no exact solution is given
    """
    exact: str = ""
    source: float = 0.0
    inflow: float = 0.0

    def validate(self) -> List[str]:
        from src.analysis.exact import EXACT_SOLUTIONS

        if self.exact and self.exact not in EXACT_SOLUTIONS:
            return [f"problem.exact '{self.exact}' is unknown (available: {', '.join(sorted(EXACT_SOLUTIONS))})"]
        return []


@dataclass
class SolverConfig:
    """
    Source iteration settings.

    Attributes:
        tolerance: Relative successive-difference tolerance
        max_iterations: Iteration cap in tolerance mode
        fixed_iterations: Run exactly this many iterations when set
        threads: Worker threads for per-ordinate work (0 = all cores)
        removal: "discrete" balances removal with the ordinate rule, "exact" integrates it exactly
    """
    tolerance: float = 1e-10
    max_iterations: int = 200
    fixed_iterations: Optional[int] = None
    threads: int = 0
    removal: str = "discrete"

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if self.tolerance <= 0.0:
            raise ValueError(f"solver.tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"solver.max_iterations must be at least 1, got {self.max_iterations}")
        if self.fixed_iterations is not None and self.fixed_iterations < 1:
            raise ValueError(f"solver.fixed_iterations must be at least 1, got {self.fixed_iterations}")
        if self.threads < 0:
            raise ValueError(f"solver.threads must be non-negative, got {self.threads}")
        if self.removal not in REMOVAL_MODES:
            raise ValueError(f"solver.removal must be one of {REMOVAL_MODES}, got '{self.removal}'")

    def apply_environment(self) -> 'SolverConfig':
        """
        Override the thread count from BOLTZDG_THREADS.

        Returns:
            Copy of this configuration with the override applied

        Raises:
            ValueError: If the variable is not a non-negative integer
        """
        raw = os.getenv('BOLTZDG_THREADS')
        if raw is None or not raw.strip():
            return self
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"BOLTZDG_THREADS must be an integer, got '{raw}'")
        return dataclasses.replace(self, threads=threads)

    @property
    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def validate(self) -> List[str]:
        return []


@dataclass
class OutputConfig:
    """
    Artifact settings.

    Attributes:
        directory: Output directory
        coefficients: Write the coefficient-0 CSV dump
        parquet: Write the full coefficient table as parquet
        sidecar: Write the full coefficient array as a binary sidecar
        norm_quadrature: "oversampled" or "scheme" quadrature for error norms
    """
    directory: str = "output"
    coefficients: bool = True
    parquet: bool = False
    sidecar: bool = False
    norm_quadrature: str = "oversampled"

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if not self.directory:
            raise ValueError("output.directory cannot be empty")
        if self.norm_quadrature not in NORM_QUADRATURES:
            raise ValueError(f"output.norm_quadrature must be one of {NORM_QUADRATURES}, "
                             f"got '{self.norm_quadrature}'")

    def validate(self) -> List[str]:
        target = os.path.abspath(self.directory)
        while not os.path.exists(target):
            parent = os.path.dirname(target)
            if parent == target:
                break
            target = parent
        if not os.access(target, os.W_OK):
            return [f"output.directory '{self.directory}' is not writable"]
        return []


@dataclass
class ConvergenceConfig:
    """
    Refinement ladder for manufactured-solution studies.

    Attributes:
        levels: One table per level overriding "cells", "patches" and "groups"
        degrees: Polynomial degrees p to sweep; each sets the spatial and angular degree
        vary_energy_degree: Also set the energy degree r = p
        angular_degree: Pin the angular degree q instead of setting q = p
    """
    levels: List[Dict[str, Any]] = field(default_factory=list)
    degrees: List[int] = field(default_factory=lambda: [0])
    vary_energy_degree: bool = True
    angular_degree: Optional[int] = None

    def __post_init__(self) -> None:
        """Validate configuration parameters."""
        if any(p < 0 for p in self.degrees):
            raise ValueError(f"convergence.degrees must be non-negative, got {self.degrees}")
        if self.angular_degree is not None and self.angular_degree < 0:
            raise ValueError(f"convergence.angular_degree must be non-negative, got {self.angular_degree}")

    def validate(self) -> List[str]:
        issues = []
        if len(self.levels) < 2:
            issues.append(f"convergence.levels needs at least 2 levels, got {len(self.levels)}")
        allowed = {"cells", "patches", "groups"}
        for k, level in enumerate(self.levels):
            unknown = set(level) - allowed
            if unknown:
                issues.append(f"convergence.levels[{k}] has unknown keys {sorted(unknown)}")
        if not self.degrees:
            issues.append("convergence.degrees cannot be empty")
        return issues


SECTIONS = {
    "spatial": SpatialConfig,
    "angular": AngularConfig,
    "energy": EnergyConfig,
    "model": ModelConfig,
    "problem": ProblemConfig,
    "solver": SolverConfig,
    "output": OutputConfig,
    "convergence": ConvergenceConfig,
}

# settings that never change numerical results
_UNHASHED = {("solver", "threads"), ("output", "directory")}


@dataclass
class RunConfig:
    """
    Complete run description, one attribute per TOML table.
    """
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    angular: AngularConfig = field(default_factory=AngularConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """
        Build a configuration from nested tables.

        Raises:
            ConfigurationError: Listing every unknown table, unknown key and invalid value
        """
        issues = []
        sections = {}
        for name in data:
            if name not in SECTIONS:
                issues.append(f"Unknown table [{name}]")
        for name, section_cls in SECTIONS.items():
            table = data.get(name, {})
            if not isinstance(table, dict):
                issues.append(f"[{name}] must be a table")
                continue
            try:
                sections[name] = section_cls(**table)
            except TypeError as e:
                issues.append(f"[{name}] {e}")
            except ValueError as e:
                issues.append(str(e))
        if issues:
            raise ConfigurationError(issues)
        return cls(**sections)

    @classmethod
    def from_toml(cls, path: str) -> 'RunConfig':
        """
        Read a TOML run configuration.

        Raises:
            FileNotFoundError: If the file does not exist
            ConfigurationError: If the file cannot be parsed or holds invalid values
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"Configuration file not found: {path}")
        with open(path, 'rb') as f:
            try:
                data = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigurationError([f"{path} could not be parsed: {e}"])
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """First 12 hex digits of the sha256 of the canonical configuration."""
        data = copy.deepcopy(self.to_dict())
        for section, key in _UNHASHED:
            data[section].pop(key, None)
        text = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]

    def validate(self, convergence: bool = False) -> List[str]:
        """
        Validate every section and their consistency.

        Args:
            convergence: Also require a usable refinement ladder

        Returns:
            List of validation error messages (empty if valid)
        """
        issues = []
        for name in SECTIONS:
            if name == "convergence" and not convergence:
                continue
            issues.extend(getattr(self, name).validate())
        if self.spatial.dimension != self.angular.dimension:
            issues.append(f"spatial.dimension={self.spatial.dimension} does not match "
                          f"angular.dimension={self.angular.dimension}")
        return issues

    def check(self, convergence: bool = False) -> 'RunConfig':
        """Raise ConfigurationError unless validate() finds nothing."""
        issues = self.validate(convergence)
        if issues:
            raise ConfigurationError(issues)
        return self

    def with_overrides(self, **sections: Dict[str, Any]) -> 'RunConfig':
        """Copy with individual keys of the named sections replaced."""
        updates = {name: dataclasses.replace(getattr(self, name), **values) for name, values in sections.items()}
        return dataclasses.replace(self, **updates)

    def level(self, index: int, degree: int) -> 'RunConfig':
        """Configuration of one convergence level at polynomial degree p."""
        level = self.convergence.levels[index]
        spatial: Dict[str, Any] = {"degree": degree}
        angular: Dict[str, Any] = {"degree": degree if self.convergence.angular_degree is None
                                   else self.convergence.angular_degree}
        energy: Dict[str, Any] = {}
        if "cells" in level:
            spatial["cells"] = list(level["cells"])
        if "patches" in level:
            angular["patches"] = int(level["patches"])
        if "groups" in level:
            energy["groups"] = int(level["groups"])
            energy["boundaries"] = None
        if self.convergence.vary_energy_degree:
            energy["degree"] = degree
        return self.with_overrides(spatial=spatial, angular=angular, energy=energy)
