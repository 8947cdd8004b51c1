"""Convergence tables, log-log figures and ordinate tables."""

import logging
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.analysis.convergence import ConvergenceRecord, records_frame  # noqa: E402
from src.angular.angular_mesh import OrdinateSet  # noqa: E402
from src.export.flux_writer import AXES, FLOAT_FORMAT, write_csv  # noqa: E402

logger = logging.getLogger(__name__)

# 800 x 600 pixels at 72 dpi
FIGURE_SIZE = (800 / 72, 600 / 72)
FIGURE_DPI = 72
NORM_LABELS = {"l2": "L2 error", "dg": "DG-norm error", "streamline": "streamline-norm error"}


class ConvergenceWriter:
    """
    Writes refinement studies: one CSV row per level with the EOC table appended,
    and an SVG log-log plot of error against degrees of freedom.
    """

    def __init__(self, config_hash: str = "") -> None:
        self.config_hash: str = config_hash

    def write_csv(self, records: Sequence[ConvergenceRecord], rates: Optional[pd.DataFrame], file_path: str) -> None:
        frame = records_frame(records)
        write_csv(frame, file_path, ["boltzdg convergence study",
                                     "units: h_x [m], h_s [rad], h_e [keV], errors in the stated norms",
                                     f"config_hash: {self.config_hash}"])
        if rates is not None and len(rates):
            with open(file_path, 'a', newline='') as f:
                f.write("# eoc\n")
                rates.to_csv(f, index=False, float_format=FLOAT_FORMAT)
        logger.info("Wrote convergence table with %d levels to %s", len(frame), file_path)

    def write_svg(self, records: Sequence[ConvergenceRecord], file_path: str,
                  norms: Sequence[str] = ("l2", "dg")) -> None:
        """
        Error against N on log-log axes with guide triangles of slope
        -(p+1)/d_D and -(p+1/2)/d_D at the finest level.
        """
        if not records:
            raise ValueError("Records cannot be empty.")
        plt.rcParams['svg.hashsalt'] = 'boltzdg'
        fig, ax = plt.subplots(figsize=FIGURE_SIZE, dpi=FIGURE_DPI)
        try:
            n = np.array([r.n_dofs for r in records], dtype=float)
            p = records[-1].degrees[0]
            d_domain = records[-1].domain_dimension
            for name in norms:
                errors = np.array([r.errors.get(name, np.nan) for r in records], dtype=float)
                ax.loglog(n, errors, marker='o', label=NORM_LABELS.get(name, name))
                if len(records) > 1 and np.all(np.isfinite(errors[-2:])) and errors[-1] > 0.0:
                    slope = -(p + 1.0) / d_domain if name == "l2" else -(p + 0.5) / d_domain
                    self._slope_triangle(ax, n[-2], n[-1], errors[-1], slope)
            ax.set_xlabel("degrees of freedom N")
            ax.set_ylabel("error")
            ax.set_title(f"p = {p}, d_D = {d_domain}")
            ax.grid(True, which='both', alpha=0.3)
            ax.legend()
            fig.savefig(file_path, format="svg", metadata={'Date': None})
        finally:
            plt.close(fig)
        logger.info("Wrote convergence figure to %s", file_path)

    @staticmethod
    def _slope_triangle(ax, n_left: float, n_right: float, anchor: float, slope: float) -> None:
        # triangle below the last segment, hypotenuse parallel to the reference rate
        x0 = np.sqrt(n_left * n_right)
        x1 = n_right
        y1 = 0.5 * anchor
        y0 = y1 * (x0 / x1) ** slope
        ax.loglog([x0, x1, x1, x0], [y0, y1, y0, y0], color='gray', linewidth=0.8)
        ax.annotate(f"{slope:.3g}", (x1, np.sqrt(y0 * y1)), textcoords="offset points", xytext=(4, 0),
                    fontsize=8, color='gray')


def write_ordinate_table(ordinates: OrdinateSet, file_path: str, config_hash: str = "") -> None:
    """Ordinate directions, weights and patch ids."""
    columns: List[str] = [f"mu_{AXES[a]}" for a in range(ordinates.dimension)]
    frame = pd.DataFrame(ordinates.directions, columns=columns)
    frame.insert(0, "ordinate", np.arange(len(ordinates)))
    frame["weight"] = ordinates.weights
    frame["patch"] = ordinates.patch
    frame["local"] = ordinates.local
    write_csv(frame, file_path, ["boltzdg ordinate table", "units: mu [1], weight [sr]",
                                 f"config_hash: {config_hash}"])
