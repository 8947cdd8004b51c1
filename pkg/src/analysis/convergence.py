"""Experimental orders of convergence from a refinement ladder."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

NORMS = ("l2", "dg", "streamline")


@dataclass
class ConvergenceRecord:
    """
    One level of a refinement study.

    Attributes:
        level: Position in the ladder
        n_dofs: Total degrees of freedom N
        h: (h_X, h_S, h_E) mesh sizes
        degrees: (p, q, r)
        domain_dimension: d_D of the phase space
        errors: Error value per norm name
        iterations: Source iterations per group
    """
    level: int
    n_dofs: int
    h: Tuple[float, float, float]
    degrees: Tuple[int, int, int]
    domain_dimension: int
    errors: Dict[str, float] = field(default_factory=dict)
    iterations: List[int] = field(default_factory=list)

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "level": self.level,
            "n_dofs": self.n_dofs,
            "h_x": self.h[0],
            "h_s": self.h[1],
            "h_e": self.h[2],
            "p": self.degrees[0],
            "q": self.degrees[1],
            "r": self.degrees[2],
            "d_domain": self.domain_dimension,
        }
        for name, value in self.errors.items():
            row[f"{name}_error"] = value
        return row


def records_frame(records: Sequence[ConvergenceRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records])


def eoc(records: Sequence[ConvergenceRecord], norms: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Slopes between consecutive levels, against h_X and against N.

    eoc_h = log(e_i / e_{i+1}) / log(h_i / h_{i+1})
    eoc_n = d_D * log(e_i / e_{i+1}) / log(N_{i+1} / N_i)

    Raises:
        ValueError: With fewer than two records or when N does not strictly increase
    """
    if len(records) < 2:
        raise ValueError(f"Convergence rates need at least 2 records, got {len(records)}")
    frame = records_frame(records)
    if not frame["n_dofs"].is_monotonic_increasing or frame["n_dofs"].duplicated().any():
        raise ValueError(f"Degrees of freedom must strictly increase along the ladder, got {frame['n_dofs'].tolist()}")
    norms = list(norms) if norms is not None else [n for n in NORMS if f"{n}_error" in frame]
    previous = frame.shift(1)
    table = pd.DataFrame({
        "from_level": previous["level"].iloc[1:].astype(int).to_numpy(),
        "to_level": frame["level"].iloc[1:].to_numpy(),
    })
    log_h = np.log(previous["h_x"] / frame["h_x"]).iloc[1:].to_numpy()
    log_n = np.log(frame["n_dofs"] / previous["n_dofs"]).iloc[1:].to_numpy()
    d_domain = frame["d_domain"].iloc[1:].to_numpy()
    with np.errstate(divide='ignore', invalid='ignore'):
        for name in norms:
            column = frame[f"{name}_error"]
            log_e = np.log(previous[f"{name}_error"] / column).iloc[1:].to_numpy()
            table[f"{name}_eoc_h"] = np.where(log_h != 0.0, log_e / np.where(log_h != 0.0, log_h, 1.0), np.nan)
            table[f"{name}_eoc_n"] = d_domain * log_e / log_n
    return table
