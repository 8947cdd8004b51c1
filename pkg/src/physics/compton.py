"""Compton kinematics and the Klein-Nishina differential cross section."""

from typing import Optional

import numpy as np

ELECTRON_REST_ENERGY = 511.0  # keV
CLASSICAL_ELECTRON_RADIUS = 2.81794e-15  # m
WATER_ELECTRON_DENSITY = 3.34281e29  # electrons / m^3


def klein_nishina(e_in, e_out, c):
    """
    Klein-Nishina differential cross section per electron.

    sigma = r_e^2 / 2 * (E'/E)^2 * (E'/E + E/E' - sin^2 phi)

    Args:
        e_in: Incoming photon energy E in keV
        e_out: Outgoing photon energy E' in keV
        c: Cosine of the scattering angle

    Returns:
        Cross section in m^2/sr, broadcast over the inputs

    Raises:
        ValueError: If any energy is not positive
    """
    e_in = np.asarray(e_in, dtype=float)
    e_out = np.asarray(e_out, dtype=float)
    if np.any(e_in <= 0.0) or np.any(e_out <= 0.0):
        raise ValueError("Klein-Nishina energies must be positive")
    c = np.asarray(c, dtype=float)
    ratio = e_out / e_in
    value = 0.5 * CLASSICAL_ELECTRON_RADIUS ** 2 * ratio ** 2 * (ratio + 1.0 / ratio - (1.0 - c * c))
    return value if value.ndim else float(value)


def compton_out_energy(e_in, c):
    """Energy after scattering through an angle with cosine c."""
    e_in = np.asarray(e_in, dtype=float)
    value = e_in / (1.0 + (e_in / ELECTRON_REST_ENERGY) * (1.0 - np.asarray(c, dtype=float)))
    return value if value.ndim else float(value)


def compton_in_energies(e_out, c) -> np.ndarray:
    """
    Vectorised inverse of compton_out_energy.

    Entries without a kinematically admissible incoming energy are NaN.
    """
    e_out = np.asarray(e_out, dtype=float)
    denominator = 1.0 - (e_out / ELECTRON_REST_ENERGY) * (1.0 - np.asarray(c, dtype=float))
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(denominator > 0.0, e_out / np.where(denominator > 0.0, denominator, 1.0), np.nan)


def compton_in_energy(e_out: float, c: float) -> Optional[float]:
    """Incoming energy that scatters to e_out at cosine c, or None when none exists."""
    value = float(compton_in_energies(e_out, c))
    return None if np.isnan(value) else value


def in_energy_jacobian(e_out, c):
    """
    |dF/dE'|^-1 at the admissible incoming energy, which equals (E_in / E_out)^2.

    NaN where no incoming energy exists.
    """
    e_out = np.asarray(e_out, dtype=float)
    return (compton_in_energies(e_out, c) / e_out) ** 2


def min_admissible_cosine(e_out, e_max: float):
    """
    Smallest cosine at which the incoming energy for e_out stays at or below e_max.

    Values below -1 mean every direction is admissible.
    """
    e_out = np.asarray(e_out, dtype=float)
    return 1.0 - ELECTRON_REST_ENERGY * (1.0 / e_out - 1.0 / e_max)
