"""Physical constants and unit conventions.

Everything internal is in microseconds, micrometres and angular frequencies
(rad/us) with hbar = 1. Configs and reports use ordinary frequencies in MHz;
convert with :func:`mhz_to_angular` / :func:`angular_to_mhz` at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.constants

from rydopt.errors import DomainError

# 43S_1/2 of 87Rb
C6_SI = 1.625e-60  # J m^6
LATTICE_SPACING_UM = 0.532
DECAY_RATE_KHZ = 11.8

# (J m^6 / J s) = rad/s m^6  ->  rad/us um^6
_SI_TO_INTERNAL = 1e-6 * 1e36


def mhz_to_angular(f_mhz):
    return 2.0 * math.pi * f_mhz


def angular_to_mhz(omega):
    return omega / (2.0 * math.pi)


@dataclass(frozen=True)
class PhysicalModel:
    """Immutable set of physical constants.

    Attributes
    ----------
    c6_over_hbar : float
        van der Waals coefficient in rad/us * um^6.
    lattice_spacing : float
        Lattice constant ``a`` in um.
    gamma_decay : float
        Single-atom radiative decay rate in 1/us.
    """

    c6_over_hbar: float
    lattice_spacing: float
    gamma_decay: float

    def with_overrides(self, **kwargs) -> "PhysicalModel":
        return replace(self, **kwargs)


def c6_si_to_internal(c6_si: float) -> float:
    return c6_si / scipy.constants.hbar * _SI_TO_INTERNAL


def default_model() -> PhysicalModel:
    return PhysicalModel(
        c6_over_hbar=c6_si_to_internal(C6_SI),
        lattice_spacing=LATTICE_SPACING_UM,
        gamma_decay=DECAY_RATE_KHZ * 1e-3,
    )


def vdw_interaction(model: PhysicalModel, r):
    """Interaction ``C6 / r**6`` in rad/us for a distance ``r`` in um."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr > 0)):
        raise DomainError(f"interaction distance must be positive, got {r}")
    out = model.c6_over_hbar / r_arr**6
    return float(out) if out.ndim == 0 else out
