"""Hydrostatic and geostrophic diagnostic relations.

These are the physical anchors behind the treatment scheme: ice thickness
from freeboard via hydrostatic equilibrium, and surface velocity from SSH
slopes via geostrophic balance.  Both accept scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

# Default densities (kg/m^3): seawater, sea ice, snow.  Configuration
# defaults, overridable via the knowledge.* config keys.
RHO_WATER = 1024.0
RHO_ICE = 917.0
RHO_SNOW = 320.0

GRAVITY = 9.81          # m/s^2
CORIOLIS = 1.4e-4       # 1/s, representative high-latitude value


@dataclass(frozen=True)
class HydrostaticParams:
    h_ice: float | np.ndarray      # total freeboard (ice plus snow) [m]
    h_ssh: float | np.ndarray      # sea surface height [m]
    h_s: float | np.ndarray = 0.0  # snow depth [m]
    rho_w: float = RHO_WATER
    rho_i: float = RHO_ICE
    rho_s: float = RHO_SNOW

    def __post_init__(self):
        if not (self.rho_w > self.rho_i > 0):
            raise DataError("require rho_w > rho_i > 0")
        if not (self.rho_w > self.rho_s > 0):
            raise DataError("require rho_w > rho_s > 0")
        if np.any(np.asarray(self.h_s) < 0):
            raise DataError("snow depth must be >= 0")


@dataclass(frozen=True)
class GeostrophicParams:
    deta_dx: float | np.ndarray    # SSH slope in x [m/m]
    deta_dy: float | np.ndarray    # SSH slope in y [m/m]
    g: float = GRAVITY
    f: float = CORIOLIS

    def __post_init__(self):
        if self.f == 0:
            raise DataError("Coriolis parameter f must be nonzero")


def hydrostatic_thickness(p: HydrostaticParams) -> float | np.ndarray:
    """Sea-ice thickness from hydrostatic equilibrium.

    h_i = (h_ice - h_ssh) * rho_w / (rho_w - rho_i)
          - h_s * (rho_w - rho_s) / (rho_w - rho_i)
    """
    denom = p.rho_w - p.rho_i
    return ((np.asarray(p.h_ice) - np.asarray(p.h_ssh)) * p.rho_w / denom
            - np.asarray(p.h_s) * (p.rho_w - p.rho_s) / denom)


def geostrophic_velocity(p: GeostrophicParams) -> tuple[float | np.ndarray, float | np.ndarray]:
    """Surface velocity (u, v) from SSH slopes under geostrophic balance.

    u = -(g / f) * deta/dy,  v = (g / f) * deta/dx
    """
    u = -(p.g / p.f) * np.asarray(p.deta_dy)
    v = (p.g / p.f) * np.asarray(p.deta_dx)
    if np.ndim(u) == 0:
        return float(u), float(v)
    return u, v
