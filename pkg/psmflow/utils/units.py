"""Conversion between SI and lattice units.

The lattice uses dx, dt and the fluid density as its unit of length, time and
density, so that every lattice quantity is dimensionless.
"""

import logging
from dataclasses import dataclass

import numpy as np

from psmflow.models.stencil import CS2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnitConverter:
    """Scales SI quantities to lattice units and back.

    Attributes:
        dx: Cell size in meters.
        dt: Time step in seconds.
        rho_f: Fluid density in kg/m^3 (lattice density 1).
    """

    dx: float
    dt: float
    rho_f: float

    def __post_init__(self) -> None:
        for name in ("dx", "dt", "rho_f"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def velocity_to_lattice(self, u):
        return np.asarray(u, dtype=np.float64) * (self.dt / self.dx)

    def velocity_to_si(self, u):
        return np.asarray(u, dtype=np.float64) * (self.dx / self.dt)

    def viscosity_to_lattice(self, nu: float) -> float:
        return nu * self.dt / self.dx**2

    def tau_for(self, nu: float) -> float:
        """Relaxation time tau = nu_lattice / cs2 + 1/2."""
        return self.viscosity_to_lattice(nu) / CS2 + 0.5

    def acceleration_to_lattice(self, a):
        return np.asarray(a, dtype=np.float64) * (self.dt**2 / self.dx)

    def force_to_si(self, f):
        """Lattice force (momentum per step) to newtons, times rho_f dx^4 / dt^2."""
        return np.asarray(f, dtype=np.float64) * (self.rho_f * self.dx**4 / self.dt**2)

    def torque_to_si(self, t):
        """Lattice torque to N m, times rho_f dx^5 / dt^2."""
        return np.asarray(t, dtype=np.float64) * (self.rho_f * self.dx**5 / self.dt**2)

    def log_summary(self, nu: float, speed: float = 0.0) -> None:
        """Log the derived lattice quantities once at startup."""
        tau = self.tau_for(nu)
        u_lat = speed * self.dt / self.dx
        logger.info(
            f"Lattice units: dx={self.dx:.4e} m, dt={self.dt:.4e} s, "
            f"nu_lattice={self.viscosity_to_lattice(nu):.4e}, tau={tau:.4f}, "
            f"u_ref={u_lat:.4f} (Ma={u_lat / np.sqrt(CS2):.4f})"
        )
