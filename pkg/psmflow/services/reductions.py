"""Force and torque reductions over covered cells.

Both reductions return the momentum the solid collision operator hands to
the fluid per unit time,

    F = dx^3/dt * sum_s B(x_s) sum_i Omega_i^S c_i
    T = dx^3/dt * sum_s B(x_s) (x_s - R) x sum_i Omega_i^S c_i

The hydrodynamic load on the body is the negation of these values.

Per-cell contributions are computed elementwise and then summed with
``math.fsum`` in coverage order, which is exactly rounded and therefore
independent of how the kernel was partitioned.
"""

import math

import numpy as np

from psmflow.models.stencil import Stencil


def cell_momentum(omega_s: np.ndarray, stencil: Stencil) -> np.ndarray:
    """sum_i Omega_i^S c_i for each covered cell.

    Args:
        omega_s: Solid collision values, shape (n, q).
        stencil: Velocity set.

    Returns:
        Array of shape (n, 3).
    """
    omega_s = np.asarray(omega_s, dtype=np.float64)
    mom = np.zeros((omega_s.shape[0], 3))
    for i in range(1, stencil.q):
        for a in range(3):
            ca = stencil.c[i, a]
            if ca > 0:
                mom[:, a] += omega_s[:, i]
            elif ca < 0:
                mom[:, a] -= omega_s[:, i]
    return mom


def _fsum_rows(values: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(values[:, a]) for a in range(values.shape[1])])


def reduce_force(
    fraction: np.ndarray,
    omega_s: np.ndarray,
    stencil: Stencil,
    dx: float = 1.0,
    dt: float = 1.0,
) -> np.ndarray:
    """Sum the solid collision momentum over the covered cells of one body.

    Args:
        fraction: B per covered cell, shape (n,).
        omega_s: Omega^S per covered cell from the same step, shape (n, q).
        stencil: Velocity set.
        dx: Cell size used for the dx^3/dt prefactor.
        dt: Time step used for the dx^3/dt prefactor.

    Returns:
        Force vector, shape (3,). Zero when nothing is covered.
    """
    fraction = np.asarray(fraction, dtype=np.float64)
    if fraction.size == 0:
        return np.zeros(3)
    contrib = fraction[:, None] * cell_momentum(omega_s, stencil)
    return dx**3 / dt * _fsum_rows(contrib)


def reduce_torque(
    fraction: np.ndarray,
    omega_s: np.ndarray,
    centers: np.ndarray,
    center_of_mass: np.ndarray,
    stencil: Stencil,
    dx: float = 1.0,
    dt: float = 1.0,
) -> np.ndarray:
    """Sum the solid collision angular momentum about ``center_of_mass``.

    Args:
        fraction: B per covered cell, shape (n,).
        omega_s: Omega^S per covered cell, shape (n, q).
        centers: Cell centers x_s, shape (n, 3), same frame as ``center_of_mass``.
        center_of_mass: Reference point R, shape (3,).
        stencil: Velocity set.
        dx: Cell size used for the dx^3/dt prefactor.
        dt: Time step used for the dx^3/dt prefactor.

    Returns:
        Torque vector, shape (3,).
    """
    fraction = np.asarray(fraction, dtype=np.float64)
    if fraction.size == 0:
        return np.zeros(3)
    arm = np.asarray(centers, dtype=np.float64) - np.asarray(center_of_mass, dtype=np.float64)
    contrib = fraction[:, None] * np.cross(arm, cell_momentum(omega_s, stencil))
    return dx**3 / dt * _fsum_rows(contrib)
