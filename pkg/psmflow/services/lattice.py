"""Local lattice Boltzmann operators: moments, equilibrium and collisions.

Every function here is a pure per-cell operation. Arrays carry the direction
index first (``f[i, ...]``) and the velocity component first (``u[a, ...]``);
the trailing cell shape is arbitrary, so the same code serves a single cell,
a list of covered cells or a whole slab.

Sums over directions are written as explicit loops in stencil order so the
result for a cell never depends on how many cells are processed together.
"""

import logging
from enum import Enum

import numpy as np

from psmflow.config import settings
from psmflow.models.fields import InvalidStateError, RelaxationParams, first_bad_cell
from psmflow.models.stencil import CS2, Stencil

logger = logging.getLogger(__name__)


class SolidCollision(str, Enum):
    """Solid collision operator variants."""

    SC1 = "SC1"
    SC2 = "SC2"
    SC3 = "SC3"


class FractionMode(str, Enum):
    """Mapping from geometric overlap epsilon to solid fraction B."""

    DIRECT = "direct"
    WEIGHTED = "weighted"


class FluidCollision(str, Enum):
    """Fluid collision operators."""

    SRT = "srt"
    TRT = "trt"


class FractionRangeError(ValueError):
    """Raised when an overlap fraction lies outside [0, 1] beyond tolerance."""

    pass


def _dot_c(stencil: Stencil, i: int, u: np.ndarray) -> np.ndarray:
    """c_i . u using only the non-zero velocity components."""
    ci = stencil.c[i]
    out = None
    for a in range(3):
        if ci[a] == 0:
            continue
        term = u[a] if ci[a] > 0 else -u[a]
        out = term.copy() if out is None else out + term
    if out is None:
        return np.zeros_like(u[0])
    return out


def equilibrium_unchecked(u: np.ndarray, rho: np.ndarray, stencil: Stencil) -> np.ndarray:
    """Second-order equilibrium without argument checks (kernel hot path)."""
    u = np.asarray(u, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2]
    base = 1.0 - usq / (2.0 * CS2)
    feq = np.empty((stencil.q, *rho.shape), dtype=np.float64)
    for i in range(stencil.q):
        cu = _dot_c(stencil, i, u)
        feq[i] = stencil.w[i] * rho * (base + cu / CS2 + cu * cu / (2.0 * CS2 * CS2))
    return feq


def equilibrium(u: np.ndarray, rho: np.ndarray, stencil: Stencil) -> np.ndarray:
    """Evaluate the second-order equilibrium distribution.

    f_i^eq = w_i rho [1 + c_i.u / cs2 + (c_i.u)^2 / (2 cs2^2) - u.u / (2 cs2)]

    Args:
        u: Velocity, shape (3, ...), lattice units.
        rho: Density, shape (...), lattice units.
        stencil: Velocity set.

    Returns:
        Array of shape (q, ...). Its zeroth moment is rho and its first moment
        is rho * u up to round-off.
    """
    u = np.asarray(u, dtype=np.float64)
    speed = float(np.sqrt(np.max(np.sum(u * u, axis=0)))) if u.size else 0.0
    if speed > np.sqrt(CS2):
        logger.warning(f"Equilibrium evaluated at |u|={speed:.4f} above the speed of sound")
    return equilibrium_unchecked(u, rho, stencil)


def macroscopic(
    f: np.ndarray,
    stencil: Stencil,
    force: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Compute density and velocity from PDFs.

    Args:
        f: PDFs, shape (q, ...).
        stencil: Velocity set.
        force: Optional body force density (3,) in lattice units; the velocity
            then includes the half-force shift of the Guo scheme.

    Returns:
        Tuple (rho, u) with shapes (...) and (3, ...).

    Raises:
        InvalidStateError: If any density is not strictly positive.
    """
    rho = f[0].astype(np.float64, copy=True)
    for i in range(1, stencil.q):
        rho += f[i]
    mom = np.zeros((3, *rho.shape), dtype=np.float64)
    for i in range(1, stencil.q):
        for a in range(3):
            ca = stencil.c[i, a]
            if ca > 0:
                mom[a] += f[i]
            elif ca < 0:
                mom[a] -= f[i]
    if force is not None:
        for a in range(3):
            mom[a] += 0.5 * force[a]

    bad = ~(rho > 0.0)
    if bad.any():
        if bad.ndim == 3:
            cell = first_bad_cell(bad)
        else:
            cell = tuple(int(v) for v in np.argwhere(bad)[0])  # type: ignore[assignment]
        reason = "non-positive density"
        if not np.isfinite(rho[bad]).all():
            reason = "non-finite PDF"
        raise InvalidStateError(reason, cell=cell)
    return rho, mom / rho


def srt_term(f: np.ndarray, feq: np.ndarray, tau: float) -> np.ndarray:
    """SRT collision term -(1/tau) (f - f^eq)."""
    return -(f - feq) / tau


def trt_term(
    f: np.ndarray, feq: np.ndarray, params: RelaxationParams, stencil: Stencil
) -> np.ndarray:
    """TRT collision term with separate symmetric/antisymmetric rates."""
    opp = stencil.opposite
    neq = f - feq
    neq_sym = 0.5 * (neq + neq[opp])
    neq_anti = 0.5 * (neq - neq[opp])
    return -params.omega * neq_sym - params.omega_minus * neq_anti


def guo_source(
    u: np.ndarray,
    force: np.ndarray,
    tau: float,
    stencil: Stencil,
    omega_minus: float | None = None,
) -> np.ndarray:
    """Guo forcing source term S_i for a uniform body force.

    The part odd in c_i is scaled by (1 - omega_minus / 2) when a TRT
    antisymmetric rate is given; otherwise both parts use (1 - 1 / (2 tau)).
    """
    fu = force[0] * u[0] + force[1] * u[1] + force[2] * u[2]
    pref = 1.0 - 0.5 / tau
    pref_odd = pref if omega_minus is None else 1.0 - 0.5 * omega_minus
    src = np.empty((stencil.q, *u.shape[1:]), dtype=np.float64)
    for i in range(stencil.q):
        cf = float(np.dot(stencil.cf[i], force))
        cu = _dot_c(stencil, i, u)
        even = -fu / CS2 + cu * cf / (CS2 * CS2)
        src[i] = stencil.w[i] * (pref * even + pref_odd * cf / CS2)
    return src


def srt_collide(
    f: np.ndarray, tau: float, rho: np.ndarray, u: np.ndarray, stencil: Stencil
) -> np.ndarray:
    """Apply the SRT (BGK) operator and return post-collision PDFs.

    Args:
        f: Pre-collision PDFs, shape (q, ...).
        tau: Relaxation time, > 1/2.
        rho: Density used for the equilibrium.
        u: Velocity used for the equilibrium.
        stencil: Velocity set.

    Returns:
        f + Omega^F with Omega^F = -(f - f^eq(rho, u)) / tau.
    """
    RelaxationParams(tau)
    return f + srt_term(f, equilibrium_unchecked(u, rho, stencil), tau)


def solid_collision(
    variant: SolidCollision | str,
    f: np.ndarray,
    rho: np.ndarray,
    u: np.ndarray,
    u_s: np.ndarray,
    tau: float,
    stencil: Stencil,
    feq_fluid: np.ndarray | None = None,
) -> np.ndarray:
    """Evaluate the solid collision operator Omega^S.

    SC1: [f_ib - f_ib^eq(rho, u)]   - [f_i - f_i^eq(rho, u_s)]
    SC2: [f_i^eq(rho, u_s) - f_i]   + (1 - 1/tau) [f_i - f_i^eq(rho, u_s)]
    SC3: [f_ib - f_ib^eq(rho, u_s)] - [f_i - f_i^eq(rho, u_s)]

    ``ib`` is the opposite direction of ``i``; ``u`` is the fluid velocity of
    the pre-collision state of the same cell.

    Args:
        variant: Operator variant.
        f: Pre-collision PDFs, shape (q, ...).
        rho: Cell density.
        u: Fluid velocity of the cell.
        u_s: Solid velocity at the cell.
        tau: Relaxation time (used by SC2).
        stencil: Velocity set.
        feq_fluid: Precomputed f^eq(rho, u), if available (SC1 only).

    Returns:
        Omega^S with the same shape as ``f``.
    """
    variant = SolidCollision(variant)
    opp = stencil.opposite
    feq_s = equilibrium_unchecked(u_s, rho, stencil)
    neq_s = f - feq_s

    if variant is SolidCollision.SC3:
        return neq_s[opp] - neq_s

    if variant is SolidCollision.SC2:
        return -neq_s + (1.0 - 1.0 / tau) * neq_s

    if feq_fluid is None:
        feq_fluid = equilibrium_unchecked(u, rho, stencil)
    return (f[opp] - feq_fluid[opp]) - neq_s


def weight_fraction(
    eps: np.ndarray | float,
    tau: float,
    mode: FractionMode | str = FractionMode.DIRECT,
    tolerance: float | None = None,
) -> np.ndarray:
    """Map geometric overlap epsilon to the solid fraction B.

    Args:
        eps: Overlap fraction(s) in [0, 1].
        tau: Relaxation time (weighted mode), > 1/2.
        mode: "direct" (B = eps) or "weighted"
            (B = eps (tau - 1/2) / ((1 - eps) + (tau - 1/2))).
        tolerance: Values this far outside [0, 1] are clamped; further out
            they are rejected. Defaults to ``settings.EPSILON_TOLERANCE``.

    Returns:
        B as a float64 array with the shape of ``eps``, clamped to [0, 1].

    Raises:
        FractionRangeError: If any epsilon is outside [-tol, 1 + tol].
    """
    tol = settings.EPSILON_TOLERANCE if tolerance is None else tolerance
    mode = FractionMode(mode)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.size and (np.min(eps) < -tol or np.max(eps) > 1.0 + tol):
        raise FractionRangeError(
            f"overlap fraction outside [0, 1]: min={np.min(eps)}, max={np.max(eps)}"
        )
    eps = np.clip(eps, 0.0, 1.0)
    if mode is FractionMode.DIRECT:
        return eps
    RelaxationParams(tau)
    t = tau - 0.5
    return np.clip(eps * t / ((1.0 - eps) + t), 0.0, 1.0)
