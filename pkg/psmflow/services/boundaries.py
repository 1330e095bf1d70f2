"""Domain face boundary conditions.

The fused kernel already reflects every population that would leave through a
non-periodic face back into its source cell (raw half-way bounce-back). This
module validates the face configuration and adds the corrections on top:

- wall: nothing to add (resting half-way bounce-back)
- velocity: f_j += 2 w_j rho_0 (c_j . u_w) / cs2
- pressure: f_j = -f_j + 2 w_j rho_w [1 + (c_j . u)^2 / (2 cs2^2) - u.u / (2 cs2)]

where ``j`` is the reflected (incoming) direction and rho_0 the lattice
reference density. With a constant rho_0 the corrections of a tangential
moving wall cancel cell by cell, so a closed box with a sliding lid keeps its
mass. A diagonal population that leaves through an edge belongs to exactly one
face: velocity faces win over walls, walls over pressure faces, and ties go to
the face listed first in ``FACES``.
"""

import logging

import numpy as np

from psmflow.models.domain import FACES, BoundaryKind, Domain, face_axis
from psmflow.models.fields import MacroscopicFields
from psmflow.models.stencil import CS2, Stencil

logger = logging.getLogger(__name__)

# lattice density the moving-wall momentum transfer is evaluated at
REFERENCE_DENSITY = 1.0

_PRIORITY = {BoundaryKind.VELOCITY: 0, BoundaryKind.WALL: 1, BoundaryKind.PRESSURE: 2}


class BoundaryConfigError(ValueError):
    """Raised when the face boundary configuration is inconsistent."""

    pass


def validate_boundaries(domain: Domain) -> None:
    """Check that the face configuration can be realized.

    Raises:
        BoundaryConfigError: If a periodic face is paired with a non-periodic
            opposite face, or a single-cell axis is not periodic.
    """
    for a, axis in enumerate("xyz"):
        lo = domain.faces[f"{axis}-"]
        hi = domain.faces[f"{axis}+"]
        if lo.is_periodic != hi.is_periodic:
            raise BoundaryConfigError(
                f"face {axis}- is {lo.kind.value} but {axis}+ is {hi.kind.value}; "
                f"periodic faces must be paired"
            )
        if domain.dims[a] == 1 and not lo.is_periodic:
            raise BoundaryConfigError(f"axis {axis} has a single cell and must be periodic")


def _rank(domain: Domain, face: str) -> tuple[int, int]:
    return _PRIORITY[domain.faces[face].kind], FACES.index(face)


def _face_cells(
    domain: Domain, face: str, c: np.ndarray
) -> tuple[slice, slice, slice] | None:
    """Cells whose population along ``c`` leaves through ``face`` and is owned by it."""
    axis, side = face_axis(face)
    if c[axis] != side:
        return None
    dims = domain.dims
    sel = [slice(0, dims[0]), slice(0, dims[1]), slice(0, dims[2])]
    sel[axis] = slice(0, 1) if side < 0 else slice(dims[axis] - 1, dims[axis])
    mine = _rank(domain, face)
    for b in range(3):
        if b == axis or c[b] == 0:
            continue
        other = f"{'xyz'[b]}{'-' if c[b] < 0 else '+'}"
        if domain.faces[other].is_periodic or _rank(domain, other) > mine:
            continue
        # the other face owns the edge layer along axis b
        if c[b] < 0:
            sel[b] = slice(1, dims[b])
        else:
            sel[b] = slice(0, dims[b] - 1)
        if sel[b].stop <= sel[b].start:
            return None
    return sel[0], sel[1], sel[2]


def apply_boundaries(
    write: np.ndarray,
    stencil: Stencil,
    domain: Domain,
    macro: MacroscopicFields | None = None,
) -> None:
    """Apply velocity and pressure face corrections in place.

    Args:
        write: Freshly streamed PDFs, shape (q, nx, ny, nz).
        stencil: Velocity set.
        domain: Domain whose faces are applied.
        macro: Pre-collision density and velocity of the same step; required
            when any face is a pressure boundary.

    Raises:
        BoundaryConfigError: If the face configuration is inconsistent or
            ``macro`` is missing where it is needed.
    """
    validate_boundaries(domain)
    active = [
        face
        for face in FACES
        if domain.faces[face].kind in (BoundaryKind.VELOCITY, BoundaryKind.PRESSURE)
    ]
    if not active:
        return
    if macro is None and any(domain.faces[f].kind is BoundaryKind.PRESSURE for f in active):
        raise BoundaryConfigError("pressure faces need the macroscopic fields")

    for face in active:
        boundary = domain.faces[face]
        for i in range(1, stencil.q):
            sel = _face_cells(domain, face, stencil.c[i])
            if sel is None:
                continue
            j = int(stencil.opposite[i])
            cj = stencil.cf[j]
            if boundary.kind is BoundaryKind.VELOCITY:
                cu = float(np.dot(cj, boundary.velocity))
                write[j][sel] += 2.0 * stencil.w[j] * REFERENCE_DENSITY * cu / CS2
            else:
                u = macro.u[(slice(None), *sel)]  # type: ignore[union-attr]
                cu = cj[0] * u[0] + cj[1] * u[1] + cj[2] * u[2]
                usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2]
                write[j][sel] = -write[j][sel] + 2.0 * stencil.w[j] * boundary.density * (
                    1.0 + cu * cu / (2.0 * CS2 * CS2) - usq / (2.0 * CS2)
                )
