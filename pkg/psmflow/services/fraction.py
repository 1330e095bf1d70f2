"""Solid fraction field construction from a posed geometry field.

For every LBM cell near a body the 2**(3s) sub-cell centers are mapped into
the body frame with ``x_body = R^T (x - T)`` and looked up in the geometry
field. The overlap fraction is the share of sub-samples inside; the solid
fraction B follows from :func:`psmflow.services.lattice.weight_fraction`.

Only cells within the bounding sphere of the stored geometry field are
visited, so the cost scales with the body size and not with the domain.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from psmflow.models.fields import Coverage, Dims, linear_index
from psmflow.models.mesh import GeometryField, Pose
from psmflow.services.lattice import FractionMode, weight_fraction

logger = logging.getLogger(__name__)

SAMPLES_PER_CHUNK = 1 << 21

_volume_units_noted = False


def subsample_offsets(s: int, dx: float) -> np.ndarray:
    """Offsets of the 2**s x 2**s x 2**s sub-cell centers from the cell center."""
    n = 1 << s
    axis = ((np.arange(n) + 0.5) / n - 0.5) * dx
    ox, oy, oz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)


def candidate_cells(
    geom: GeometryField, pose: Pose, dims: Dims, dx: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells whose extent may intersect the stored geometry field.

    Returns:
        Tuple of x, y, z index arrays in x-fastest order.
    """
    center = pose.translation / dx - 0.5
    reach = geom.bounding_radius() / dx + math.sqrt(3.0) / 2.0
    lo = np.clip(np.floor(center - reach), 0, np.asarray(dims)).astype(np.int64)
    hi = np.clip(np.ceil(center + reach) + 1, 0, np.asarray(dims)).astype(np.int64)
    if np.any(hi <= lo):
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    gz, gy, gx = np.meshgrid(
        np.arange(lo[2], hi[2]), np.arange(lo[1], hi[1]), np.arange(lo[0], hi[0]), indexing="ij"
    )
    gx, gy, gz = gx.ravel(), gy.ravel(), gz.ravel()
    dist = np.sqrt((gx - center[0]) ** 2 + (gy - center[1]) ** 2 + (gz - center[2]) ** 2)
    keep = dist <= reach
    return gx[keep], gy[keep], gz[keep]


def overlap_fractions(
    geom: GeometryField, pose: Pose, cells: tuple[np.ndarray, np.ndarray, np.ndarray], dx: float
) -> np.ndarray:
    """Overlap fraction epsilon for each of the given cells."""
    offsets = subsample_offsets(geom.s, dx)
    m = len(offsets)
    gx, gy, gz = cells
    centers = (np.stack([gx, gy, gz], axis=1) + 0.5) * dx
    eps = np.zeros(len(centers))
    step = max(1, SAMPLES_PER_CHUNK // m)
    for k in range(0, len(centers), step):
        points = (centers[k : k + step, None, :] + offsets[None, :, :]).reshape(-1, 3)
        inside = geom.lookup(pose.to_body(points)).reshape(-1, m)
        eps[k : k + step] = np.count_nonzero(inside, axis=1) / m
    return eps


def fraction_field_from_geometry(
    geom: GeometryField,
    pose: Pose,
    dims: Dims,
    dx: float,
    tau: float,
    mode: FractionMode | str = FractionMode.DIRECT,
    body_id: int = 0,
) -> Coverage:
    """Build the coverage list of one body at ``pose``.

    Args:
        geom: Geometry field of the body (never modified).
        pose: Current pose; ``translation`` is in meters of the simulation frame,
            whose origin is the lower corner of cell (0, 0, 0).
        dims: Lattice extents.
        dx: LBM cell size in meters; must equal ``geom.dx_lbm``.
        tau: Relaxation time for the weighted mode.
        mode: Fraction weighting mode.
        body_id: Id stored with every covered cell.

    Returns:
        Covered cells (epsilon > 0) sorted by linear index. Body portions
        outside the domain are dropped.

    Raises:
        ValueError: If ``dx`` does not match the geometry field.
    """
    if not math.isclose(dx, geom.dx_lbm, rel_tol=1e-12):
        raise ValueError(f"lattice spacing {dx} does not match geometry field {geom.dx_lbm}")
    cells = candidate_cells(geom, pose, dims, dx)
    if cells[0].size == 0:
        return Coverage()
    eps = overlap_fractions(geom, pose, cells, dx)
    keep = eps > 0.0
    index = linear_index(cells[0][keep], cells[1][keep], cells[2][keep], dims).astype(np.int64)
    eps = eps[keep]
    order = np.argsort(index, kind="stable")
    index, eps = index[order], eps[order]
    return Coverage(
        index=index,
        epsilon=eps,
        fraction=weight_fraction(eps, tau, mode),
        body_id=np.full(index.size, body_id, dtype=np.int32),
    )


def merge_coverages(parts: Sequence[Coverage]) -> Coverage:
    """Combine per-body coverages; overlapping cells keep the largest epsilon."""
    parts = [p for p in parts if len(p)]
    if not parts:
        return Coverage()
    if len(parts) == 1:
        return parts[0]
    index = np.concatenate([p.index for p in parts])
    eps = np.concatenate([p.epsilon for p in parts])
    frac = np.concatenate([p.fraction for p in parts])
    body = np.concatenate([p.body_id for p in parts])
    order = np.lexsort((body, -eps, index))
    index, eps, frac, body = index[order], eps[order], frac[order], body[order]
    first = np.ones(index.size, dtype=bool)
    first[1:] = index[1:] != index[:-1]
    return Coverage(
        index=index[first], epsilon=eps[first], fraction=frac[first], body_id=body[first]
    )


def fraction_volume(B: np.ndarray, dx: float) -> float:
    """Solid volume sum(B) * dx^3.

    Args:
        B: Solid fractions (any shape, e.g. a coverage's ``fraction``).
        dx: Cell size.
    """
    global _volume_units_noted
    if not _volume_units_noted:
        logger.info("Solid volume uses dx^3 per cell (volume units, not a length)")
        _volume_units_noted = True
    return math.fsum(np.asarray(B, dtype=np.float64).ravel()) * dx**3


@dataclass
class VolumeErrorResult:
    """Time-averaged solid volume of a moving body against a reference.

    Attributes:
        volumes: Solid volume per step.
        mean_volume: Average of ``volumes``.
        reference: Reference volume.
        error: Squared relative deviation ((mean - ref) / ref)^2.
    """

    volumes: np.ndarray
    mean_volume: float
    reference: float
    error: float


def volume_error_series(
    geom: GeometryField,
    schedule: Callable[[int], Pose],
    steps: int,
    dims: Dims,
    dx: float,
    tau: float,
    reference: float,
    mode: FractionMode | str = FractionMode.DIRECT,
) -> VolumeErrorResult:
    """Average the solid volume over ``steps`` poses and compare with ``reference``.

    Args:
        geom: Geometry field of the body.
        schedule: Pose at step n.
        steps: Number of sampled steps (n = 0 .. steps - 1).
        dims: Lattice extents.
        dx: LBM cell size.
        tau: Relaxation time (weighted mode only).
        reference: Reference volume, > 0.
        mode: Fraction weighting mode.
    """
    if reference <= 0.0:
        raise ValueError(f"reference volume must be positive, got {reference}")
    volumes = np.array(
        [
            fraction_volume(
                fraction_field_from_geometry(geom, schedule(n), dims, dx, tau, mode).fraction, dx
            )
            for n in range(steps)
        ]
    )
    mean = math.fsum(volumes) / steps
    return VolumeErrorResult(
        volumes=volumes,
        mean_volume=mean,
        reference=reference,
        error=((mean - reference) / reference) ** 2,
    )
