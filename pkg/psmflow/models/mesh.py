"""Geometry types: triangle meshes, the super-sampled geometry field and poses."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TriangleMesh:
    """An indexed triangle surface.

    Attributes:
        vertices: Vertex positions in meters, shape (n, 3).
        faces: Vertex index triples, shape (m, 3).
        raw_vertex_count: Vertex count as stored in the source file, before
            duplicate vertices were welded (equals ``len(vertices)`` for
            indexed formats).
        name: Free-form label used in logs.
    """

    vertices: np.ndarray
    faces: np.ndarray
    raw_vertex_count: int = -1
    name: str = "mesh"

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.raw_vertex_count < 0:
            self.raw_vertex_count = len(self.vertices)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError(
                f"face indices out of range [0, {len(self.vertices)}) in mesh {self.name!r}"
            )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def triangles(self) -> np.ndarray:
        """Corner positions per face, shape (m, 3, 3)."""
        return self.vertices[self.faces]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (min corner, max corner)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def boundary_edges(self) -> np.ndarray:
        """Undirected edges not shared by exactly two faces, shape (k, 2)."""
        edges = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        edges = np.sort(edges, axis=1)
        unique, counts = np.unique(edges, axis=0, return_counts=True)
        return unique[counts != 2]

    def inconsistent_edges(self) -> np.ndarray:
        """Directed edges used twice in the same direction (orientation flips)."""
        directed = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        unique, counts = np.unique(directed, axis=0, return_counts=True)
        return unique[counts > 1]

    def flipped(self) -> "TriangleMesh":
        """Same surface with every face orientation reversed."""
        return TriangleMesh(
            self.vertices.copy(), self.faces[:, ::-1].copy(), self.raw_vertex_count, self.name
        )

    def translated(self, offset: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(
            self.vertices + np.asarray(offset, dtype=np.float64),
            self.faces.copy(),
            self.raw_vertex_count,
            self.name,
        )

    def scaled(self, factor: float) -> "TriangleMesh":
        return TriangleMesh(
            self.vertices * factor, self.faces.copy(), self.raw_vertex_count, self.name
        )


@dataclass
class GeometryField:
    """Binary super-sampled occupancy of a mesh in its body frame.

    The field covers the mesh bounding box padded by whole LBM cells (two by
    default); each of its cells is ``dx_lbm / 2**s`` wide and stores whether
    its center lies inside the mesh. It does not span the cube around the
    bounding sphere: the field is only sampled in the body frame, where the
    mesh never leaves its box, and lookups beyond the extents read as
    outside. Any orientation is therefore covered, and an elongated body
    stores its box instead of the larger cube. Code that needs the reach in
    every orientation, such as domain sizing, uses ``bounding_radius``.

    Attributes:
        s: Super-sampling factor (2**s samples per LBM cell and axis).
        dx_lbm: LBM cell size in meters.
        origin: Body-frame position of the field's lower corner, shape (3,).
        bits: Occupancy, shape (nx, ny, nz), dtype bool.
    """

    s: int
    dx_lbm: float
    origin: np.ndarray
    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.s < 0:
            raise ValueError(f"super-sampling factor must be >= 0, got {self.s}")
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.bits = np.asarray(self.bits, dtype=bool)

    @property
    def spacing(self) -> float:
        """Geometry cell size dx_lbm / 2**s (exact in binary)."""
        return self.dx_lbm / (1 << self.s)

    @property
    def extents(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.bits.shape)  # type: ignore[return-value]

    @property
    def inside_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def volume(self) -> float:
        return self.inside_count * self.spacing**3

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.extents) * self.spacing

    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered sphere holding the whole field."""
        bounds = (self.origin, self.upper)
        corners = np.array(
            [[bounds[k][a] for a, k in enumerate(idx)] for idx in np.ndindex(2, 2, 2)]
        )
        return float(np.max(np.linalg.norm(corners, axis=1)))

    def lookup(self, points: np.ndarray) -> np.ndarray:
        """Occupancy of the geometry cells containing body-frame ``points``.

        Points outside the stored extents read as outside.

        Args:
            points: Body-frame positions, shape (n, 3).

        Returns:
            Boolean array of shape (n,).
        """
        idx = np.floor((points - self.origin) / self.spacing).astype(np.int64)
        shape = np.asarray(self.extents)
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(len(points), dtype=bool)
        good = idx[ok]
        out[ok] = self.bits[good[:, 0], good[:, 1], good[:, 2]]
        return out


@dataclass
class Pose:
    """Rigid placement of a body frame in the simulation frame.

    ``x_world = rotation @ x_body + translation``.

    Attributes:
        rotation: Orthonormal 3x3 matrix with determinant +1.
        translation: Position of the body-frame origin in meters, shape (3,).
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        defect = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3)))
        if defect > 1e-9 or np.linalg.det(self.rotation) <= 0.0:
            raise ValueError(f"pose rotation is not a proper rotation (defect {defect:.2e})")

    def to_body(self, points: np.ndarray) -> np.ndarray:
        """Map simulation-frame points (n, 3) into the body frame."""
        return (np.asarray(points) - self.translation) @ self.rotation

    def to_world(self, points: np.ndarray) -> np.ndarray:
        """Map body-frame points (n, 3) into the simulation frame."""
        return np.asarray(points) @ self.rotation.T + self.translation

    def orthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))))
