"""Procedural closed meshes used by scenarios, suites and tests.

All primitives are centered on the origin with outward-facing triangles.
Prisms (cube, cylinder, twisted blade) are built by extruding a
counter-clockwise polygon along z.
"""

import numpy as np

from psmflow.models.mesh import TriangleMesh


def extrude(
    polygon: np.ndarray,
    levels: np.ndarray,
    twist: float = 0.0,
    name: str = "prism",
) -> TriangleMesh:
    """Sweep a convex counter-clockwise polygon along z.

    Args:
        polygon: Polygon corners in the xy plane, shape (p, 2), counter-clockwise.
        levels: Increasing z coordinates of the sections, at least two.
        twist: Total rotation about z between the first and last section (radians).
        name: Mesh label.

    Returns:
        Closed mesh with caps at the first and last level.
    """
    polygon = np.asarray(polygon, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.float64)
    p, n = len(polygon), len(levels)
    span = levels[-1] - levels[0]

    vertices = np.empty((n * p, 3))
    for k, z in enumerate(levels):
        angle = twist * (z - levels[0]) / span if span else 0.0
        c, s = np.cos(angle), np.sin(angle)
        vertices[k * p : (k + 1) * p, 0] = c * polygon[:, 0] - s * polygon[:, 1]
        vertices[k * p : (k + 1) * p, 1] = s * polygon[:, 0] + c * polygon[:, 1]
        vertices[k * p : (k + 1) * p, 2] = z

    faces: list[tuple[int, int, int]] = []
    for k in range(n - 1):
        for e in range(p):
            a0, b0 = k * p + e, k * p + (e + 1) % p
            a1, b1 = a0 + p, b0 + p
            faces.append((a0, b0, b1))
            faces.append((a0, b1, a1))
    top = (n - 1) * p
    for e in range(1, p - 1):
        faces.append((0, e + 1, e))
        faces.append((top, top + e, top + e + 1))
    return TriangleMesh(vertices, np.asarray(faces), name=name)


def cube(side: float, name: str = "cube") -> TriangleMesh:
    """Axis-aligned cube with 8 vertices and 12 faces."""
    h = side / 2.0
    square = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
    return extrude(square, np.array([-h, h]), name=name)


def cylinder(
    radius: float, height: float, segments: int = 64, name: str = "cylinder"
) -> TriangleMesh:
    """Closed z-aligned cylinder approximated by a regular polygon."""
    theta = 2.0 * np.pi * np.arange(segments) / segments
    circle = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return extrude(circle, np.array([-height / 2.0, height / 2.0]), name=name)


def twisted_blade(
    span: float,
    chord: float,
    thickness: float,
    twist: float = np.pi / 2.0,
    sections: int = 16,
    name: str = "blade",
) -> TriangleMesh:
    """Thin rectangular blade twisted about its span (z) axis."""
    c, t = chord / 2.0, thickness / 2.0
    rect = np.array([[-c, -t], [c, -t], [c, t], [-c, t]])
    levels = np.linspace(-span / 2.0, span / 2.0, sections + 1)
    return extrude(rect, levels, twist=twist, name=name)


def icosphere(radius: float, subdivisions: int = 3, name: str = "sphere") -> TriangleMesh:
    """Sphere from a repeatedly subdivided icosahedron."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    vertices = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]

    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined

    points = radius * np.asarray(vertices)
    tri = np.asarray(faces, dtype=np.int64)
    # orient outward: normal must point away from the center
    corners = points[tri]
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    inward = np.einsum("ij,ij->i", normals, corners.mean(axis=1)) < 0
    tri[inward] = tri[inward][:, ::-1]
    return TriangleMesh(points, tri, name=name)


PRIMITIVES = ("cube", "sphere", "cylinder", "blade")


def make_primitive(kind: str, size: float, **options: float) -> TriangleMesh:
    """Build a primitive by name.

    Args:
        kind: One of ``PRIMITIVES``.
        size: Edge length (cube), diameter (sphere, cylinder) or span (blade).
        **options: ``height``, ``segments``, ``subdivisions``, ``chord``,
            ``thickness`` or ``twist`` depending on ``kind``.

    Raises:
        ValueError: If ``kind`` is unknown.
    """
    if kind == "cube":
        return cube(size)
    if kind == "sphere":
        return icosphere(size / 2.0, int(options.get("subdivisions", 4)))
    if kind == "cylinder":
        return cylinder(
            size / 2.0, options.get("height", size), int(options.get("segments", 64))
        )
    if kind == "blade":
        return twisted_blade(
            size,
            options.get("chord", size / 4.0),
            options.get("thickness", size / 40.0),
            options.get("twist", np.pi / 2.0),
        )
    raise ValueError(f"Unknown primitive {kind!r}; choose one of {PRIMITIVES}")
