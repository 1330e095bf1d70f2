"""Discrete velocity sets (stencils) for the lattice Boltzmann method."""

from dataclasses import dataclass, field

import numpy as np

# Squared lattice speed of sound shared by all supported stencils
CS2 = 1.0 / 3.0


@dataclass(frozen=True, eq=False)
class Stencil:
    """A DdQq velocity set.

    Attributes:
        name: Conventional name, e.g. "D3Q19".
        dim: Spatial dimension (2 or 3).
        c: Integer lattice velocities, shape (q, 3). The z component is zero
            for 2D stencils.
        w: Lattice weights, shape (q,).
        opposite: Index map i -> i_bar with c[i_bar] == -c[i].
        cs2: Squared lattice speed of sound.
    """

    name: str
    dim: int
    c: np.ndarray
    w: np.ndarray
    opposite: np.ndarray = field(init=False)
    cs2: float = CS2

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.int64)
        w = np.asarray(self.w, dtype=np.float64)
        c.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "w", w)

        lookup = {tuple(v): i for i, v in enumerate(c.tolist())}
        opposite = np.array([lookup[tuple(-x for x in v)] for v in c.tolist()], dtype=np.int64)
        opposite.setflags(write=False)
        object.__setattr__(self, "opposite", opposite)

    @property
    def q(self) -> int:
        """Number of discrete directions."""
        return int(self.c.shape[0])

    @property
    def cf(self) -> np.ndarray:
        """Lattice velocities as float64, shape (q, 3)."""
        return self.c.astype(np.float64)

    def isotropy_defect(self) -> float:
        """Largest deviation of sum_i w_i c_ia c_ib from cs2 * delta_ab."""
        c = self.cf[:, : self.dim]
        second = np.einsum("i,ia,ib->ab", self.w, c, c)
        return float(np.max(np.abs(second - self.cs2 * np.eye(self.dim))))


def _d2q9() -> Stencil:
    c = [
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
        (1, 1, 0), (-1, -1, 0), (1, -1, 0), (-1, 1, 0),
    ]
    w = [4 / 9] + [1 / 9] * 4 + [1 / 36] * 4
    return Stencil(name="D2Q9", dim=2, c=np.array(c), w=np.array(w))


def _d3q19() -> Stencil:
    c = [(0, 0, 0)]
    # Face neighbours, then edge neighbours, each listed as +/- pairs
    for axis in range(3):
        for sign in (1, -1):
            v = [0, 0, 0]
            v[axis] = sign
            c.append(tuple(v))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        for sa, sb in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
            v = [0, 0, 0]
            v[a], v[b] = sa, sb
            c.append(tuple(v))
    w = [1 / 3] + [1 / 18] * 6 + [1 / 36] * 12
    return Stencil(name="D3Q19", dim=3, c=np.array(c), w=np.array(w))


D2Q9 = _d2q9()
D3Q19 = _d3q19()

STENCILS: dict[str, Stencil] = {s.name: s for s in (D2Q9, D3Q19)}


def get_stencil(name: str) -> Stencil:
    """Look up a stencil by name.

    Args:
        name: Stencil name, case-insensitive ("D2Q9" or "D3Q19").

    Returns:
        The shared immutable Stencil instance.

    Raises:
        KeyError: If the stencil is not supported.
    """
    try:
        return STENCILS[name.upper()]
    except KeyError:
        raise KeyError(
            f"Unsupported stencil {name!r}; choose one of {sorted(STENCILS)}"
        ) from None
