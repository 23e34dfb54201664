"""Chromophore geometries: rings stacked in a cylinder, and helical rods.

Sites are stored 0-based. The angular formulas use the 1-based label
``i = s + 1`` so that site ``s`` of a ring sits at angle ``2*pi*(s+1)/n``.
Rings (helix turns) carry centered labels ``-T..T`` with ``T = (N-1)//2``;
for even ``N`` the labels run ``-N//2 .. N//2 - 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from exciton_transport.errors import InvalidParameterError, SiteIndexError


class GeometryKind(enum.Enum):
    RING_STACK = "rings"
    HELIX = "helix"

    @classmethod
    def from_string(cls, value: str) -> "GeometryKind":
        try:
            return cls(value)
        except ValueError:
            raise InvalidParameterError(
                f"unknown geometry kind {value!r}; expected 'rings' or 'helix'"
            ) from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class SiteLattice:
    """Positions of ``n*N`` chromophores and their ring (turn) labels.

    Attributes
    ----------
    kind : GeometryKind
    n : int
        Sites per ring, or per helix turn.
    N : int
        Number of rings, or helix turns.
    R : float
        Radius.
    spacing : float
        Ring separation ``D`` for ring stacks, pitch ``d`` for helices.
    positions : ndarray, shape (n*N, 3)
    ring_of : ndarray of int, shape (n*N,)
        Centered ring label of every site.
    """

    kind: GeometryKind
    n: int
    N: int
    R: float
    spacing: float
    positions: np.ndarray = field(repr=False)
    ring_of: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.positions.setflags(write=False)
        self.ring_of.setflags(write=False)

    @property
    def num_sites(self) -> int:
        return self.n * self.N

    @property
    def ring_offset(self) -> int:
        """Label of the first ring; ``ring_of - ring_offset`` is the ordinal."""
        return -(self.N // 2)

    @property
    def ring_labels(self) -> np.ndarray:
        return np.arange(self.N) + self.ring_offset

    def sites_in_ring(self, ring: int = 0) -> np.ndarray:
        """0-based indices of the ``n`` sites carrying ring label ``ring``."""
        ordinal = ring - self.ring_offset
        if not 0 <= ordinal < self.N:
            raise SiteIndexError(f"ring {ring} not in {self.ring_labels[[0, -1]]}")
        return np.arange(ordinal * self.n, (ordinal + 1) * self.n)

    def site_index(self, ring: int, i: int) -> int:
        """Storage index of the site with 1-based in-ring label ``i``."""
        if not 1 <= i <= self.n:
            raise SiteIndexError(f"in-ring label {i} outside 1..{self.n}")
        return int(self.sites_in_ring(ring)[i - 1])

    def distance_matrix(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.einsum("abk,abk->ab", diff, diff))


def _check_counts(n, N, R, spacing, spacing_name):
    for name, value in (("n", n), ("N", N)):
        if int(value) != value or value < 1:
            raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
    for name, value in (("R", R), (spacing_name, spacing)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameterError(f"{name} must be positive, got {value!r}")


def build_ring_stack(n: int, N: int, R: float, D: float) -> SiteLattice:
    """``N`` coaxial rings of ``n`` sites, radius ``R``, separation ``D``.

    Ring ``j`` sits at height ``j*D`` with the middle ring at ``z = 0``.
    """
    _check_counts(n, N, R, D, "D")
    n, N = int(n), int(N)
    angles = 2.0 * np.pi * np.arange(1, n + 1) / n
    labels = np.arange(N) - N // 2
    ring_of = np.repeat(labels, n)
    positions = np.column_stack(
        [
            np.tile(R * np.cos(angles), N),
            np.tile(R * np.sin(angles), N),
            ring_of * float(D),
        ]
    )
    return SiteLattice(GeometryKind.RING_STACK, n, N, float(R), float(D), positions, ring_of)


def build_helix(n: int, N: int, R: float, d: float) -> SiteLattice:
    """Helix with ``n`` sites per turn, ``N`` turns, radius ``R`` and pitch ``d``.

    Site ``i = 1..n*N`` sits at ``(R cos(2 pi i/n), R sin(2 pi i/n), d i/n)``;
    each run of ``n`` consecutive sites forms one turn.
    """
    _check_counts(n, N, R, d, "d")
    n, N = int(n), int(N)
    i = np.arange(1, n * N + 1)
    angles = 2.0 * np.pi * i / n
    positions = np.column_stack([R * np.cos(angles), R * np.sin(angles), float(d) * i / n])
    ring_of = (i - 1) // n - N // 2
    return SiteLattice(GeometryKind.HELIX, n, N, float(R), float(d), positions, ring_of)


def build_lattice(kind, n, N, R, spacing) -> SiteLattice:
    kind = kind if isinstance(kind, GeometryKind) else GeometryKind.from_string(kind)
    if kind is GeometryKind.RING_STACK:
        return build_ring_stack(n, N, R, spacing)
    return build_helix(n, N, R, spacing)


def pair_distance(lat: SiteLattice, a: int, b: int) -> float:
    """Euclidean distance between sites ``a`` and ``b`` (0-based)."""
    for idx in (a, b):
        if not 0 <= idx < lat.num_sites:
            raise SiteIndexError(f"site {idx} outside 0..{lat.num_sites - 1}")
    return float(np.linalg.norm(lat.positions[a] - lat.positions[b]))
