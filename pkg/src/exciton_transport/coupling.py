"""Single-exciton Hamiltonians, static disorder and inter-ring coefficients.

Energies are in units of the coupling strength ``J`` and times in ``1/J``.
The average excitation energy is shifted out, so the diagonal holds only
the disorder offsets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from exciton_transport.errors import DimensionMismatchError, InvalidParameterError
from exciton_transport.lattice import SiteLattice


@dataclass(frozen=True)
class CouplingKernel:
    """Isotropic ``J / r**3`` coupling between chromophores.

    Dipole orientation is ignored. Subclasses may override :meth:`coupling`
    to supply another distance law.
    """

    J: float = 1.0

    def __post_init__(self):
        if not self.J > 0:
            raise InvalidParameterError(f"J must be positive, got {self.J!r}")

    def coupling(self, r):
        r = np.asarray(r, dtype=float)
        return self.J / r**3


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian on-site energy offsets with standard deviation ``sigma``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, typically
    an int or a :class:`numpy.random.SeedSequence` from
    :func:`realization_seed`.
    """

    sigma: float
    seed: object = None

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidParameterError(f"disorder sigma must be >= 0, got {self.sigma!r}")


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def with_offsets(self, offsets) -> "Hamiltonian":
        """Same couplings, diagonal replaced by ``offsets``."""
        offsets = _check_offsets(offsets, self.dim)
        matrix = self.matrix.copy()
        np.fill_diagonal(matrix, offsets)
        return Hamiltonian(matrix, offsets)

    def to_csv(self, path, tol=0.0):
        """Write ``row,col,value`` for every entry with ``|value| > tol``."""
        rows, cols = np.nonzero(np.abs(self.matrix) > tol)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            for r, c in zip(rows, cols):
                writer.writerow([r, c, f"{self.matrix[r, c]:.12g}"])


def _check_offsets(offsets, dim):
    if offsets is None:
        return np.zeros(dim)
    offsets = np.asarray(offsets, dtype=float)
    if offsets.shape != (dim,):
        raise DimensionMismatchError(f"offsets have shape {offsets.shape}, expected ({dim},)")
    return offsets


def assemble_hamiltonian(lat: SiteLattice, kernel: CouplingKernel = CouplingKernel(), offsets=None) -> Hamiltonian:
    """Couple every pair of sites with ``kernel``; put ``offsets`` on the diagonal."""
    offsets = _check_offsets(offsets, lat.num_sites)
    dist = lat.distance_matrix()
    np.fill_diagonal(dist, np.inf)
    matrix = kernel.coupling(dist)
    np.fill_diagonal(matrix, offsets)
    return Hamiltonian(matrix, offsets)


def realization_seed(base_seed: int, point_index: int, realization_index: int) -> np.random.SeedSequence:
    """Seed for one disorder realization, independent of execution order."""
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(point_index), int(realization_index)))


def sample_disorder(spec: DisorderSpec, size: int) -> np.ndarray:
    if size < 1:
        raise InvalidParameterError(f"size must be >= 1, got {size!r}")
    if spec.sigma == 0:
        return np.zeros(size)
    return np.random.default_rng(spec.seed).normal(0.0, spec.sigma, size)


@dataclass(frozen=True, eq=False)
class BlockCoefficients:
    """Inter-ring coupling table ``h[j, k]`` in the torus convention.

    ``h[j, k]`` couples site 0 of ring 0 to site ``k`` of ring ``j``, with
    ring offsets ``j > T`` folded onto ``N - j``; ``h[0, 0] = 0``.
    """

    h: np.ndarray = field(repr=False)
    n: int
    N: int
    D: float

    @property
    def T(self) -> int:
        return (self.N - 1) // 2

    def replace_intra_ring(self, values) -> "BlockCoefficients":
        h = self.h.copy()
        h[0] = values
        return BlockCoefficients(h, self.n, self.N, self.D)


def _ring_offsets(N):
    j = np.arange(N)
    return np.minimum(j, N - j)


def extract_block_coefficients(n: int, N: int, R: float, D: float, kernel: CouplingKernel = CouplingKernel()) -> BlockCoefficients:
    """Coefficients ``h[j, k]`` of a ring stack with ring separation ``D``."""
    if N < 1 or N % 2 == 0:
        raise InvalidParameterError(f"N must be odd, got {N!r}")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n!r}")
    if not (R > 0 and D > 0):
        raise InvalidParameterError("R and D must be positive")
    m = _ring_offsets(N)[:, None]
    k = np.arange(n)[None, :]
    r2 = (m * D) ** 2 + 2.0 * R**2 * (1.0 - np.cos(2.0 * np.pi * k / n))
    with np.errstate(divide="ignore"):
        h = kernel.coupling(np.sqrt(r2))
    h[0, 0] = 0.0
    return BlockCoefficients(h, int(n), int(N), float(D))


def symmetric_nearest_neighbor_coefficients(n: int, N: int, D: float, kernel: CouplingKernel = CouplingKernel()) -> BlockCoefficients:
    """Idealized far-field table: adjacent rings coupled uniformly by ``J/D**3``.

    Every site of a ring couples to every site of the neighbouring rings
    with the same strength; all other blocks, and the ring itself, vanish.
    """
    if N < 3 or N % 2 == 0:
        raise InvalidParameterError(f"N must be odd and >= 3, got {N!r}")
    h = np.zeros((N, n))
    v = float(kernel.coupling(D))
    h[1, :] = v
    h[N - 1, :] = v
    return BlockCoefficients(h, int(n), int(N), float(D))


def far_field_coefficients(n: int, N: int, D: float, kernel: CouplingKernel = CouplingKernel()) -> BlockCoefficients:
    """Idealized far-field table with every ring pair kept: ``h[j, k] = J/(jD)**3``."""
    if N < 3 or N % 2 == 0:
        raise InvalidParameterError(f"N must be odd and >= 3, got {N!r}")
    m = _ring_offsets(N).astype(float)
    h = np.zeros((N, n))
    h[1:] = kernel.coupling(m[1:] * D)[:, None]
    return BlockCoefficients(h, int(n), int(N), float(D))


def torus_hamiltonian(h: BlockCoefficients) -> Hamiltonian:
    """Block-circulant matrix with circulant blocks built from ``h``.

    Site ``s`` of ring ``a`` is stored at index ``a*n + s``.
    """
    n, N = h.n, h.N
    ring = np.arange(N)
    site = np.arange(n)
    dj = (ring[None, :] - ring[:, None]) % N
    dk = (site[None, :] - site[:, None]) % n
    matrix = h.h[dj[:, None, :, None], dk[None, :, None, :]].reshape(N * n, N * n)
    return Hamiltonian(matrix, np.diag(matrix).copy())


def ring_shift_operator(N: int, n: int) -> np.ndarray:
    """``pi_N (x) 1_n``: shifts every ring label by one, cyclically."""
    pi = np.roll(np.eye(N), 1, axis=1)
    return np.kron(pi, np.eye(n))
