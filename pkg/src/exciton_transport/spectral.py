"""Spectra of block-circulant Hamiltonians and a dense symmetric eigensolver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from exciton_transport.coupling import BlockCoefficients, Hamiltonian
from exciton_transport.errors import InvalidParameterError, NumericalError
from exciton_transport.lattice import SiteLattice


@dataclass(frozen=True, eq=False)
class CirculantSpectrum:
    """Eigenvalues ``e[p, q]`` labelled by ring order ``p`` and site order ``q``."""

    eigenvalues: np.ndarray = field(repr=False)

    @property
    def fourier_orders(self):
        N, n = self.eigenvalues.shape
        p, q = np.meshgrid(np.arange(N), np.arange(n), indexing="ij")
        return np.column_stack([p.ravel(), q.ravel()])

    def sorted(self) -> np.ndarray:
        return np.sort(self.eigenvalues.ravel())


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)


def _dft_matrix(size):
    idx = np.arange(size)
    return np.exp(2j * np.pi * np.outer(idx, idx) / size)


def circulant_eigenvalues(h: BlockCoefficients) -> CirculantSpectrum:
    """Double discrete Fourier transform of the coefficient table.

    ``e[p, q] = sum_{j,k} exp(2 pi i p j/N) exp(2 pi i q k/n) h[j, k]``,
    evaluated by direct summation.
    """
    e = _dft_matrix(h.N) @ h.h @ _dft_matrix(h.n).T
    scale = max(1.0, float(np.abs(e).max()))
    if np.abs(e.imag).max() > 1e-10 * scale:
        raise InvalidParameterError("coefficient table is not symmetric; spectrum is complex")
    return CirculantSpectrum(e.real.copy())


def _matrix(H):
    return H.matrix if isinstance(H, Hamiltonian) else np.asarray(H)


def dense_eigendecomposition(H) -> EigenDecomposition:
    m = _matrix(H)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > 1e-12 * scale:
        raise InvalidParameterError("Hamiltonian is not symmetric")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return EigenDecomposition(w, v)


def operator_norm_bound(H) -> float:
    """Largest eigenvalue magnitude of a symmetric Hamiltonian."""
    w = dense_eigendecomposition(H).eigenvalues
    return float(np.abs(w).max()) if w.size else 0.0


def ring_fourier_blocks(H, lat: SiteLattice, tol: float = 1e-12) -> np.ndarray:
    """Block-diagonalize a rotation-invariant Hamiltonian on a ring stack.

    Returns ``blocks`` of shape ``(n, N, N)`` with
    ``blocks[q] = <r, q| H |r', q>`` in the basis
    ``|r, q> = n**-0.5 sum_s exp(2 pi i q s/n) |r, s>``.

    Raises :class:`InvalidParameterError` when ``H`` does not commute with
    the simultaneous rotation of all rings, e.g. under site disorder.
    """
    m = _matrix(H)
    n, N = lat.n, lat.N
    if m.shape != (n * N, n * N):
        raise InvalidParameterError(f"matrix shape {m.shape} does not match lattice")
    g = m.reshape(N, n, N, n)[:, 0, :, :]  # g[a, b, k] = H[(a,0), (b,k)]
    s = np.arange(n)
    shift = (s[None, :] - s[:, None]) % n
    rebuilt = g[:, :, shift]  # [a, b, s, s'] = g[a, b, (s'-s) % n]
    target = m.reshape(N, n, N, n).transpose(0, 2, 1, 3)
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(rebuilt - target).max() > tol * scale:
        raise InvalidParameterError("Hamiltonian is not invariant under ring rotation")
    blocks = np.fft.ifft(g, axis=-1) * n  # sum_k g[..., k] exp(+2 pi i q k/n)
    return np.ascontiguousarray(blocks.transpose(2, 0, 1))
