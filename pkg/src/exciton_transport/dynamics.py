"""Initial states and propagation: unitary, and Haken-Strobl master equation.

The master equation is

    d rho/dt = -i [H, rho] + gamma * sum_m (S_m rho S_m - {S_m, rho}/2) - 2 kappa rho

with site projectors ``S_m``. The dephasing term reduces to
``gamma * (diag(rho) - rho)``. Recombination is ``kappa`` times the
identity inside the single-exciton manifold, so it enters as the exact
prefactor ``exp(-2 kappa t)`` rather than through the integrator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from exciton_transport.coupling import Hamiltonian
from exciton_transport.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    SiteIndexError,
    StepSizeUnderflowError,
)
from exciton_transport.lattice import GeometryKind, SiteLattice
from exciton_transport.spectral import dense_eigendecomposition, operator_norm_bound, ring_fourier_blocks

log = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-7
MAX_REFINEMENTS = 12


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure amplitude vector (1-D ``data``) or density matrix (2-D ``data``)."""

    data: np.ndarray = field(repr=False)

    @classmethod
    def pure(cls, amplitudes, tol=1e-10) -> "QuantumState":
        psi = np.asarray(amplitudes, dtype=complex)
        if psi.ndim != 1:
            raise InvalidParameterError("pure state must be a vector")
        if abs(np.linalg.norm(psi) - 1.0) > tol:
            raise InvalidParameterError(f"state norm {np.linalg.norm(psi)!r} != 1")
        return cls(psi)

    @classmethod
    def mixed(cls, rho, tol=1e-10) -> "QuantumState":
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidParameterError("density matrix must be square")
        if np.abs(rho - rho.conj().T).max() > tol:
            raise InvalidParameterError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > tol:
            raise InvalidParameterError(f"density matrix trace {np.trace(rho).real!r} != 1")
        if np.linalg.eigvalsh(rho).min() < -1e-8:
            raise InvalidParameterError("density matrix is not positive semidefinite")
        return cls(rho)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def site_populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.diagonal(self.data).real.copy()


@dataclass(frozen=True)
class OpenSystemParams:
    gamma: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not (self.gamma >= 0 and self.kappa >= 0):
            raise InvalidParameterError("gamma and kappa must be >= 0")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled evolution.

    ``states`` holds one pure vector or density matrix per time and may be
    ``None`` when only populations were kept. The symmetry-reduced solver
    fills ``ring_populations`` (shape ``(len(times), N)``) instead of site
    populations.
    """

    times: np.ndarray
    states: np.ndarray | None = field(default=None, repr=False)
    populations: np.ndarray | None = field(default=None, repr=False)
    ring_populations: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state(self, i) -> QuantumState:
        if self.states is None:
            raise InvalidParameterError("trajectory was run without keeping states")
        return QuantumState(self.states[i])


def delocalized_state(lat: SiteLattice, ring: int = 0) -> QuantumState:
    """Equal amplitudes ``1/sqrt(n)`` on the ``n`` sites of ``ring``.

    For a helix, ``ring`` is a turn: ``n`` contiguous chromophores.
    """
    psi = np.zeros(lat.num_sites, dtype=complex)
    psi[lat.sites_in_ring(ring)] = 1.0 / math.sqrt(lat.n)
    return QuantumState(psi)


def localized_state(lat: SiteLattice, site: int | None = None) -> QuantumState:
    """Basis state on ``site``; defaults to the first site of ring 0."""
    if site is None:
        site = int(lat.sites_in_ring(0)[0])
    if not 0 <= site < lat.num_sites:
        raise SiteIndexError(f"site {site} outside 0..{lat.num_sites - 1}")
    psi = np.zeros(lat.num_sites, dtype=complex)
    psi[site] = 1.0
    return QuantumState(psi)


def _check_times(times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise InvalidParameterError("times must be a non-empty vector")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidParameterError("times must be >= 0 and strictly increasing")
    return times


def _as_state(state):
    return state if isinstance(state, QuantumState) else QuantumState(np.asarray(state, dtype=complex))


def evolve_closed(H: Hamiltonian, psi0, times) -> Trajectory:
    """``psi(t) = V exp(-i Lambda t) V^T psi0`` from one dense decomposition."""
    psi0 = _as_state(psi0)
    if not psi0.is_pure:
        raise InvalidParameterError("evolve_closed needs a pure state")
    if psi0.dim != H.dim:
        raise DimensionMismatchError(f"state dim {psi0.dim} != Hamiltonian dim {H.dim}")
    times = _check_times(times)
    eig = dense_eigendecomposition(H)
    coeffs = eig.eigenvectors.T @ psi0.data
    phases = np.exp(-1j * np.outer(times, eig.eigenvalues))
    states = (phases * coeffs) @ eig.eigenvectors.T
    states[times == 0] = psi0.data  # exact, not round-tripped through V
    return Trajectory(times, states, np.abs(states) ** 2)


def default_step(gamma: float, norm: float) -> float:
    return min(0.01, 0.1 / max(gamma, norm, 1.0))


def _rk4_segment(rhs, y, span, dt):
    steps = max(1, math.ceil(span / dt - 1e-9))
    h = span / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _positive_segment(rhs, rho, span, dt, t, lowest):
    """RK4 over ``span``, halving ``dt`` until the result is finite and
    ``lowest(result) >= -POSITIVITY_TOL`` (skipped when ``lowest`` is None)."""
    step = dt
    for _ in range(MAX_REFINEMENTS):
        with np.errstate(over="ignore", invalid="ignore"):
            trial = _rk4_segment(rhs, rho, span, step)
        if np.all(np.isfinite(trial)):
            low = lowest(trial) if lowest is not None else 0.0
            if low >= -POSITIVITY_TOL:
                return trial
        else:
            low = -np.inf
        log.debug("positivity violation %.3g at t=%g; halving step %g", low, t, step)
        step *= 0.5
    raise StepSizeUnderflowError(f"no positive solution at t={t} down to dt={step:g}")


def evolve_lindblad(
    H: Hamiltonian,
    params: OpenSystemParams,
    rho0,
    times,
    dt: float | None = None,
    keep_states: bool = True,
    check_positivity: bool = True,
    force_density: bool = False,
) -> Trajectory:
    """Integrate the dephasing master equation with classic RK4.

    A pure ``rho0`` is promoted to a density matrix unless ``gamma`` and
    ``kappa`` are both zero, in which case the unitary path is used (pass
    ``force_density=True`` to integrate anyway).

    At every sample the smallest eigenvalue of ``rho`` is checked; below
    ``-1e-7`` the segment is redone with half the step, and
    :class:`StepSizeUnderflowError` is raised after repeated failures.
    """
    rho0 = _as_state(rho0)
    if rho0.dim != H.dim:
        raise DimensionMismatchError(f"state dim {rho0.dim} != Hamiltonian dim {H.dim}")
    times = _check_times(times)
    if params.gamma == 0 and params.kappa == 0 and rho0.is_pure and not force_density:
        return evolve_closed(H, rho0, times)

    gamma = params.gamma
    if dt is None:
        dt = default_step(gamma, operator_norm_bound(H))
    Hc = H.matrix.astype(complex)
    diag = np.arange(H.dim)

    def rhs(rho):
        out = -1j * (Hc @ rho - rho @ Hc)
        if gamma:
            out -= gamma * rho
            out[diag, diag] += gamma * rho[diag, diag]
        return out

    rho = rho0.density().astype(complex)
    t_prev = 0.0
    states = [] if keep_states else None
    pops = np.empty((len(times), H.dim))
    for i, t in enumerate(times):
        span = t - t_prev
        if span > 0:
            lowest = (lambda r: np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]) if check_positivity else None
            rho = _positive_segment(rhs, rho, span, dt, t, lowest)
        t_prev = t
        decay = math.exp(-2.0 * params.kappa * t)
        pops[i] = decay * rho[diag, diag].real
        if keep_states:
            states.append(decay * rho)
    return Trajectory(times, np.array(states) if keep_states else None, pops)


def evolve_lindblad_symmetric(
    H: Hamiltonian,
    lat: SiteLattice,
    params: OpenSystemParams,
    initial: str,
    times,
    dt: float | None = None,
) -> Trajectory:
    """Ring populations for a rotation-invariant ring stack, in Fourier sectors.

    When ``H`` commutes with the simultaneous rotation of every ring, the
    dephasing dynamics conserves rotation invariance. A rotation-invariant
    density matrix is block-diagonal in the in-ring Fourier index ``q``, so
    only ``n`` blocks of size ``N x N`` are propagated. Dephasing couples the
    blocks through the ring populations alone.

    ``initial`` is ``"delocalized"`` (the symmetric state, entirely in
    ``q = 0``) or ``"localized"``. A single-site state is not rotation
    invariant. Its ring populations equal those of its rotation average
    ``sum_s |0,s><0,s| / n``, which is what is propagated.
    """
    if lat.kind is not GeometryKind.RING_STACK:
        raise InvalidParameterError("symmetric propagation needs a ring stack")
    times = _check_times(times)
    blocks = ring_fourier_blocks(H, lat)
    n, N = lat.n, lat.N
    r0 = -lat.ring_offset
    rho = np.zeros((n, N, N), dtype=complex)
    if initial == "delocalized":
        rho[0, r0, r0] = 1.0
    elif initial == "localized":
        rho[:, r0, r0] = 1.0 / n
    else:
        raise InvalidParameterError(f"unknown initial state {initial!r}")

    gamma = params.gamma
    if dt is None:
        norm = max(float(np.abs(np.linalg.eigvalsh(b)).max()) for b in blocks)
        dt = default_step(gamma, norm)
    diag = np.arange(N)

    def rhs(r):
        out = -1j * (blocks @ r - r @ blocks)
        if gamma:
            p = np.einsum("qii->i", r).real / n
            out -= gamma * r
            out[:, diag, diag] += gamma * p
        return out

    ring_pops = np.empty((len(times), N))
    t_prev = 0.0
    for i, t in enumerate(times):
        if t > t_prev:
            # rho >= 0 exactly when every Fourier block is
            rho = _positive_segment(rhs, rho, t - t_prev, dt, t, lambda r: min(np.linalg.eigvalsh(r)[:, 0]))
        t_prev = t
        ring_pops[i] = math.exp(-2.0 * params.kappa * t) * np.einsum("qii->i", rho).real
    return Trajectory(times, ring_populations=ring_pops)
