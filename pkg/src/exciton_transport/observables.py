"""Diffusion lengths, short-time closed forms, exponent fits, supertransfer."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from exciton_transport.coupling import BlockCoefficients, torus_hamiltonian
from exciton_transport.dynamics import QuantumState, Trajectory, evolve_closed
from exciton_transport.coupling import Hamiltonian
from exciton_transport.errors import DimensionMismatchError, InvalidParameterError
from exciton_transport.lattice import SiteLattice
from exciton_transport.spectral import circulant_eigenvalues

NEGATIVE_POPULATION_TOL = 1e-9
SHORT_TIME_GATE = 0.3


class ShortTimeValidityWarning(UserWarning):
    """The closed forms are evaluated outside their short-time regime."""


@dataclass(frozen=True, eq=False)
class RingPopulations:
    """Probability ``p[i]`` of finding the exciton on ring ``labels[i]``."""

    p: np.ndarray
    labels: np.ndarray

    @property
    def total(self) -> float:
        return float(self.p.sum())


@dataclass(frozen=True, eq=False)
class DiffusionSeries:
    times: np.ndarray
    sigma: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "sigma"])
            for t, s in zip(self.times, self.sigma):
                writer.writerow([f"{t:.12g}", f"{s:.12g}"])


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float


def ring_populations(state, lat: SiteLattice, renormalize: bool = False) -> RingPopulations:
    if not isinstance(state, QuantumState):
        state = QuantumState(np.asarray(state, dtype=complex))
    if state.dim != lat.num_sites:
        raise DimensionMismatchError(f"state dim {state.dim} != lattice size {lat.num_sites}")
    return _bin_rings(state.site_populations(), lat, renormalize)


def _bin_rings(site_pops, lat, renormalize):
    p = site_pops.reshape(lat.N, lat.n).sum(axis=1)
    if renormalize:
        p = p / p.sum()
    return RingPopulations(p, lat.ring_labels)


def trajectory_ring_populations(traj: Trajectory, lat: SiteLattice, renormalize: bool = False) -> np.ndarray:
    """Ring populations at every sample, shape ``(len(traj), N)``."""
    if traj.ring_populations is not None:
        p = traj.ring_populations
    else:
        pops = traj.populations
        if pops is None:
            pops = np.array([traj.state(i).site_populations() for i in range(len(traj))])
        if pops.shape[1] != lat.num_sites:
            raise DimensionMismatchError("trajectory does not match lattice")
        p = pops.reshape(len(traj), lat.N, lat.n).sum(axis=2)
    if renormalize:
        p = p / p.sum(axis=1, keepdims=True)
    return p


def _second_moment(p, labels):
    p = np.asarray(p, dtype=float)
    if p.min(initial=0.0) < -NEGATIVE_POPULATION_TOL:
        raise InvalidParameterError(f"negative population {p.min()!r}")
    p = np.clip(p, 0.0, None)
    return p @ (np.asarray(labels, dtype=float) ** 2)


def diffusion_length(p: RingPopulations, spacing: float) -> float:
    """``spacing * sqrt(sum_r r**2 p_r)``."""
    return spacing * math.sqrt(_second_moment(p.p, p.labels))


def diffusion_series(traj: Trajectory, lat: SiteLattice, renormalize: bool = False, meta=None) -> DiffusionSeries:
    p = trajectory_ring_populations(traj, lat, renormalize)
    labels = lat.ring_labels.astype(float)
    p = np.where((p < 0) & (p >= -NEGATIVE_POPULATION_TOL), 0.0, p)
    if p.min() < -NEGATIVE_POPULATION_TOL:
        raise InvalidParameterError(f"negative population {p.min()!r}")
    sigma = lat.spacing * np.sqrt(p @ labels**2)
    return DiffusionSeries(np.asarray(traj.times), sigma, dict(meta or {}))


def _check_analytic(h: BlockCoefficients, t):
    if h.N % 2 == 0:
        raise InvalidParameterError(f"closed forms need an odd number of rings, got N={h.N}")
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("t must be >= 0")
    inter = h.replace_intra_ring(0.0)
    norm = float(np.abs(circulant_eigenvalues(inter).eigenvalues).max())
    if np.max(t) * norm >= SHORT_TIME_GATE:
        warnings.warn(
            f"t*||H_inter|| = {np.max(t) * norm:.3g} >= {SHORT_TIME_GATE}; "
            "short-time closed form may be inaccurate",
            ShortTimeValidityWarning,
            stacklevel=3,
        )


def _ring_weights(h):
    j = np.arange(1, h.T + 1)
    return j, h.h[1 : h.T + 1]


def sigma_deloc_analytic(h: BlockCoefficients, t):
    """Short-time diffusion length of the symmetric state on the middle ring.

    ``D t sqrt(2 sum_{j=1..T} j**2 (sum_k h[j,k])**2)``.
    """
    _check_analytic(h, t)
    j, rows = _ring_weights(h)
    return h.D * np.asarray(t) * math.sqrt(2.0 * np.sum(j**2 * rows.sum(axis=1) ** 2))


def sigma_loc_analytic(h: BlockCoefficients, t):
    """Short-time diffusion length of a single-site state on the middle ring."""
    _check_analytic(h, t)
    j, rows = _ring_weights(h)
    return h.D * np.asarray(t) * math.sqrt(2.0 * np.sum(j**2 * (rows**2).sum(axis=1)))


def short_time_ring_populations(alpha, h: BlockCoefficients, t: float) -> RingPopulations:
    """Ring populations to second order in ``t`` for a real initial state.

    ``alpha`` has shape ``(N, n)``: row ``r`` is the ring labelled ``r - T``.
    Ring and site indices wrap periodically. The first-order amplitude is
    ``t * sum_{j,k} h[j,k] alpha[R+j, S+k]``. The returned populations also
    carry the second-order term ``-t**2 alpha (H**2 alpha)`` that keeps
    their sum at one. That term lives only where ``alpha`` is nonzero.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (h.N, h.n):
        raise DimensionMismatchError(f"alpha has shape {alpha.shape}, expected {(h.N, h.n)}")
    if abs(np.sum(alpha**2) - 1.0) > 1e-12:
        raise InvalidParameterError("alpha is not normalized")
    M = torus_hamiltonian(h).matrix
    a = alpha.ravel()
    first = M @ a
    second = M @ first
    site = a**2 + t**2 * (first**2 - a * second)
    p = site.reshape(h.N, h.n).sum(axis=1)
    return RingPopulations(p, np.arange(h.N) - h.N // 2)


def haken_strobl_reference_sigma(J: float, gamma: float, t):
    """Tight-binding chain with dephasing: ``sigma**2 = 4J^2/gamma [t - (1 - e^{-gamma t})/gamma]``.

    Ballistic ``sqrt(2) J t`` for ``gamma t << 1``, diffusive
    ``2 J sqrt(t/gamma)`` for ``gamma t >> 1``.
    """
    if not gamma > 0:
        raise InvalidParameterError("gamma must be > 0; use the closed-system result at gamma=0")
    t = np.asarray(t, dtype=float)
    # -expm1 keeps the bracket accurate when gamma*t is small
    bracket = t + np.expm1(-gamma * t) / gamma
    return np.sqrt(4.0 * J**2 / gamma * bracket)


def fit_power_law(xs, ys) -> PowerLawFit:
    """Least-squares line through ``(log x, log y)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 3:
        raise InvalidParameterError("need at least 3 paired samples")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidParameterError("power-law fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0:
        raise InvalidParameterError("xs are constant")
    res = stats.linregress(lx, ly)
    r2 = 1.0 if np.ptp(ly) == 0 else min(1.0, max(0.0, res.rvalue**2))
    return PowerLawFit(float(res.slope), float(math.exp(res.intercept)), float(r2))


def local_exponents(xs, ys, window: int = 5):
    """Sliding-window log-log slopes.

    Returns ``(centers, exponents)`` where ``centers[i]`` is the middle
    abscissa of window ``i``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if window < 3 or window % 2 == 0:
        raise InvalidParameterError("window must be odd and >= 3")
    if xs.size < window:
        raise InvalidParameterError(f"need at least {window} samples")
    half = window // 2
    centers = xs[half : xs.size - half]
    slopes = np.array(
        [fit_power_law(xs[i : i + window], ys[i : i + window]).exponent for i in range(xs.size - window + 1)]
    )
    return centers, slopes


MAX_PAIR_PRODUCT = 36


def supertransfer_pair_probability(n_A: int, n_B: int, gamma_c: float, t: float):
    """Exact transfer probabilities between two all-to-all coupled clusters.

    Every site of cluster A hops to every site of cluster B with amplitude
    ``gamma_c``; on-site energies are equal and dropped. Returns
    ``(P_sym, P_loc)``: the probability to go from the symmetric state of A
    to the symmetric state of B, and from one A site to one B site.
    """
    if n_A < 1 or n_B < 1:
        raise InvalidParameterError("cluster sizes must be >= 1")
    if n_A * n_B > MAX_PAIR_PRODUCT:
        raise InvalidParameterError(f"n_A*n_B = {n_A * n_B} exceeds {MAX_PAIR_PRODUCT}")
    dim = n_A + n_B
    m = np.zeros((dim, dim))
    m[:n_A, n_A:] = gamma_c
    m[n_A:, :n_A] = gamma_c
    H = Hamiltonian(m, np.zeros(dim))

    phi_A = np.zeros(dim)
    phi_A[:n_A] = 1.0 / math.sqrt(n_A)
    phi_B = np.zeros(dim)
    phi_B[n_A:] = 1.0 / math.sqrt(n_B)
    site_a = np.zeros(dim)
    site_a[0] = 1.0

    psi_sym = evolve_closed(H, phi_A, [t]).states[0]
    psi_loc = evolve_closed(H, site_a, [t]).states[0]
    return float(abs(phi_B @ psi_sym) ** 2), float(abs(psi_loc[n_A]) ** 2)
