import cmath
import math

import numpy as np
import pytest

from exciton_transport import (
    OpenSystemParams,
    QuantumState,
    assemble_hamiltonian,
    build_ring_stack,
    delocalized_state,
    evolve_closed,
    evolve_lindblad,
    evolve_lindblad_symmetric,
    localized_state,
)
from exciton_transport.coupling import Hamiltonian
from exciton_transport.errors import (
    DimensionMismatchError,
    InvalidParameterError,
    StepSizeUnderflowError,
)
from exciton_transport.observables import trajectory_ring_populations


def _dimer(J=1.0):
    return Hamiltonian(np.array([[0.0, J], [J, 0.0]]), np.zeros(2))


def _dimer_inversion(J, gamma, t):
    # z = p1 - p2 obeys z'' + gamma z' + 4 J^2 z = 0, z(0) = 1, z'(0) = 0
    disc = cmath.sqrt(gamma**2 - 16 * J**2)
    r1, r2 = (-gamma + disc) / 2, (-gamma - disc) / 2
    return ((r2 * cmath.exp(r1 * t) - r1 * cmath.exp(r2 * t)) / (r2 - r1)).real


def test_states():
    lat = build_ring_stack(4, 3, 1.0, 1.0)
    psi = delocalized_state(lat)
    assert np.allclose(psi.site_populations()[lat.sites_in_ring(0)], 0.25)
    loc = localized_state(lat)
    assert loc.site_populations()[lat.sites_in_ring(0)[0]] == 1
    with pytest.raises(InvalidParameterError):
        QuantumState.pure([1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        QuantumState.mixed(np.diag([1.5, -0.5]))
    rho = QuantumState.mixed(np.eye(2) / 2)
    assert not rho.is_pure and rho.dim == 2


def test_rabi_oscillation():
    times = np.linspace(0, 3, 13)
    traj = evolve_closed(_dimer(0.7), QuantumState.pure([1, 0]), times)
    np.testing.assert_allclose(traj.populations[:, 1], np.sin(0.7 * times) ** 2, atol=1e-13)


def test_closed_evolution_preserves_norm_and_starts_exactly():
    lat = build_ring_stack(3, 5, 1.0, 0.8)
    H = assemble_hamiltonian(lat)
    psi0 = localized_state(lat)
    traj = evolve_closed(H, psi0, [0.0, 0.5, 4.0])
    np.testing.assert_array_equal(traj.states[0], psi0.data)
    np.testing.assert_allclose(np.linalg.norm(traj.states, axis=1), 1.0, atol=1e-12)


def test_closed_evolution_is_a_group():
    lat = build_ring_stack(2, 5, 1.0, 1.0)
    H = assemble_hamiltonian(lat)
    full = evolve_closed(H, delocalized_state(lat), [1.3]).states[0]
    half = evolve_closed(H, delocalized_state(lat), [0.65]).states[0]
    twice = evolve_closed(H, QuantumState(half), [0.65]).states[0]
    np.testing.assert_allclose(twice, full, atol=1e-12)


@pytest.mark.parametrize("gamma", [0.3, 2.0, 10.0])
def test_dephased_dimer_against_damped_oscillator(gamma):
    times = np.linspace(0.1, 3.0, 8)
    traj = evolve_lindblad(_dimer(), OpenSystemParams(gamma), QuantumState.pure([1, 0]), times)
    z = traj.populations[:, 0] - traj.populations[:, 1]
    expected = [_dimer_inversion(1.0, gamma, t) for t in times]
    np.testing.assert_allclose(z, expected, atol=1e-7)


def test_rk4_is_fourth_order():
    t = [2.0]
    rho0 = QuantumState.pure([1, 0])
    exact = _dimer_inversion(1.0, 0.5, 2.0)
    errs = []
    for dt in (0.1, 0.05):
        p = evolve_lindblad(_dimer(), OpenSystemParams(0.5), rho0, t, dt=dt).populations[0]
        errs.append(abs(p[0] - p[1] - exact))
    ratio = errs[0] / errs[1]
    assert 8 <= ratio <= 32, ratio


def test_density_path_matches_closed_path_and_stays_pure():
    lat = build_ring_stack(3, 3, 1.0, 1.0)
    H = assemble_hamiltonian(lat)
    times = [0.5, 1.0]
    closed = evolve_closed(H, localized_state(lat), times)
    dens = evolve_lindblad(H, OpenSystemParams(), localized_state(lat), times, force_density=True)
    np.testing.assert_allclose(dens.populations, closed.populations, atol=1e-9)
    for rho in dens.states:
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-9)


def test_dephasing_reduces_purity_monotonically():
    lat = build_ring_stack(2, 3, 1.0, 1.0)
    traj = evolve_lindblad(assemble_hamiltonian(lat), OpenSystemParams(1.0), localized_state(lat), np.linspace(0.2, 2, 10))
    purity = np.einsum("tij,tji->t", traj.states, traj.states).real
    assert np.all(np.diff(purity) < 0)
    assert purity[-1] < 1


def test_recombination_prefactor_and_trace():
    lat = build_ring_stack(2, 3, 1.0, 1.0)
    times = np.linspace(0.25, 2.0, 8)
    traj = evolve_lindblad(assemble_hamiltonian(lat), OpenSystemParams(0.4, 0.2), delocalized_state(lat), times)
    tr = np.trace(traj.states, axis1=1, axis2=2).real
    np.testing.assert_allclose(tr, np.exp(-0.4 * times), rtol=1e-10)
    for rho in traj.states:
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)


def test_quantum_zeno_slows_transport():
    # far beyond the coherent scale, stronger dephasing means less spreading
    lat = build_ring_stack(1, 9, 1.0, 1.0)
    H = assemble_hamiltonian(lat)
    spread = []
    for gamma in (5.0, 20.0, 80.0):
        traj = evolve_lindblad_symmetric(H, lat, OpenSystemParams(gamma), "delocalized", [2.0])
        p = traj.ring_populations[0]
        spread.append(p @ lat.ring_labels.astype(float) ** 2)
    assert spread[0] > spread[1] > spread[2]


def test_haken_strobl_chain():
    # nearest-neighbour chain with dephasing: <x^2> = 4 J^2/gamma [t - (1 - e^{-gamma t})/gamma]
    L, J, gamma, t = 41, 1.0, 2.0, 3.0
    m = np.zeros((L, L))
    idx = np.arange(L - 1)
    m[idx, idx + 1] = m[idx + 1, idx] = J
    psi = np.zeros(L)
    psi[L // 2] = 1
    p = evolve_lindblad(Hamiltonian(m, np.zeros(L)), OpenSystemParams(gamma), QuantumState.pure(psi), [t]).populations[0]
    x = np.arange(L) - L // 2
    expected = 4 * J**2 / gamma * (t - (1 - math.exp(-gamma * t)) / gamma)
    assert p @ x**2 == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("initial", ["delocalized", "localized"])
@pytest.mark.parametrize("kappa", [0.0, 0.3])
def test_symmetric_solver_matches_full_solver(initial, kappa):
    lat = build_ring_stack(3, 5, 1.0, 0.9)
    H = assemble_hamiltonian(lat)
    times = [0.3, 1.0, 2.5]
    params = OpenSystemParams(0.7, kappa)
    fast = evolve_lindblad_symmetric(H, lat, params, initial, times)
    psi0 = delocalized_state(lat) if initial == "delocalized" else localized_state(lat)
    full = evolve_lindblad(H, params, psi0, times)
    np.testing.assert_allclose(fast.ring_populations, trajectory_ring_populations(full, lat), atol=1e-12)


def test_symmetric_solver_rejects_helix_and_bad_state():
    from exciton_transport import build_helix

    lat = build_helix(3, 3, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        evolve_lindblad_symmetric(assemble_hamiltonian(lat), lat, OpenSystemParams(1.0), "delocalized", [1.0])
    lat = build_ring_stack(3, 3, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        evolve_lindblad_symmetric(assemble_hamiltonian(lat), lat, OpenSystemParams(1.0), "random", [1.0])


def test_step_size_underflow():
    H = Hamiltonian(np.array([[0.0, 1e6], [1e6, 0.0]]), np.zeros(2))
    with pytest.raises(StepSizeUnderflowError):
        evolve_lindblad(H, OpenSystemParams(1.0), QuantumState.pure([1, 0]), [1.0], dt=1.0)


def test_time_and_dimension_validation():
    H = _dimer()
    with pytest.raises(InvalidParameterError):
        evolve_closed(H, QuantumState.pure([1, 0]), [1.0, 0.5])
    with pytest.raises(InvalidParameterError):
        evolve_closed(H, QuantumState.pure([1, 0]), [-1.0])
    with pytest.raises(DimensionMismatchError):
        evolve_lindblad(H, OpenSystemParams(1.0), QuantumState.pure([1, 0, 0]), [1.0])
    with pytest.raises(InvalidParameterError):
        OpenSystemParams(-1.0)
