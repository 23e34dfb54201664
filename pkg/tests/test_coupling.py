import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exciton_transport import (
    CouplingKernel,
    DisorderSpec,
    assemble_hamiltonian,
    build_ring_stack,
    extract_block_coefficients,
    sample_disorder,
    torus_hamiltonian,
)
from exciton_transport.coupling import (
    far_field_coefficients,
    realization_seed,
    ring_shift_operator,
    symmetric_nearest_neighbor_coefficients,
)
from exciton_transport.errors import DimensionMismatchError, InvalidParameterError


def test_kernel_inverse_cube():
    k = CouplingKernel(2.0)
    assert k.coupling(2.0) == pytest.approx(0.25)
    np.testing.assert_allclose(k.coupling(np.array([1.0, 10.0])), [2.0, 2e-3])


def test_two_site_hamiltonian():
    lat = build_ring_stack(1, 2, 1.0, 2.0)
    H = assemble_hamiltonian(lat)
    np.testing.assert_allclose(H.matrix, [[0, 1 / 8], [1 / 8, 0]])


def test_square_ring_couplings():
    lat = build_ring_stack(4, 1, 1.0, 1.0)
    H = assemble_hamiltonian(lat).matrix
    assert H[0, 1] == pytest.approx(1 / (2 * np.sqrt(2)))
    assert H[0, 2] == pytest.approx(1 / 8)


def test_offsets_on_diagonal():
    lat = build_ring_stack(2, 3, 1.0, 1.0)
    off = np.arange(6.0)
    H = assemble_hamiltonian(lat, offsets=off)
    np.testing.assert_array_equal(np.diag(H.matrix), off)
    H2 = assemble_hamiltonian(lat).with_offsets(off)
    np.testing.assert_array_equal(H.matrix, H2.matrix)
    with pytest.raises(DimensionMismatchError):
        assemble_hamiltonian(lat, offsets=np.zeros(5))


def test_disorder_sampling_is_seeded():
    spec = DisorderSpec(0.5, realization_seed(7, 3, 2))
    a = sample_disorder(spec, 100)
    b = sample_disorder(DisorderSpec(0.5, realization_seed(7, 3, 2)), 100)
    np.testing.assert_array_equal(a, b)
    c = sample_disorder(DisorderSpec(0.5, realization_seed(7, 3, 3)), 100)
    assert not np.array_equal(a, c)
    assert np.all(sample_disorder(DisorderSpec(0.0, 1), 10) == 0)
    with pytest.raises(InvalidParameterError):
        DisorderSpec(-1.0)


def test_disorder_statistics():
    x = sample_disorder(DisorderSpec(2.0, 11), 200_000)
    assert abs(x.mean()) < 0.02
    assert x.std() == pytest.approx(2.0, rel=0.01)


def test_block_coefficients_match_lattice():
    n, N, R, D = 4, 5, 1.0, 1.5
    lat = build_ring_stack(n, N, R, D)
    d = lat.distance_matrix()
    h = extract_block_coefficients(n, N, R, D).h
    assert h[0, 0] == 0
    # ring 0, site label n (storage 0 of that ring) to ring j, site label k
    src = lat.site_index(0, n)
    for j in range(N):
        jj = j if j <= N // 2 else j - N
        for k in range(n):
            dst = lat.site_index(jj, k if k else n)
            if src != dst:
                assert h[j, k] == pytest.approx(d[src, dst] ** -3)


def test_torus_rows_of_ring_zero_match_open_stack():
    # ring 0 sees the same neighbours on the torus and in the open stack
    n, N, R, D = 3, 5, 1.0, 2.0
    lat = build_ring_stack(n, N, R, D)
    Ht = torus_hamiltonian(extract_block_coefficients(n, N, R, D)).matrix
    Ho = assemble_hamiltonian(lat).matrix
    # torus ring order is 0, 1, 2, -2, -1
    perm = np.concatenate([lat.sites_in_ring(r) for r in (0, 1, 2, -2, -1)])
    np.testing.assert_allclose(Ht[:n], Ho[np.ix_(perm, perm)][:n], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), T=st.integers(1, 4), D=st.floats(0.3, 10.0))
def test_torus_hamiltonian_is_symmetric_and_ring_shift_invariant(n, T, D):
    N = 2 * T + 1
    M = torus_hamiltonian(extract_block_coefficients(n, N, 1.0, D)).matrix
    np.testing.assert_allclose(M, M.T, atol=1e-15)
    P = ring_shift_operator(N, n)
    np.testing.assert_allclose(P @ M @ P.T, M, atol=1e-15)


def test_even_ring_count_rejected():
    with pytest.raises(InvalidParameterError):
        extract_block_coefficients(3, 4, 1.0, 1.0)


def test_idealized_tables():
    h = symmetric_nearest_neighbor_coefficients(3, 7, 2.0).h
    assert np.all(h[1] == 1 / 8) and np.all(h[6] == 1 / 8)
    assert np.all(h[[0, 2, 3, 4, 5]] == 0)
    f = far_field_coefficients(2, 7, 2.0).h
    np.testing.assert_allclose(f[:, 0], [0, 1 / 8, 1 / 64, 1 / 216, 1 / 216, 1 / 64, 1 / 8])


def test_hamiltonian_csv(tmp_path):
    lat = build_ring_stack(1, 2, 1.0, 2.0)
    path = tmp_path / "h.csv"
    assemble_hamiltonian(lat).to_csv(path)
    assert path.read_text().splitlines() == ["row,col,value", "0,1,0.125", "1,0,0.125"]


def test_adjacent_ring_coupling_grows_convexly_with_n():
    # summed coupling from one site to the next ring grows faster than linearly at first
    sums = [extract_block_coefficients(n, 3, 1.0, 1.0).h[1].sum() for n in range(1, 8)]
    steps = np.diff(sums)
    assert np.all(steps > 0)
    assert np.all(np.diff(steps) > 0)
