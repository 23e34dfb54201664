"""Exciton diffusion along stacked-ring and helical chromophore arrays.

Closed and open (dephasing, static disorder, recombination) single-exciton
dynamics, block-circulant closed forms for the short-time diffusion length,
and sweep drivers that tabulate the scaling of the diffusion length with the
number of chromophores per ring and with time.
"""

from exciton_transport.lattice import (
    GeometryKind,
    SiteLattice,
    build_helix,
    build_lattice,
    build_ring_stack,
    pair_distance,
)
from exciton_transport.coupling import (
    BlockCoefficients,
    CouplingKernel,
    DisorderSpec,
    Hamiltonian,
    assemble_hamiltonian,
    extract_block_coefficients,
    sample_disorder,
    torus_hamiltonian,
)
from exciton_transport.spectral import (
    CirculantSpectrum,
    EigenDecomposition,
    circulant_eigenvalues,
    dense_eigendecomposition,
    operator_norm_bound,
)
from exciton_transport.dynamics import (
    OpenSystemParams,
    QuantumState,
    Trajectory,
    delocalized_state,
    evolve_closed,
    evolve_lindblad,
    evolve_lindblad_symmetric,
    localized_state,
)
from exciton_transport.observables import (
    DiffusionSeries,
    PowerLawFit,
    RingPopulations,
    diffusion_length,
    fit_power_law,
    haken_strobl_reference_sigma,
    local_exponents,
    ring_populations,
    short_time_ring_populations,
    sigma_deloc_analytic,
    sigma_loc_analytic,
    supertransfer_pair_probability,
)

__version__ = "0.1.0"
