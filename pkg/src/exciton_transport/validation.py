"""Reproduction checks with pinned tolerances.

Each ``criterion_*`` function runs one check end to end and returns a
:class:`CriterionResult`. ``run_all`` drives them for the ``validate``
command; ``tests/test_acceptance.py`` runs them one by one.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from exciton_transport.coupling import (
    CouplingKernel,
    assemble_hamiltonian,
    extract_block_coefficients,
    far_field_coefficients,
    symmetric_nearest_neighbor_coefficients,
    torus_hamiltonian,
)
from exciton_transport.dynamics import (
    OpenSystemParams,
    QuantumState,
    evolve_closed,
    evolve_lindblad,
    evolve_lindblad_symmetric,
)
from exciton_transport.experiments import (
    SweepSpec,
    compare_with_closed_forms,
    crossing_time,
    run_dephasing_sweep,
    run_disorder_sweep,
    run_helix_approximation,
    run_scaling_experiment,
)
from exciton_transport.lattice import build_ring_stack
from exciton_transport.observables import (
    diffusion_length,
    fit_power_law,
    local_exponents,
    ring_populations,
    short_time_ring_populations,
    sigma_deloc_analytic,
    sigma_loc_analytic,
    supertransfer_pair_probability,
)
from exciton_transport.spectral import circulant_eigenvalues, dense_eigendecomposition

N_RINGS = 31
RADIUS = 1.0
SPACINGS = (0.1, 1.0, 10.0)
FAR = 10.0
N_SMALL = tuple(range(1, 8))
STATES = ("delocalized", "localized")


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    checks: list = field(default_factory=list)  # (label, passed, detail)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.title}"

    def report(self) -> str:
        out = [self.line()]
        for label, ok, detail in self.checks:
            out.append(f"    {'ok ' if ok else 'BAD'} {label}: {detail}")
        return "\n".join(out)


def _result(number, title, checks):
    return CriterionResult(number, title, all(ok for _, ok, _ in checks), checks)


def criterion_1_closed_agreement():
    spec = SweepSpec("scaling", n_values=N_SMALL, N=N_RINGS, R=RADIUS, spacings=SPACINGS, states=STATES)
    grid = run_scaling_experiment(spec)
    checks = []
    for i, state in enumerate(STATES):
        for j, d in enumerate(SPACINGS):
            tol = 0.02 if d > RADIUS else 0.10
            err = grid.stats["rel_error"][i, j]
            checks.append((f"{state} D/R={d:g}", bool(err.max() <= tol), f"max rel error {err.max():.3e} <= {tol}"))
    return _result(1, "closed-system numerics vs short-time closed forms", checks)


def criterion_2_supertransfer_scaling():
    spec = SweepSpec("scaling", n_values=N_SMALL, N=N_RINGS, R=RADIUS, spacings=SPACINGS, states=STATES)
    s = run_scaling_experiment(spec).summary
    a_deloc = s[f"alpha[state=delocalized,spacing={FAR:g}]"]
    a_loc = s[f"alpha[state=localized,spacing={FAR:g}]"]
    checks = [
        ("far-field delocalized alpha", abs(a_deloc - 1.0) <= 0.05, f"{a_deloc:.4f} in 1.00 +- 0.05"),
        ("far-field localized alpha", abs(a_loc - 0.5) <= 0.05, f"{a_loc:.4f} in 0.50 +- 0.05"),
    ]
    for d in SPACINGS:
        if d <= RADIUS:
            a = s[f"alpha[state=delocalized,spacing={d:g}]"]
            checks.append((f"near-field D/R={d:g} delocalized alpha", a > 1.0, f"{a:.4f} > 1"))
    return _result(2, "supertransfer scaling exponents over n=1..7", checks)


def criterion_3_far_field_closed_forms():
    J, t, D = 1.0, 1.0, FAR
    kernel = CouplingKernel(J)
    checks = []
    worst_d = worst_l = 0.0
    for n in N_SMALL:
        h = symmetric_nearest_neighbor_coefficients(n, N_RINGS, D, kernel)
        exact_d = math.sqrt(2) * J * t * n / D**2
        exact_l = math.sqrt(2) * J * t * math.sqrt(n) / D**2
        worst_d = max(worst_d, abs(sigma_deloc_analytic(h, t) / exact_d - 1))
        worst_l = max(worst_l, abs(sigma_loc_analytic(h, t) / exact_l - 1))
    eps = 8 * np.finfo(float).eps
    checks.append(("nearest-neighbour delocalized", worst_d <= eps, f"max rel dev {worst_d:.2e} <= {eps:.2e}"))
    checks.append(("nearest-neighbour localized", worst_l <= eps, f"max rel dev {worst_l:.2e} <= {eps:.2e}"))

    T = (N_RINGS - 1) // 2
    direct = math.sqrt(sum(j**-4.0 for j in range(1, T + 1)))
    n = 5
    factor = sigma_deloc_analytic(far_field_coefficients(n, N_RINGS, D, kernel), t) / (math.sqrt(2) * J * t * n / D**2)
    checks.append(
        (
            "all-ring correction factor",
            abs(factor - 1.0403) <= 1e-4 and abs(factor - direct) <= 1e-12,
            f"{factor:.6f} (direct sum {direct:.6f}; pi^4/90 = {math.pi**4 / 90:.6f}, pi^2/sqrt(90) = {math.pi**2 / math.sqrt(90):.6f})",
        )
    )
    return _result(3, "far-field closed forms", checks)


def criterion_4_two_cluster_supertransfer():
    checks = []
    gt = 1e-3
    for na, nb in ((1, 1), (2, 2), (2, 3), (3, 3)):
        p_sym, p_loc = supertransfer_pair_probability(na, nb, gt, 1.0)
        ratio = p_sym / p_loc
        dev = abs(ratio / (na * nb) - 1)
        checks.append((f"(n_A,n_B)=({na},{nb})", dev <= 0.01, f"P_sym/P_loc = {ratio:.6f} vs {na * nb}"))
    return _result(4, "two-cluster supertransfer ratio n_A*n_B", checks)


def criterion_5_dephasing_agreement(n_values=N_SMALL):
    spec = SweepSpec(
        "dephasing",
        n_values=n_values,
        N=N_RINGS,
        R=RADIUS,
        spacings=SPACINGS,
        states=STATES,
    )
    grid = compare_with_closed_forms(spec, gamma=0.1)
    checks = []
    for i, state in enumerate(STATES):
        for j, d in enumerate(SPACINGS):
            err = grid.stats["rel_error"][0, i, j]
            worst = int(np.argmax(err))
            checks.append(
                (
                    f"{state} D/R={d:g}",
                    bool(err.max() <= 0.03),
                    f"max rel error {err.max():.4%} (n={n_values[worst]}) <= 3%",
                )
            )
    return _result(5, "gamma=0.1 numerics vs closed forms", checks)


def _lambda_curves(gamma, n_values, times):
    spec = SweepSpec(
        "dephasing",
        n_values=n_values,
        N=N_RINGS,
        R=RADIUS,
        spacings=(FAR,),
        gammas=(gamma,),
        times=tuple(times),
    )
    return run_dephasing_sweep(spec)


def criterion_6_crossover():
    checks = []
    gamma = 5.0
    times = np.geomspace(0.005, 100.0, 61) / gamma
    n_values = tuple(range(1, 7))
    grid = _lambda_curves(gamma, n_values, times)
    centers, _ = local_exponents(times, np.ones_like(times) + times)
    half = 2
    for k, n in enumerate(n_values):
        lam = grid.stats["lambda"][0, 0, 0, k, half:-half]
        early = lam[centers * gamma <= 0.1]
        late = lam[-1]
        checks.append(
            (
                f"gamma=5 n={n} early lambda",
                bool(np.all(np.abs(early - 1.0) <= 0.05)),
                f"range [{early.min():.3f}, {early.max():.3f}] within 1.00 +- 0.05",
            )
        )
        checks.append(
            (
                f"gamma=5 n={n} final lambda (t*gamma={centers[-1] * gamma:.0f})",
                abs(late - 0.5) <= 0.1,
                f"{late:.3f} within 0.5 +- 0.1; min over t*gamma>=10: {lam[centers * gamma >= 10].min():.3f}",
            )
        )
    n_alpha = tuple(range(1, 11))
    for gamma in range(1, 12):
        times = np.geomspace(0.01, 30.0, 40) / gamma
        g = _lambda_curves(float(gamma), n_alpha, times)
        alpha = g.tables["alpha"].mean_sigma[0, 0, 0]
        tc = crossing_time(times, alpha)
        ok = math.isfinite(tc) and 1 / 3 <= tc * gamma <= 3
        checks.append((f"gamma={gamma} alpha crossing", ok, f"t_c*gamma = {tc * gamma:.3f} within [1/3, 3]"))
    return _result(6, "ballistic-to-diffusive crossover near t ~ 1/gamma", checks)


def criterion_7_disorder(realizations=500, base_seed=2011):
    n_values = N_SMALL
    sigmas = tuple(10.0 ** np.arange(-4.0, 2.01, 0.5))
    spec = SweepSpec(
        "disorder",
        n_values=n_values,
        N=N_RINGS,
        R=RADIUS,
        spacings=(FAR,),
        sigmas=sigmas,
        realizations=realizations,
        base_seed=base_seed,
        times=tuple(2.0 ** np.linspace(-1, 1, 5)),
        t_eval=1.0,
    )
    grid = run_disorder_sweep(spec)
    ti = 2
    sig = grid.mean_sigma[0, :, :, ti]
    lam = grid.stats["lambda"][0, :, :, ti]
    s = np.asarray(sigmas)
    checks = []
    weak = s <= 1e-3 + 1e-15
    variation = (sig[weak].max(axis=0) - sig[weak].min(axis=0)) / sig[weak].mean(axis=0)
    checks.append(("weak disorder Sigma-independence", bool(variation.max() < 0.05), f"max variation {variation.max():.2e} < 5%"))
    for j in np.nonzero(weak)[0]:
        a = fit_power_law(n_values, sig[j]).exponent
        checks.append((f"Sigma={s[j]:.0e} alpha", abs(a - 1.0) <= 0.1, f"{a:.3f} within 1 +- 0.1"))
    for j in np.nonzero(s >= 10 - 1e-9)[0]:
        a = fit_power_law(n_values, sig[j]).exponent
        checks.append((f"Sigma={s[j]:g} alpha", abs(a - 0.5) <= 0.15, f"{a:.3f} within 0.5 +- 0.15"))
        checks.append(
            (
                f"Sigma={s[j]:g} lambda",
                bool(np.all(np.abs(lam[j] - 0.5) <= 0.15)),
                f"range [{lam[j].min():.3f}, {lam[j].max():.3f}] within 0.5 +- 0.15",
            )
        )
    stars = np.array([crossing_time(s, lam[:, k]) for k in range(len(n_values))])
    ok = bool(np.all(np.isfinite(stars))) and stars.max() / stars.min() <= 2
    checks.append(
        ("lambda crossover Sigma*", ok, "Sigma* per n = " + ", ".join(f"{x:.3g}" for x in stars) + f"; spread x{stars.max() / stars.min():.2f} <= 2")
    )
    return _result(7, f"disorder behaviour ({realizations} realizations)", checks)


def criterion_8_helix():
    spec = SweepSpec("helix", n_values=N_SMALL, N=N_RINGS, R=RADIUS, spacings=(FAR,), states=("delocalized",))
    grid = run_helix_approximation(spec)
    err = grid.stats["rel_error"][0, 0]
    checks = [
        (f"n={n}", bool(e <= 0.05), f"rel error {e:.3%} <= 5% (helix/rings = {r:.3f})")
        for n, e, r in zip(N_SMALL, err, grid.mean_sigma[0, 0] / grid.stats["analytic"][0, 0])
    ]
    return _result(8, "helix vs ring-stack closed forms, d/R=10, delocalized", checks)


def criterion_9_properties():
    checks = []
    lat = build_ring_stack(3, 9, RADIUS, 1.5)
    H = assemble_hamiltonian(lat)
    psi = np.zeros(lat.num_sites)
    psi[lat.sites_in_ring(0)] = [0.6, 0.0, 0.8]
    times = np.linspace(0.25, 2.0, 8)

    traj = evolve_lindblad(H, OpenSystemParams(0.5, 0.0), QuantumState(psi.astype(complex)), times)
    traces = np.trace(traj.states, axis1=1, axis2=2).real
    herm = max(np.abs(r - r.conj().T).max() for r in traj.states)
    checks.append(("trace conservation kappa=0", bool(np.abs(traces - 1).max() <= 1e-6), f"max |tr-1| {np.abs(traces - 1).max():.2e}"))
    checks.append(("Hermiticity", herm <= 1e-9, f"max |rho - rho^H| {herm:.2e}"))

    kappa = 0.3
    traj = evolve_lindblad(H, OpenSystemParams(0.5, kappa), QuantumState(psi.astype(complex)), times)
    traces = np.trace(traj.states, axis1=1, axis2=2).real
    rel = np.abs(traces / np.exp(-2 * kappa * times) - 1).max()
    checks.append(("trace decay exp(-2 kappa t)", rel <= 1e-6, f"max rel dev {rel:.2e}"))

    sym = evolve_lindblad_symmetric(H, lat, OpenSystemParams(0.5, 0.0), "delocalized", times)
    drift = np.abs(sym.ring_populations.sum(axis=1) - 1).max()
    checks.append(("trace conservation, symmetric solver", drift <= 1e-6, f"max |sum p - 1| {drift:.2e}"))

    worst = 0.0
    for n, N, D in ((3, 5, 10.0), (5, 31, 1.0), (4, 7, 0.5)):
        h = extract_block_coefficients(n, N, RADIUS, D)
        e = circulant_eigenvalues(h).sorted()
        w = dense_eigendecomposition(torus_hamiltonian(h)).eigenvalues
        worst = max(worst, np.abs(e - w).max())
    checks.append(("circulant vs dense eigenvalues", worst <= 1e-10, f"max |diff| {worst:.2e}"))

    n, t = 5, 0.01
    lat = build_ring_stack(n, N_RINGS, RADIUS, FAR)
    h = extract_block_coefficients(n, N_RINGS, RADIUS, FAR)
    rng = np.random.default_rng(9)
    alpha = np.zeros((N_RINGS, n))
    alpha[N_RINGS // 2] = rng.normal(size=n)
    alpha /= np.linalg.norm(alpha)
    approx = diffusion_length(short_time_ring_populations(alpha, h, t), FAR)
    state = evolve_closed(assemble_hamiltonian(lat), alpha.ravel().astype(complex), [t]).state(0)
    exact = diffusion_length(ring_populations(state, lat), FAR)
    rel = abs(approx / exact - 1)
    checks.append(("short-time formula vs numerics at t=0.01", rel <= 1e-3, f"rel dev {rel:.2e}"))

    spec = SweepSpec("disorder", n_values=(1, 2, 3), N=7, spacings=(2.0,), sigmas=(0.0, 0.3), realizations=3, base_seed=5, times=(0.5, 1.0))
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            path = Path(tmp) / f"r{k}.csv"
            run_disorder_sweep(spec).write_csv(path)
            blobs.append(path.read_bytes())
    checks.append(("seeded sweep determinism", blobs[0] == blobs[1], f"{len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}"))
    return _result(9, "property suites", checks)


CRITERIA = (
    criterion_1_closed_agreement,
    criterion_2_supertransfer_scaling,
    criterion_3_far_field_closed_forms,
    criterion_4_two_cluster_supertransfer,
    criterion_5_dephasing_agreement,
    criterion_6_crossover,
    criterion_7_disorder,
    criterion_8_helix,
    criterion_9_properties,
)


def run_all(verbose=True, stream=None):
    results = []
    for func in CRITERIA:
        res = func()
        results.append(res)
        if stream is not None:
            print(res.report() if verbose else res.line(), file=stream, flush=True)
    return results
