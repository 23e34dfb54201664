"""``exciton`` command-line entry point.

Subcommands: ``simulate`` (one trajectory), ``sweep`` (an experiment grid),
``analytic`` (closed forms and spectra) and ``validate`` (the reproduction
checks). Exit codes: 0 success, 1 configuration or parameter error,
2 numerical failure or failed validation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from exciton_transport import __version__
from exciton_transport.config import RunConfig, defaults_table, load_config
from exciton_transport.coupling import (
    BlockCoefficients,
    CouplingKernel,
    DisorderSpec,
    assemble_hamiltonian,
    extract_block_coefficients,
    realization_seed,
    sample_disorder,
    symmetric_nearest_neighbor_coefficients,
)
from exciton_transport.dynamics import (
    OpenSystemParams,
    delocalized_state,
    evolve_closed,
    evolve_lindblad,
    evolve_lindblad_symmetric,
    localized_state,
)
from exciton_transport.errors import ConfigError, ExcitonError, NumericalError
from exciton_transport.experiments import profile_spec, run_sweep, write_results
from exciton_transport.lattice import GeometryKind, build_lattice
from exciton_transport.observables import (
    diffusion_series,
    haken_strobl_reference_sigma,
    sigma_deloc_analytic,
    sigma_loc_analytic,
    trajectory_ring_populations,
)
from exciton_transport.spectral import circulant_eigenvalues

log = logging.getLogger("exciton_transport")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

_SWEEP_KEYS = {
    "experiment.n_values": "n_values",
    "experiment.spacings": "spacings",
    "experiment.gammas": "gammas",
    "experiment.sigmas": "sigmas",
    "experiment.times": "times",
    "experiment.t_eval": "t_eval",
    "experiment.states": "states",
    "experiment.near_field_autoscale": "near_field_autoscale",
    "experiment.window": "window",
    "geometry.N": "N",
    "geometry.R": "R",
    "coupling.J": "J",
    "dynamics.kappa": "kappa",
    "disorder.realizations": "realizations",
    "disorder.seed": "base_seed",
}


def _setup_logging():
    level = os.environ.get("EXCITON_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _out_dir(args, cfg: RunConfig | None):
    if args.out is not None:
        return Path(args.out)
    return Path(cfg["output.dir"] if cfg is not None else "out")


# -- simulate ---------------------------------------------------------------


def _simulate(cfg: RunConfig, args) -> int:
    cfg.require("geometry.kind", "geometry.n", "geometry.N", "geometry.spacing")
    try:
        lat = build_lattice(cfg["geometry.kind"], cfg["geometry.n"], cfg["geometry.N"], cfg["geometry.R"], cfg["geometry.spacing"])
    except ExcitonError as exc:
        raise ConfigError("geometry", str(exc)) from exc
    seed = args.seed if args.seed is not None else cfg["disorder.seed"]
    offsets = None
    if cfg["disorder.sigma"] > 0:
        offsets = sample_disorder(DisorderSpec(cfg["disorder.sigma"], realization_seed(seed, 0, 0)), lat.num_sites)
    H = assemble_hamiltonian(lat, CouplingKernel(cfg["coupling.J"]), offsets)
    times = np.linspace(0.0, cfg["dynamics.t_max"], cfg["dynamics.n_time_samples"])
    params = OpenSystemParams(cfg["dynamics.gamma"], cfg["dynamics.kappa"])
    state = cfg["dynamics.state"]
    dt = cfg["dynamics.integrator.dt_override"]

    start = time.perf_counter()
    if params.gamma == 0 and params.kappa == 0:
        psi0 = delocalized_state(lat) if state == "delocalized" else localized_state(lat)
        traj = evolve_closed(H, psi0, times)
    elif lat.kind is GeometryKind.RING_STACK and offsets is None:
        traj = evolve_lindblad_symmetric(H, lat, params, state, times, dt=dt)
    else:
        psi0 = delocalized_state(lat) if state == "delocalized" else localized_state(lat)
        traj = evolve_lindblad(H, params, psi0, times, dt=dt, keep_states=False)
    wall = time.perf_counter() - start

    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    renorm = cfg["dynamics.renormalize"]
    pops = trajectory_ring_populations(traj, lat, renormalize=renorm)
    with open(out / "populations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "ring", "population"])
        for t, row in zip(times, pops):
            for ring, p in zip(lat.ring_labels, row):
                writer.writerow([f"{t:.12g}", int(ring), f"{p:.12g}"])
    series = diffusion_series(traj, lat, renormalize=renorm)
    series.to_csv(out / "sigma.csv")
    if cfg["output.debug_hamiltonian"]:
        H.to_csv(out / "hamiltonian.csv", tol=0.0)
    manifest = {
        "tool": "exciton_transport",
        "version": __version__,
        "command": "simulate",
        "config": cfg.as_nested(),
        "seed": seed,
        "wall_time_s": wall,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    log.info("simulate: %d samples written to %s in %.2fs", len(times), out, wall)
    print(f"sigma(t_max) = {series.sigma[-1]:.12g}")
    return EXIT_OK


# -- sweep ------------------------------------------------------------------


def sweep_spec_from_config(cfg: RunConfig, profile=None, seed=None, jobs=1):
    cfg.require("experiment.kind")
    kind = cfg["experiment.kind"]
    overrides = {attr: cfg[path] for path, attr in _SWEEP_KEYS.items() if cfg.is_set(path)}
    # scaling always compares ring stacks and helix always propagates helices
    if cfg.is_set("geometry.kind") and kind in ("disorder", "dephasing"):
        overrides["geometry"] = GeometryKind.from_string(cfg["geometry.kind"])
    if cfg.is_set("geometry.n") and "n_values" not in overrides:
        overrides["n_values"] = [cfg["geometry.n"]]
    if cfg.is_set("geometry.spacing") and "spacings" not in overrides:
        overrides["spacings"] = [cfg["geometry.spacing"]]
    if cfg.is_set("dynamics.gamma") and "gammas" not in overrides:
        overrides["gammas"] = [cfg["dynamics.gamma"]]
    if cfg.is_set("disorder.sigma") and "sigmas" not in overrides:
        overrides["sigmas"] = [cfg["disorder.sigma"]]
    if cfg.is_set("dynamics.state") and "states" not in overrides:
        overrides["states"] = [cfg["dynamics.state"]]
    if seed is not None:
        overrides["base_seed"] = seed
    overrides["jobs"] = jobs
    try:
        return profile_spec(kind, profile or cfg["experiment.profile"], **overrides)
    except ExcitonError as exc:
        raise ConfigError("experiment", str(exc)) from exc


def _sweep(cfg: RunConfig, args) -> int:
    spec = sweep_spec_from_config(cfg, args.profile, args.seed, args.jobs)
    start = time.perf_counter()
    grid = run_sweep(spec)
    wall = time.perf_counter() - start
    csv_path, _ = write_results(grid, _out_dir(args, cfg), spec, config=cfg.as_nested(), wall_time=wall)
    log.info("sweep %s finished in %.2fs", spec.kind, wall)
    for key, value in grid.summary.items():
        print(f"{key} = {value:.6g}")
    print(f"wrote {csv_path}")
    return EXIT_OK


# -- analytic ---------------------------------------------------------------


def _read_coefficients(path, D) -> BlockCoefficients:
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(path), f"cannot read coefficient table: {exc}") from exc
    N, n = table.shape
    return BlockCoefficients(table, n, N, D)


def _analytic(args) -> int:
    kernel = CouplingKernel(args.J)
    if args.quantity == "haken-strobl":
        if args.gamma is None or args.gamma <= 0:
            raise ConfigError("--gamma", "haken-strobl reference needs --gamma > 0")
        print(f"sigma_hs = {float(haken_strobl_reference_sigma(args.J, args.gamma, args.t)):.12g}")
        return EXIT_OK
    if args.coefficients:
        h = _read_coefficients(args.coefficients, args.D)
    else:
        for name in ("n", "N"):
            if getattr(args, name) is None:
                raise ConfigError(f"--{name}", "required unless --coefficients is given")
        if args.nearest_neighbor:
            h = symmetric_nearest_neighbor_coefficients(args.n, args.N, args.D, kernel)
        else:
            h = extract_block_coefficients(args.n, args.N, args.R, args.D, kernel)
    if args.quantity == "sigma":
        print(f"sigma_deloc = {float(sigma_deloc_analytic(h, args.t)):.12g}")
        print(f"sigma_loc = {float(sigma_loc_analytic(h, args.t)):.12g}")
    else:
        spec = circulant_eigenvalues(h)
        rows = zip(spec.fourier_orders, spec.eigenvalues.ravel())
        fh = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.writer(fh)
            writer.writerow(["p", "q", "eigenvalue"])
            for (p, q), e in rows:
                writer.writerow([int(p), int(q), f"{e:.12g}"])
        finally:
            if fh is not sys.stdout:
                fh.close()
    return EXIT_OK


# -- validate ---------------------------------------------------------------


def _validate(args) -> int:
    from exciton_transport import validation

    wanted = set(args.criteria or range(1, len(validation.CRITERIA) + 1))
    results = []
    for number, func in enumerate(validation.CRITERIA, start=1):
        if number not in wanted:
            continue
        kwargs = {}
        if number == 7:
            kwargs["realizations"] = 500 if args.profile == "paper" else 100
            if args.seed is not None:
                kwargs["base_seed"] = args.seed
        res = func(**kwargs)
        results.append(res)
        print(res.report() if args.verbose else res.line(), flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys (TOML tables) and defaults:\n" + defaults_table()
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="exciton",
        description="Exciton diffusion on stacked-ring and helical arrays.",
        epilog=epilog,
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run-config TOML file")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, metavar="N", help="worker processes (default: all cores)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--profile", choices=("paper", "fast"), help="parameter profile (overrides experiment.profile)")
    common.add_argument("--seed", type=int, metavar="U64", help="base seed (overrides disorder.seed)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="run one trajectory", epilog=epilog, formatter_class=fmt)
    sub.add_parser("sweep", parents=[common], help="run an experiment grid", epilog=epilog, formatter_class=fmt)

    p = sub.add_parser("analytic", parents=[common], help="evaluate closed forms or spectra")
    p.add_argument("--n", type=int, help="sites per ring")
    p.add_argument("--N", type=int, help="number of rings (odd)")
    p.add_argument("--R", type=float, default=1.0, help="ring radius (default 1)")
    p.add_argument("--D", type=float, default=10.0, help="ring spacing (default 10)")
    p.add_argument("--t", type=float, default=1.0, help="time (default 1)")
    p.add_argument("--J", type=float, default=1.0, help="coupling strength (default 1)")
    p.add_argument("--gamma", type=float, help="dephasing rate for the haken-strobl reference")
    p.add_argument("--nearest-neighbor", action="store_true", help="keep only adjacent-ring couplings J/D^3")
    p.add_argument("--coefficients", metavar="CSV", help="N x n table of block coefficients h[j,k]")
    p.add_argument("--quantity", choices=("sigma", "spectrum", "haken-strobl"), default="sigma")

    p = sub.add_parser("validate", parents=[common], help="run the reproduction checks")
    p.add_argument("criteria", type=int, nargs="*", help="criterion numbers (default: all)")
    p.add_argument("-v", "--verbose", action="store_true", help="print every sub-check")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        if args.command in ("simulate", "sweep"):
            if not args.config:
                raise ConfigError("--config", f"{args.command} needs a config file")
            cfg = load_config(args.config)
            return _simulate(cfg, args) if args.command == "simulate" else _sweep(cfg, args)
        if args.command == "analytic":
            return _analytic(args)
        return _validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ExcitonError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
