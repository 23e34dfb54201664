"""Parameter sweeps: closed-system scaling, helix vs rings, disorder, dephasing.

Every sweep returns a :class:`SweepGrid`. Results are deterministic for a
given :class:`SweepSpec`: disorder seeds derive from
``(base_seed, point_index, realization_index)`` and grid points are reduced
in index order regardless of how the worker pool schedules them.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from exciton_transport.coupling import (
    CouplingKernel,
    DisorderSpec,
    assemble_hamiltonian,
    extract_block_coefficients,
    realization_seed,
    sample_disorder,
)
from exciton_transport.dynamics import (
    OpenSystemParams,
    delocalized_state,
    evolve_closed,
    evolve_lindblad,
    evolve_lindblad_symmetric,
    localized_state,
)
from exciton_transport.errors import InvalidParameterError
from exciton_transport.lattice import GeometryKind, build_lattice
from exciton_transport.observables import (
    fit_power_law,
    local_exponents,
    sigma_deloc_analytic,
    sigma_loc_analytic,
    trajectory_ring_populations,
)
from exciton_transport.spectral import operator_norm_bound

log = logging.getLogger(__name__)

STATES = ("delocalized", "localized")
KINDS = ("scaling", "helix", "disorder", "dephasing")
CROSSOVER_LEVEL = 0.75
NEAR_FIELD_SCALE = 0.1

AXIS_COLUMNS = ("state", "spacing", "gamma", "disorder_sigma", "n", "t", "level")


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs. Lists are stored as tuples.

    ``times`` is the sampling grid for time-resolved sweeps; ``t_eval`` is
    the time at which n-scaling, analytic comparisons and local exponents
    are reported. With ``near_field_autoscale`` the comparison time for
    ``spacing <= R`` becomes ``0.1 / ||H||`` and is recorded in the grid.
    """

    kind: str
    geometry: GeometryKind = GeometryKind.RING_STACK
    n_values: tuple = tuple(range(1, 8))
    N: int = 31
    R: float = 1.0
    spacings: tuple = (10.0,)
    gammas: tuple = (0.0,)
    kappa: float = 0.0
    times: tuple = (1.0,)
    t_eval: float = 1.0
    sigmas: tuple = (0.0,)
    realizations: int = 1
    base_seed: int = 0
    states: tuple = ("delocalized",)
    J: float = 1.0
    near_field_autoscale: bool = True
    window: int = 5
    sigma_levels: tuple = ()
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown experiment kind {self.kind!r}")
        if not isinstance(self.geometry, GeometryKind):
            object.__setattr__(self, "geometry", GeometryKind.from_string(self.geometry))
        for name in ("n_values", "spacings", "gammas", "times", "sigmas", "states", "sigma_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if name != "sigma_levels" and not getattr(self, name):
                raise InvalidParameterError(f"{name} must not be empty")
        if self.realizations < 1:
            raise InvalidParameterError("realizations must be >= 1")
        for s in self.states:
            if s not in STATES:
                raise InvalidParameterError(f"unknown initial state {s!r}")
        if any(np.diff(self.times) <= 0) or self.times[0] < 0:
            raise InvalidParameterError("times must be >= 0 and strictly increasing")
        if self.jobs < 1:
            raise InvalidParameterError("jobs must be >= 1")

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["geometry"] = str(self.geometry)
        return d


@dataclass
class SweepGrid:
    """Values over a named parameter grid.

    ``mean_sigma`` and ``stderr`` and every array in ``stats`` share the
    shape given by ``axes`` (in insertion order). ``summary`` holds scalar
    results such as fitted exponents, and ``tables`` holds secondary grids.
    """

    kind: str
    axes: dict
    mean_sigma: np.ndarray
    stderr: np.ndarray
    stats: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(v) for v in self.axes.values())
        for name, arr in [("mean_sigma", self.mean_sigma), ("stderr", self.stderr), *self.stats.items()]:
            if np.shape(arr) != shape:
                raise InvalidParameterError(f"{name} has shape {np.shape(arr)}, axes give {shape}")

    def index(self, **coords):
        """Integer index tuple for axis values, e.g. ``grid.index(n=3, t=1.0)``."""
        idx = []
        for name, values in self.axes.items():
            if name not in coords:
                idx.append(slice(None))
                continue
            values = list(values)
            target = coords[name]
            if isinstance(target, str):
                idx.append(values.index(target))
            else:
                idx.append(int(np.argmin(np.abs(np.asarray(values, dtype=float) - target))))
        return tuple(idx)

    def rows(self, table="main"):
        names = list(self.axes)
        series = {"mean_sigma": self.mean_sigma, "stderr": self.stderr, **self.stats}
        for flat in np.ndindex(self.mean_sigma.shape):
            coords = {name: self.axes[name][i] for name, i in zip(names, flat)}
            for stat, arr in series.items():
                yield table, coords, stat, arr[flat]
        for name, sub in self.tables.items():
            yield from sub.rows(name)
        if table == "main":
            for key, value in self.summary.items():
                yield "summary", {}, key, value

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["table", *AXIS_COLUMNS, "statistic", "value"])
            for table, coords, stat, value in self.rows():
                writer.writerow([table, *(_fmt(coords.get(c, "")) for c in AXIS_COLUMNS), stat, _fmt(value)])


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.12g}"


def write_results(grid: SweepGrid, out_dir, spec: SweepSpec, config=None, wall_time=None):
    """Write ``results.csv`` and ``manifest.json`` into ``out_dir``."""
    from exciton_transport import __version__

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid.write_csv(out / "results.csv")
    manifest = {
        "tool": "exciton_transport",
        "version": __version__,
        "kind": grid.kind,
        "spec": spec.as_dict(),
        "config": config,
        "base_seed": spec.base_seed,
        "seed_scheme": "SeedSequence(base_seed, spawn_key=(point_index, realization_index))",
        "meta": grid.meta,
        "summary": {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in grid.summary.items()},
        "wall_time_s": wall_time,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return out / "results.csv", out / "manifest.json"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, GeometryKind):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _map(func, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def crossing_time(ts, values, level=CROSSOVER_LEVEL):
    """First abscissa where ``values`` falls through ``level``, log-interpolated."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    for i in range(1, len(values)):
        a, b = values[i - 1], values[i]
        if np.isfinite(a) and np.isfinite(b) and a >= level > b:
            frac = (a - level) / (a - b)
            return float(np.exp(np.log(ts[i - 1]) + frac * (np.log(ts[i]) - np.log(ts[i - 1]))))
    return float("nan")


def _initial(lat, state):
    return delocalized_state(lat) if state == "delocalized" else localized_state(lat)


def _comparison_time(spec, H, spacing):
    if spec.near_field_autoscale and spacing <= spec.R:
        return NEAR_FIELD_SCALE / operator_norm_bound(H)
    return spec.t_eval


def _ring_pops(lat, H, state, gamma, kappa, times):
    """Ring populations over ``times`` using the cheapest exact route."""
    if gamma == 0 and kappa == 0:
        traj = evolve_closed(H, _initial(lat, state), times)
    elif lat.kind is GeometryKind.RING_STACK and not np.any(H.offsets):
        traj = evolve_lindblad_symmetric(H, lat, OpenSystemParams(gamma, kappa), state, times)
    else:
        traj = evolve_lindblad(H, OpenSystemParams(gamma, kappa), _initial(lat, state), times, keep_states=False)
    return trajectory_ring_populations(traj, lat)


def _sigma_from_pops(pops, lat):
    labels = lat.ring_labels.astype(float)
    return lat.spacing * np.sqrt(np.clip(pops, 0.0, None) @ labels**2)


def _comparison_point(args):
    spec, geometry, gamma, state, spacing, n = args
    kernel = CouplingKernel(spec.J)
    lat = build_lattice(geometry, n, spec.N, spec.R, spacing)
    H = assemble_hamiltonian(lat, kernel)
    t = _comparison_time(spec, H, spacing)
    sigma = float(_sigma_from_pops(_ring_pops(lat, H, state, gamma, spec.kappa, [t]), lat)[0])
    h = extract_block_coefficients(n, spec.N, spec.R, spacing, kernel)
    analytic = float((sigma_deloc_analytic if state == "delocalized" else sigma_loc_analytic)(h, t))
    return sigma, analytic, t


def _comparison_table(spec, geometry, gamma):
    shape = (len(spec.states), len(spec.spacings), len(spec.n_values))
    items = [
        (spec, geometry, gamma, state, spacing, n)
        for state in spec.states
        for spacing in spec.spacings
        for n in spec.n_values
    ]
    results = np.array(_map(_comparison_point, items, spec.jobs)).reshape(*shape, 3)
    sigma, analytic, t = results[..., 0], results[..., 1], results[..., 2]
    spacing = np.asarray(spec.spacings, dtype=float)[None, :, None]
    axes = {
        "gamma": np.array([gamma]),
        "state": np.array(spec.states),
        "spacing": np.asarray(spec.spacings, dtype=float),
        "n": np.asarray(spec.n_values),
    }
    stats = {
        "sigma_per_spacing_time": (sigma / (spacing * t))[None],
        "analytic": analytic[None],
        "analytic_per_spacing_time": (analytic / (spacing * t))[None],
        "rel_error": (np.abs(sigma - analytic) / analytic)[None],
        "t": t[None],
    }
    summary = {}
    if len(spec.n_values) >= 3:
        for i, state in enumerate(spec.states):
            for j, d in enumerate(spec.spacings):
                key = f"gamma={gamma:g},state={state},spacing={d:g}"
                summary[f"alpha[{key}]"] = fit_power_law(spec.n_values, sigma[i, j] / t[i, j]).exponent
                summary[f"alpha_analytic[{key}]"] = fit_power_law(spec.n_values, analytic[i, j] / t[i, j]).exponent
                summary[f"max_rel_error[{key}]"] = float(stats["rel_error"][0, i, j].max())
    return SweepGrid("comparison", axes, sigma[None], np.zeros((1, *shape)), stats, summary)


def run_scaling_experiment(spec: SweepSpec) -> SweepGrid:
    """Closed-system diffusion length versus n, paired with the closed forms."""
    if any(spec.gammas) or any(spec.sigmas) or spec.kappa:
        raise InvalidParameterError("scaling experiment is closed-system: gamma, sigma, kappa must be 0")
    grid = _comparison_table(spec, GeometryKind.RING_STACK, 0.0)
    return _drop_gamma(grid, "scaling", spec)


def compare_with_closed_forms(spec: SweepSpec, gamma: float = 0.0) -> SweepGrid:
    """Numerical diffusion length at the comparison time against the closed forms.

    Axes are (gamma, state, spacing, n); only the comparison time is
    propagated, so no time grid is needed.
    """
    if any(spec.sigmas):
        raise InvalidParameterError("closed-form comparison runs without disorder")
    return _comparison_table(spec, GeometryKind.RING_STACK, float(gamma))


def run_helix_approximation(spec: SweepSpec) -> SweepGrid:
    """Helix numerics against the closed forms of rings stacked at the pitch."""
    if any(spec.gammas) or any(spec.sigmas) or spec.kappa:
        raise InvalidParameterError("helix approximation is closed-system")
    grid = _comparison_table(spec, GeometryKind.HELIX, 0.0)
    return _drop_gamma(grid, "helix", spec)


def _drop_gamma(grid, kind, spec):
    axes = {k: v for k, v in grid.axes.items() if k != "gamma"}
    summary = {k.replace("gamma=0,", ""): v for k, v in grid.summary.items()}
    return SweepGrid(
        kind,
        axes,
        grid.mean_sigma[0],
        grid.stderr[0],
        {k: v[0] for k, v in grid.stats.items()},
        summary,
        meta={"near_field_scale": NEAR_FIELD_SCALE if spec.near_field_autoscale else None},
    )


def _disorder_point(args):
    spec, point_index, state, disorder, n = args
    lat = build_lattice(spec.geometry, n, spec.N, spec.R, spec.spacings[0])
    H0 = assemble_hamiltonian(lat, CouplingKernel(spec.J))
    labels2 = lat.ring_labels.astype(float) ** 2
    sum_pops = np.zeros((len(spec.times), lat.N))
    moments = np.empty((spec.realizations, len(spec.times)))
    for r in range(spec.realizations):
        offsets = sample_disorder(DisorderSpec(disorder, realization_seed(spec.base_seed, point_index, r)), lat.num_sites)
        pops = trajectory_ring_populations(evolve_closed(H0.with_offsets(offsets), _initial(lat, state), spec.times), lat)
        sum_pops += pops
        moments[r] = np.clip(pops, 0.0, None) @ labels2
    return sum_pops / spec.realizations, moments


def run_disorder_sweep(spec: SweepSpec) -> SweepGrid:
    """Ensemble diffusion length over (state, disorder, n, t), closed dynamics.

    ``mean_sigma`` is the diffusion length of the ensemble-averaged ring
    populations; ``stderr`` is its delta-method standard error. The mean
    and standard error of the per-realization diffusion lengths are kept in
    ``stats``.
    """
    if any(spec.gammas) or spec.kappa:
        raise InvalidParameterError("disorder sweep runs closed dynamics: gamma and kappa must be 0")
    D = spec.spacings[0]
    shape = (len(spec.states), len(spec.sigmas), len(spec.n_values), len(spec.times))
    items = []
    for i, state in enumerate(spec.states):
        for j, disorder in enumerate(spec.sigmas):
            for k, n in enumerate(spec.n_values):
                point = np.ravel_multi_index((i, j, k), shape[:3])
                items.append((spec, int(point), state, disorder, n))
    results = _map(_disorder_point, items, spec.jobs)

    mean_sigma = np.empty(shape)
    stderr = np.empty(shape)
    real_mean = np.empty(shape)
    real_err = np.empty(shape)
    for (_, point, *_), (mean_pops, moments) in zip(items, results):
        idx = np.unravel_index(point, shape[:3])
        labels2 = (np.arange(spec.N) - spec.N // 2) ** 2
        m = np.clip(mean_pops, 0.0, None) @ labels2
        mean_sigma[idx] = D * np.sqrt(m)
        sem = moments.std(axis=0, ddof=1) / math.sqrt(spec.realizations) if spec.realizations > 1 else 0.0 * m
        with np.errstate(divide="ignore", invalid="ignore"):
            stderr[idx] = np.where(m > 0, D * sem / (2.0 * np.sqrt(m)), 0.0)
        per = D * np.sqrt(moments)
        real_mean[idx] = per.mean(axis=0)
        real_err[idx] = per.std(axis=0, ddof=1) / math.sqrt(spec.realizations) if spec.realizations > 1 else 0.0

    axes = {
        "state": np.array(spec.states),
        "disorder_sigma": np.asarray(spec.sigmas, dtype=float),
        "n": np.asarray(spec.n_values),
        "t": np.asarray(spec.times, dtype=float),
    }
    stats = {"sigma_realization_mean": real_mean, "sigma_realization_stderr": real_err}
    summary = {}
    if len(spec.times) >= spec.window:
        lam = np.full(shape, np.nan)
        half = spec.window // 2
        for idx in np.ndindex(shape[:3]):
            if np.all(mean_sigma[idx] > 0):
                lam[idx][half : len(spec.times) - half] = local_exponents(spec.times, mean_sigma[idx], spec.window)[1]
        stats["lambda"] = lam
    grid = SweepGrid("disorder", axes, mean_sigma, stderr, stats, summary)

    t_idx = int(np.argmin(np.abs(np.asarray(spec.times) - spec.t_eval)))
    for i, state in enumerate(spec.states):
        if len(spec.n_values) >= 3:
            for j, disorder in enumerate(spec.sigmas):
                summary[f"alpha[state={state},disorder_sigma={disorder:g}]"] = fit_power_law(
                    spec.n_values, mean_sigma[i, j, :, t_idx]
                ).exponent
        if "lambda" in stats:
            for k, n in enumerate(spec.n_values):
                summary[f"sigma_star[state={state},n={n}]"] = crossing_time(spec.sigmas, stats["lambda"][i, :, k, t_idx]) if min(spec.sigmas) > 0 else float("nan")
    grid.tables["level_curves"] = _level_curves(spec, mean_sigma[:, :, :, t_idx])
    grid.meta = {"t_eval": float(spec.times[t_idx]), "crossover_level": CROSSOVER_LEVEL}
    return grid


def _level_curves(spec, sigma_at_t):
    """Disorder strength at which sigma(n) falls to each level."""
    levels = spec.sigma_levels
    if not levels:
        positive = sigma_at_t[sigma_at_t > 0]
        if positive.size == 0:
            levels = (0.0,)
        else:
            levels = tuple(np.geomspace(positive.min(), positive.max(), 7)[1:-1])
    shape = (len(spec.states), len(levels), len(spec.n_values))
    out = np.full(shape, np.nan)
    sigmas = np.asarray(spec.sigmas, dtype=float)
    for i in range(len(spec.states)):
        for li, level in enumerate(levels):
            for k in range(len(spec.n_values)):
                curve = sigma_at_t[i, :, k]
                if min(spec.sigmas) > 0:
                    out[i, li, k] = crossing_time(sigmas, curve, level)
    axes = {"state": np.array(spec.states), "level": np.asarray(levels, dtype=float), "n": np.asarray(spec.n_values)}
    return SweepGrid("level_curves", axes, out, np.zeros(shape), {})


def _dephasing_point(args):
    spec, gamma, state, spacing, n = args
    lat = build_lattice(spec.geometry, n, spec.N, spec.R, spacing)
    H = assemble_hamiltonian(lat, CouplingKernel(spec.J))
    return _sigma_from_pops(_ring_pops(lat, H, state, gamma, spec.kappa, spec.times), lat)


def run_dephasing_sweep(spec: SweepSpec) -> SweepGrid:
    """Diffusion length over (gamma, state, spacing, n, t) without disorder.

    Adds local time exponents ``lambda``, an ``alpha`` table of n-exponents
    over time, crossover times where each falls through 0.75, and a
    ``comparison`` table against the closed forms at ``t_eval``.
    """
    if any(spec.sigmas):
        raise InvalidParameterError("dephasing sweep runs without disorder: sigmas must be 0")
    shape = (len(spec.gammas), len(spec.states), len(spec.spacings), len(spec.n_values), len(spec.times))
    items = [
        (spec, g, state, d, n)
        for g in spec.gammas
        for state in spec.states
        for d in spec.spacings
        for n in spec.n_values
    ]
    sigma = np.array(_map(_dephasing_point, items, spec.jobs)).reshape(shape)
    axes = {
        "gamma": np.asarray(spec.gammas, dtype=float),
        "state": np.array(spec.states),
        "spacing": np.asarray(spec.spacings, dtype=float),
        "n": np.asarray(spec.n_values),
        "t": np.asarray(spec.times, dtype=float),
    }
    stats = {}
    summary = {}
    times = np.asarray(spec.times, dtype=float)
    if len(times) >= spec.window:
        lam = np.full(shape, np.nan)
        half = spec.window // 2
        for idx in np.ndindex(shape[:4]):
            if np.all(sigma[idx] > 0):
                lam[idx][half : len(times) - half] = local_exponents(times, sigma[idx], spec.window)[1]
        stats["lambda"] = lam
        for idx in np.ndindex(shape[:4]):
            g, state, d, n = (spec.gammas[idx[0]], spec.states[idx[1]], spec.spacings[idx[2]], spec.n_values[idx[3]])
            summary[f"t_lambda[gamma={g:g},state={state},spacing={d:g},n={n}]"] = crossing_time(times, lam[idx])
    grid = SweepGrid("dephasing", axes, sigma, np.zeros(shape), stats, summary)

    if len(spec.n_values) >= 3:
        alpha = np.full(shape[:3] + (len(times),), np.nan)
        for idx in np.ndindex(shape[:3]):
            for ti in range(len(times)):
                col = sigma[idx][:, ti]
                if np.all(col > 0):
                    alpha[idx + (ti,)] = fit_power_law(spec.n_values, col).exponent
            g, state, d = spec.gammas[idx[0]], spec.states[idx[1]], spec.spacings[idx[2]]
            summary[f"t_alpha[gamma={g:g},state={state},spacing={d:g}]"] = crossing_time(times, alpha[idx])
        a_axes = {k: axes[k] for k in ("gamma", "state", "spacing", "t")}
        grid.tables["alpha"] = SweepGrid("alpha", a_axes, alpha, np.zeros(alpha.shape))

    comparisons = [_comparison_table(spec, spec.geometry, g) for g in spec.gammas]
    if spec.geometry is GeometryKind.RING_STACK:
        merged = comparisons[0]
        for extra in comparisons[1:]:
            merged = _stack_gamma(merged, extra)
        grid.tables["comparison"] = merged
        summary.update(merged.summary)
    grid.meta = {"crossover_level": CROSSOVER_LEVEL, "t_eval": spec.t_eval}
    return grid


def _stack_gamma(a, b):
    axes = dict(a.axes)
    axes["gamma"] = np.concatenate([a.axes["gamma"], b.axes["gamma"]])
    stats = {k: np.concatenate([a.stats[k], b.stats[k]]) for k in a.stats}
    return SweepGrid(
        "comparison",
        axes,
        np.concatenate([a.mean_sigma, b.mean_sigma]),
        np.concatenate([a.stderr, b.stderr]),
        stats,
        {**a.summary, **b.summary},
    )


RUNNERS = {
    "scaling": run_scaling_experiment,
    "helix": run_helix_approximation,
    "disorder": run_disorder_sweep,
    "dephasing": run_dephasing_sweep,
}


def run_sweep(spec: SweepSpec) -> SweepGrid:
    start = _time.perf_counter()
    grid = RUNNERS[spec.kind](spec)
    log.info("%s sweep finished in %.2fs", spec.kind, _time.perf_counter() - start)
    return grid


def profile_spec(kind: str, profile: str = "fast", **overrides) -> SweepSpec:
    """Default :class:`SweepSpec` for ``kind`` under the ``paper`` or ``fast`` profile."""
    if profile not in ("paper", "fast"):
        raise InvalidParameterError(f"unknown profile {profile!r}")
    paper = profile == "paper"
    n_values = tuple(range(1, 11)) if paper else tuple(range(1, 7))
    base = dict(kind=kind, N=31, R=1.0, spacings=(10.0,), J=1.0, t_eval=1.0, n_values=n_values)
    if kind == "scaling":
        base.update(spacings=(0.1, 1.0, 10.0), states=STATES, times=(1.0,))
    elif kind == "helix":
        base.update(geometry=GeometryKind.HELIX, spacings=(0.1, 1.0, 10.0), states=STATES, times=(1.0,))
    elif kind == "disorder":
        base.update(
            sigmas=tuple(10.0 ** np.arange(-4.0, 2.01, 0.5)),
            realizations=500 if paper else 50,
            times=tuple(2.0 ** np.linspace(-1, 1, 5)),
        )
    elif kind == "dephasing":
        base.update(gammas=(0.1, 1.0, 10.0), times=tuple(np.geomspace(0.01, 10.0, 31)))
    base.update(overrides)
    return SweepSpec(**base)
