"""Run-config files (TOML) for the command-line tool.

A config has up to six tables: ``geometry``, ``coupling``, ``dynamics``
(with an optional ``dynamics.integrator`` sub-table), ``disorder``,
``experiment`` and ``output``. Every key is listed in :data:`FIELDS`
together with its default. Unknown keys and bad values raise
:class:`~exciton_transport.errors.ConfigError` carrying the dotted key path.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from exciton_transport.errors import ConfigError

REQUIRED = object()


@dataclass(frozen=True)
class Field:
    path: str
    default: object
    kind: str
    doc: str
    minimum: float | None = None
    strict_min: bool = False
    choices: tuple = ()


FIELDS = (
    Field("geometry.kind", REQUIRED, "str", "lattice family", choices=("rings", "helix")),
    Field("geometry.n", REQUIRED, "int", "sites per ring (per helical turn)", minimum=1),
    Field("geometry.N", REQUIRED, "int", "number of rings (turns)", minimum=1),
    Field("geometry.R", 1.0, "float", "ring radius", minimum=0, strict_min=True),
    Field("geometry.spacing", REQUIRED, "float", "ring spacing D (helix pitch d)", minimum=0, strict_min=True),
    Field("coupling.J", 1.0, "float", "coupling strength in J/r^3"),
    Field("dynamics.gamma", 0.0, "float", "pure-dephasing rate", minimum=0),
    Field("dynamics.kappa", 0.0, "float", "recombination rate", minimum=0),
    Field("dynamics.t_max", 1.0, "float", "final time", minimum=0, strict_min=True),
    Field("dynamics.n_time_samples", 101, "int", "samples on [0, t_max]", minimum=2),
    Field("dynamics.state", "delocalized", "str", "initial state", choices=("delocalized", "localized")),
    Field("dynamics.renormalize", False, "bool", "divide ring populations by the surviving trace"),
    Field("dynamics.integrator.dt_override", None, "float?", "fixed RK4 step (default: automatic)", minimum=0, strict_min=True),
    Field("disorder.sigma", 0.0, "float", "std. dev. of on-site energy offsets", minimum=0),
    Field("disorder.seed", 0, "int", "base seed for disorder draws", minimum=0),
    Field("disorder.realizations", 1, "int", "disorder realizations per grid point", minimum=1),
    Field("experiment.kind", REQUIRED, "str", "sweep type", choices=("scaling", "helix", "disorder", "dephasing")),
    Field("experiment.profile", "fast", "str", "parameter profile for omitted lists", choices=("fast", "paper")),
    Field("experiment.n_values", None, "int[]", "values of n (default: profile)", minimum=1),
    Field("experiment.spacings", None, "float[]", "spacings D (default: profile)", minimum=0, strict_min=True),
    Field("experiment.gammas", None, "float[]", "dephasing rates (default: profile)", minimum=0),
    Field("experiment.sigmas", None, "float[]", "disorder strengths (default: profile)", minimum=0),
    Field("experiment.times", None, "float[]", "sampling times (default: profile)", minimum=0),
    Field("experiment.t_eval", None, "float?", "comparison / scaling time (default: profile)", minimum=0, strict_min=True),
    Field("experiment.states", None, "str[]", "initial states (default: profile)", choices=("delocalized", "localized")),
    Field("experiment.near_field_autoscale", True, "bool", "use t = 0.1/||H|| when spacing <= R"),
    Field("experiment.window", 5, "int", "samples per local-exponent window", minimum=3),
    Field("output.dir", "out", "str", "output directory"),
    Field("output.debug_hamiltonian", False, "bool", "also write hamiltonian.csv (simulate)"),
)

_BY_PATH = {f.path: f for f in FIELDS}
SECTIONS = ("geometry", "coupling", "dynamics", "disorder", "experiment", "output")


def _fmt_default(value):
    if value is REQUIRED:
        return "(required)"
    if value is None:
        return "(unset)"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, str):
        return f'"{value}"'
    return repr(value)


def defaults_table() -> str:
    """Every config key with its default, one per line (used in ``--help``)."""
    width = max(len(f.path) for f in FIELDS)
    lines = []
    for f in FIELDS:
        lines.append(f"  {f.path:<{width}}  {_fmt_default(f.default):<12} {f.doc}")
    return "\n".join(lines)


def _check_scalar(f: Field, value, path):
    kind = f.kind.rstrip("?").removesuffix("[]")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise ConfigError(path, "must be finite")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
    if f.choices and value not in f.choices:
        raise ConfigError(path, f"must be one of {', '.join(f.choices)}; got {value!r}")
    if f.minimum is not None and kind in ("int", "float"):
        if value < f.minimum or (f.strict_min and value == f.minimum):
            rel = ">" if f.strict_min else ">="
            raise ConfigError(path, f"must be {rel} {f.minimum:g}; got {value!r}")
    return value


def _check(f: Field, value):
    if value is None:
        return None
    if f.kind.endswith("[]"):
        if not isinstance(value, list) or not value:
            raise ConfigError(f.path, "expected a non-empty list")
        return [_check_scalar(f, v, f"{f.path}[{i}]") for i, v in enumerate(value)]
    return _check_scalar(f, value, f.path)


def _flatten(table, prefix=""):
    out = {}
    for key, value in table.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            if not prefix and key not in SECTIONS:
                raise ConfigError(path, f"unknown section; expected one of {', '.join(SECTIONS)}")
            if path not in ("dynamics.integrator",) and prefix:
                raise ConfigError(path, "unexpected sub-table")
            out.update(_flatten(value, path + "."))
        else:
            if not prefix:
                raise ConfigError(path, "top-level keys must live in a section")
            out[path] = value
    return out


@dataclass
class RunConfig:
    """Validated config. ``values`` maps dotted paths to default-filled values;
    ``explicit`` holds the paths present in the source."""

    values: dict
    explicit: frozenset = field(default_factory=frozenset)
    source: str | None = None

    def __getitem__(self, path):
        return self.values[path]

    def require(self, *paths):
        for path in paths:
            if self.values.get(path, REQUIRED) is REQUIRED:
                raise ConfigError(path, "required key is missing")

    def is_set(self, path) -> bool:
        return path in self.explicit

    def as_nested(self) -> dict:
        """Default-filled config as nested tables; required-but-missing keys omitted."""
        out: dict = {}
        for path, value in self.values.items():
            if value is REQUIRED:
                continue
            node = out
            *parents, leaf = path.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return out


def parse_config(data: dict, source: str | None = None) -> RunConfig:
    flat = _flatten(data)
    values = {}
    for path in flat:
        if path not in _BY_PATH:
            raise ConfigError(path, "unknown key")
    for f in FIELDS:
        values[f.path] = _check(f, flat[f.path]) if f.path in flat else f.default
    return RunConfig(values, frozenset(flat), source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"malformed TOML: {exc}") from exc
    return parse_config(data, str(path))
