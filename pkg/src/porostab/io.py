"""Run configuration files, VTK snapshots, diagnostics CSV and run manifests.

Config files are YAML with the sections ``scenario``, ``scheme``,
``stabilization``, ``schedule`` and ``output``.  Durations take a unit suffix
(``s``, ``d``, ``mo`` = 30 d, ``y`` = 365 d) and are stored in seconds.
Every float written by this module uses 17 significant digits so files
round-trip exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .cases import DAY, MONTH, YEAR, CantileverParams, StaircaseParams
from .errors import ConfigError
from .materials import StabilizationConfig
from .mesh import StructuredMesh, build_mesh
from .steppers import SchemeConfig, State, StepDiagnostics

TIME_UNITS = {"s": 1.0, "d": DAY, "mo": MONTH, "y": YEAR}
SCHEME_ALIASES = {"fim": "fully_implicit", "fully_implicit": "fully_implicit",
                  "fs": "fixed_stress", "fixed_stress": "fixed_stress"}
SCENARIO_PARAMS = {"cantilever": CantileverParams, "staircase": StaircaseParams}
# scenario parameters that are durations
TIME_PARAMS = {"period", "freeze_time", "injection_end"}

DIAGNOSTIC_COLUMNS = [f.name for f in fields(StepDiagnostics)]

_DURATION = re.compile(r"^\s*([-+0-9.eE]+)\s*(s|d|mo|y)?\s*$")


def fmt(x) -> str:
    return format(float(x), ".17g")


def parse_duration(value, key="duration") -> float:
    """Seconds from a number (already seconds) or a string like ``'0.1d'``."""
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a duration, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _DURATION.match(str(value))
    if not m:
        raise ConfigError(f"{key}: cannot parse duration {value!r} (units: s, d, mo, y)")
    try:
        number = float(m.group(1))
    except ValueError:
        raise ConfigError(f"{key}: cannot parse duration {value!r}") from None
    return number * TIME_UNITS[m.group(2) or "s"]


def parse_duration_list(text, key="dts"):
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    out = [parse_duration(v, key) for v in items if str(v).strip()]
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def _as_float(value, key):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _as_int(value, key):
    if isinstance(value, bool) or isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _as_bool(value, key):
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("on", "off", "true", "false"):
        return value.lower() in ("on", "true")
    raise ConfigError(f"{key}: expected on/off, got {value!r}")


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(section).__name__}")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}" if where else f"unknown key {unknown[0]}")


# --- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None
    snapshot_stride: int = 1
    vtk: bool = True

    def __post_init__(self):
        if self.snapshot_stride < 1:
            raise ConfigError("output.snapshot_stride must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "cantilever"
    # sorted (name, value) pairs so the config stays hashable and comparable
    overrides: tuple = ()
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    schedule: tuple = ()
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def override_dict(self):
        return dict(self.overrides)

    @property
    def total_time(self):
        return sum(dt * n for dt, n in self.schedule)


def coerce_override(scenario, key, value):
    params = SCENARIO_PARAMS[scenario]
    types = {f.name: f.type for f in fields(params)}
    if key not in types:
        raise ConfigError(f"unknown key scenario.overrides.{key} for scenario {scenario!r}")
    where = f"scenario.overrides.{key}"
    kind = types[key]
    if value is None:
        if "None" not in kind:
            raise ConfigError(f"{where}: may not be null")
        return None
    if kind.startswith("int"):
        return _as_int(value, where)
    if kind.startswith("tuple"):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_as_int(v, where) for v in value)
    if key in TIME_PARAMS:
        return parse_duration(value, where)
    return _as_float(value, where)


def _parse_scenario(sec):
    if isinstance(sec, str):
        sec = {"name": sec}
    _check_keys(sec, {"name", "overrides"}, "scenario")
    name = sec.get("name", "cantilever")
    if name not in SCENARIO_PARAMS:
        raise ConfigError(f"scenario.name: unknown scenario {name!r}; expected one of {sorted(SCENARIO_PARAMS)}")
    raw = sec.get("overrides") or {}
    if not isinstance(raw, dict):
        raise ConfigError("scenario.overrides: expected a mapping")
    overrides = tuple(sorted((str(k), coerce_override(name, str(k), v)) for k, v in raw.items()))
    return name, overrides


def _parse_stabilization(sec):
    _check_keys(sec, {"enabled", "c", "regions"}, "stabilization")
    regions = sec.get("regions")
    if regions is not None:
        if not isinstance(regions, (list, tuple)):
            regions = [regions]
        regions = frozenset(_as_int(r, "stabilization.regions") for r in regions)
    return StabilizationConfig(enabled=_as_bool(sec.get("enabled", False), "stabilization.enabled"),
                               c=_as_float(sec.get("c", 1.0), "stabilization.c"),
                               regions=regions)


def _parse_scheme(sec, stab):
    if isinstance(sec, str):
        sec = {"type": sec}
    _check_keys(sec, {"type", "fs_iterations", "fs_form"}, "scheme")
    kind = str(sec.get("type", "fully_implicit"))
    if kind not in SCHEME_ALIASES:
        raise ConfigError(f"scheme.type: unknown scheme {kind!r}; expected one of {sorted(SCHEME_ALIASES)}")
    return SchemeConfig(scheme=SCHEME_ALIASES[kind],
                        fs_iterations=_as_int(sec.get("fs_iterations", 1), "scheme.fs_iterations"),
                        fs_form=str(sec.get("fs_form", "stress_rate")),
                        stabilization=stab)


def _parse_schedule(sec):
    if sec is None:
        return ()
    if not isinstance(sec, list):
        raise ConfigError("schedule: expected a list of {dt, steps} entries")
    out = []
    for i, entry in enumerate(sec):
        where = f"schedule[{i}]"
        _check_keys(entry, {"dt", "steps"}, where)
        if "dt" not in entry or "steps" not in entry:
            raise ConfigError(f"{where}: needs both dt and steps")
        dt = parse_duration(entry["dt"], f"{where}.dt")
        n = _as_int(entry["steps"], f"{where}.steps")
        if not dt > 0 or n < 0:
            raise ConfigError(f"{where}: dt must be positive and steps non-negative")
        out.append((dt, n))
    return tuple(out)


def _parse_output(sec):
    _check_keys(sec, {"dir", "snapshot_stride", "vtk"}, "output")
    d = sec.get("dir")
    return OutputConfig(dir=None if d is None else str(d),
                        snapshot_stride=_as_int(sec.get("snapshot_stride", 1), "output.snapshot_stride"),
                        vtk=_as_bool(sec.get("vtk", True), "output.vtk"))


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"config parse error{where}: {problem}") from None
    if data is None:
        data = {}
    _check_keys(data, {"scenario", "scheme", "stabilization", "schedule", "output"}, "")
    name, overrides = _parse_scenario(data.get("scenario", {}))
    stab = _parse_stabilization(data.get("stabilization") or {})
    scheme = _parse_scheme(data.get("scheme") or {}, stab)
    return RunConfig(scenario=name, overrides=overrides, scheme=scheme,
                     schedule=_parse_schedule(data.get("schedule")),
                     output=_parse_output(data.get("output") or {}))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


class _Dumper(yaml.SafeDumper):
    pass


def _float_repr(dumper, value):
    if math.isnan(value):
        text = ".nan"
    elif math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = fmt(value)
        mant, _, exp = text.partition("e")
        if "." not in mant:
            mant += ".0"
        text = mant + ("e" + exp if exp else "")
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


_Dumper.add_representer(float, _float_repr)


def config_to_dict(cfg: RunConfig) -> dict:
    stab = cfg.scheme.stabilization
    overrides = {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.overrides}
    out = {
        "scenario": {"name": cfg.scenario, "overrides": overrides},
        "scheme": {"type": cfg.scheme.scheme, "fs_iterations": cfg.scheme.fs_iterations,
                   "fs_form": cfg.scheme.fs_form},
        "stabilization": {"enabled": stab.enabled, "c": float(stab.c),
                          "regions": None if stab.regions is None else sorted(stab.regions)},
        "output": {"dir": cfg.output.dir, "snapshot_stride": cfg.output.snapshot_stride,
                   "vtk": cfg.output.vtk},
    }
    if cfg.schedule:
        out["schedule"] = [{"dt": float(dt), "steps": int(n)} for dt, n in cfg.schedule]
    return out


def serialize(cfg: RunConfig) -> str:
    """YAML text that :func:`parse_config` maps back to an equal ``RunConfig``."""
    return yaml.dump(config_to_dict(cfg), Dumper=_Dumper, sort_keys=False,
                     default_flow_style=False)


# --- VTK -------------------------------------------------------------------

def write_vtk_snapshot(state: State, mesh: StructuredMesh, path, title=None):
    """Legacy ASCII structured grid: cell pressure, porosity, region, sigma_v; point displacement."""
    path = Path(path)
    title = title or f"porostab snapshot time_s={fmt(state.time)}"
    nx, ny, nz = mesh.shape
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET STRUCTURED_GRID", f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}",
             f"POINTS {mesh.n_nodes} double"]
    lines += [" ".join(fmt(c) for c in xyz) for xyz in mesh.node_coords]
    lines.append(f"CELL_DATA {mesh.n_cells}")
    for name, values in (("pressure", state.p), ("porosity", state.phi)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in values]
    lines += ["SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.region_of_cell]
    lines += ["SCALARS sigma_v double 1", "LOOKUP_TABLE default"]
    lines += [fmt(v) for v in state.sigma_v]
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines.append("VECTORS displacement double")
    lines += [" ".join(fmt(c) for c in d) for d in np.asarray(state.u).reshape(-1, 3)]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None
    return path


@dataclass
class VTKSnapshot:
    title: str
    dims: tuple
    points: np.ndarray
    cell_data: dict
    point_data: dict

    def mesh(self) -> StructuredMesh:
        """Rebuild the uniform mesh (with regions) the snapshot was written from."""
        nx, ny, nz = (d - 1 for d in self.dims)
        pts = self.points
        n1 = self.dims[0]
        n2 = n1 * self.dims[1]
        dx = pts[1, 0] - pts[0, 0] if nx else 1.0
        dy = pts[n1, 1] - pts[0, 1] if ny else 1.0
        dz = pts[n2, 2] - pts[0, 2] if nz else 1.0
        region = self.cell_data.get("region")
        if region is None:
            region = np.zeros(nx * ny * nz, dtype=int)
        region = np.asarray(region, dtype=int)
        return build_mesh(nx, ny, nz, dx, dy, dz,
                          lambda i, j, k: region[i + nx * (j + ny * k)],
                          origin=tuple(pts[0]))


def read_vtk_snapshot(path) -> VTKSnapshot:
    """Reader for the files written by :func:`write_vtk_snapshot`."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if not lines[0].startswith("# vtk") or lines[2].strip() != "ASCII":
            raise ValueError("not a legacy ASCII VTK file")
        title = lines[1]
        dims = tuple(int(v) for v in lines[4].split()[1:4])
        npts = int(lines[5].split()[1])
        points = np.array([[float(v) for v in ln.split()] for ln in lines[6:6 + npts]])
        i = 6 + npts
        cell_data, point_data, current, count = {}, {}, None, 0
        while i < len(lines):
            head = lines[i].split()
            if not head:
                i += 1
                continue
            if head[0] == "CELL_DATA":
                current, count = cell_data, int(head[1])
                i += 1
            elif head[0] == "POINT_DATA":
                current, count = point_data, int(head[1])
                i += 1
            elif head[0] == "SCALARS":
                conv = int if head[2] == "int" else float
                vals = [conv(v) for v in lines[i + 2:i + 2 + count]]
                current[head[1]] = np.array(vals)
                i += 2 + count
            elif head[0] == "VECTORS":
                vals = [[float(v) for v in ln.split()] for ln in lines[i + 1:i + 1 + count]]
                current[head[1]] = np.array(vals)
                i += 1 + count
            else:
                raise ValueError(f"unexpected line {i + 1}: {lines[i]!r}")
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed VTK file {path}: {exc}") from None
    return VTKSnapshot(title, dims, points, cell_data, point_data)


# --- CSV and manifest ------------------------------------------------------

def write_diagnostics(trajectory, path):
    diags = trajectory.diagnostics if hasattr(trajectory, "diagnostics") else trajectory
    if not diags:
        raise ConfigError("empty trajectory")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        for d in diags:
            row = asdict(d)
            w.writerow([row["step"]] + [fmt(row[c]) for c in DIAGNOSTIC_COLUMNS[1:]])
    return Path(path)


def read_diagnostics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rows]


def write_csv(rows, columns, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else fmt(v) for v in row])
    return Path(path)


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, files, path, extra=None):
    """JSON record of the resolved config, versions and output hashes (no timestamps)."""
    import scipy

    record = {
        "porostab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        # output location left out so identical runs give identical manifests
        "config": config_to_dict(replace(cfg, output=replace(cfg.output, dir=None))),
        "files": {Path(f).name: sha256(f) for f in sorted(files)},
    }
    if extra:
        record.update(extra)
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")
    return Path(path)
