"""Sensor logs, run configuration files and result export.

CSV files start with a ``time_s`` column; numbers are written with 17
significant digits so every finite double survives a round trip.  JSON
documents carry a ``schema_version`` field.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from ._layout import CLOSED_INPUTS, CLOSED_STATES, DISTURBANCES, PARTIAL_INPUTS, STATE_NAMES
from .errors import ConfigError, DataError
from .params import ModelOptions, ParameterSet
from .reactor import TABLE_A1_SYMBOLS

__all__ = [
    "SCHEMA_VERSION",
    "CONFIG_DIR_ENV",
    "SYMBOL_UNITS",
    "SensorLog",
    "RunConfig",
    "load_sensor_csv",
    "write_csv",
    "trajectory_rows",
    "write_trajectory_csv",
    "write_json",
    "read_json",
    "load_config",
    "resolve_config_path",
    "format_number",
]

SCHEMA_VERSION = 1
CONFIG_DIR_ENV = "HERMETIA_CONFIG_DIR"

SYMBOL_UNITS = {
    "time_s": "s",
    "T_out": "degC", "H_out": "kg/m3", "C_out": "kg/m3", "O_out": "kg/m3",
    "T_air": "degC", "H_air": "kg/m3", "C_air": "kg/m3", "O_air": "kg/m3",
    "T_med": "degC", "T_chm": "degC", "T_hx": "degC",
    "B_med": "kg", "W_med": "kg", "N_feed": "kg", "N_exc": "kg", "W_chm": "kg", "W_hx": "kg",
    "B_dry": "g", "B_wet": "g", "T_sigma": "h",
}
RATE_NAMES = ("r_assim", "r_maint", "r_mat", "r_B_mat", "r_T", "r_Fgrw", "r_A", "r_dev")
KNOWN_CHANNELS = frozenset(
    (*CLOSED_STATES, *CLOSED_INPUTS, *PARTIAL_INPUTS, *DISTURBANCES, *TABLE_A1_SYMBOLS, *RATE_NAMES, "L_num")
)


def format_number(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


# -- sensor logs ------------------------------------------------------------------


@dataclass
class SensorLog:
    """Time series keyed by symbol name; missing samples are NaN."""

    times: np.ndarray
    channels: dict[str, np.ndarray]
    units: dict[str, str] = field(default_factory=dict)
    opaque: tuple[str, ...] = ()

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.channels)

    def to_dataset(self, channels: Sequence[str] | None = None):
        from .estimate import Dataset

        names = tuple(channels or [c for c in self.channels if c in CLOSED_STATES])
        missing = [c for c in names if c not in self.channels]
        if missing:
            raise DataError(f"sensor log has no channel(s) {missing}")
        return Dataset(self.times, names, np.column_stack([self.channels[c] for c in names]))

    def disturbance(self):
        """Outside-air trace from the ``T_out, H_out, C_out, O_out`` columns."""
        from .integrate import DisturbanceTrace

        missing = [c for c in DISTURBANCES if c not in self.channels]
        if missing:
            raise DataError(f"disturbance columns missing: {missing}")
        vals = np.column_stack([self.channels[c] for c in DISTURBANCES])
        ok = np.all(np.isfinite(vals), axis=1)
        return DisturbanceTrace(self.times[ok], vals[ok])


def _parse_units(comment: str) -> dict[str, str]:
    body = comment.lstrip("#").strip()
    if not body.lower().startswith("units:"):
        return {}
    out = {}
    for item in body.split(":", 1)[1].split(","):
        if "=" in item:
            k, v = item.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_sensor_csv(path: str | os.PathLike) -> SensorLog:
    """Read a sensor CSV.

    Lines starting with ``#`` are comments; ``# units: T_out=degC, ...``
    declares units.  Empty cells become NaN.  Unknown column names are kept
    as opaque channels with a warning.

    Raises:
        DataError: missing ``time_s`` column, non-increasing or duplicate
            times, or an unparseable number (row and column are named).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"sensor file {str(path)!r} does not exist")
    units: dict[str, str] = {}
    rows: list[tuple[int, list[str]]] = []
    header: list[str] | None = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].lstrip().startswith("#"):
                units.update(_parse_units(",".join(row)))
                continue
            if header is None:
                header = [h.strip() for h in row]
                continue
            rows.append((lineno, row))
    if header is None:
        raise DataError(f"{path}: no header row")
    if header[0] != "time_s":
        raise DataError(f"{path}: first column must be 'time_s', found {header[0]!r}")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    data = np.full((len(rows), len(header)), np.nan)
    for i, (lineno, row) in enumerate(rows):
        if len(row) > len(header):
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {lineno}, column {header[j]!r}: cannot parse {cell!r}") from None
    t = data[:, 0]
    if np.any(~np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0])
        raise DataError(f"{path}: line {rows[bad][0]}: missing or non-finite time")
    for i in range(1, t.size):
        if t[i] <= t[i - 1]:
            kind = "duplicate" if t[i] == t[i - 1] else "decreasing"
            raise DataError(f"{path}: line {rows[i][0]}: {kind} timestamp {format_number(t[i])}")
    channels = {}
    opaque = []
    for j, name in enumerate(header[1:], start=1):
        channels[name] = data[:, j].copy()
        if name not in KNOWN_CHANNELS:
            opaque.append(name)
    if opaque:
        warnings.warn(f"{path}: unknown column(s) kept as opaque channels: {opaque}", stacklevel=2)
    for name in header:
        units.setdefault(name, SYMBOL_UNITS.get(name, ""))
    return SensorLog(t, channels, units, tuple(opaque))


def write_csv(path: str | os.PathLike, times: Sequence[float], columns: Mapping[str, Sequence[float]],
              units: Mapping[str, str] | None = None) -> None:
    """Write a ``time_s``-first CSV with 17 significant digits."""
    times = np.asarray(times, dtype=float)
    cols = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    for k, v in cols.items():
        if v.shape != times.shape:
            raise DataError(f"column {k!r} has {v.size} values, expected {times.size}")
    names = ["time_s", *cols]
    u = {n: (units or {}).get(n, SYMBOL_UNITS.get(n, "")) for n in names}
    with Path(path).open("w", newline="") as fh:
        fh.write("# units: " + ", ".join(f"{n}={u[n]}" for n in names if u[n]) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(times.size):
            w.writerow([format_number(times[i])] + [format_number(cols[k][i]) for k in cols])


def trajectory_rows(traj, model=None, fluxes: bool = True) -> dict[str, np.ndarray]:
    """State, input and disturbance columns of a trajectory (plus flux columns)."""
    cols = {n: traj.x[:, i] for i, n in enumerate(traj.state_names)}
    cols.update({n: traj.u[:, i] for i, n in enumerate(traj.input_names)})
    cols.update({n: traj.d[:, i] for i, n in enumerate(DISTURBANCES)})
    cols["L_num"] = traj.L_num
    if fluxes and model is not None:
        reports = traj.fluxes if traj.fluxes is not None else traj.compute_fluxes(model)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows = [r.as_row(include_rates=True) for r in reports]
        for key in rows[0]:
            cols[key] = np.array([r[key] for r in rows])
    return cols


def write_trajectory_csv(path, traj, model=None, fluxes: bool = True) -> None:
    write_csv(path, traj.t, trajectory_rows(traj, model, fluxes))


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: str | os.PathLike | None, doc: Mapping[str, Any], kind: str) -> str:
    """Serialise a result document; returns the text (also written when ``path`` is given)."""
    body = {"schema_version": SCHEMA_VERSION, "kind": kind, **_jsonable(dict(doc))}
    text = json.dumps(body, indent=2, sort_keys=False, allow_nan=False)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def read_json(path: str | os.PathLike) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"result file {str(path)!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


# -- run configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    """Validated contents of a run configuration file."""

    kind: str = "closed"
    params: ParameterSet = field(default_factory=ParameterSet)
    options: ModelOptions = field(default_factory=ModelOptions)
    L_num: float = 2000.0
    initial: dict[str, float] = field(default_factory=dict)
    disturbance: dict[str, Any] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    integrator: dict[str, Any] = field(default_factory=dict)
    controller: dict[str, Any] = field(default_factory=dict)
    estimation: dict[str, Any] = field(default_factory=dict)
    ocp: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def hours(self) -> float:
        return float(self.integrator.get("hours", 192.0))

    def model(self):
        from .reactor import SetupConfig

        return SetupConfig(kind=self.kind, params=self.params, L_num=self.L_num, options=self.options)

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def disturbance_trace(self):
        from .scenarios import outside_trace
        from .integrate import DisturbanceTrace

        d = self.disturbance
        if "file" in d:
            return load_sensor_csv(self.path(d["file"])).disturbance()
        if "constant" in d:
            c = d["constant"]
            from .thermo import h_sat

            T = float(c.get("T_out", 24.0))
            H = float(c["H_out"]) if "H_out" in c else float(c.get("rh_out", 0.5)) * h_sat(T)
            return DisturbanceTrace.constant([T, H, float(c.get("C_out", 7.2e-4)), float(c.get("O_out", 0.273))])
        syn = d.get("synthetic", {})
        return outside_trace(self.hours, T_mean=float(syn.get("T_mean", 24.0)), T_amp=float(syn.get("T_amp", 1.5)),
                             rh=float(syn.get("rh", 0.5)), noise=float(syn.get("noise", 0.0)),
                             seed=syn.get("seed", 0), dt=float(syn.get("dt", 600.0)))

    def initial_state(self, model, d0):
        from .scenarios import tg2_initial_state

        return tg2_initial_state(model, d0, **{k: float(v) for k, v in self.initial.items()})

    def event_schedule(self):
        from .integrate import Event, EventSchedule

        evs = []
        for e in self.events:
            try:
                evs.append(Event(float(e["time"]), str(e["kind"]), dict(e.get("payload", {}))))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad event entry {e!r}: {exc}") from None
        return EventSchedule(evs) if evs else None


_TOP_KEYS = {"setup", "kind", "parameters", "options", "L_num", "initial", "disturbance", "events", "integrator",
             "controller", "estimation", "ocp"}


def resolve_config_path(path: str | os.PathLike) -> Path:
    """``path`` as given, or relative to ``$HERMETIA_CONFIG_DIR``, or a bundled preset name."""
    p = Path(path)
    if p.is_file():
        return p
    env = os.environ.get(CONFIG_DIR_ENV)
    if env and not p.is_absolute() and (Path(env) / p).is_file():
        return Path(env) / p
    preset = Path(__file__).parent / "presets" / p.name
    for cand in (preset, preset.with_suffix(".yaml")):
        if cand.is_file():
            return cand
    raise ConfigError(f"configuration file {str(path)!r} not found")


def load_config(path: str | os.PathLike | None = None, data: Mapping | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration (or an already parsed mapping).

    Raises:
        ConfigError: unknown keys, unknown parameter names, illegal setup kind
            or non-numeric values.
    """
    base = Path.cwd()
    if data is None:
        if path is None:
            data = {}
        else:
            p = resolve_config_path(path)
            base = p.parent
            try:
                data = yaml.safe_load(p.read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{p}: invalid YAML ({exc})") from None
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kind = str(data.get("setup", data.get("kind", "closed")))
    if kind not in ("closed", "partial", "open"):
        raise ConfigError(f"setup must be closed, partial or open, not {kind!r}")
    params = ParameterSet()
    overrides = data.get("parameters") or {}
    if not isinstance(overrides, Mapping):
        raise ConfigError("'parameters' must be a mapping")
    params = params.replace(**overrides)
    opts = data.get("options") or {}
    try:
        options = ModelOptions().replace(**opts)
    except TypeError as exc:
        raise ConfigError(f"bad model options: {exc}") from None
    try:
        L_num = float(data.get("L_num", 2000.0))
    except (TypeError, ValueError):
        raise ConfigError("L_num must be a number") from None
    initial = dict(data.get("initial") or {})
    names = STATE_NAMES[{"closed": 0, "partial": 1, "open": 2}[kind]]
    for k, v in initial.items():
        if k not in names:
            raise ConfigError(f"initial value for unknown {kind}-setup state {k!r}")
        if not isinstance(v, (int, float)):
            raise ConfigError(f"initial value of {k!r} must be numeric")
    cfg = RunConfig(
        kind=kind, params=params, options=options, L_num=L_num, initial=initial,
        disturbance=dict(data.get("disturbance") or {}), events=list(data.get("events") or []),
        integrator=dict(data.get("integrator") or {}), controller=dict(data.get("controller") or {}),
        estimation=dict(data.get("estimation") or {}), ocp=dict(data.get("ocp") or {}), base_dir=base,
    )
    method = cfg.integrator.get("method", "rk4")
    if method not in ("rk4", "adaptive", "dopri5"):
        raise ConfigError(f"unknown integrator method {method!r}")
    for key in ("dt", "tol", "hours"):
        if key in cfg.integrator and not (isinstance(cfg.integrator[key], (int, float)) and cfg.integrator[key] > 0):
            raise ConfigError(f"integrator.{key} must be a positive number")
    return cfg
