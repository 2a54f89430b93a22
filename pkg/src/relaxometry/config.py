"""Scene configuration: schema validation, unit parsing, and builders.

A scene configuration is a single JSON document holding every physical
parameter of a study.  Quantities are SI numbers or strings with an
explicit unit suffix ("4.5 nm", "30 us", "2.87 GHz"); validation rejects
unknown keys and reports errors with the dotted path of the offending
field.  validate() returns a normalized dict with plain SI floats, which
is what sweeps override and build_scene consumes.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources

import numpy as np

from .budget import ReadoutModel
from .constants import GAMMA_ELECTRON, GD_SPIN, GD_TAU_C, NV_TRANSITION_HZ, angular
from .protocol import Protocol, SequenceSpec
from .scene import Scene, target_direction
from .spincore import (
    SpinSpec,
    dipolar_coupling,
    max_coupling_surface_position,
    unit_vector,
)

__all__ = [
    "ConfigError",
    "SCHEMA_VERSION",
    "parse_quantity",
    "validate",
    "load_config",
    "load_preset",
    "list_presets",
    "set_path",
    "config_hash",
    "build_scene",
    "build_readouts",
]

SCHEMA_VERSION = 1

_SUFFIXES = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9, "pm": 1e-12},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12},
}


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending field."""


def parse_quantity(value, kind: str, path: str) -> float:
    """Parse an SI number or a "<number> <suffix>" string to SI units."""
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        suffixes = _SUFFIXES[kind]
        if len(parts) == 2 and parts[1] in suffixes:
            try:
                return float(parts[0]) * suffixes[parts[1]]
            except ValueError:
                pass
        raise ConfigError(
            f"{path}: cannot parse {value!r} as a {kind}; "
            f"use an SI number or one of {sorted(suffixes)}"
        )
    raise ConfigError(f"{path}: expected a number or unit string, got {type(value).__name__}")


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(section: dict, allowed, path: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _positive(value: float, path: str) -> float:
    if not value > 0:
        raise ConfigError(f"{path}: must be > 0, got {value}")
    return value


def _axis(value, path: str) -> list:
    if isinstance(value, dict):
        _check_keys(value, {"tilt_deg", "azimuth_deg"}, path)
        tilt = np.deg2rad(float(value.get("tilt_deg", 0.0)))
        azim = np.deg2rad(float(value.get("azimuth_deg", 0.0)))
        vec = [
            float(np.sin(tilt) * np.cos(azim)),
            float(np.sin(tilt) * np.sin(azim)),
            float(np.cos(tilt)),
        ]
        return vec
    try:
        return [float(c) for c in unit_vector(value)]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _direction(value, path: str):
    if isinstance(value, str):
        if value not in ("magic", "above"):
            raise ConfigError(f"{path}: must be 'magic', 'above' or a 3-vector")
        return value
    return _axis(value, path)


def _validate_nv(raw: dict) -> dict:
    _check_keys(raw, {"depth", "axis", "t1", "t2", "frequency"}, "nv")
    return {
        "depth": _positive(parse_quantity(raw.get("depth", "4.5 nm"), "length", "nv.depth"), "nv.depth"),
        "axis": _axis(raw.get("axis", [0.0, 0.0, 1.0]), "nv.axis"),
        "t1": _positive(parse_quantity(raw.get("t1", "3.5 ms"), "time", "nv.t1"), "nv.t1"),
        "t2": _positive(parse_quantity(raw.get("t2", "8.4 us"), "time", "nv.t2"), "nv.t2"),
        "frequency": _positive(
            parse_quantity(raw.get("frequency", NV_TRANSITION_HZ), "frequency", "nv.frequency"),
            "nv.frequency",
        ),
    }


def _validate_reporter(raw: dict) -> dict:
    _check_keys(raw, {"t1", "position", "frequency"}, "reporter")
    position = raw.get("position", "max-coupling")
    if isinstance(position, str):
        if position != "max-coupling":
            raise ConfigError("reporter.position: must be 'max-coupling' or a 3-vector")
    else:
        if not isinstance(position, (list, tuple)) or len(position) != 3:
            raise ConfigError("reporter.position: must be 'max-coupling' or a 3-vector")
        position = [
            parse_quantity(c, "length", f"reporter.position[{i}]")
            for i, c in enumerate(position)
        ]
    frequency = raw.get("frequency")
    if frequency is not None:
        frequency = _positive(
            parse_quantity(frequency, "frequency", "reporter.frequency"), "reporter.frequency"
        )
    return {
        "t1": _positive(parse_quantity(raw.get("t1", "30 us"), "time", "reporter.t1"), "reporter.t1"),
        "position": position,
        "frequency": frequency,
    }


def _validate_target(raw) -> dict | None:
    if raw is None:
        return None
    raw = _require_mapping(raw, "target")
    _check_keys(raw, {"spin", "tau_c", "distance", "direction", "position"}, "target")
    spin = float(raw.get("spin", GD_SPIN))
    if spin <= 0 or round(2 * spin) != 2 * spin:
        raise ConfigError(f"target.spin: must be a positive half-integer, got {spin}")
    position = raw.get("position")
    if position is not None:
        if not isinstance(position, (list, tuple)) or len(position) != 3:
            raise ConfigError("target.position: must be a 3-vector")
        position = [
            parse_quantity(c, "length", f"target.position[{i}]")
            for i, c in enumerate(position)
        ]
    distance = raw.get("distance")
    if distance is not None:
        distance = _positive(parse_quantity(distance, "length", "target.distance"), "target.distance")
    if position is None and distance is None:
        raise ConfigError("target: either position or distance must be given")
    return {
        "spin": spin,
        "tau_c": _positive(parse_quantity(raw.get("tau_c", GD_TAU_C), "time", "target.tau_c"), "target.tau_c"),
        "distance": distance,
        "direction": _direction(raw.get("direction", "magic"), "target.direction"),
        "position": position,
    }


def _validate_sequence(raw: dict) -> dict:
    _check_keys(raw, {"tau_nv", "n_blocks", "t_init", "t_extra", "echo_stretch"}, "sequence")
    tau_nv = raw.get("tau_nv", "matched")
    if isinstance(tau_nv, str) and tau_nv == "matched":
        pass
    else:
        tau_nv = _positive(parse_quantity(tau_nv, "time", "sequence.tau_nv"), "sequence.tau_nv")
    n_blocks = raw.get("n_blocks", 2)
    if not isinstance(n_blocks, int) or n_blocks < 1:
        raise ConfigError(f"sequence.n_blocks: must be an integer >= 1, got {n_blocks}")
    echo_stretch = float(raw.get("echo_stretch", 3.0))
    if echo_stretch <= 0:
        raise ConfigError("sequence.echo_stretch: must be > 0")
    return {
        "tau_nv": tau_nv,
        "n_blocks": n_blocks,
        "t_init": parse_quantity(raw.get("t_init", 0.0), "time", "sequence.t_init"),
        "t_extra": parse_quantity(raw.get("t_extra", 0.0), "time", "sequence.t_extra"),
        "echo_stretch": echo_stretch,
    }


def _validate_readout_entry(raw: dict, path: str) -> dict:
    raw = _require_mapping(raw, path)
    kind = raw.get("kind", "pl")
    if kind == "pl":
        _check_keys(raw, {"kind", "c_spn", "t_read", "t_init"}, path)
        return {
            "kind": "pl",
            "c_spn": float(raw.get("c_spn", 35.0)),
            "t_read": _positive(parse_quantity(raw.get("t_read", "350 ns"), "time", f"{path}.t_read"), f"{path}.t_read"),
            "t_init": parse_quantity(raw.get("t_init", "2 us"), "time", f"{path}.t_init"),
        }
    if kind == "scc":
        _check_keys(
            raw, {"kind", "c_floor", "noise_decay", "t_read", "t_init", "t_read_bounds"}, path
        )
        bounds = raw.get("t_read_bounds", ["1 us", "100 us"])
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ConfigError(f"{path}.t_read_bounds: must be a [low, high] pair")
        lo = parse_quantity(bounds[0], "time", f"{path}.t_read_bounds[0]")
        hi = parse_quantity(bounds[1], "time", f"{path}.t_read_bounds[1]")
        return {
            "kind": "scc",
            "c_floor": float(raw.get("c_floor", 2.0)),
            "noise_decay": _positive(
                parse_quantity(raw.get("noise_decay", 3e-4), "time", f"{path}.noise_decay"),
                f"{path}.noise_decay",
            ),
            "t_read": _positive(parse_quantity(raw.get("t_read", "10 us"), "time", f"{path}.t_read"), f"{path}.t_read"),
            "t_init": parse_quantity(raw.get("t_init", "10 us"), "time", f"{path}.t_init"),
            "t_read_bounds": [lo, hi],
        }
    raise ConfigError(f"{path}.kind: must be 'pl' or 'scc', got {kind!r}")


def _validate_readout(raw: dict) -> dict:
    if "kind" in raw:
        entry = _validate_readout_entry(raw, "readout")
        return {"reporter": entry, "nv": dict(entry)}
    _check_keys(raw, {"reporter", "nv"}, "readout")
    shared = {"kind": "pl"}
    return {
        "reporter": _validate_readout_entry(raw.get("reporter", shared), "readout.reporter"),
        "nv": _validate_readout_entry(raw.get("nv", shared), "readout.nv"),
    }


def _validate_grid(raw: dict, path: str, kind: str = "time") -> dict:
    raw = _require_mapping(raw, path)
    _check_keys(raw, {"start", "stop", "points", "scale"}, path)
    points = raw.get("points", 0)
    if not isinstance(points, int) or points < 0:
        raise ConfigError(f"{path}.points: must be a non-negative integer")
    scale = raw.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise ConfigError(f"{path}.scale: must be 'linear' or 'log'")
    return {
        "start": parse_quantity(raw.get("start", 0.0), kind, f"{path}.start"),
        "stop": parse_quantity(raw.get("stop", 0.0), kind, f"{path}.stop"),
        "points": points,
        "scale": scale,
    }


_SWEEP_PATH_KINDS = {
    "nv.depth": "length",
    "nv.t1": "time",
    "nv.t2": "time",
    "nv.frequency": "frequency",
    "reporter.t1": "time",
    "reporter.frequency": "frequency",
    "target.distance": "length",
    "target.tau_c": "time",
}


def _validate_sweep_axis(raw: dict, path: str) -> dict:
    raw = _require_mapping(raw, path)
    _check_keys(raw, {"path", "start", "stop", "points", "scale"}, path)
    param = raw.get("path")
    if param not in _SWEEP_PATH_KINDS:
        raise ConfigError(
            f"{path}.path: {param!r} is not sweepable; choose from {sorted(_SWEEP_PATH_KINDS)}"
        )
    kind = _SWEEP_PATH_KINDS[param]
    points = raw.get("points", 2)
    if not isinstance(points, int) or points < 1:
        raise ConfigError(f"{path}.points: must be an integer >= 1")
    scale = raw.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise ConfigError(f"{path}.scale: must be 'linear' or 'log'")
    start = _positive(parse_quantity(raw["start"], kind, f"{path}.start"), f"{path}.start")
    stop = _positive(parse_quantity(raw["stop"], kind, f"{path}.stop"), f"{path}.stop")
    return {"path": param, "start": start, "stop": stop, "points": points, "scale": scale}


def _validate_study(raw) -> dict:
    if raw is None:
        return {"kind": "rates"}
    raw = _require_mapping(raw, "study")
    kind = raw.get("kind", "rates")
    if kind == "rates":
        _check_keys(raw, {"kind"}, "study")
        return {"kind": "rates"}
    if kind == "signal":
        _check_keys(raw, {"kind", "protocol", "tau", "oracle_trajectories"}, "study")
        protocol = raw.get("protocol", "reporter")
        if protocol not in (p.value for p in Protocol):
            raise ConfigError(f"study.protocol: must be one of {[p.value for p in Protocol]}")
        n_traj = raw.get("oracle_trajectories", 20000)
        if not isinstance(n_traj, int) or n_traj < 1:
            raise ConfigError("study.oracle_trajectories: must be an integer >= 1")
        return {
            "kind": "signal",
            "protocol": protocol,
            "tau": _validate_grid(raw.get("tau", {}), "study.tau"),
            "oracle_trajectories": n_traj,
        }
    if kind == "sweep":
        _check_keys(raw, {"kind", "axis1", "axis2"}, "study")
        return {
            "kind": "sweep",
            "axis1": _validate_sweep_axis(raw.get("axis1", {}), "study.axis1"),
            "axis2": _validate_sweep_axis(raw.get("axis2", {}), "study.axis2"),
        }
    if kind == "image":
        _check_keys(
            raw,
            {"kind", "extent", "pixels", "sensor_height", "protocol",
             "target_rel_err", "baseline_floor", "floor_frac", "max_dwell"},
            "study",
        )
        protocol = raw.get("protocol", "reporter")
        if protocol not in (p.value for p in Protocol):
            raise ConfigError(f"study.protocol: must be one of {[p.value for p in Protocol]}")
        pixels = raw.get("pixels", 64)
        if not isinstance(pixels, int) or pixels < 1:
            raise ConfigError("study.pixels: must be an integer >= 1")
        eps = float(raw.get("target_rel_err", 0.1))
        if not 0.0 < eps < 1.0:
            raise ConfigError("study.target_rel_err: must lie in (0, 1)")
        baseline_floor = float(raw.get("baseline_floor", 0.3))
        if baseline_floor < 0:
            raise ConfigError("study.baseline_floor: must be >= 0")
        floor_frac = float(raw.get("floor_frac", 0.0))
        if not 0.0 <= floor_frac < 1.0:
            raise ConfigError("study.floor_frac: must lie in [0, 1)")
        max_dwell = raw.get("max_dwell")
        if max_dwell is not None:
            max_dwell = _positive(parse_quantity(max_dwell, "time", "study.max_dwell"), "study.max_dwell")
        return {
            "kind": "image",
            "extent": _positive(parse_quantity(raw.get("extent", "20 nm"), "length", "study.extent"), "study.extent"),
            "pixels": pixels,
            "sensor_height": _positive(
                parse_quantity(raw.get("sensor_height", "2 nm"), "length", "study.sensor_height"),
                "study.sensor_height",
            ),
            "protocol": protocol,
            "target_rel_err": eps,
            "baseline_floor": baseline_floor,
            "floor_frac": floor_frac,
            "max_dwell": max_dwell,
        }
    raise ConfigError(f"study.kind: unknown study {kind!r}")


def validate(raw: dict) -> dict:
    """Validate a raw configuration and return the normalized SI form."""
    raw = _require_mapping(raw, "config")
    _check_keys(
        raw,
        {"schema_version", "seed", "nv", "reporter", "target", "sequence",
         "readout", "budget", "study"},
        "config",
    )
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError("seed: must be a non-negative 64-bit integer")
    budget = _require_mapping(raw.get("budget", {}), "budget")
    _check_keys(budget, {"snr"}, "budget")
    snr = float(budget.get("snr", 1.0))
    if snr <= 0:
        raise ConfigError("budget.snr: must be > 0")
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "nv": _validate_nv(_require_mapping(raw.get("nv", {}), "nv")),
        "reporter": _validate_reporter(_require_mapping(raw.get("reporter", {}), "reporter")),
        "target": _validate_target(raw.get("target")),
        "sequence": _validate_sequence(_require_mapping(raw.get("sequence", {}), "sequence")),
        "readout": _validate_readout(_require_mapping(raw.get("readout", {}), "readout")),
        "budget": {"snr": snr},
        "study": _validate_study(raw.get("study")),
    }


def load_config(path) -> dict:
    """Read and validate a JSON configuration file."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return validate(raw)


def _preset_dir():
    return resources.files("relaxometry").joinpath("presets")


def list_presets() -> list:
    """Names of the shipped preset configurations."""
    return sorted(
        entry.name[: -len(".json")]
        for entry in _preset_dir().iterdir()
        if entry.name.endswith(".json")
    )


def load_preset(name: str) -> dict:
    """Load and validate a shipped preset by name (e.g. 'fig1c')."""
    entry = _preset_dir().joinpath(f"{name}.json")
    try:
        raw = json.loads(entry.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}"
        ) from None
    return validate(raw)


def set_path(cfg: dict, path: str, value):
    """Assign an SI value at a dotted path inside a normalized config."""
    keys = path.split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"{path}: no such config entry")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"{path}: no such config entry")
    node[keys[-1]] = value


def config_hash(cfg: dict) -> str:
    """Stable short hash of a normalized configuration."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


_M_TO_NM = 1e9


def build_scene(cfg: dict) -> Scene:
    """Assemble the Scene a normalized configuration describes."""
    nv_cfg = cfg["nv"]
    axis = unit_vector(nv_cfg["axis"])
    omega_nv = angular(nv_cfg["frequency"])
    nv = SpinSpec(
        gamma=GAMMA_ELECTRON,
        spin_s=1.0,
        position=np.array([0.0, 0.0, -nv_cfg["depth"] * _M_TO_NM]),
        axis=axis,
        omega=omega_nv,
        t1_intrinsic=nv_cfg["t1"],
        t2=nv_cfg["t2"],
    )

    rep_cfg = cfg["reporter"]
    if isinstance(rep_cfg["position"], str):
        position, _ = max_coupling_surface_position(nv, surface_z=0.0)
    else:
        position = np.asarray(rep_cfg["position"], dtype=float) * _M_TO_NM
    omega_rep = omega_nv if rep_cfg["frequency"] is None else angular(rep_cfg["frequency"])
    reporter = SpinSpec(
        gamma=GAMMA_ELECTRON,
        spin_s=0.5,
        position=position,
        axis=axis,
        omega=omega_rep,
        t1_intrinsic=rep_cfg["t1"],
    )

    target = None
    tau_c = GD_TAU_C
    tgt_cfg = cfg["target"]
    if tgt_cfg is not None:
        tau_c = tgt_cfg["tau_c"]
        if tgt_cfg["position"] is not None:
            tgt_pos = np.asarray(tgt_cfg["position"], dtype=float) * _M_TO_NM
        else:
            direction = target_direction(tgt_cfg["direction"], axis)
            tgt_pos = reporter.position + tgt_cfg["distance"] * _M_TO_NM * direction
        target = SpinSpec(
            gamma=GAMMA_ELECTRON,
            spin_s=tgt_cfg["spin"],
            position=tgt_pos,
            axis=axis,
            omega=0.0,
            t1_intrinsic=np.inf,
        )

    seq_cfg = cfg["sequence"]
    if seq_cfg["tau_nv"] == "matched":
        tau_nv = 1.0 / (2.0 * dipolar_coupling(nv, reporter))
    else:
        tau_nv = seq_cfg["tau_nv"]
    sequence = SequenceSpec(
        tau_nv=tau_nv,
        n_blocks=seq_cfg["n_blocks"],
        t_init=seq_cfg["t_init"],
        t_extra=seq_cfg["t_extra"],
    )
    return Scene(
        nv=nv,
        reporter=reporter,
        target=target,
        tau_c=tau_c,
        sequence=sequence,
        echo_stretch=seq_cfg["echo_stretch"],
    )


def _readout_from(entry: dict) -> ReadoutModel:
    if entry["kind"] == "pl":
        return ReadoutModel.pl(
            c_spn=entry["c_spn"], t_read=entry["t_read"], t_init=entry["t_init"]
        )
    return ReadoutModel.scc(
        c_floor=entry["c_floor"],
        noise_decay=entry["noise_decay"],
        t_read=entry["t_read"],
        t_init=entry["t_init"],
        t_read_bounds=tuple(entry["t_read_bounds"]),
    )


def build_readouts(cfg: dict) -> dict:
    """Per-protocol readout models from a normalized configuration."""
    return {
        Protocol.REPORTER: _readout_from(cfg["readout"]["reporter"]),
        Protocol.DIRECT_NV: _readout_from(cfg["readout"]["nv"]),
    }
