"""Command-line front end: rates | signal | sweep | image | oracle.

Every command loads one validated scene configuration (--config PATH or
--preset NAME), runs the study, and serializes results to CSV or JSON.
Outputs embed the tool version and the configuration hash, units are
spelled out in headers, and reruns of the same configuration produce
byte-identical files.  Exit codes: 0 success, 2 validation error,
3 computation error (undetectable signal).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .atlas import Axis, ImageSpec, SweepSpec, run_sweep, scan_image
from .budget import UndetectableSignal
from .config import (
    ConfigError,
    build_readouts,
    build_scene,
    config_hash,
    load_config,
    load_preset,
    parse_quantity,
)
from .protocol import Protocol, TrajectoryConfig, simulate_trajectories
from .spincore import GeometryError, transverse_field_variance

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COMPUTE = 3


def _fmt(value) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return repr(float(value))


def _write_text(path, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_json(path, payload: dict):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_block(meta: dict, columns: list, rows) -> str:
    lines = [f"# relaxometry {__version__}"]
    lines += [f"# {key}={value}" for key, value in meta.items()]
    lines.append("# columns: " + ", ".join(columns))
    lines.append(",".join(c.split(" ")[0] for c in columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _gnuplot_block(meta: dict, columns: list, rows, block_on: int | None = None) -> str:
    """Whitespace-separated data block; blank line when column block_on changes.

    Gridded outputs become splot-ready (one blank line between scan rows).
    """
    lines = [f"# relaxometry {__version__}"]
    lines += [f"# {key}={value}" for key, value in meta.items()]
    lines.append("# columns: " + " | ".join(columns))
    previous = None
    for row in rows:
        if block_on is not None and previous is not None and row[block_on] != previous:
            lines.append("")
        if block_on is not None:
            previous = row[block_on]
        lines.append(" ".join(_fmt(v) if _fmt(v) else '""' for v in row))
    return "\n".join(lines) + "\n"


def _meta(cfg: dict, **extra) -> dict:
    meta = {
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "seed": cfg["seed"],
    }
    meta.update(extra)
    return meta


def _load(args) -> dict:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config or --preset is required")
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _nonfinite_to_none(value):
    return float(value) if np.isfinite(value) else None


# ---------------------------------------------------------------- commands

def cmd_rates(args) -> int:
    cfg = _load(args)
    scene = build_scene(cfg)

    def sensor_block(sensor, baseline, total):
        variance = (
            transverse_field_variance(scene.target, sensor)
            if scene.target is not None
            else 0.0
        )
        return {
            "t1_intrinsic_s": sensor.t1_intrinsic,
            "bperp_variance_t2": variance,
            "induced_rate_per_s": scene.induced_rate(sensor),
            "rate_total_per_s": total,
            "t1_total_s": 1.0 / total,
        }

    report = {
        "meta": _meta(cfg, study="rates"),
        "coupling": {
            "k_s_hz": scene.k_s,
            "inv_k_s_s": 1.0 / scene.k_s,
            "tau_nv_s": scene.sequence.tau_nv,
        },
        "reporter": sensor_block(
            scene.reporter, scene.reporter_rate_baseline, scene.reporter_rate_total
        ),
        "nv": sensor_block(scene.nv, scene.nv_rate_baseline, scene.nv_rate_total),
    }
    if args.out:
        if args.format == "json":
            _write_json(args.out, report)
        else:
            rows = [
                (section, key, _fmt(value))
                for section in ("coupling", "reporter", "nv")
                for key, value in report[section].items()
            ]
            columns = ["section", "quantity (SI unit in name)", "value"]
            if args.format == "gnuplot":
                _write_text(args.out, _gnuplot_block(report["meta"], columns, rows, block_on=0))
            else:
                _write_text(args.out, _csv_block(report["meta"], columns, rows))
    print(f"k_s = {scene.k_s:.6g} Hz  (1/k_s = {1e9 / scene.k_s:.4g} ns)")
    for name in ("reporter", "nv"):
        block = report[name]
        print(
            f"{name}: T1 intrinsic {block['t1_intrinsic_s']:.6g} s, "
            f"induced rate {block['induced_rate_per_s']:.6g} /s, "
            f"T1 total {block['t1_total_s']:.6g} s"
        )
    return EXIT_OK


def _tau_grid(study: dict) -> np.ndarray:
    grid = study["tau"]
    if grid["points"] == 0:
        return np.array([])
    if grid["scale"] == "log":
        return np.geomspace(grid["start"], grid["stop"], grid["points"])
    return np.linspace(grid["start"], grid["stop"], grid["points"])


def cmd_signal(args) -> int:
    cfg = _load(args)
    study = cfg["study"]
    if study["kind"] != "signal":
        raise ConfigError(
            f"study.kind: command 'signal' needs a signal study, got {study['kind']!r}"
        )
    scene = build_scene(cfg)
    protocol = Protocol(args.protocol or study["protocol"])
    with_target = not args.without_target
    taus = _tau_grid(study)

    rows = []
    if taus.size:
        analytic = np.atleast_1d(scene.signal(protocol, taus, with_target=with_target))
        gamma = scene.rates(protocol)[1 if with_target else 0]
        scale = (
            scene.visibility_for(gamma) if protocol is Protocol.REPORTER else 1.0
        )
        points = simulate_trajectories(
            1.0 / gamma,
            taus,
            TrajectoryConfig(n_traj=study["oracle_trajectories"], seed=cfg["seed"]),
        )
        rows = [
            (tau, s, scale * p.value, scale * p.std_err)
            for tau, s, p in zip(taus, analytic, points)
        ]

    meta = _meta(
        cfg,
        study="signal",
        protocol=protocol.value,
        target="present" if (with_target and scene.target is not None) else "absent",
        oracle_trajectories=study["oracle_trajectories"],
    )
    columns = [
        "tau_s (s)",
        "signal (dimensionless)",
        "oracle_signal (dimensionless)",
        "oracle_stderr (dimensionless)",
    ]
    if args.format == "json":
        payload = {
            "meta": meta,
            "columns": columns,
            "rows": [[float(v) for v in row] for row in rows],
        }
        _write_json(args.out, payload)
    elif args.format == "gnuplot":
        _write_text(args.out, _gnuplot_block(meta, columns, rows))
    else:
        _write_text(args.out, _csv_block(meta, columns, rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    study = cfg["study"]
    if study["kind"] != "sweep":
        raise ConfigError(
            f"study.kind: command 'sweep' needs a sweep study, got {study['kind']!r}"
        )
    spec = SweepSpec(
        axis1=Axis(**study["axis1"]),
        axis2=Axis(**study["axis2"]),
        scene_template=cfg,
        readouts=build_readouts(cfg),
        snr=cfg["budget"]["snr"],
        figure_preset=args.preset or "custom",
    )
    result = run_sweep(spec, n_workers=args.threads)
    if all(f is not None for f in result.flags.ravel()):
        raise UndetectableSignal("every sweep cell is undetectable; nothing to map")

    meta = _meta(
        cfg,
        study="sweep",
        axis1=f"{spec.axis1.path} ({spec.axis1.scale})",
        axis2=f"{spec.axis2.path} ({spec.axis2.scale})",
        snr=spec.snr,
    )
    if args.format == "json":
        payload = {
            "meta": meta,
            "axis1": {"path": spec.axis1.path, "values": list(result.values1)},
            "axis2": {"path": spec.axis2.path, "values": list(result.values2)},
            "ratio": [
                [_nonfinite_to_none(v) for v in row] for row in result.ratio
            ],
            "flags": [[f for f in row] for row in result.flags],
            "contour_unit_enhancement": [
                [[float(x), float(y)] for x, y in line] for line in result.contour
            ],
        }
        _write_json(args.out, payload)
        return EXIT_OK

    columns = [
        "i",
        "j",
        f"axis1_{spec.axis1.path} (SI)",
        f"axis2_{spec.axis2.path} (SI)",
        "enhancement_ratio (t_nv/t_reporter)",
        "flag",
    ]
    rows = [
        (i, j, result.values1[i], result.values2[j], result.ratio[i, j], result.flags[i, j])
        for i in range(result.values1.size)
        for j in range(result.values2.size)
    ]
    rows = [
        (str(i), str(j), _fmt(v1), _fmt(v2), _fmt(r), f or "")
        for i, j, v1, v2, r, f in rows
    ]
    if args.format == "gnuplot":
        _write_text(args.out, _gnuplot_block(meta, columns, rows, block_on=0))
    else:
        _write_text(args.out, _csv_block(meta, columns, rows))

    if args.out:
        contour_path = _sibling(args.out, ".contour.csv")
        contour_rows = [
            (str(k), str(m), _fmt(x), _fmt(y))
            for k, line in enumerate(result.contour)
            for m, (x, y) in enumerate(line)
        ]
        _write_text(
            contour_path,
            _csv_block(
                meta,
                ["polyline", "vertex", f"axis1_{spec.axis1.path} (SI)", f"axis2_{spec.axis2.path} (SI)"],
                contour_rows,
            ),
        )
    return EXIT_OK


def _sibling(path: str, suffix: str) -> str:
    stem = path[: -len(".csv")] if path.endswith(".csv") else path
    return stem + suffix


def cmd_image(args) -> int:
    cfg = _load(args)
    study = cfg["study"]
    if study["kind"] != "image":
        raise ConfigError(
            f"study.kind: command 'image' needs an image study, got {study['kind']!r}"
        )
    scene = build_scene(cfg)
    protocol = Protocol(study["protocol"])
    readouts = build_readouts(cfg)

    def run_protocol(proto, height_nm):
        spec = ImageSpec(
            extent=study["extent"] * 1e9,
            pixels=study["pixels"],
            sensor_height=height_nm,
            protocol=proto,
            target_rel_err=study["target_rel_err"],
            readout=readouts[proto],
            baseline_floor=study["baseline_floor"],
            floor_frac=study["floor_frac"],
            max_dwell=study["max_dwell"],
        )
        return scan_image(spec, scene)

    image = run_protocol(protocol, study["sensor_height"] * 1e9)

    summary = {
        "total_time_s": image.total_time,
        "fwhm_nm": _nonfinite_to_none(image.fwhm),
        "peak_delta_gamma_per_s": float(image.delta_gamma.max()),
        "peak_offset_nm": [_nonfinite_to_none(v) for v in image.peak_offset],
        "flagged_pixels": int(image.flagged.sum()),
        "pixels": study["pixels"],
        "fit": None
        if image.linecut is None
        else {
            "fwhm_nm": image.linecut.fwhm,
            "center_nm": image.linecut.center,
            "amplitude_per_s": image.linecut.amplitude,
            "offset_per_s": image.linecut.offset,
            "residual_rms_per_s": _nonfinite_to_none(image.linecut.residual_rms),
            "converged": image.linecut.converged,
            "method": image.linecut.method,
        },
    }

    # companion protocol on the same scene at its own natural plane, so one
    # command reports the reporter-vs-NV time / FWHM / signal ratios
    if scene.target is not None and study["pixels"] >= 5:
        other = (
            Protocol.DIRECT_NV if protocol is Protocol.REPORTER else Protocol.REPORTER
        )
        other_sensor = scene.nv if other is Protocol.DIRECT_NV else scene.reporter
        other_height = float(scene.target.position[2] - other_sensor.position[2])
        companion = run_protocol(other, other_height)
        by_proto = {protocol: image, other: companion}
        rep, nv = by_proto[Protocol.REPORTER], by_proto[Protocol.DIRECT_NV]
        summary["comparison"] = {
            "protocol": other.value,
            "sensor_height_nm": other_height,
            "total_time_s": companion.total_time,
            "fwhm_nm": _nonfinite_to_none(companion.fwhm),
            "peak_delta_gamma_per_s": float(companion.delta_gamma.max()),
            "time_ratio_nv_to_reporter": nv.total_time / rep.total_time,
            "fwhm_ratio_nv_to_reporter": _nonfinite_to_none(nv.fwhm / rep.fwhm),
            "peak_ratio_reporter_to_nv": float(
                rep.delta_gamma.max() / nv.delta_gamma.max()
            ),
        }
    meta = _meta(cfg, study="image", protocol=protocol.value)
    if args.format == "json":
        payload = {
            "meta": meta,
            "xs_nm": list(image.xs),
            "ys_nm": list(image.ys),
            "delta_gamma_per_s": [[float(v) for v in row] for row in image.delta_gamma],
            "sigma_per_s": [[float(v) for v in row] for row in image.sigma],
            "dwell_s": [[float(v) for v in row] for row in image.dwell],
            "flagged": [[bool(v) for v in row] for row in image.flagged],
            "summary": summary,
        }
        _write_json(args.out, payload)
        return EXIT_OK

    columns = [
        "i",
        "j",
        "x (nm)",
        "y (nm)",
        "delta_gamma (1/s)",
        "sigma (1/s)",
        "dwell (s)",
        "flagged (0/1)",
    ]
    rows = [
        (
            str(i),
            str(j),
            _fmt(image.xs[i]),
            _fmt(image.ys[j]),
            _fmt(image.delta_gamma[i, j]),
            _fmt(image.sigma[i, j]),
            _fmt(image.dwell[i, j]),
            _fmt(image.flagged[i, j]),
        )
        for i in range(image.xs.size)
        for j in range(image.ys.size)
    ]
    if args.format == "gnuplot":
        _write_text(args.out, _gnuplot_block(meta, columns, rows, block_on=0))
    else:
        _write_text(args.out, _csv_block(meta, columns, rows))
    if args.out:
        _write_json(_sibling(args.out, ".summary.json"), {"meta": meta, "summary": summary})
    return EXIT_OK


def cmd_oracle(args) -> int:
    t1 = parse_quantity(args.t1, "time", "--t1")
    if not t1 > 0:
        raise ConfigError("--t1: must be > 0")
    start = parse_quantity(args.tau_start, "time", "--tau-start")
    stop = parse_quantity(args.tau_stop, "time", "--tau-stop")
    if args.tau_points < 1 or not 0 <= start <= stop:
        raise ConfigError("--tau-start/--tau-stop/--tau-points: need 0 <= start <= stop and points >= 1")
    taus = np.linspace(start, stop, args.tau_points)
    points = simulate_trajectories(
        t1, taus, TrajectoryConfig(n_traj=args.n_traj, seed=args.seed or 0)
    )
    meta = {
        "version": __version__,
        "t1_s": _fmt(t1),
        "n_traj": args.n_traj,
        "seed": args.seed or 0,
    }
    columns = [
        "tau_s (s)",
        "correlator (dimensionless)",
        "std_err (dimensionless)",
        "analytic (exp(-tau/T1))",
    ]
    rows = [
        (tau, p.value, p.std_err, np.exp(-tau / t1)) for tau, p in zip(taus, points)
    ]
    if args.format == "json":
        _write_json(
            args.out,
            {"meta": meta, "columns": columns, "rows": [[float(v) for v in r] for r in rows]},
        )
    elif args.format == "gnuplot":
        _write_text(args.out, _gnuplot_block(meta, columns, rows))
    else:
        _write_text(args.out, _csv_block(meta, columns, rows))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_common(sub):
    sub.add_argument("--config", help="path to a scene configuration JSON file")
    sub.add_argument("--preset", help="name of a shipped preset (e.g. fig1c, fig2a)")
    sub.add_argument("--out", help="output file path (default: stdout)")
    sub.add_argument("--format", choices=("csv", "json", "gnuplot"), default="csv")
    sub.add_argument("--seed", type=int, help="override the configuration seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads for grids")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaxometry",
        description="Reporter-spin-assisted T1 relaxometry: rates, signals, "
        "speed-enhancement maps, and scanning-image studies.",
    )
    parser.add_argument("--version", action="version", version=f"relaxometry {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_rates = subs.add_parser("rates", help="relaxation rates, couplings, and field variances")
    _add_common(p_rates)
    p_rates.set_defaults(func=cmd_rates)

    p_signal = subs.add_parser("signal", help="protocol signal curve with the telegraph oracle")
    _add_common(p_signal)
    p_signal.add_argument("--protocol", choices=[p.value for p in Protocol])
    p_signal.add_argument(
        "--without-target", action="store_true", help="drop the target from the scene"
    )
    p_signal.set_defaults(func=cmd_signal)

    p_sweep = subs.add_parser("sweep", help="2-d speed-enhancement grid with unit contour")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_image = subs.add_parser("image", help="scanning image with adaptive per-pixel budget")
    _add_common(p_image)
    p_image.set_defaults(func=cmd_image)

    p_oracle = subs.add_parser("oracle", help="telegraph Monte Carlo correlator")
    p_oracle.add_argument("--t1", required=True, help="relaxation time, e.g. '30 us'")
    p_oracle.add_argument("--n-traj", type=int, default=100_000)
    p_oracle.add_argument("--tau-start", default="0 s")
    p_oracle.add_argument("--tau-stop", required=True, help="last delay, e.g. '100 us'")
    p_oracle.add_argument("--tau-points", type=int, default=21)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--out")
    p_oracle.add_argument("--format", choices=("csv", "json", "gnuplot"), default="csv")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UndetectableSignal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
