"""End-to-end CLI behavior: exit codes, file formats, determinism."""

import json

import numpy as np

from relaxometry.budget import speed_enhancement
from relaxometry.cli import EXIT_COMPUTE, EXIT_OK, EXIT_VALIDATION, main
from relaxometry.config import build_readouts, build_scene, validate


def _write_config(tmp_path, cfg, name="scene.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


FIG1C_RAW = {
    "nv": {"depth": "4.5 nm", "t1": "3.5 ms", "t2": "8.4 us"},
    "reporter": {"t1": "30 us"},
    "target": {"distance": "3 nm", "direction": "magic"},
    "study": {
        "kind": "signal",
        "protocol": "reporter",
        "tau": {"start": "1 us", "stop": "90 us", "points": 16},
        "oracle_trajectories": 4000,
    },
    "seed": 7,
}


# ------------------------------------------------------------------- rates

def test_rates_preset_reports_reference_t1(tmp_path, capsys):
    out = tmp_path / "rates.json"
    assert main(["rates", "--preset", "fig1c", "--format", "json", "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert abs(report["reporter"]["t1_total_s"] - 11.6e-6) / 11.6e-6 < 0.15
    assert abs(report["coupling"]["inv_k_s_s"] - 912e-9) / 912e-9 < 0.10
    assert report["meta"]["config_sha256"]
    assert "T1 total" in capsys.readouterr().out


def test_rates_without_target_equals_intrinsics(tmp_path):
    cfg = dict(FIG1C_RAW)
    cfg.pop("target")
    out = tmp_path / "r.json"
    code = main(["rates", "--config", _write_config(tmp_path, cfg), "--format", "json", "--out", str(out)])
    assert code == EXIT_OK
    report = json.loads(out.read_text())
    assert report["reporter"]["induced_rate_per_s"] == 0.0
    assert report["reporter"]["t1_total_s"] == report["reporter"]["t1_intrinsic_s"]
    assert report["nv"]["t1_total_s"] == report["nv"]["t1_intrinsic_s"]


def test_rates_zero_axis_exit_code_and_message(tmp_path, capsys):
    cfg = dict(FIG1C_RAW)
    cfg["nv"] = {"depth": "4.5 nm", "axis": [0, 0, 0]}
    code = main(["rates", "--config", _write_config(tmp_path, cfg)])
    assert code == EXIT_VALIDATION
    assert "nv.axis" in capsys.readouterr().err


def test_config_and_preset_mutually_exclusive(capsys):
    assert main(["rates"]) == EXIT_VALIDATION
    assert main(["rates", "--preset", "fig1c", "--config", "x.json"]) == EXIT_VALIDATION


# ------------------------------------------------------------------ signal

def test_signal_two_scene_curve_ordering(tmp_path):
    cfg_path = _write_config(tmp_path, FIG1C_RAW)
    with_t = tmp_path / "with.csv"
    without_t = tmp_path / "without.csv"
    assert main(["signal", "--config", cfg_path, "--out", str(with_t)]) == EXIT_OK
    assert (
        main(["signal", "--config", cfg_path, "--without-target", "--out", str(without_t)])
        == EXIT_OK
    )

    def signal_column(path):
        rows = [
            line.split(",")
            for line in path.read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("tau_s")
        ]
        return np.array([[float(v) for v in row] for row in rows])

    fast = signal_column(with_t)
    slow = signal_column(without_t)
    assert fast.shape == (16, 4)
    # with the target present the correlation decays strictly faster
    assert np.all(fast[:, 1] < slow[:, 1])
    # oracle column tracks the analytic signal within a few sigma
    err = np.abs(fast[:, 2] - fast[:, 1]) / np.maximum(fast[:, 3], 1e-12)
    assert np.median(err) < 3.0


def test_signal_empty_grid_header_only(tmp_path):
    cfg = dict(FIG1C_RAW)
    cfg["study"] = {
        "kind": "signal",
        "tau": {"start": 0.0, "stop": 0.0, "points": 0},
    }
    out = tmp_path / "empty.csv"
    assert main(["signal", "--config", _write_config(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[-1] == "tau_s,signal,oracle_signal,oracle_stderr"


def test_signal_fixed_seed_byte_identical(tmp_path):
    cfg_path = _write_config(tmp_path, FIG1C_RAW)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["signal", "--config", cfg_path, "--out", str(a)]) == EXIT_OK
    assert main(["signal", "--config", cfg_path, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert main(["signal", "--config", cfg_path, "--seed", "8", "--out", str(c)]) == EXIT_OK
    assert a.read_bytes() != c.read_bytes()


def test_signal_requires_signal_study(tmp_path, capsys):
    cfg = dict(FIG1C_RAW)
    cfg["study"] = {"kind": "rates"}
    code = main(["signal", "--config", _write_config(tmp_path, cfg)])
    assert code == EXIT_VALIDATION
    assert "study.kind" in capsys.readouterr().err


# ------------------------------------------------------------------- sweep

def _sweep_raw(points=1):
    cfg = {k: v for k, v in FIG1C_RAW.items() if k != "study"}
    cfg["readout"] = {"kind": "scc"}
    cfg["study"] = {
        "kind": "sweep",
        "axis1": {"path": "nv.depth", "start": "4.5 nm", "stop": "4.5 nm", "points": points},
        "axis2": {"path": "target.distance", "start": "3 nm", "stop": "3 nm", "points": points},
    }
    return cfg


def test_sweep_single_cell_matches_library_call(tmp_path):
    raw = _sweep_raw()
    out = tmp_path / "grid.json"
    assert main(["sweep", "--config", _write_config(tmp_path, raw), "--format", "json", "--out", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text())
    cfg = validate(raw)
    expected = speed_enhancement(build_scene(cfg), build_readouts(cfg))
    assert payload["ratio"][0][0] == expected.ratio


def test_sweep_csv_json_round_trip(tmp_path):
    raw = _sweep_raw()
    raw["study"]["axis1"].update({"stop": "6 nm", "points": 2})
    raw["study"]["axis2"].update({"stop": "4 nm", "points": 2})
    cfg_path = _write_config(tmp_path, raw)
    csv_out = tmp_path / "grid.csv"
    json_out = tmp_path / "grid.json"
    assert main(["sweep", "--config", cfg_path, "--out", str(csv_out)]) == EXIT_OK
    assert main(["sweep", "--config", cfg_path, "--format", "json", "--out", str(json_out)]) == EXIT_OK

    payload = json.loads(json_out.read_text())
    grid_json = np.array(payload["ratio"], dtype=float)
    rows = [
        line.split(",")
        for line in csv_out.read_text().splitlines()
        if line and not line.startswith("#") and not line.startswith("i,")
    ]
    grid_csv = np.full((2, 2), np.nan)
    for i, j, _, _, ratio, _ in rows:
        grid_csv[int(i), int(j)] = float(ratio)
    np.testing.assert_array_equal(grid_csv, grid_json)
    assert (tmp_path / "grid.contour.csv").exists()


def test_sweep_fig2a_preset_within_runtime_budget(tmp_path):
    import time

    out = tmp_path / "fig2a.csv"
    start = time.perf_counter()
    assert main(["sweep", "--preset", "fig2a", "--out", str(out)]) == EXIT_OK
    assert time.perf_counter() - start < 300.0
    rows = [
        line.split(",") for line in out.read_text().splitlines()
        if line and not line.startswith("#") and not line.startswith("i,")
    ]
    assert len(rows) == 64 * 64
    grid = np.full((64, 64), np.nan)
    for row in rows:
        grid[int(row[0]), int(row[1])] = float(row[4])
    # enhancement grows monotonically with the reporter's intrinsic T1
    # along every Gd-distance column (axis2 is the T1 axis)
    assert np.all(np.diff(grid, axis=1) > 0)


def test_sweep_without_target_exit_compute(tmp_path, capsys):
    raw = _sweep_raw()
    raw.pop("target")
    raw["study"]["axis1"] = {"path": "nv.depth", "start": "4 nm", "stop": "6 nm", "points": 2}
    raw["study"]["axis2"] = {"path": "nv.t2", "start": "5 us", "stop": "50 us", "points": 2}
    code = main(["sweep", "--config", _write_config(tmp_path, raw)])
    assert code == EXIT_COMPUTE
    assert "undetectable" in capsys.readouterr().err


# ------------------------------------------------------------------- image

def _image_raw(pixels=1, extent="1 nm"):
    cfg = {k: v for k, v in FIG1C_RAW.items() if k != "study"}
    cfg["reporter"] = {"t1": "100 us"}
    cfg["target"] = {"distance": "2 nm", "direction": "above"}
    cfg["readout"] = {"kind": "scc"}
    cfg["study"] = {
        "kind": "image",
        "extent": extent,
        "pixels": pixels,
        "sensor_height": "2 nm",
        "protocol": "reporter",
        "target_rel_err": 0.1,
    }
    return cfg


def test_image_single_pixel_summary_equals_pixel(tmp_path):
    out = tmp_path / "img.csv"
    assert main(["image", "--config", _write_config(tmp_path, _image_raw()), "--out", str(out)]) == EXIT_OK
    summary = json.loads((tmp_path / "img.summary.json").read_text())["summary"]
    rows = [
        line.split(",")
        for line in out.read_text().splitlines()
        if line and not line.startswith("#") and not line.startswith("i,")
    ]
    assert len(rows) == 1
    pixel_value = float(rows[0][4])
    pixel_dwell = float(rows[0][6])
    assert summary["peak_delta_gamma_per_s"] == pixel_value
    assert summary["total_time_s"] == pixel_dwell
    assert summary["fwhm_nm"] is None


def test_image_rerun_byte_identical(tmp_path):
    cfg_path = _write_config(tmp_path, _image_raw(pixels=8, extent="8 nm"))
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["image", "--config", cfg_path, "--format", "json", "--out", str(a)]) == EXIT_OK
    assert main(["image", "--config", cfg_path, "--format", "json", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_image_summary_fields_on_small_study(tmp_path):
    cfg_path = _write_config(tmp_path, _image_raw(pixels=16, extent="12 nm"))
    out = tmp_path / "img.json"
    assert main(["image", "--config", cfg_path, "--format", "json", "--out", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["summary"]["fwhm_nm"] > 0
    assert payload["summary"]["total_time_s"] > 0
    assert len(payload["delta_gamma_per_s"]) == 16
    # one command also reports the reporter-vs-NV comparison ratios
    comparison = payload["summary"]["comparison"]
    assert comparison["protocol"] == "direct-nv"
    assert abs(comparison["sensor_height_nm"] - 6.5) < 1e-9
    assert comparison["time_ratio_nv_to_reporter"] > 1.0
    assert comparison["fwhm_ratio_nv_to_reporter"] > 1.0
    assert comparison["peak_ratio_reporter_to_nv"] > 10.0


# ------------------------------------------------------------------ oracle

def test_oracle_csv_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["oracle", "--t1", "30 us", "--n-traj", "5000", "--tau-stop", "60 us",
            "--tau-points", "4", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    lines = [l for l in a.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "tau_s,correlator,std_err,analytic"
    assert len(lines) == 5


def test_oracle_validation(capsys):
    assert main(["oracle", "--t1", "0 s", "--tau-stop", "1 us"]) == EXIT_VALIDATION


def test_gnuplot_format_blocks(tmp_path):
    raw = _sweep_raw()
    raw["study"]["axis1"].update({"stop": "6 nm", "points": 2})
    raw["study"]["axis2"].update({"stop": "4 nm", "points": 2})
    out = tmp_path / "grid.dat"
    code = main(["sweep", "--config", _write_config(tmp_path, raw),
                 "--format", "gnuplot", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    data = [l for l in lines if l and not l.startswith("#")]
    blanks = sum(1 for l in lines if l == "")
    assert len(data) == 4       # 2x2 grid, whitespace-separated
    assert blanks == 1          # one blank line between the two scan rows
    assert all(len(l.split()) >= 5 for l in data)
