"""Study drivers: speed-enhancement maps and scanning-image simulations.

run_sweep grids the speed enhancement over two named scene parameters and
extracts the unit-enhancement contour; scan_image rasters a sensor over a
target, budgets every pixel with the adaptive dwell rule, and summarizes
the point response (Lorentzian line-cut fit, FWHM, sub-pixel peak offset).
Cells and pixels are independent; execution order never affects output.
"""

from __future__ import annotations

import copy
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .budget import ReadoutModel, golden_minimize, speed_enhancement
from .config import build_scene, set_path
from .protocol import Protocol
from .scene import Scene

__all__ = [
    "Axis",
    "SweepSpec",
    "SweepResult",
    "ImageSpec",
    "ImageResult",
    "LinecutFit",
    "run_sweep",
    "scan_image",
    "adaptive_pixel_time",
    "fit_linecut",
    "crossing_fwhm",
    "peak_offset",
    "marching_squares",
]


@dataclass(frozen=True)
class Axis:
    """One sweep axis: dotted config path, range, point count, scale."""

    path: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and not (self.start > 0 and self.stop > 0):
            raise ValueError("log axis requires positive range")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.start], dtype=float)
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class SweepSpec:
    """Two-parameter speed-enhancement sweep over a scene template."""

    axis1: Axis
    axis2: Axis
    scene_template: dict
    readouts: object
    snr: float = 1.0
    figure_preset: str = "custom"


@dataclass
class SweepResult:
    """Gridded enhancement ratios with per-cell flags and the unit contour."""

    axis1: Axis
    axis2: Axis
    values1: np.ndarray
    values2: np.ndarray
    ratio: np.ndarray           # shape (axis1.points, axis2.points)
    flags: np.ndarray           # object array, None where detectable
    contour: list               # unit-enhancement polylines, arrays (m, 2)
    meta: dict = field(default_factory=dict)


def run_sweep(spec: SweepSpec, n_workers: int = 1) -> SweepResult:
    """Evaluate the enhancement ratio on every grid cell of the sweep.

    Cell (i, j) rebuilds the template scene with the two axis parameters
    overridden and optimizes both protocols.  Undetectable cells are
    flagged, never fatal.  Output is deterministic and independent of
    n_workers.
    """
    v1 = spec.axis1.values()
    v2 = spec.axis2.values()

    def eval_cell(ij):
        i, j = ij
        cfg = copy.deepcopy(spec.scene_template)
        set_path(cfg, spec.axis1.path, float(v1[i]))
        set_path(cfg, spec.axis2.path, float(v2[j]))
        scene = build_scene(cfg)
        return speed_enhancement(scene, spec.readouts, spec.snr)

    cells = [(i, j) for i in range(v1.size) for j in range(v2.size)]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(eval_cell, cells))
    else:
        results = [eval_cell(ij) for ij in cells]

    ratio = np.empty((v1.size, v2.size))
    flags = np.full((v1.size, v2.size), None, dtype=object)
    for (i, j), res in zip(cells, results):
        ratio[i, j] = res.ratio
        flags[i, j] = res.flag

    contour = unit_contour(v1, v2, ratio)
    return SweepResult(
        axis1=spec.axis1,
        axis2=spec.axis2,
        values1=v1,
        values2=v2,
        ratio=ratio,
        flags=flags,
        contour=contour,
        meta={"figure_preset": spec.figure_preset, "snr": spec.snr},
    )


def unit_contour(xs, ys, ratio) -> list:
    """Enhancement = 1 contour: marching squares on log10(ratio) at level 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.log10(ratio)
    return marching_squares(xs, ys, z, 0.0)


def _edge_cross(p, q, zp, zq, level):
    t = (level - zp) / (zq - zp)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def marching_squares(xs, ys, z, level: float) -> list:
    """Iso-contour polylines of z(xs, ys) at the given level.

    z has shape (len(xs), len(ys)).  Crossing points are linearly
    interpolated along cell edges; saddle cells are disambiguated with the
    cell-center mean; cells touching non-finite values are skipped.
    Segments are chained into polylines, returned as float arrays (m, 2).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    z = np.asarray(z, dtype=float)
    segments = []
    for i in range(xs.size - 1):
        for j in range(ys.size - 1):
            corners = np.array(
                [z[i, j], z[i + 1, j], z[i + 1, j + 1], z[i, j + 1]]
            )
            if not np.all(np.isfinite(corners)):
                continue
            above = corners > level
            if above.all() or not above.any():
                continue
            pts = [
                (xs[i], ys[j]),
                (xs[i + 1], ys[j]),
                (xs[i + 1], ys[j + 1]),
                (xs[i], ys[j + 1]),
            ]
            # edge order: bottom, right, top, left
            edges = [(0, 1), (1, 2), (3, 2), (0, 3)]
            crossings = {}
            for e, (a, b) in enumerate(edges):
                if above[a] != above[b]:
                    crossings[e] = _edge_cross(
                        pts[a], pts[b], corners[a], corners[b], level
                    )
            keys = sorted(crossings)
            if len(keys) == 2:
                segments.append((crossings[keys[0]], crossings[keys[1]]))
            elif len(keys) == 4:
                # saddle: when the center sides with corner 0, the region
                # through corners 0 and 2 is connected, so the contour cuts
                # off corner 1 (bottom+right) and corner 3 (top+left)
                center_above = corners.mean() > level
                if center_above == above[0]:
                    segments.append((crossings[0], crossings[1]))
                    segments.append((crossings[2], crossings[3]))
                else:
                    segments.append((crossings[0], crossings[3]))
                    segments.append((crossings[1], crossings[2]))
    return _chain_segments(segments)


def _chain_segments(segments) -> list:
    """Join shared-endpoint segments into polylines."""
    if not segments:
        return []

    def key(p):
        return (round(p[0], 12), round(p[1], 12))

    adjacency = {}
    for s, (p, q) in enumerate(segments):
        adjacency.setdefault(key(p), []).append(s)
        adjacency.setdefault(key(q), []).append(s)

    unused = set(range(len(segments)))
    polylines = []
    while unused:
        s = min(unused)
        unused.discard(s)
        chain = list(segments[s])
        for endpoint_idx in (0, -1):
            while True:
                k = key(chain[endpoint_idx])
                nxt = [t for t in adjacency.get(k, []) if t in unused]
                if not nxt:
                    break
                t = nxt[0]
                unused.discard(t)
                p, q = segments[t]
                new_pt = q if key(p) == k else p
                if endpoint_idx == 0:
                    chain.insert(0, new_pt)
                else:
                    chain.append(new_pt)
        polylines.append(np.array(chain, dtype=float))
    return polylines


@dataclass(frozen=True)
class ImageSpec:
    """Scanning-image study definition.

    extent : (nm) square field of view, target at the center.
    pixels : points per axis (>= 8 for any real study; 1 allowed for
        degenerate single-pixel checks).
    sensor_height : (nm) scan plane height above the target.
    protocol : which sensor scans (REPORTER or DIRECT_NV).
    target_rel_err : relative standard error eps targeted on each pixel's
        rate change; dwell scales as 1/eps^2.
    readout : readout model used by the dwell estimator (None = ideal).
    baseline_floor : rate floor in units of the sensor's baseline rate;
        pixels whose rate change falls below it are measured only to the
        floor precision, clamping their dwell, and are flagged.
    floor_frac : optional extra floor as a fraction of the image peak.
    max_dwell : (s) optional hard cap on any pixel dwell.
    """

    extent: float
    pixels: int
    sensor_height: float
    protocol: Protocol
    target_rel_err: float
    readout: ReadoutModel | None = None
    baseline_floor: float = 0.3
    floor_frac: float = 0.0
    max_dwell: float | None = None

    def __post_init__(self):
        if not 0.0 < self.target_rel_err < 1.0:
            raise ValueError("target_rel_err must lie in (0, 1)")
        if self.pixels < 1:
            raise ValueError("pixels must be >= 1")
        if not self.extent > 0:
            raise ValueError("extent must be > 0")
        if self.baseline_floor < 0:
            raise ValueError("baseline_floor must be >= 0")
        if not 0.0 <= self.floor_frac < 1.0:
            raise ValueError("floor_frac must lie in [0, 1)")


@dataclass
class ImageResult:
    """Scanning image: per-pixel rate change, error, dwell budget, summary."""

    xs: np.ndarray              # (nm) pixel centers, first image axis
    ys: np.ndarray              # (nm) pixel centers, second image axis
    delta_gamma: np.ndarray     # (s^-1), shape (pixels, pixels)
    sigma: np.ndarray           # (s^-1) rate standard error the dwell delivers
    dwell: np.ndarray           # (s) per-pixel averaging time
    flagged: np.ndarray         # bool, True where the precision floor applied
    total_time: float           # (s) exact sum of dwells
    fwhm: float                 # (nm) fitted FWHM of the x line-cut
    peak_offset: np.ndarray     # (nm) image-maximum displacement from target
    linecut: "LinecutFit | None"
    meta: dict = field(default_factory=dict)


def adaptive_pixel_time(
    delta_gamma: float,
    scene: Scene,
    protocol: Protocol,
    eps: float,
    readout: ReadoutModel | None = None,
    rate_floor: float = 0.0,
) -> float:
    """Averaging time (s) for the rate estimator to reach sigma <= eps * delta_gamma.

    Two-point estimator: the signal is probed at zero delay and at the
    budget-optimal probe time, the rate is the log-ratio of the two, and
    shot noise (per-shot signal variance c_spn^2 / 2, the same convention
    as the detection-time formula) propagates through the protocol's
    signal model.  Shots are split evenly between the two points; the
    probe time (and, for duration-dependent readouts, the readout
    duration) minimize the total time.

    rate_floor (s^-1) bounds the demanded precision: the target is
    sigma <= eps * max(delta_gamma, rate_floor), so pixels far below the
    floor cost at most the floor-precision dwell instead of diverging.
    With rate_floor = 0 the dwell is monotone decreasing in delta_gamma;
    it scales exactly as 1/eps^2 either way.

    The plateau of the reporter signal cancels in the log-ratio estimator,
    so its noise propagation uses the scene's calibrated baseline
    visibility; the pixel's own rate enters through the decay.
    """
    if not delta_gamma > 0 and not rate_floor > 0:
        raise ValueError("delta_gamma must be > 0 (or a positive rate_floor given)")
    if delta_gamma < 0:
        raise ValueError("delta_gamma must be >= 0")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    sigma_target = eps * max(delta_gamma, rate_floor)
    gamma_base, _ = scene.rates(protocol)
    gamma = gamma_base + delta_gamma
    if protocol is Protocol.REPORTER:
        s0 = scene.visibility_for(gamma_base)
    else:
        s0 = 1.0

    rest0 = float(scene.duration_without_readout(protocol, 0.0))
    t_init = readout.t_init if readout is not None else 0.0

    def dwell_at(tau):
        s_tau = s0 * np.exp(-gamma * tau)
        rest_pair = 2.0 * (rest0 + t_init) + tau
        if readout is None:
            product = rest_pair
        else:
            _, _, product = readout.best_noise_time(rest_pair, n_reads=2)
        noise = (1.0 / s0**2 + 1.0 / s_tau**2) / (2.0 * sigma_target**2)
        return noise / tau**2 * product

    taus = np.geomspace(1e-3 / gamma, 8.0 / gamma, 48)
    dwells = dwell_at(taus)
    i = int(np.argmin(dwells))
    a = taus[max(i - 1, 0)]
    b = taus[min(i + 1, taus.size - 1)]
    _, best = golden_minimize(lambda u: float(dwell_at(np.exp(u))), np.log(a), np.log(b))
    return float(min(best, dwells[i]))


def scan_image(spec: ImageSpec, scene: Scene) -> ImageResult:
    """Raster the protocol's sensor over the target and budget every pixel.

    The sensor scans a plane sensor_height away from the target (in the
    tip frame: the sensor plane sits below the sample spin at z_target -
    sensor_height, so a scene whose target is placed "above" at that
    distance keeps the sensor on its natural plane).  The target's lateral
    position sits at the grid center.  Pixel values are the target-induced
    rate change from the dipolar model; dwell times follow the adaptive
    rule, clamped and flagged below the floor.  The value layer is
    independent of eps.
    """
    if scene.target is not None:
        cx, cy = scene.target.position[0], scene.target.position[1]
        z_plane = scene.target.position[2] - spec.sensor_height
    else:
        cx = cy = 0.0
        z_plane = -spec.sensor_height
    half = spec.extent / 2.0
    if spec.pixels == 1:
        xs = np.array([cx])
        ys = np.array([cy])
    else:
        xs = cx + np.linspace(-half, half, spec.pixels)
        ys = cy + np.linspace(-half, half, spec.pixels)

    sensor = scene.reporter if spec.protocol is Protocol.REPORTER else scene.nv
    value = np.zeros((spec.pixels, spec.pixels))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            value[i, j] = scene.induced_rate(sensor.at([x, y, z_plane]))

    peak = float(value.max())
    gamma_base, _ = scene.rates(spec.protocol)
    floor = max(spec.floor_frac * peak, spec.baseline_floor * gamma_base)
    flagged = value < floor
    cap = spec.max_dwell if spec.max_dwell is not None else np.inf

    dwell = np.zeros_like(value)
    sigma = np.zeros_like(value)
    for i in range(spec.pixels):
        for j in range(spec.pixels):
            if value[i, j] > 0 or floor > 0:
                needed = adaptive_pixel_time(
                    value[i, j],
                    scene,
                    spec.protocol,
                    spec.target_rel_err,
                    spec.readout,
                    rate_floor=floor,
                )
                dwell[i, j] = min(needed, cap)
                # shot noise: capping the dwell inflates sigma as 1/sqrt(t)
                sigma[i, j] = (
                    spec.target_rel_err
                    * max(value[i, j], floor)
                    * np.sqrt(needed / dwell[i, j])
                )

    result = ImageResult(
        xs=xs,
        ys=ys,
        delta_gamma=value,
        sigma=sigma,
        dwell=dwell,
        flagged=flagged,
        total_time=float(dwell.sum()),
        fwhm=np.nan,
        peak_offset=np.full(3, np.nan),
        linecut=None,
        meta={
            "protocol": spec.protocol.value,
            "sensor_height_nm": spec.sensor_height,
            "target_rel_err": spec.target_rel_err,
            "rate_floor": floor,
            "flagged_pixels": int(flagged.sum()),
        },
    )
    if peak > 0 and spec.pixels >= 5:
        try:
            cut = fit_linecut(result, axis="x")
            result.fwhm = cut.fwhm
            result.linecut = cut
        except ValueError:
            pass  # half-max not resolved; fwhm stays nan
    if peak > 0 and spec.pixels >= 3:
        result.peak_offset = peak_offset(result, np.array([cx, cy, 0.0]))
    return result


@dataclass(frozen=True)
class LinecutFit:
    """Lorentzian line-cut fit: A / (1 + ((x - x0)/w)^2) + c, FWHM = 2w."""

    fwhm: float
    center: float
    amplitude: float
    offset: float
    residual_rms: float
    converged: bool
    method: str


def _lorentzian(x, amplitude, center, w, offset):
    return amplitude / (1.0 + ((x - center) / w) ** 2) + offset


def crossing_fwhm(x, y) -> tuple[float, float]:
    """FWHM and center from interpolated half-maximum crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i_peak = int(np.argmax(y))
    half = (y[i_peak] + y.min()) / 2.0
    left = right = None
    for i in range(i_peak, 0, -1):
        if y[i - 1] <= half <= y[i]:
            t = (half - y[i - 1]) / (y[i] - y[i - 1])
            left = x[i - 1] + t * (x[i] - x[i - 1])
            break
    for i in range(i_peak, x.size - 1):
        if y[i + 1] <= half <= y[i]:
            t = (half - y[i]) / (y[i + 1] - y[i])
            right = x[i] + t * (x[i + 1] - x[i])
            break
    if left is None or right is None:
        raise ValueError("half-maximum level is not crossed on both sides of the peak")
    return right - left, (left + right) / 2.0


def fit_linecut(image: ImageResult, axis: str = "x", core_frac: float = 0.3) -> LinecutFit:
    """Least-squares Lorentzian fit of the line-cut through the peak pixel.

    The fit uses the peak-region samples (at least core_frac of the way
    from the cut minimum to its maximum) with the offset bounded at zero,
    since a dipolar rate-change map has no negative background; fitting
    the far 1/r^6 wings against the Lorentzian's 1/r^2 tail would bias
    the width well away from the half-maximum width.  Falls back to
    direct half-maximum crossing interpolation when the fit fails; the
    method field records which path produced the numbers.
    """
    i_pk, j_pk = np.unravel_index(np.argmax(image.delta_gamma), image.delta_gamma.shape)
    if axis == "x":
        coords = image.xs
        values = image.delta_gamma[:, j_pk]
    elif axis == "y":
        coords = image.ys
        values = image.delta_gamma[i_pk, :]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")

    offset0 = float(values.min())
    amp0 = float(values.max() - offset0)
    center0 = float(coords[np.argmax(values)])
    try:
        width0, _ = crossing_fwhm(coords, values)
        w0 = max(width0 / 2.0, float(np.min(np.diff(coords))))
    except ValueError:
        w0 = (coords[-1] - coords[0]) / 4.0
    core = values >= values.min() + core_frac * (values.max() - values.min())
    try:
        with warnings.catch_warnings():
            # convergence is judged by the fallback path, not the covariance
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(
                _lorentzian,
                coords[core],
                values[core],
                p0=[amp0, center0, w0, offset0],
                bounds=([0.0, -np.inf, 0.0, 0.0], [np.inf] * 4),
                maxfev=20000,
            )
        amplitude, center, w, offset = popt
        residuals = values[core] - _lorentzian(coords[core], *popt)
        return LinecutFit(
            fwhm=float(2.0 * abs(w)),
            center=float(center),
            amplitude=float(amplitude),
            offset=float(offset),
            residual_rms=float(np.sqrt(np.mean(residuals**2))),
            converged=True,
            method="least-squares",
        )
    except (RuntimeError, TypeError):
        fwhm, center = crossing_fwhm(coords, values)
        return LinecutFit(
            fwhm=float(fwhm),
            center=float(center),
            amplitude=amp0,
            offset=offset0,
            residual_rms=np.nan,
            converged=False,
            method="half-max-crossing",
        )


def peak_offset(image: ImageResult, true_target) -> np.ndarray:
    """(nm) displacement of the image maximum from the target's lateral position.

    The maximum is refined to sub-pixel precision with a 2-d quadratic fit
    over the 3x3 neighborhood of the peak pixel.
    """
    z = image.delta_gamma
    i0, j0 = np.unravel_index(np.argmax(z), z.shape)
    i0 = int(np.clip(i0, 1, z.shape[0] - 2))
    j0 = int(np.clip(j0, 1, z.shape[1] - 2))

    # quadratic f = a + b u + c v + d u^2 + e v^2 + g u v on the 3x3 patch
    u, v = np.meshgrid([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], indexing="ij")
    u = u.ravel()
    v = v.ravel()
    design = np.column_stack([np.ones(9), u, v, u**2, v**2, u * v])
    patch = z[i0 - 1 : i0 + 2, j0 - 1 : j0 + 2].ravel()
    coef, *_ = np.linalg.lstsq(design, patch, rcond=None)
    _, b, c, d, e, g = coef
    hess = np.array([[2.0 * d, g], [g, 2.0 * e]])
    try:
        shift = np.linalg.solve(hess, -np.array([b, c]))
    except np.linalg.LinAlgError:
        shift = np.zeros(2)
    shift = np.clip(shift, -1.0, 1.0)

    dx = image.xs[1] - image.xs[0]
    dy = image.ys[1] - image.ys[0]
    peak = np.array(
        [image.xs[i0] + shift[0] * dx, image.ys[j0] + shift[1] * dy, 0.0]
    )
    target = np.asarray(true_target, dtype=float)
    return peak - np.array([target[0], target[1], 0.0])
