"""Dipolar field geometry and closed-form relaxation rates.

Implements the point-dipole field tensor, the transverse field variance a
fluctuating target spin produces at a sensor, the Lorentzian-bath relaxation
rate, the stochastic-drive relaxation rate, and the secular NV-reporter
dipolar coupling.  All functions are pure and safe to call concurrently.

Geometry convention: positions in nm, the diamond surface is the z = 0
plane with the sample above (z > 0) and the NV below (z < 0).  The rate
prefactor uses gamma_sensor * gamma_partner with both defaulting to the
g~2 electron value, so for electron sensors it equals gamma_sensor**2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .constants import (
    GAMMA_ELECTRON,
    HBAR,
    MIN_SEPARATION_NM,
    MU0_OVER_4PI,
    NM,
)

__all__ = [
    "GeometryError",
    "SpinSpec",
    "NoiseBath",
    "StochasticDrive",
    "vec3",
    "unit_vector",
    "dipole_field_tensor",
    "transverse_field_variance",
    "induced_rate_lorentzian",
    "relaxation_rate_lorentzian",
    "stochastic_drive_rate",
    "dipolar_coupling",
    "max_coupling_surface_position",
]

# positions and axes are plain float64 arrays of shape (3,)
Vec3 = np.ndarray


class GeometryError(ValueError):
    """Spin pair geometry outside the point-dipole model's domain."""


def vec3(x, y=None, z=None) -> Vec3:
    """Build a (3,) float array from components or any length-3 sequence."""
    if y is None:
        v = np.asarray(x, dtype=float)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {v.shape}")
    return v


def unit_vector(v) -> Vec3:
    """Normalize to unit length; rejects zero and non-finite vectors."""
    v = vec3(v)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite components")
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero vector cannot be normalized")
    return v / n


@dataclass(frozen=True)
class SpinSpec:
    """A sensor or target spin.

    Parameters
    ----------
    gamma : float
        (rad/s/T) gyromagnetic ratio, > 0.
    spin_s : float
        spin quantum number (1/2 reporter, 1 NV, 7/2 Gd3+).
    position : array_like
        (nm) location.
    axis : array_like
        quantization axis, unit vector.
    omega : float
        (rad/s) transition angular frequency.
    t1_intrinsic : float
        (s) intrinsic relaxation time without external noise.
    t2 : float or None
        (s) coherence time; sensors only.
    n_s : int or None
        rate multiplicity factor; derived from spin_s when omitted
        (3 for spin-1, 2 for spin-1/2).
    """

    gamma: float = GAMMA_ELECTRON
    spin_s: float = 0.5
    position: Vec3 = field(default_factory=lambda: np.zeros(3))
    axis: Vec3 = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    omega: float = 0.0
    t1_intrinsic: float = np.inf
    t2: float | None = None
    n_s: int | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.spin_s <= 0 or round(2 * self.spin_s) != 2 * self.spin_s:
            raise ValueError(f"spin_s must be a positive half-integer, got {self.spin_s}")
        pos = vec3(self.position)
        if not np.all(np.isfinite(pos)):
            raise ValueError("position has non-finite components")
        ax = vec3(self.axis)
        if abs(np.linalg.norm(ax) - 1.0) > 1e-12:
            raise ValueError("axis must be unit-norm within 1e-12")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "axis", ax)
        if self.n_s is None:
            object.__setattr__(self, "n_s", 3 if self.spin_s == 1.0 else 2)
        elif self.spin_s == 1.0 and self.n_s != 3:
            raise ValueError("n_s must be 3 for a spin-1 sensor")
        elif self.spin_s == 0.5 and self.n_s != 2:
            raise ValueError("n_s must be 2 for a spin-1/2 sensor")
        if not self.t1_intrinsic > 0:
            raise ValueError("t1_intrinsic must be > 0")
        if self.t2 is not None and not self.t2 > 0:
            raise ValueError("t2 must be > 0 when given")

    def at(self, position) -> "SpinSpec":
        """Copy of this spin moved to a new position (nm)."""
        return replace(self, position=vec3(position))


@dataclass(frozen=True)
class NoiseBath:
    """Lorentzian bath felt by a sensor: transverse variance and tau_c.

    variance_perp : (T^2) field variance transverse to the sensor axis.
    tau_c : (s) correlation time of the fluctuating field.
    """

    variance_perp: float
    tau_c: float

    def __post_init__(self):
        if self.variance_perp < 0:
            raise ValueError("variance_perp must be >= 0")
        if not self.tau_c > 0:
            raise ValueError("tau_c must be > 0")


@dataclass(frozen=True)
class StochasticDrive:
    """Polychromatic drive: Rabi frequency and FWHM linewidth, both in Hz."""

    rabi: float
    linewidth: float

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError("rabi must be >= 0")
        if not self.linewidth > 0:
            raise ValueError("linewidth must be > 0")


def _separation_m(target_pos, sensor_pos):
    """Displacement (m) from target to sensor, enforcing the dipole cutoff."""
    d = (vec3(sensor_pos) - vec3(target_pos)) * NM
    r = np.linalg.norm(d)
    if r <= MIN_SEPARATION_NM * NM:
        raise GeometryError(
            f"separation {r / NM:.4g} nm between target at {np.asarray(target_pos)} nm "
            f"and sensor at {np.asarray(sensor_pos)} nm is below the "
            f"{MIN_SEPARATION_NM} nm point-dipole cutoff"
        )
    return d, r


def dipole_field_tensor(target_pos, sensor_pos, gamma_target) -> np.ndarray:
    """Dipolar field tensor D (T per unit spin), B_i = sum_j D_ij S_j.

    D = (mu0/4pi) * gamma_target * hbar * (3 rhat rhat^T - I) / r^3 for the
    field at the sensor from a point magnetic dipole gamma_target*hbar*S at
    the target.  Symmetric and traceless.
    """
    d, r = _separation_m(target_pos, sensor_pos)
    rhat = d / r
    return (
        MU0_OVER_4PI
        * gamma_target
        * HBAR
        * (3.0 * np.outer(rhat, rhat) - np.eye(3))
        / r**3
    )


def transverse_field_variance(target: SpinSpec, sensor: SpinSpec) -> float:
    """Variance (T^2) of the target's field transverse to the sensor axis.

    The target spin components are isotropic and uncorrelated,
    <S_i S_j> = delta_ij * S(S+1)/3, so Cov(B) = S(S+1)/3 * D D^T and the
    transverse variance is the trace of Cov(B) minus its projection on the
    sensor axis.  Scales as 1/r^6.
    """
    D = dipole_field_tensor(target.position, sensor.position, target.gamma)
    cov = (target.spin_s * (target.spin_s + 1.0) / 3.0) * (D @ D.T)
    n = sensor.axis
    return float(np.trace(cov) - n @ cov @ n)


def induced_rate_lorentzian(
    sensor: SpinSpec, bath: NoiseBath, gamma_partner: float | None = None
) -> float:
    """Bath-induced relaxation rate (s^-1), excluding the intrinsic part.

    n_s * gamma_sensor * gamma_partner * <B_perp^2> * tau_c / (1 + omega^2 tau_c^2).
    gamma_partner defaults to gamma_sensor: all sensors handled here are
    g~2 electron spins, so the product equals gamma_sensor**2.
    """
    if gamma_partner is None:
        gamma_partner = sensor.gamma
    lorentz = bath.tau_c / (1.0 + (sensor.omega * bath.tau_c) ** 2)
    return sensor.n_s * sensor.gamma * gamma_partner * bath.variance_perp * lorentz


def relaxation_rate_lorentzian(
    sensor: SpinSpec, bath: NoiseBath, gamma_partner: float | None = None
) -> float:
    """Total relaxation rate 1/T1 (s^-1) of a sensor in a Lorentzian bath.

    1/T1 = 1/T1' + induced_rate_lorentzian(sensor, bath); monotone
    increasing in the bath variance.
    """
    return 1.0 / sensor.t1_intrinsic + induced_rate_lorentzian(
        sensor, bath, gamma_partner
    )


def stochastic_drive_rate(spec: SpinSpec, drive: StochasticDrive) -> float:
    """Total 1/T1 (s^-1) under an incoherent drive: 1/T1' + 2|Omega|^2/dnu.

    Rabi frequency and linewidth are both in ordinary-frequency Hz; the
    induced rate is exactly linear in Omega^2 with slope 2/linewidth.
    """
    return 1.0 / spec.t1_intrinsic + 2.0 * drive.rabi**2 / drive.linewidth


def _coupling_hz(displacement_m, axis, gamma_a, gamma_b) -> float:
    r = np.linalg.norm(displacement_m)
    cos_t = np.dot(displacement_m / r, axis)
    return (
        MU0_OVER_4PI
        * gamma_a
        * gamma_b
        * HBAR
        / (2.0 * np.pi)
        * abs(1.0 - 3.0 * cos_t**2)
        / r**3
    )


def dipolar_coupling(sensor: SpinSpec, reporter: SpinSpec) -> float:
    """Secular dipolar coupling rate k_s (Hz) between two spins.

    k_s = (mu0/4pi) * gamma_a * gamma_b * hbar / (2pi) * |1 - 3cos^2(theta)| / r^3
    with theta the angle between the displacement and the shared
    quantization axis (the sensor's axis is used).
    """
    d, _ = _separation_m(sensor.position, reporter.position)
    return _coupling_hz(d, sensor.axis, sensor.gamma, reporter.gamma)


def max_coupling_surface_position(
    nv: SpinSpec,
    surface_z: float = 0.0,
    gamma_reporter: float = GAMMA_ELECTRON,
    lateral_halfwidth: float | None = None,
) -> tuple[Vec3, float]:
    """Surface position (nm) maximizing |k_s| to the NV, and k_s there.

    Coarse lateral grid on the z = surface_z plane followed by Nelder-Mead
    refinement.  Deterministic.  The NV must sit strictly below the surface.
    """
    depth = surface_z - nv.position[2]
    if depth <= 0:
        raise GeometryError(
            f"NV at z = {nv.position[2]:.4g} nm is not below the surface at "
            f"z = {surface_z:.4g} nm"
        )
    if lateral_halfwidth is None:
        lateral_halfwidth = 4.0 * depth

    def neg_coupling(xy):
        pos = np.array([xy[0], xy[1], surface_z])
        d = (pos - nv.position) * NM
        return -_coupling_hz(d, nv.axis, nv.gamma, gamma_reporter)

    # axis normal to the surface: |1-3u^2|u^3 peaks at u = 1, i.e. straight up
    if abs(abs(nv.axis[2]) - 1.0) < 1e-12:
        pos = np.array([nv.position[0], nv.position[1], surface_z])
        return pos, -neg_coupling(pos[:2])

    n_grid = 41
    span = np.linspace(-lateral_halfwidth, lateral_halfwidth, n_grid)
    best_val = np.inf
    best_xy = None
    for x in nv.position[0] + span:
        for y in nv.position[1] + span:
            v = neg_coupling((x, y))
            if v < best_val:
                best_val = v
                best_xy = (x, y)

    res = minimize(
        neg_coupling,
        x0=np.array(best_xy),
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": abs(best_val) * 1e-12 + 1e-30, "maxiter": 400},
    )
    xy = res.x if res.fun <= best_val else np.array(best_xy)
    pos = np.array([xy[0], xy[1], surface_z])
    return pos, -neg_coupling(xy)
