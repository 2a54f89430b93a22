"""Geometry kernel and closed-form rate tests, oracle checks included."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from common import gd_target, nv_spin, reporter_spin, rotation_matrix
from relaxometry.constants import GAMMA_ELECTRON, HBAR, MAGIC_ANGLE, MU0_OVER_4PI, NM, angular
from relaxometry.spincore import (
    GeometryError,
    NoiseBath,
    SpinSpec,
    StochasticDrive,
    dipolar_coupling,
    dipole_field_tensor,
    induced_rate_lorentzian,
    max_coupling_surface_position,
    relaxation_rate_lorentzian,
    stochastic_drive_rate,
    transverse_field_variance,
)

# k_s for two g~2 electrons 1 nm apart along the shared axis, evaluated from
# mu0 gamma^2 hbar / (4 pi * 2 pi * r^3) * |1 - 3 cos^2(0)| ahead of the build
COUPLING_1NM_THETA0_HZ = 104.12e6


# ---------------------------------------------------------------- dipole tensor

def test_tensor_r3_scaling():
    d1 = dipole_field_tensor([0, 0, 0], [1.0, 2.0, 2.0], GAMMA_ELECTRON)
    d2 = dipole_field_tensor([0, 0, 0], [2.0, 4.0, 4.0], GAMMA_ELECTRON)
    assert_allclose(d2, d1 * 0.125, rtol=1e-13)


def test_tensor_axial_symmetry():
    d = dipole_field_tensor([0, 0, 0], [0, 0, 3.0], GAMMA_ELECTRON)
    assert_allclose(d[2, 2], -2.0 * d[0, 0], rtol=1e-13)
    assert_allclose(d[2, 2], -2.0 * d[1, 1], rtol=1e-13)
    off_diag = d - np.diag(np.diag(d))
    assert np.max(np.abs(off_diag)) <= 1e-10 * np.max(np.abs(d))


def test_tensor_matches_finite_difference_oracle():
    # oracle: B_i = -d/dx_i of the dipole scalar potential (mu0/4pi)(m.r)/r^3
    rng = np.random.default_rng(7)
    target = rng.uniform(-3, 3, size=3)
    sensor = target + rng.uniform(2, 5, size=3)

    def potential(pos_nm, moment_axis):
        r = (pos_nm - target) * NM
        m = GAMMA_ELECTRON * HBAR * moment_axis
        rn = np.linalg.norm(r)
        return MU0_OVER_4PI * np.dot(m, r) / rn**3

    d_analytic = dipole_field_tensor(target, sensor, GAMMA_ELECTRON)
    h = 1e-5  # nm
    d_numeric = np.zeros((3, 3))
    for j in range(3):
        e_j = np.eye(3)[j]
        for i in range(3):
            e_i = np.eye(3)[i]
            f_plus = potential(sensor + h * e_i, e_j)
            f_minus = potential(sensor - h * e_i, e_j)
            d_numeric[i, j] = -(f_plus - f_minus) / (2.0 * h * NM)
    assert_allclose(d_analytic, d_numeric, rtol=1e-8)


def test_tensor_symmetric_traceless_property():
    rng = np.random.default_rng(11)
    for _ in range(50):
        target = rng.uniform(-10, 10, size=3)
        sensor = target + rng.uniform(0.5, 8, size=3) * rng.choice([-1, 1], size=3)
        d = dipole_field_tensor(target, sensor, GAMMA_ELECTRON)
        scale = np.max(np.abs(d))
        assert np.max(np.abs(d - d.T)) <= 1e-10 * scale
        assert abs(np.trace(d)) <= 1e-10 * scale


def test_tensor_cutoff_error_names_pair():
    with pytest.raises(GeometryError, match=r"0\.05"):
        dipole_field_tensor([0, 0, 0], [0.05, 0, 0], GAMMA_ELECTRON)


# ------------------------------------------------------- transverse variance

def test_variance_r6_scaling():
    sensor = reporter_spin()
    v1 = transverse_field_variance(gd_target([1.0, 1.5, 2.0]), sensor)
    v2 = transverse_field_variance(gd_target([2.0, 3.0, 4.0]), sensor)
    assert_allclose(v2, v1 / 64.0, rtol=1e-12)
    assert v1 > 0 and v2 > 0


def test_variance_loglog_slope():
    sensor = reporter_spin()
    direction = np.array([0.3, -0.5, 0.81])
    direction /= np.linalg.norm(direction)
    radii = np.geomspace(1.0, 100.0, 25)
    var = [transverse_field_variance(gd_target(r * direction), sensor) for r in radii]
    slope = np.polyfit(np.log(radii), np.log(var), 1)[0]
    assert abs(slope + 6.0) < 1e-6


def test_variance_monte_carlo_orientation_oracle():
    # oracle: sample spin vectors of fixed length sqrt(S(S+1)) with uniform
    # random orientation, so <S_i S_j> = delta_ij S(S+1)/3, and average the
    # squared transverse field directly
    sensor = reporter_spin(axis=(0.2, -0.3, 0.93))
    target = gd_target([1.7, -0.8, 2.4])
    closed = transverse_field_variance(target, sensor)

    rng = np.random.default_rng(2026)
    n = 1_000_000
    s = target.spin_s
    vec = rng.normal(size=(n, 3))
    vec *= np.sqrt(s * (s + 1.0)) / np.linalg.norm(vec, axis=1)[:, None]
    d = dipole_field_tensor(target.position, sensor.position, target.gamma)
    b = vec @ d.T
    b_par = b @ sensor.axis
    perp_sq = np.einsum("ij,ij->i", b, b) - b_par**2
    estimate = perp_sq.mean()
    stderr = perp_sq.std(ddof=1) / np.sqrt(n)
    assert abs(estimate - closed) < 3.0 * stderr
    assert abs(estimate - closed) / closed < 0.005


def test_variance_rotation_invariance():
    sensor_axis = np.array([0.0, 0.0, 1.0])
    target_pos = np.array([2.0, 1.0, 2.5])
    base = transverse_field_variance(
        gd_target(target_pos), reporter_spin(axis=sensor_axis)
    )
    rng = np.random.default_rng(3)
    for _ in range(10):
        rot = rotation_matrix(rng.normal(size=3), rng.uniform(0, 2 * np.pi))
        rotated = transverse_field_variance(
            gd_target(rot @ target_pos),
            reporter_spin(position=np.zeros(3), axis=rot @ sensor_axis),
        )
        assert_allclose(rotated, base, rtol=1e-9)


# ----------------------------------------------------------- Lorentzian rate

def test_rate_zero_variance_is_intrinsic():
    sensor = reporter_spin(t1=30e-6)
    bath = NoiseBath(variance_perp=0.0, tau_c=0.35e-9)
    assert relaxation_rate_lorentzian(sensor, bath) == 1.0 / 30e-6


def test_rate_additivity():
    sensor = reporter_spin(t1=30e-6)
    bath = NoiseBath(variance_perp=3.3e-8, tau_c=0.35e-9)
    total = relaxation_rate_lorentzian(sensor, bath)
    induced = induced_rate_lorentzian(sensor, bath)
    assert_allclose(total - 1.0 / sensor.t1_intrinsic, induced, rtol=1e-12)


def test_rate_monotone_in_variance():
    sensor = reporter_spin()
    rates = [
        relaxation_rate_lorentzian(sensor, NoiseBath(v, 0.35e-9))
        for v in np.linspace(0, 1e-7, 20)
    ]
    assert np.all(np.diff(rates) > 0)


def test_rate_fig1c_anchor():
    # Gd3+ (S=7/2) 3 nm from the reporter at the magic-angle elevation, where
    # the geometric variance equals its orientation average; reference value
    # for these parameters is T1 = 11.6 us
    sensor = reporter_spin(t1=30e-6)
    direction = np.array([np.sin(MAGIC_ANGLE), 0.0, np.cos(MAGIC_ANGLE)])
    var = transverse_field_variance(gd_target(3.0 * direction), sensor)
    rate = relaxation_rate_lorentzian(sensor, NoiseBath(var, 0.35e-9))
    assert abs(1.0 / rate - 11.6e-6) / 11.6e-6 < 0.15


def test_rate_lorentzian_tail():
    sensor_lo = reporter_spin()
    tau_c = 200.0 / sensor_lo.omega  # omega * tau_c = 200 >> 1
    bath = NoiseBath(variance_perp=1e-8, tau_c=tau_c)
    hi = SpinSpec(
        spin_s=0.5,
        position=sensor_lo.position,
        axis=sensor_lo.axis,
        omega=2.0 * sensor_lo.omega,
        t1_intrinsic=sensor_lo.t1_intrinsic,
    )
    lo_rate = induced_rate_lorentzian(sensor_lo, bath)
    hi_rate = induced_rate_lorentzian(hi, bath)
    assert abs(lo_rate / hi_rate - 4.0) < 1e-3 * 4.0


# ----------------------------------------------------------- stochastic drive

def test_drive_zero_power():
    spec = reporter_spin(t1=1e-3)
    assert stochastic_drive_rate(spec, StochasticDrive(0.0, 1e6)) == 1.0 / 1e-3


def test_drive_worked_example():
    spec = reporter_spin(t1=1e-3)
    rate = stochastic_drive_rate(spec, StochasticDrive(10e3, 1e6))
    assert_allclose(rate - 1.0 / 1e-3, 200.0, rtol=1e-12)
    assert_allclose(rate, 1200.0, rtol=1e-12)


def test_drive_unit_slope():
    spec = reporter_spin(t1=1e-3)
    linewidth = 2e6
    rabis = np.linspace(0.0, 50e3, 30)
    x = 2.0 * rabis**2 / linewidth
    rates = [stochastic_drive_rate(spec, StochasticDrive(r, linewidth)) for r in rabis]
    slope, intercept = np.polyfit(x, rates, 1)
    assert abs(slope - 1.0) < 1e-12
    assert_allclose(intercept, 1.0 / spec.t1_intrinsic, rtol=1e-9)


# ----------------------------------------------------------- dipolar coupling

def test_coupling_1nm_value():
    a = reporter_spin(position=(0, 0, 0))
    b = reporter_spin(position=(0, 0, 1.0))
    assert_allclose(dipolar_coupling(a, b), COUPLING_1NM_THETA0_HZ, rtol=1e-4)
    # theta = 90 deg carries half the magnitude
    c = reporter_spin(position=(1.0, 0, 0))
    assert_allclose(dipolar_coupling(a, c), COUPLING_1NM_THETA0_HZ / 2.0, rtol=1e-4)


def test_coupling_magic_angle_null():
    a = reporter_spin(position=(0, 0, 0))
    direction = np.array([np.sin(MAGIC_ANGLE), 0.0, np.cos(MAGIC_ANGLE)])
    b = reporter_spin(position=2.0 * direction)
    reference = dipolar_coupling(a, reporter_spin(position=(0, 0, 2.0)))
    assert dipolar_coupling(a, b) <= 1e-10 * reference


def test_coupling_912ns_anchor():
    nv = nv_spin(depth=4.5)
    pos, k_s = max_coupling_surface_position(nv)
    assert abs(1.0 / k_s - 912e-9) / 912e-9 < 0.10


# ------------------------------------------------- max-coupling surface search

def test_max_coupling_above_nv_for_normal_axis():
    nv = nv_spin(depth=4.5)
    pos, k_s = max_coupling_surface_position(nv)
    assert np.hypot(pos[0], pos[1]) < 0.05
    assert pos[2] == 0.0
    assert k_s > 0


def test_max_coupling_rotation_about_normal():
    nv = nv_spin(depth=3.0, axis=(np.sin(0.6), 0.0, np.cos(0.6)))
    pos_a, ks_a = max_coupling_surface_position(nv)
    for angle in (0.7, 2.1, 4.4):
        rot = rotation_matrix([0, 0, 1.0], angle)
        nv_rot = nv_spin(depth=3.0, axis=rot @ nv.axis)
        pos_b, ks_b = max_coupling_surface_position(nv_rot)
        assert_allclose(ks_b, ks_a, rtol=1e-9)
        assert_allclose(pos_b, rot @ pos_a, atol=1e-3)


def test_max_coupling_grid_oracle():
    # brute-force 0.05 nm exhaustive lateral grid as the independent check
    nv = nv_spin(depth=2.0, axis=(np.sin(0.5), 0.0, np.cos(0.5)))
    pos, k_s = max_coupling_surface_position(nv)

    half = 8.0
    step = 0.05
    grid = np.arange(-half, half + step / 2, step)
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    disp = np.stack([gx, gy, np.full_like(gx, 2.0)], axis=-1) * NM
    r = np.linalg.norm(disp, axis=-1)
    cos_t = (disp @ nv.axis) / r
    coupling = (
        MU0_OVER_4PI * nv.gamma**2 * HBAR / (2 * np.pi)
        * np.abs(1.0 - 3.0 * cos_t**2) / r**3
    )
    i, j = np.unravel_index(np.argmax(coupling), coupling.shape)
    assert abs(grid[i] - pos[0]) <= step
    assert abs(grid[j] - pos[1]) <= step
    assert abs(coupling[i, j] - k_s) / k_s < 1e-3


def test_max_coupling_requires_nv_below_surface():
    nv = SpinSpec(spin_s=1.0, position=[0, 0, 1.0], omega=angular(2.87e9), t1_intrinsic=1.0, t2=1e-6)
    with pytest.raises(GeometryError):
        max_coupling_surface_position(nv)


# ------------------------------------------------------------ type invariants

def test_spinspec_validation():
    with pytest.raises(ValueError):
        SpinSpec(gamma=-1.0)
    with pytest.raises(ValueError):
        SpinSpec(spin_s=0.3)
    with pytest.raises(ValueError):
        SpinSpec(spin_s=1.0, n_s=2)
    with pytest.raises(ValueError):
        SpinSpec(axis=[0.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        SpinSpec(t1_intrinsic=0.0)


def test_bath_and_drive_validation():
    with pytest.raises(ValueError):
        NoiseBath(variance_perp=-1e-9, tau_c=1e-9)
    with pytest.raises(ValueError):
        NoiseBath(variance_perp=1e-9, tau_c=0.0)
    with pytest.raises(ValueError):
        StochasticDrive(rabi=-1.0, linewidth=1e6)
    with pytest.raises(ValueError):
        StochasticDrive(rabi=1.0, linewidth=0.0)
