"""Shared scene builders for the test suite."""

import numpy as np

from relaxometry.config import build_scene, validate
from relaxometry.constants import angular
from relaxometry.spincore import SpinSpec

OMEGA_NV = angular(2.87e9)


def nv_spin(depth=4.5, axis=(0.0, 0.0, 1.0), t1=3.5e-3, t2=8.4e-6):
    """NV sensor at the given depth (nm) below the z = 0 surface."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return SpinSpec(
        spin_s=1.0,
        position=np.array([0.0, 0.0, -depth]),
        axis=axis,
        omega=OMEGA_NV,
        t1_intrinsic=t1,
        t2=t2,
    )


def reporter_spin(position=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0), t1=30e-6):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return SpinSpec(
        spin_s=0.5,
        position=np.asarray(position, dtype=float),
        axis=axis,
        omega=OMEGA_NV,
        t1_intrinsic=t1,
    )


def gd_target(position, axis=(0.0, 0.0, 1.0)):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return SpinSpec(
        spin_s=3.5,
        position=np.asarray(position, dtype=float),
        axis=axis,
        omega=0.0,
        t1_intrinsic=np.inf,
    )


def fig1c_config(**overrides):
    """Normalized config for the single-Gd reference scene."""
    raw = {
        "nv": {"depth": "4.5 nm", "t1": "3.5 ms", "t2": "8.4 us"},
        "reporter": {"t1": "30 us"},
        "target": {"spin": 3.5, "tau_c": "0.35 ns", "distance": "3 nm", "direction": "magic"},
    }
    raw.update(overrides)
    return validate(raw)


def fig1c_scene(**overrides):
    return build_scene(fig1c_config(**overrides))


def rotation_matrix(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
