"""Physical constants and unit conventions.

Unit policy for the whole package: positions are given in nm and converted
to meters at the geometry boundary; gyromagnetic ratios and spin transition
frequencies are angular (rad/s); dipolar couplings, Rabi frequencies and
drive linewidths are quoted in ordinary frequency (Hz).  Every conversion
between the two frequency conventions goes through this module.
"""

import numpy as np

MU0_OVER_4PI = 1e-7             # T*m/A
HBAR = 1.054571817e-34          # J*s
NM = 1e-9                       # m

# g~2 electron value, shared default for the NV, the reporter and Gd3+.
GAMMA_ELECTRON_HZ_PER_T = 28.03e9                       # Hz/T
GAMMA_ELECTRON = 2 * np.pi * GAMMA_ELECTRON_HZ_PER_T    # rad/s/T

NV_TRANSITION_HZ = 2.87e9       # Hz, zero-field splitting default

GD_SPIN = 3.5                   # Gd3+ electronic spin S = 7/2
GD_TAU_C = 0.35e-9              # s, Gd3+ field correlation time

# arccos(1/sqrt(3)) = 54.7356 deg; secular dipolar factor 1-3cos^2 vanishes
MAGIC_ANGLE = np.arccos(1.0 / np.sqrt(3.0))

# point-dipole model breaks down below atomic scale
MIN_SEPARATION_NM = 0.1


def angular(f_hz):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return 2.0 * np.pi * f_hz


def ordinary(omega_rad_s):
    """Angular frequency (rad/s) to ordinary frequency (Hz)."""
    return omega_rad_s / (2.0 * np.pi)
