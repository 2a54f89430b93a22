"""Reporter-spin-assisted T1 relaxometry: simulation and time budgeting.

Quantitative comparison of direct NV-center relaxometry against
reporter-spin-assisted relaxometry for single fluctuating-spin targets:
dipolar rate formulas, analytic protocol signals with a Monte Carlo
telegraph oracle, shot-noise measurement-time optimization, 2-d speed
enhancement maps, and adaptive scanning-image simulations.
"""

from .budget import (
    EnhancementResult,
    MeasurementPlan,
    ReadoutModel,
    UndetectableSignal,
    delta_signal,
    golden_minimize,
    measurement_time,
    optimize_plan,
    speed_enhancement,
)
from .constants import GAMMA_ELECTRON, GD_SPIN, GD_TAU_C, MAGIC_ANGLE
from .protocol import (
    Protocol,
    SequenceSpec,
    SignalPoint,
    TrajectoryConfig,
    nv_t1_signal,
    reporter_signal,
    sequence_duration,
    simulate_trajectories,
    visibility,
)
from .scene import Scene, target_direction
from .spincore import (
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

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "GAMMA_ELECTRON",
    "GD_SPIN",
    "GD_TAU_C",
    "MAGIC_ANGLE",
    "GeometryError",
    "NoiseBath",
    "SpinSpec",
    "StochasticDrive",
    "dipolar_coupling",
    "dipole_field_tensor",
    "induced_rate_lorentzian",
    "max_coupling_surface_position",
    "relaxation_rate_lorentzian",
    "stochastic_drive_rate",
    "transverse_field_variance",
    "Protocol",
    "SequenceSpec",
    "SignalPoint",
    "TrajectoryConfig",
    "nv_t1_signal",
    "reporter_signal",
    "sequence_duration",
    "simulate_trajectories",
    "visibility",
    "Scene",
    "target_direction",
    "EnhancementResult",
    "MeasurementPlan",
    "ReadoutModel",
    "UndetectableSignal",
    "delta_signal",
    "golden_minimize",
    "measurement_time",
    "optimize_plan",
    "speed_enhancement",
]
