"""Scene assembly: spin roster, geometry, and derived couplings.

A Scene bundles the NV, the reporter, and an optional fluctuating target
together with the correlation sequence, and exposes the signal models both
protocols need: baseline and target-present relaxation rates, the
reporter-sequence visibility, and single-shot durations.  Scenes are
immutable; studies that vary parameters rebuild them from configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constants import GD_TAU_C, MAGIC_ANGLE
from .protocol import Protocol, SequenceSpec, nv_t1_signal, reporter_signal, visibility
from .spincore import (
    NoiseBath,
    SpinSpec,
    dipolar_coupling,
    induced_rate_lorentzian,
    transverse_field_variance,
    unit_vector,
)

__all__ = ["Scene", "target_direction"]


def target_direction(direction, axis) -> np.ndarray:
    """Resolve a target placement direction relative to the sensor axis.

    "above" is the surface normal +z.  "magic" places the target at the
    magic angle from the quantization axis (azimuth along +x), where the
    geometric transverse variance equals its orientation-averaged value;
    this is the documented convention behind the reference single-Gd
    reduced-T1 value.  Any explicit 3-vector is normalized and used
    as-is.
    """
    if isinstance(direction, str):
        if direction == "above":
            return np.array([0.0, 0.0, 1.0])
        if direction == "magic":
            n = unit_vector(axis)
            ref = np.array([1.0, 0.0, 0.0])
            perp = ref - np.dot(ref, n) * n
            if np.linalg.norm(perp) < 1e-9:
                perp = np.array([0.0, 1.0, 0.0]) - n[1] * n
            e_az = perp / np.linalg.norm(perp)
            return np.cos(MAGIC_ANGLE) * n + np.sin(MAGIC_ANGLE) * e_az
        raise ValueError(f"unknown direction {direction!r}; use 'above', 'magic' or a vector")
    return unit_vector(direction)


@dataclass(frozen=True)
class Scene:
    """Full spin roster with derived couplings; input to every study.

    nv, reporter : SpinSpec sensors sharing a quantization axis.
    target : SpinSpec of the fluctuating spin, or None for a bare scene.
    tau_c : (s) correlation time of the target's field.
    sequence : reporter-protocol timing; tau_nv defaults to the
        visibility-matched value 1/(2 k_s) when built via Scene.assemble.
    echo_stretch : exponent of the NV echo envelope.
    """

    nv: SpinSpec
    reporter: SpinSpec
    target: SpinSpec | None
    tau_c: float
    sequence: SequenceSpec
    echo_stretch: float = 3.0

    @classmethod
    def assemble(
        cls,
        nv: SpinSpec,
        reporter: SpinSpec,
        target: SpinSpec | None = None,
        tau_c: float = GD_TAU_C,
        sequence: SequenceSpec | None = None,
        echo_stretch: float = 3.0,
    ) -> "Scene":
        """Build a scene, defaulting tau_nv to the matched value 1/(2 k_s)."""
        if sequence is None:
            k_s = dipolar_coupling(nv, reporter)
            sequence = SequenceSpec(tau_nv=1.0 / (2.0 * k_s))
        return cls(
            nv=nv,
            reporter=reporter,
            target=target,
            tau_c=tau_c,
            sequence=sequence,
            echo_stretch=echo_stretch,
        )

    @cached_property
    def k_s(self) -> float:
        """(Hz) secular NV-reporter dipolar coupling."""
        return dipolar_coupling(self.nv, self.reporter)

    def induced_rate(self, sensor: SpinSpec) -> float:
        """(s^-1) relaxation rate the target adds to the given sensor."""
        if self.target is None:
            return 0.0
        var = transverse_field_variance(self.target, sensor)
        bath = NoiseBath(variance_perp=var, tau_c=self.tau_c)
        return induced_rate_lorentzian(sensor, bath)

    @cached_property
    def reporter_rate_baseline(self) -> float:
        return 1.0 / self.reporter.t1_intrinsic

    @cached_property
    def reporter_rate_total(self) -> float:
        return self.reporter_rate_baseline + self.induced_rate(self.reporter)

    @cached_property
    def nv_rate_baseline(self) -> float:
        return 1.0 / self.nv.t1_intrinsic

    @cached_property
    def nv_rate_total(self) -> float:
        return self.nv_rate_baseline + self.induced_rate(self.nv)

    def rates(self, protocol: Protocol) -> tuple[float, float]:
        """(baseline, with-target) relaxation rates for a protocol's sensor."""
        if protocol is Protocol.REPORTER:
            return self.reporter_rate_baseline, self.reporter_rate_total
        return self.nv_rate_baseline, self.nv_rate_total

    def signal(self, protocol: Protocol, probe_time, with_target: bool = True):
        """Protocol signal at probe_time (scalar or array)."""
        gamma_base, gamma_target = self.rates(protocol)
        gamma = gamma_target if with_target else gamma_base
        if protocol is Protocol.REPORTER:
            return reporter_signal(
                self.sequence,
                1.0 / gamma,
                self.nv,
                self.k_s,
                tau_r=probe_time,
                echo_stretch=self.echo_stretch,
            )
        return nv_t1_signal(probe_time, gamma)

    def signal_pair(self, protocol: Protocol, probe_time):
        """(baseline, with-target) signals at probe_time."""
        return (
            self.signal(protocol, probe_time, with_target=False),
            self.signal(protocol, probe_time, with_target=True),
        )

    def visibility_for(self, reporter_rate: float) -> float:
        """Reporter-sequence visibility for a given total reporter rate."""
        return visibility(
            self.sequence, 1.0 / reporter_rate, self.nv, self.k_s, self.echo_stretch
        )

    def duration_without_readout(self, protocol: Protocol, probe_time):
        """(s) single-shot duration excluding the readout model's overheads.

        Linear in probe_time; array-friendly.  The readout model adds its
        own t_init and t_read on top of this.
        """
        probe = np.asarray(probe_time, dtype=float)
        overhead = self.sequence.t_init + self.sequence.t_extra
        if protocol is Protocol.REPORTER:
            return overhead + self.sequence.block_time + probe
        return overhead + probe

    def without_target(self) -> "Scene":
        """Copy of this scene with the target removed."""
        return Scene(
            nv=self.nv,
            reporter=self.reporter,
            target=None,
            tau_c=self.tau_c,
            sequence=self.sequence,
            echo_stretch=self.echo_stretch,
        )
