"""Shot-noise measurement-time budgeting and per-protocol optimization.

The averaged minimal time to detect a signal change delta_s at a target
signal-to-noise ratio is

    t = snr^2 * c_spn^2 / (2 * delta_s^2) * t_seq

with c_spn the readout noise penalty relative to the spin-projection limit
and t_seq the full single-shot sequence duration.  Probe time (and readout
duration for duration-dependent readouts) are optimized per protocol; the
figure of merit is the ratio t_direct_nv / t_reporter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .protocol import Protocol

if TYPE_CHECKING:
    from .scene import Scene

__all__ = [
    "UndetectableSignal",
    "ReadoutModel",
    "MeasurementPlan",
    "EnhancementResult",
    "golden_minimize",
    "measurement_time",
    "delta_signal",
    "optimize_plan",
    "speed_enhancement",
]

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class UndetectableSignal(RuntimeError):
    """Baseline and target signals coincide; no finite measurement time."""


def golden_minimize(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section minimum of a unimodal scalar function on [lo, hi].

    Returns (x, f(x)).  Deterministic; ~1e-10 bracket tolerance suffices
    for every optimization in this package (arguments are log-scaled
    times of order 1).
    """
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


@dataclass(frozen=True)
class ReadoutModel:
    """NV readout family with its noise penalty c_spn(t_read) >= 1.

    kind : "pl" or "scc".
    t_read : (s) readout duration; the operating point (fixed for PL,
        optimizable within t_read_bounds for SCC).
    t_init : (s) per-shot initialization overhead.
    c_pl : constant noise penalty of PL readout.
    c_floor : asymptotic SCC penalty at long readout.
    noise_decay : (s) SCC noise constant A in c_spn^2 = c_floor^2 + A/t_read;
        non-increasing in t_read by construction.
    t_read_bounds : (s, s) allowed SCC readout durations.
    """

    kind: str
    t_read: float
    t_init: float = 0.0
    c_pl: float = 35.0
    c_floor: float = 2.0
    noise_decay: float = 3e-4
    t_read_bounds: tuple[float, float] = (1e-6, 1e-4)

    def __post_init__(self):
        if self.kind not in ("pl", "scc"):
            raise ValueError(f"kind must be 'pl' or 'scc', got {self.kind!r}")
        if not self.t_read > 0:
            raise ValueError("t_read must be > 0")
        if self.t_init < 0:
            raise ValueError("t_init must be >= 0")
        lo, hi = self.t_read_bounds
        if not (0 < lo <= hi):
            raise ValueError("t_read_bounds must satisfy 0 < lo <= hi")
        # c_spn >= 1 for every duration requires the asymptotic value >= 1
        if (self.c_pl if self.kind == "pl" else self.c_floor) < 1.0:
            raise ValueError("c_spn must be >= 1 for all t_read")

    @classmethod
    def pl(cls, c_spn: float = 35.0, t_read: float = 350e-9, t_init: float = 2e-6):
        """Standard photoluminescence readout: constant noise penalty."""
        return cls(kind="pl", t_read=t_read, t_init=t_init, c_pl=c_spn)

    @classmethod
    def scc(
        cls,
        c_floor: float = 2.0,
        noise_decay: float = 3e-4,
        t_read: float = 10e-6,
        t_init: float = 10e-6,
        t_read_bounds: tuple[float, float] = (1e-6, 1e-4),
    ):
        """Spin-to-charge readout: penalty falls toward c_floor as t_read grows."""
        return cls(
            kind="scc",
            t_read=t_read,
            t_init=t_init,
            c_floor=c_floor,
            noise_decay=noise_decay,
            t_read_bounds=t_read_bounds,
        )

    def c_spn(self, t_read: float | None = None) -> float:
        """Noise penalty at a given readout duration (default: operating point)."""
        if t_read is None:
            t_read = self.t_read
        if self.kind == "pl":
            return self.c_pl
        return float(np.sqrt(self.c_floor**2 + self.noise_decay / t_read))

    def best_noise_time(self, t_rest, n_reads: int = 1):
        """Minimize c_spn(t)^2 * (t_rest + n_reads*t) over the readout duration.

        t_rest is the sequence time excluding readout; returns
        (t_read, c_spn, product).  For SCC the optimum is the closed form
        t* = sqrt(A * t_rest / (n_reads * c_floor^2)) clamped to the
        bounds; for PL the duration is fixed.  Vectorized over t_rest.
        """
        t_rest = np.asarray(t_rest, dtype=float)
        if self.kind == "pl":
            t_read = np.broadcast_to(self.t_read, t_rest.shape).copy()
            c = np.broadcast_to(self.c_pl, t_rest.shape).copy()
        else:
            lo, hi = self.t_read_bounds
            t_read = np.sqrt(self.noise_decay * t_rest / (n_reads * self.c_floor**2))
            t_read = np.clip(t_read, lo, hi)
            c = np.sqrt(self.c_floor**2 + self.noise_decay / t_read)
        product = c**2 * (t_rest + n_reads * t_read)
        if t_rest.ndim == 0:
            return float(t_read), float(c), float(product)
        return t_read, c, product


@dataclass(frozen=True)
class MeasurementPlan:
    """Optimized operating point of one protocol on one scene."""

    protocol: Protocol
    probe_time: float
    readout: ReadoutModel
    delta_s: float
    t_seq: float
    t_total: float
    snr: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta_s <= 1.0:
            raise ValueError("delta_s must lie in [0, 1]")
        if self.t_total < self.t_seq:
            raise ValueError("t_total must be >= t_seq")


def measurement_time(delta_s: float, snr: float, c_spn: float, t_seq: float) -> float:
    """Averaged minimal detection time snr^2 c_spn^2 / (2 delta_s^2) * t_seq."""
    if delta_s < 0 or not np.isfinite(delta_s):
        raise ValueError("delta_s must be a finite value >= 0")
    if not snr > 0:
        raise ValueError("snr must be > 0")
    if not c_spn >= 1:
        raise ValueError("c_spn must be >= 1")
    if not t_seq > 0:
        raise ValueError("t_seq must be > 0")
    if delta_s == 0.0:
        raise UndetectableSignal("delta_s is zero; detection time is infinite")
    return snr**2 * c_spn**2 / (2.0 * delta_s**2) * t_seq


def delta_signal(protocol: Protocol, scene: "Scene", probe_time):
    """|S_baseline - S_target| at the given probe time(s); array-friendly."""
    base, target = scene.signal_pair(protocol, probe_time)
    return np.abs(base - target)


def _probe_bounds(protocol: Protocol, scene: "Scene") -> tuple[float, float]:
    gamma_base, gamma_target = scene.rates(protocol)
    slow = min(gamma_base, gamma_target)
    return 1e-9, 20.0 / slow


def optimize_plan(
    protocol: Protocol,
    scene: "Scene",
    readout: ReadoutModel,
    snr: float = 1.0,
    probe_bounds: tuple[float, float] | None = None,
    grid_points: int = 96,
) -> MeasurementPlan:
    """Minimize the detection time over probe time (and readout duration).

    A coarse log-spaced probe grid seeds a golden-section refinement in
    log(probe time); for duration-dependent readouts the optimal t_read is
    solved per probe point.  The returned t_total never exceeds the best
    seeding grid point.  Raises UndetectableSignal when the two signal
    curves coincide over the whole search range.
    """
    if probe_bounds is None:
        probe_bounds = _probe_bounds(protocol, scene)
    lo, hi = probe_bounds
    if not (0 < lo < hi):
        raise ValueError("probe_bounds must satisfy 0 < lo < hi")

    def total_time(tau):
        ds = delta_signal(protocol, scene, tau)
        t_rest = scene.duration_without_readout(protocol, tau) + readout.t_init
        _, _, product = readout.best_noise_time(t_rest)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(ds > 0.0, snr**2 * product / (2.0 * ds**2), np.inf)

    taus = np.geomspace(lo, hi, grid_points)
    totals = total_time(taus)
    if not np.any(np.isfinite(totals)):
        raise UndetectableSignal(
            f"{protocol.value}: baseline and target signals coincide over the probe range"
        )
    i = int(np.argmin(totals))
    a = taus[max(i - 1, 0)]
    b = taus[min(i + 1, grid_points - 1)]
    log_tau, refined = golden_minimize(
        lambda u: float(total_time(np.exp(u))), np.log(a), np.log(b)
    )

    # golden refinement can only improve on the seeding grid
    if refined <= totals[i]:
        tau_best = float(np.exp(log_tau))
    else:
        tau_best = float(taus[i])
    ds = float(delta_signal(protocol, scene, tau_best))
    t_rest = scene.duration_without_readout(protocol, tau_best) + readout.t_init
    t_read, c, _ = readout.best_noise_time(t_rest)
    chosen = replace(readout, t_read=t_read)
    t_seq = t_rest + t_read
    return MeasurementPlan(
        protocol=protocol,
        probe_time=tau_best,
        readout=chosen,
        delta_s=ds,
        t_seq=t_seq,
        t_total=measurement_time(ds, snr, c, t_seq),
        snr=snr,
    )


@dataclass(frozen=True)
class EnhancementResult:
    """Speed-enhancement ratio t_direct_nv / t_reporter with its plans.

    flag is None when both protocols are detectable; otherwise it names
    which side was undetectable and ratio is inf, 0.0 or nan.
    """

    ratio: float
    plan_nv: MeasurementPlan | None
    plan_reporter: MeasurementPlan | None
    flag: str | None = None

    def __float__(self):
        return self.ratio


def _readout_for(readouts, protocol: Protocol) -> ReadoutModel:
    if isinstance(readouts, ReadoutModel):
        return readouts
    return readouts[protocol]


def speed_enhancement(
    scene: "Scene",
    readouts,
    snr: float = 1.0,
    protocols: tuple[Protocol, Protocol] = (Protocol.DIRECT_NV, Protocol.REPORTER),
) -> EnhancementResult:
    """Ratio of optimized direct-NV detection time to reporter detection time.

    readouts is a single ReadoutModel shared by both protocols or a
    mapping {Protocol: ReadoutModel}.  Handing both slots the same
    protocol returns ratio 1.0 exactly (degenerate consistency check).
    """
    numerator, denominator = protocols
    plans: dict[Protocol, MeasurementPlan | None] = {}
    flags = []
    for proto in (numerator, denominator):
        if proto in plans:
            continue
        try:
            plans[proto] = optimize_plan(proto, scene, _readout_for(readouts, proto), snr)
        except UndetectableSignal:
            plans[proto] = None
            flags.append(f"{proto.value}-undetectable")

    plan_num = plans[numerator]
    plan_den = plans[denominator]
    if plan_num is None and plan_den is None:
        ratio = np.nan
    elif plan_num is None:
        ratio = np.inf
    elif plan_den is None:
        ratio = 0.0
    elif numerator is denominator:
        ratio = 1.0
    else:
        ratio = plan_num.t_total / plan_den.t_total

    return EnhancementResult(
        ratio=float(ratio),
        plan_nv=plans.get(Protocol.DIRECT_NV),
        plan_reporter=plans.get(Protocol.REPORTER),
        flag="; ".join(flags) if flags else None,
    )
