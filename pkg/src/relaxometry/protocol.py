"""Analytic signal models for both relaxometry protocols, plus oracles.

The reporter-assisted sequence is two DEER blocks separated by a
correlation wait tau_r; the NV acts as a flag qubit whose coherence stores
whether the reporter flipped during the wait.  The resulting signal is a
visibility prefactor times exp(-tau_r / T1_reporter).  Direct NV
relaxometry is a plain population decay exp(-gamma * tau).

A Monte Carlo telegraph-trajectory simulator provides the independent
check that the parity correlator of a symmetric two-state flipper decays
as exp(-tau/T1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .budget import ReadoutModel
    from .spincore import SpinSpec

__all__ = [
    "Protocol",
    "SequenceSpec",
    "SignalPoint",
    "TrajectoryConfig",
    "visibility",
    "reporter_signal",
    "nv_t1_signal",
    "simulate_trajectories",
    "sequence_duration",
]


class Protocol(str, Enum):
    """The two measurement protocols being compared."""

    REPORTER = "reporter"
    DIRECT_NV = "direct-nv"


@dataclass(frozen=True)
class SequenceSpec:
    """Timing of the reporter-assisted correlation sequence.

    tau_nv : (s) half-echo time of each DEER block.
    tau_r : (s) correlation wait between the blocks.
    n_blocks : number of DEER blocks (2 for the standard sequence).
    t_init : (s) optical initialization not accounted in the readout model.
    t_extra : (s) pulse and dead-time overheads.
    """

    tau_nv: float
    tau_r: float = 0.0
    n_blocks: int = 2
    t_init: float = 0.0
    t_extra: float = 0.0

    def __post_init__(self):
        for name in ("tau_nv", "tau_r", "t_init", "t_extra"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")

    @property
    def block_time(self) -> float:
        """(s) total duration of all DEER blocks, n_blocks * 2 * tau_nv."""
        return self.n_blocks * 2.0 * self.tau_nv


@dataclass(frozen=True)
class SignalPoint:
    """One simulated signal sample: value, standard error, shot count."""

    value: float
    std_err: float
    shots: int

    def __post_init__(self):
        if self.std_err < 0:
            raise ValueError("std_err must be >= 0")
        if abs(self.value) > 1.0 + 3.0 * self.std_err:
            raise ValueError("value outside [-1, 1] beyond 3 standard errors")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Monte Carlo controls: trajectory count, seed, bookkeeping window."""

    n_traj: int
    seed: int = 0
    dt_max: float = np.inf

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")


def visibility(
    seq: SequenceSpec,
    reporter_t1: float,
    nv: "SpinSpec",
    k_s: float,
    echo_stretch: float = 3.0,
) -> float:
    """Signal visibility V of the reporter-assisted sequence at tau_r = 0.

    V = sin^2(pi k_s tau_nv)                 entanglement contrast
        * exp(-(2 tau_nv / T2)^echo_stretch)  NV echo decoherence per block
        * exp(-2 tau_nv / T1_reporter)        reporter decay in the DEER windows
        * exp(-block_time / T1_NV)            NV population decay over the blocks

    Maximal over tau_nv at tau_nv = 1/(2 k_s) up to the decoherence
    envelope.  The NV decay term uses the block time only, so the full
    signal factorizes as S(tau_r) = V * exp(-tau_r / T1_reporter).
    """
    if reporter_t1 <= 0:
        raise ValueError("reporter_t1 must be > 0")
    contrast = np.sin(np.pi * k_s * seq.tau_nv) ** 2
    echo = np.exp(-((2.0 * seq.tau_nv / nv.t2) ** echo_stretch))
    reporter_loss = np.exp(-2.0 * seq.tau_nv / reporter_t1)
    nv_loss = np.exp(-seq.block_time / nv.t1_intrinsic)
    return float(contrast * echo * reporter_loss * nv_loss)


def reporter_signal(
    seq: SequenceSpec,
    reporter_t1: float,
    nv: "SpinSpec",
    k_s: float,
    tau_r=None,
    echo_stretch: float = 3.0,
):
    """Reporter-assisted signal S(tau_r) = V * exp(-tau_r / T1_reporter).

    tau_r defaults to seq.tau_r; pass a scalar or array to evaluate a
    whole correlation-time grid against the same sequence.
    """
    if tau_r is None:
        tau_r = seq.tau_r
    v = visibility(seq, reporter_t1, nv, k_s, echo_stretch)
    return v * np.exp(-np.asarray(tau_r, dtype=float) / reporter_t1)


def nv_t1_signal(tau, gamma_total: float):
    """Direct NV relaxometry signal exp(-gamma_total * tau), in (0, 1]."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    return np.exp(-gamma_total * tau)


# fixed batch size so results do not depend on how work is partitioned
_TRAJ_BATCH = 8192


def _flip_counts(rng, n_rows: int, rate: float, taus: np.ndarray, dt_max: float):
    """Flip counts N(tau) per trajectory from exact exponential waiting times."""
    tmax = taus[-1]
    counts = np.zeros((n_rows, taus.size), dtype=np.int64)
    t_acc = np.zeros(n_rows)
    active = np.arange(n_rows)
    horizon = min(dt_max, tmax) if np.isfinite(dt_max) else tmax
    mean_flips = rate * horizon
    cols = int(np.ceil(mean_flips + 10.0 * np.sqrt(mean_flips) + 16.0))
    while active.size:
        waits = rng.exponential(1.0 / rate, size=(active.size, cols))
        times = t_acc[active, None] + np.cumsum(waits, axis=1)
        for j, tau in enumerate(taus):
            counts[active, j] += (times <= tau).sum(axis=1)
        t_acc[active] = times[:, -1]
        active = active[times[:, -1] <= tmax]
    return counts


def simulate_trajectories(t1: float, tau_grid, cfg: TrajectoryConfig):
    """Parity correlator <sigma(0) sigma(tau)> of a symmetric telegraph spin.

    Flips occur at per-direction rate 1/(2*T1), sampled with exact
    exponential waiting times (dt_max only bounds the bookkeeping block
    size).  The correlator estimate is 2*p_even - 1 with a binomial
    standard error; the analytic expectation is exp(-tau/T1).  Trajectories
    run in fixed-size batches, each on its own seed substream, so the
    result is independent of any outer partitioning.

    Returns a list of SignalPoint, one per grid point.
    """
    if not t1 > 0:
        raise ValueError("t1 must be > 0")
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or taus.size == 0:
        raise ValueError("tau_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(taus) < 0):
        raise ValueError("tau_grid must be sorted ascending")
    if np.any(taus < 0):
        raise ValueError("tau_grid entries must be >= 0")

    rate = 1.0 / (2.0 * t1)
    n_batches = (cfg.n_traj + _TRAJ_BATCH - 1) // _TRAJ_BATCH
    streams = np.random.SeedSequence(cfg.seed).spawn(n_batches)
    even = np.zeros(taus.size, dtype=np.int64)
    done = 0
    for k in range(n_batches):
        n_rows = min(_TRAJ_BATCH, cfg.n_traj - done)
        rng = np.random.default_rng(streams[k])
        counts = _flip_counts(rng, n_rows, rate, taus, cfg.dt_max)
        even += (counts % 2 == 0).sum(axis=0)
        done += n_rows

    n = cfg.n_traj
    p = even / n
    value = 2.0 * p - 1.0
    std_err = 2.0 * np.sqrt(p * (1.0 - p) / n)
    return [SignalPoint(float(v), float(s), n) for v, s in zip(value, std_err)]


def sequence_duration(
    seq: SequenceSpec,
    readout: "ReadoutModel | None",
    tau_probe: float,
    protocol: Protocol = Protocol.REPORTER,
) -> float:
    """Total single-shot duration (s) of one protocol repetition.

    Reporter protocol: t_init + n_blocks*2*tau_nv + tau_probe; direct
    protocol: t_init + tau_probe.  Both add the readout model's
    initialization and readout durations plus t_extra.  Pass readout=None
    for zero readout overheads.
    """
    if tau_probe < 0:
        raise ValueError("tau_probe must be >= 0")
    body = tau_probe if protocol is Protocol.DIRECT_NV else seq.block_time + tau_probe
    overhead = seq.t_init + seq.t_extra
    if readout is not None:
        overhead += readout.t_init + readout.t_read
    return overhead + body
