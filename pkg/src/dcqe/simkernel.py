"""Stochastic record of one operational unit.

A unit is simulated in three steps:

1. ``generate_pairs`` draws the SPDC pairs of every pump pulse in the
   acquisition window and thins them by signal collection, idler collection
   and entanglement fidelity.
2. ``assign_bins`` places each stored idler in its memory time bin and
   applies the double-occupancy policy.
3. ``route_detection`` sends each collected signal through the final
   coupler under a hypothesis model and a delayed choice.

Pair generation uses the conditional-uniform form of a Poisson process on
the pulse grid: the total pair count is Poisson(n_pulses * p_pair) and each
pair lands on a uniformly chosen pulse.  This has exactly the law of
independent Poisson(p_pair) counts per pulse, at O(pairs) instead of
O(pulses) cost.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import BinsNotAssigned, OrderingNotValidated
from .planner import DerivedPlan, ExperimentConfig
from .rng import GENERATION_STREAM, ROUTING_STREAM, stream


class HypothesisModel(enum.Enum):
    CAUSAL = "causal"
    IC = "ic"


class DelayedChoice(enum.Enum):
    ERASE = "erase"
    PRESERVE = "preserve"


@dataclass(frozen=True)
class PairEvent:
    pulse_index: int
    time: float
    signal_collected: bool
    idler_collected: bool
    fidelity_pass: bool
    bin_index: int | None = None
    multi_pair: bool = False
    double_occupied: bool = False


@dataclass(frozen=True)
class TraceCounters:
    generated_pairs: int = 0
    signal_collected: int = 0
    idler_stored: int = 0
    interference_capable: int = 0
    double_occupied_bins: int = 0
    multi_pair_pulses: int = 0


@dataclass(frozen=True, eq=False)
class UnitTrace:
    """Column-wise event record of one unit (one row per generated pair).

    ``bin_index`` is -1 for idlers that were not stored.  ``capable`` marks
    interference-capable pairs and is only final once bins are assigned.
    """

    seed: int
    f_pump: float
    pulse_index: np.ndarray
    time: np.ndarray
    signal: np.ndarray
    idler: np.ndarray
    fidelity: np.ndarray
    multi_pair: np.ndarray
    bin_index: np.ndarray
    double_occupied: np.ndarray
    capable: np.ndarray
    counters: TraceCounters
    occupied_bins: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    occupied_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    bins_assigned: bool = False
    config_digest: str = ""

    def __len__(self) -> int:
        return int(self.pulse_index.size)

    def __eq__(self, other):
        if not isinstance(other, UnitTrace):
            return NotImplemented
        scalars = ("seed", "f_pump", "counters", "bins_assigned", "config_digest")
        arrays = ("pulse_index", "time", "signal", "idler", "fidelity", "multi_pair",
                  "bin_index", "double_occupied", "capable", "occupied_bins", "occupied_counts")
        return (all(getattr(self, k) == getattr(other, k) for k in scalars)
                and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays))

    @property
    def occupancy(self) -> dict[int, int]:
        return dict(zip(self.occupied_bins.tolist(), self.occupied_counts.tolist()))

    @property
    def events(self) -> list[PairEvent]:
        return [
            PairEvent(int(k), float(t), bool(s), bool(i), bool(f),
                      int(b) if b >= 0 else None, bool(m), bool(d))
            for k, t, s, i, f, b, m, d in zip(
                self.pulse_index, self.time, self.signal, self.idler, self.fidelity,
                self.bin_index, self.multi_pair, self.double_occupied)
        ]

    @classmethod
    def from_events(cls, events: Iterable[PairEvent], f_pump: float, seed: int = 0,
                    config_digest: str = "") -> "UnitTrace":
        """Build an unbinned trace from explicit events (bins are not copied)."""
        events = sorted(events, key=lambda e: e.pulse_index)
        col = lambda attr, dtype: np.array([getattr(e, attr) for e in events], dtype=dtype)
        pulses = col("pulse_index", np.int64)
        times = col("time", np.float64)
        signal = col("signal_collected", bool)
        idler = col("idler_collected", bool)
        fidelity = col("fidelity_pass", bool) & idler
        return _unbinned(seed, f_pump, pulses, times, signal, idler, fidelity, config_digest)


def _multi_pair_mask(pulses: np.ndarray) -> np.ndarray:
    mask = np.zeros(pulses.size, dtype=bool)
    if pulses.size > 1:
        same = pulses[1:] == pulses[:-1]
        mask[1:] |= same
        mask[:-1] |= same
    return mask


def _unbinned(seed, f_pump, pulses, times, signal, idler, fidelity, digest) -> UnitTrace:
    multi = _multi_pair_mask(pulses)
    capable = signal & idler & fidelity
    n = pulses.size
    counters = TraceCounters(
        generated_pairs=int(n),
        signal_collected=int(np.count_nonzero(signal)),
        idler_stored=int(np.count_nonzero(idler)),
        interference_capable=int(np.count_nonzero(capable)),
        double_occupied_bins=0,
        multi_pair_pulses=int(np.unique(pulses[multi]).size),
    )
    return UnitTrace(
        seed=seed, f_pump=f_pump, pulse_index=pulses, time=times, signal=signal,
        idler=idler, fidelity=fidelity, multi_pair=multi,
        bin_index=np.full(n, -1, dtype=np.int64), double_occupied=np.zeros(n, dtype=bool),
        capable=capable, counters=counters, config_digest=digest,
    )


def generate_pairs(plan: DerivedPlan, config: ExperimentConfig, seed: int) -> UnitTrace:
    if not plan.ordering_ok:
        raise OrderingNotValidated("plan does not satisfy t_observe < t_choice < t_delay")
    rng = stream(seed, GENERATION_STREAM)
    n = int(rng.poisson(plan.n_pulses * config.p_pair))
    pulses = np.sort(rng.integers(0, plan.n_pulses, size=n, dtype=np.int64))
    signal = rng.random(n) < config.p_s
    idler = rng.random(n) < config.p_i
    fidelity = idler & (rng.random(n) < config.fidelity)
    return _unbinned(seed, plan.f_pump, pulses, pulses / plan.f_pump,
                     signal, idler, fidelity, config.digest())


def assign_bins(trace: UnitTrace, plan: DerivedPlan, policy: str = "ignore") -> UnitTrace:
    """Place stored idlers in memory bins and count multiply occupied bins.

    ``policy="discard"`` strips fidelity (hence interference capability) from
    every idler sharing its bin; ``"ignore"`` only records the overlap.
    """
    if policy not in ("ignore", "discard"):
        raise ValueError(f"unknown occupancy policy {policy!r}")
    raw = np.floor(trace.time / plan.dt_bin).astype(np.int64)
    raw = np.clip(raw, 0, plan.mode_count - 1)
    bins = np.where(trace.idler, raw, -1)
    occ_bins, occ_counts = np.unique(bins[trace.idler], return_counts=True)
    crowded = occ_bins[occ_counts >= 2]
    double = trace.idler & np.isin(bins, crowded)
    fidelity = trace.fidelity & ~double if policy == "discard" else trace.fidelity.copy()
    capable = trace.signal & trace.idler & fidelity
    if policy == "discard":
        capable &= ~double
    counters = TraceCounters(
        generated_pairs=trace.counters.generated_pairs,
        signal_collected=trace.counters.signal_collected,
        idler_stored=trace.counters.idler_stored,
        interference_capable=int(np.count_nonzero(capable)),
        double_occupied_bins=int(crowded.size),
        multi_pair_pulses=trace.counters.multi_pair_pulses,
    )
    return UnitTrace(
        seed=trace.seed, f_pump=trace.f_pump, pulse_index=trace.pulse_index, time=trace.time,
        signal=trace.signal, idler=trace.idler, fidelity=fidelity, multi_pair=trace.multi_pair,
        bin_index=bins, double_occupied=double, capable=capable, counters=counters,
        occupied_bins=occ_bins.astype(np.int64), occupied_counts=occ_counts.astype(np.int64),
        bins_assigned=True, config_digest=trace.config_digest,
    )


@dataclass(frozen=True)
class UnitResult:
    monitored_count: int
    total_signal_count: int
    capable_count: int
    model: HypothesisModel
    choice: DelayedChoice
    seed: int
    config_digest: str = ""


def route_detection(trace: UnitTrace, model: HypothesisModel, choice: DelayedChoice,
                    seed: int) -> UnitResult:
    """Send every collected signal through the final coupler.

    Interference-capable signals reach the monitored port with certainty
    only under the informational-coherence model with erasure chosen;
    every other signal reaches it with probability 1/2.
    """
    if not trace.bins_assigned:
        raise BinsNotAssigned("assign_bins must run before route_detection")
    rng = stream(seed, ROUTING_STREAM)
    half = rng.random(len(trace)) < 0.5
    if model is HypothesisModel.IC and choice is DelayedChoice.ERASE:
        hit = trace.signal & (trace.capable | half)
    else:
        hit = trace.signal & half
    return UnitResult(
        monitored_count=int(np.count_nonzero(hit)),
        total_signal_count=trace.counters.signal_collected,
        capable_count=trace.counters.interference_capable,
        model=model, choice=choice, seed=seed, config_digest=trace.config_digest,
    )


def run_unit(plan: DerivedPlan, config: ExperimentConfig, seed: int,
             model: HypothesisModel, choice: DelayedChoice) -> tuple[UnitTrace, UnitResult]:
    trace = assign_bins(generate_pairs(plan, config, seed), plan, config.occupancy_policy)
    return trace, route_detection(trace, model, choice, seed)


def recount(trace: UnitTrace) -> TraceCounters:
    """Recompute the counters from the per-event columns."""
    crowded = sum(1 for c in trace.occupancy.values() if c >= 2)
    multi_pulses = {e.pulse_index for e in trace.events if e.multi_pair}
    return TraceCounters(
        generated_pairs=len(trace),
        signal_collected=int(trace.signal.sum()),
        idler_stored=int(trace.idler.sum()),
        interference_capable=int(trace.capable.sum()),
        double_occupied_bins=crowded,
        multi_pair_pulses=len(multi_pulses),
    )


TRACE_COLUMNS = ("pulse_index", "time", "flags", "bin_index")
FLAG_ORDER = "signal_collected,idler_collected,fidelity_pass,multi_pair,double_occupied"


def write_trace(trace: UnitTrace, sink: IO[str], unit_index: int | None = None) -> None:
    """Tab-separated dump, one line per pair.

    ``flags`` is five 0/1 characters in FLAG_ORDER; ``bin_index`` is ``-``
    for idlers that were not stored.  Each unit starts with a ``#`` line.
    """
    head = f"# unit={unit_index} " if unit_index is not None else "# "
    sink.write(f"{head}seed={trace.seed} columns={','.join(TRACE_COLUMNS)} flags={FLAG_ORDER}\n")
    for e in trace.events:
        flags = "".join("1" if f else "0" for f in (
            e.signal_collected, e.idler_collected, e.fidelity_pass, e.multi_pair, e.double_occupied))
        b = "-" if e.bin_index is None else str(e.bin_index)
        sink.write(f"{e.pulse_index}\t{e.time:.9e}\t{flags}\t{b}\n")
