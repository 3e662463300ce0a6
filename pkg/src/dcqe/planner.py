"""Parameter planning and timing validation for one operational unit.

All quantities are SI (seconds, hertz).  ``derive_plan`` is the only entry
point most callers need: it checks the raw configuration, computes the
derived source/memory parameters and attaches the ordering and
single-photon-regime checks to the returned plan.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import logging
import math
from dataclasses import dataclass, field

from .errors import InvalidConfig

log = logging.getLogger(__name__)

OCCUPANCY_POLICIES = ("ignore", "discard")

# hardware sanity bounds; exceeding them only warns
MIN_BIN_WIDTH = 10e-9
MAX_MODE_COUNT = 10_000
MAX_STORAGE_TIME = 1e-3

WHEELER_VIOLATED = "WheelersConditionViolated"
CHOICE_AFTER_EXPIRY = "ChoiceAfterMemoryExpiry"
COHERENCE_OVERLAP = "CoherenceOverlap"
MULTI_PAIR_REGIME = "MultiPairRegime"


@dataclass(frozen=True)
class ExperimentConfig:
    """Free parameters of one operational unit.

    ``supplied`` records which keys were given explicitly (by a config file
    or caller); it takes no part in equality or the provenance digest.
    """

    t_phys: float = 400e-6
    epsilon: float = 0.1
    t_choice: float = 450e-6
    t_delay: float = 500e-6
    n_signal: int = 500
    p_s: float = 0.3
    p_i: float = 0.3
    p_pair: float = 0.01
    fidelity: float = 1.0
    modes_per_photon: int = 3
    coherence_time: float = 1e-12
    readout_time: float = 10e-6
    occupancy_policy: str = "ignore"
    coherence_factor: float = 100.0
    multipair_threshold: float = 1e-3
    supplied: frozenset = field(default=frozenset(), compare=False, repr=False)

    def validate(self) -> None:
        """Raise InvalidConfig naming the first offending field."""
        for name in ("t_phys", "epsilon", "t_choice", "t_delay", "p_s", "p_i",
                     "p_pair", "fidelity", "coherence_time", "readout_time",
                     "coherence_factor", "multipair_threshold"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidConfig(name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidConfig(name, "must be finite")
        for name in ("p_s", "p_i", "p_pair"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise InvalidConfig(name, f"probability out of range (0, 1]: {value}")
        if not 0.0 <= self.fidelity <= 1.0:
            raise InvalidConfig("fidelity", f"probability out of range [0, 1]: {self.fidelity}")
        for name in ("t_phys", "t_choice", "t_delay", "coherence_time", "readout_time"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(name, "duration must be > 0")
        for name in ("epsilon", "coherence_factor", "multipair_threshold"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(name, "must be > 0")
        for name in ("n_signal", "modes_per_photon"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidConfig(name, f"expected an integer count, got {value!r}")
            if value < 1:
                raise InvalidConfig(name, "count must be >= 1")
        if self.occupancy_policy not in OCCUPANCY_POLICIES:
            raise InvalidConfig("occupancy_policy",
                                f"must be one of {', '.join(OCCUPANCY_POLICIES)}")
        if not self.t_phys < self.t_delay:
            raise InvalidConfig("t_delay", "must exceed t_phys for any valid ordering to exist")

    def physical_items(self) -> list[tuple[str, object]]:
        return [(f.name, getattr(self, f.name))
                for f in dataclasses.fields(self) if f.name != "supplied"]

    def digest(self) -> str:
        """Short stable fingerprint of the physical parameters."""
        return _digest(self)

    def is_default(self, name: str) -> bool:
        return name not in self.supplied


@functools.lru_cache(maxsize=256)
def _digest(config: ExperimentConfig) -> str:
    text = ";".join(f"{k}={v!r}" for k, v in config.physical_items())
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ValidationReport:
    name: str
    passed: bool
    failures: tuple[str, ...] = ()
    detail: str = ""


@dataclass(frozen=True)
class DerivedPlan:
    t_observe: float
    f_pump: float
    mu0: float
    mode_count: int
    dt_bin: float
    n_entangled: float
    t_end: float
    n_pulses: int
    signal_spacing: float
    validation: tuple[ValidationReport, ...] = ()
    warnings: tuple[str, ...] = ()

    def check(self, name: str) -> ValidationReport | None:
        for report in self.validation:
            if report.name == name:
                return report
        return None

    @property
    def ordering_ok(self) -> bool:
        report = self.check("ordering")
        return report is not None and report.passed

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.validation)


def pulse_count(f_pump: float, t_phys: float) -> int:
    """Number of pump pulses k >= 0 with k / f_pump < t_phys."""
    exact = f_pump * t_phys
    nearest = round(exact)
    if abs(exact - nearest) <= 1e-9 * max(1.0, exact):
        return max(int(nearest), 1)
    return int(math.ceil(exact))


def derive_plan(config: ExperimentConfig) -> DerivedPlan:
    config.validate()
    mode_count = config.modes_per_photon * config.n_signal
    f_pump = config.n_signal / (config.t_phys * config.p_pair * config.p_s)
    mu0 = f_pump * config.p_pair * config.t_phys
    plan = DerivedPlan(
        t_observe=(1.0 + config.epsilon) * config.t_phys,
        f_pump=f_pump,
        mu0=mu0,
        mode_count=mode_count,
        dt_bin=config.t_phys / mode_count,
        n_entangled=mu0 * config.p_s * config.p_i,
        t_end=config.t_delay + config.readout_time,
        n_pulses=pulse_count(f_pump, config.t_phys),
        signal_spacing=1.0 / (f_pump * config.p_pair * config.p_s),
    )
    checks = (validate_ordering(plan, config), check_single_photon_regime(plan, config))
    warnings = hardware_warnings(plan, config)
    for message in warnings:
        log.warning(message)
    return dataclasses.replace(plan, validation=checks, warnings=warnings)


def validate_ordering(plan: DerivedPlan, config: ExperimentConfig) -> ValidationReport:
    """Strict check of t_observe < t_choice < t_delay."""
    failures = []
    notes = []
    if not plan.t_observe < config.t_choice:
        failures.append(WHEELER_VIOLATED)
        notes.append(f"t_observe={plan.t_observe:.6g} s is not before t_choice={config.t_choice:.6g} s")
    if not config.t_choice < config.t_delay:
        failures.append(CHOICE_AFTER_EXPIRY)
        notes.append(f"t_choice={config.t_choice:.6g} s is not before t_delay={config.t_delay:.6g} s")
    if not failures:
        notes.append(f"{plan.t_observe:.6g} < {config.t_choice:.6g} < {config.t_delay:.6g}")
    return ValidationReport("ordering", not failures, tuple(failures), "; ".join(notes))


def check_single_photon_regime(plan: DerivedPlan, config: ExperimentConfig) -> ValidationReport:
    failures = []
    notes = []
    window = config.coherence_factor * config.coherence_time
    if plan.signal_spacing >= window:
        notes.append(f"signal spacing {plan.signal_spacing:.3g} s >= {window:.3g} s")
    else:
        failures.append(COHERENCE_OVERLAP)
        notes.append(f"signal spacing {plan.signal_spacing:.3g} s < {window:.3g} s")
    p2 = config.p_pair ** 2
    if p2 <= config.multipair_threshold:
        notes.append(f"p_pair^2 = {p2:.3g} <= {config.multipair_threshold:.3g}")
    else:
        failures.append(MULTI_PAIR_REGIME)
        notes.append(f"p_pair^2 = {p2:.3g} > {config.multipair_threshold:.3g}")
    return ValidationReport("single_photon_regime", not failures, tuple(failures), "; ".join(notes))


def hardware_warnings(plan: DerivedPlan, config: ExperimentConfig) -> tuple[str, ...]:
    out = []
    if plan.dt_bin < MIN_BIN_WIDTH:
        out.append(f"dt_bin {plan.dt_bin:.3g} s is below the ~10 ns memory bin floor")
    if plan.mode_count > MAX_MODE_COUNT:
        out.append(f"mode_count {plan.mode_count} exceeds 1e4 memory modes")
    if config.t_delay > MAX_STORAGE_TIME:
        out.append(f"t_delay {config.t_delay:.3g} s exceeds 1 ms of storage")
    return tuple(out)
