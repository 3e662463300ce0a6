"""Monte Carlo simulator and discriminator for a memory-delayed quantum-eraser experiment."""

from .analytics import (AggregateStats, CampaignMode, Moments, Regime, RegimeVerdict,
                        aggregate_units, analytic_moments, classify_regime, power_analysis)
from .harness import CampaignReport, CampaignSpec, emit_report, load_config, run_campaign
from .planner import (DerivedPlan, ExperimentConfig, ValidationReport, check_single_photon_regime,
                      derive_plan, validate_ordering)
from .simkernel import (DelayedChoice, HypothesisModel, PairEvent, UnitResult, UnitTrace,
                        assign_bins, generate_pairs, route_detection, run_unit)

__version__ = "0.1.0"
