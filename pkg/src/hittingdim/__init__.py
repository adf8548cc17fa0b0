"""Hitting-time indicators, local dimensions and shrinking-target statistics for toy maps."""

from .correlation import (CorrelationSeries, DecayModel, Observable, correlation_series,
                          decay_fit, lipschitz_norm)
from .dimension import ball_measure, local_dimension
from .errors import (BranchBudgetExceeded, ConfigError, DivergenceWarning, InsufficientSample,
                     InsufficientSignal, LadderNotDecreasing, PrecisionExhausted,
                     UndeterminedDecay)
from .hitting import (HittingRecord, RadiusLadder, ScalingEstimate, hitting_indicator,
                      hitting_time, recurrence_indicator)
from .sbc import (TargetSequence, build_targets, check_corollary, mixing_bound_check,
                  sbc_ensemble, sbc_series)
from .systems import Backend, SystemSpec, iterate, orbit, parse_system, sample_measure

__version__ = "0.1.0"
