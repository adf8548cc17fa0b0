"""Seeded ensemble runners shared by the command line and the acceptance suite."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationSeries, Observable, correlation_series
from .errors import ConfigError, PrecisionExhausted
from .hitting import RadiusLadder, ScalingEstimate, hitting_indicator, recurrence_indicator
from .sbc import trial_seeds
from .systems import SystemSpec, random_start, sample_measure


def refuse_rational(sys: SystemSpec) -> None:
    """Rational rotations are not ergodic; experiments need an explicit override."""
    if sys.is_rational_rotation and not sys.allow_rational:
        raise ConfigError(f"rotation angle {sys.alpha!r} is rational; set allow_rational=1 "
                          "to run it anyway")


@dataclass
class HitTrial:
    trial: int
    seed: int
    estimate: ScalingEstimate | None
    error: str = ""


def _hit_one(args):
    trial, seed, sys, x0, ladder, n_max, tail_window, recurrence = args
    x = random_start(sys, seed)
    try:
        if recurrence:
            est = recurrence_indicator(sys, x, ladder, n_max, tail_window)
        else:
            est = hitting_indicator(sys, x, x0, ladder, n_max, tail_window)
    except PrecisionExhausted as exc:
        return HitTrial(trial, seed, None, f"PrecisionExhausted at step {exc.step_index}")
    return HitTrial(trial, seed, est)


def run_hitting_trials(sys: SystemSpec, x0, ladder: RadiusLadder, trials: int, seed: int,
                       n_max: int = 10**7, tail_window: int = 8, recurrence: bool = False,
                       jobs: int = 1) -> list[HitTrial]:
    """Hitting (or recurrence) indicators from ``trials`` seeded starting points."""
    refuse_rational(sys)
    tasks = [(i, s, sys, x0, ladder, n_max, tail_window, recurrence)
             for i, s in enumerate(trial_seeds(seed, trials))]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_hit_one, tasks, chunksize=max(1, trials // (4 * jobs))))
    return [_hit_one(t) for t in tasks]


def slope_column(results: list[HitTrial], attr: str = "slope_ls") -> np.ndarray:
    return np.array([getattr(r.estimate, attr) if r.estimate is not None else np.nan
                     for r in results])


def default_sampling(sys: SystemSpec) -> str:
    return "iid_lebesgue" if sys.measure == "lebesgue_exact" else "orbit_sample"


def run_correlation(sys: SystemSpec, phi: Observable, psi: Observable, M: int, seed: int,
                    lags=None, method: str | None = None, burn_in: int = 10_000,
                    stride: int = 16) -> CorrelationSeries:
    refuse_rational(sys)
    method = method or default_sampling(sys)
    sample = sample_measure(sys, M, seed, method, burn_in=burn_in, stride=stride)
    return correlation_series(sys, phi, psi, lags, sample)


# bump pairs used for decay experiments; the doubling pairs are also the
# geometries of the bound check in the acceptance suite
DOUBLING_BUMPS = [
    (Observable.bump(0.3, 0.05, 0.2), Observable.bump(0.6, 0.02, 0.3)),
    (Observable.bump(0.5, 0.1, 0.3), Observable.bump(0.0, 0.0002, 0.0006)),
    (Observable.bump(0.0, 0.1, 0.3), Observable.bump(0.0, 0.0001, 0.0005)),
]
MP_BUMPS = (Observable.bump(0.6, 0.05, 0.25), Observable.bump(0.3, 0.05, 0.2))
ROTATION_BUMPS = (Observable.bump(0.3, 0.05, 0.15), Observable.bump(0.6, 0.05, 0.15))
