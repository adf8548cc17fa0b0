"""Local dimension of the invariant measure from ball measures."""

from __future__ import annotations

import numpy as np

from .errors import InsufficientSample
from .hitting import RadiusLadder, ScalingEstimate, fit_scaling
from .systems import EmpiricalMeasure, SystemSpec, as_point

COUNT_FLOOR = 100


def _exact_dim(measure) -> int | None:
    """Dimension of the Lebesgue ball formula, or None for an empirical measure."""
    if isinstance(measure, EmpiricalMeasure):
        return None
    if isinstance(measure, SystemSpec):
        if measure.measure != "lebesgue_exact":
            raise ValueError(f"{measure.family} has no exact ball formula; sample it first")
        return measure.dim
    if measure in ("circle", "torus2"):
        return 2 if measure == "torus2" else 1
    raise TypeError(f"expected an EmpiricalMeasure, a SystemSpec or a space name, got {measure!r}")


def ball_measure(measure, x0, r: float) -> float:
    """``mu(B(x0, r))`` for an open ball.

    ``measure`` is an :class:`EmpiricalMeasure` (fraction of sample points in
    the ball, through the grid index), or a Lebesgue descriptor (a
    ``lebesgue_exact`` system, ``"circle"`` or ``"torus2"``) giving ``2r`` or
    ``(2r)**2``.
    """
    if not 0 < r < 0.5:
        raise ValueError("radius must lie in (0, 1/2)")
    d = _exact_dim(measure)
    if d is not None:
        return (2.0 * r) ** d
    return measure.ball_count(x0, r) / measure.size


def local_dimension(measure, x0, ladder: RadiusLadder, tail_window: int = 8,
                    count_floor: int = COUNT_FLOOR) -> ScalingEstimate:
    """Slopes of ``log mu(B(x0, r_k))`` against ``log r_k`` over the ladder tail.

    Exact mode (Lebesgue descriptors) returns the analytic slope, which is
    the dimension itself at every radius pair.  In empirical mode a radius of
    the tail window whose ball holds fewer than ``count_floor`` sample points
    is excluded and listed in ``excluded``.
    """
    if tail_window < 1 or tail_window > len(ladder):
        raise ValueError("tail_window must be between 1 and the ladder length")
    x0 = as_point(x0)
    radii = ladder.radii()
    d = _exact_dim(measure)
    if d is not None:
        xs = np.log(radii)
        ys = d * np.log(2.0 * radii)
        w = tail_window
        ratios = ys[-w:] / xs[-w:]
        return ScalingEstimate("dimension", np.column_stack([xs, ys]), float(d), float(d), float(d),
                               w, ratio_upper=float(ratios.max()), ratio_lower=float(ratios.min()))

    counts = np.array([measure.ball_count(x0, float(r)) for r in radii])
    tail = np.arange(len(radii) - tail_window, len(radii))
    excluded = [float(radii[i]) for i in tail if counts[i] < count_floor]
    used = [i for i in tail if counts[i] >= count_floor]
    if len(used) < 3:
        raise InsufficientSample(
            f"{len(used)} of {tail_window} radii hold at least {count_floor} of "
            f"{measure.size} points; need 3")
    xs = np.log(radii[used])
    ys = np.log(counts[used] / measure.size)
    est = fit_scaling(xs, ys, len(used), "dimension")
    est.excluded = excluded
    return est


def mp_local_exponent(s: float) -> float:
    """Exponent of ``mu(B(0, r))`` as ``r -> 0`` for the intermittent map."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return 1.0 - s


def lebesgue_dimension(space: str) -> int:
    return 2 if space == "torus2" else 1

