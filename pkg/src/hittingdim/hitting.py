"""First-entrance times into balls and their scaling indicators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LadderNotDecreasing
from .systems import (AMBIGUITY, OrbitCursor, Point, SystemSpec, as_point, chunk_sizes,
                      distances, exact_distance_below, initial_state)


@dataclass(frozen=True)
class HittingRecord:
    """``tau`` is None when no entrance happened within ``n_max`` iterations."""

    radius: float
    tau: int | None
    n_max: int

    def __post_init__(self):
        if not 0 < self.radius < 0.5:
            raise ValueError("radius must lie in (0, 1/2)")
        if self.tau is not None and self.tau < 1:
            raise ValueError("hitting times start at 1")

    @property
    def censored(self) -> bool:
        return self.tau is None


@dataclass(frozen=True)
class RadiusLadder:
    """Strictly decreasing radii ``r_k`` for ``k_min <= k <= k_max``.

    ``power``: ``r_k = k**-beta``.  ``geometric``: ``r_k = r0 * lam**k``.
    """

    kind: str
    k_min: int
    k_max: int
    beta: float | None = None
    r0: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.beta is None or not self.beta > 0:
                raise LadderNotDecreasing("power ladder needs beta > 0")
            if self.k_min < 1:
                raise ValueError("power ladder starts at k >= 1")
        elif self.kind == "geometric":
            if self.r0 is None or not self.r0 > 0 or self.lam is None or not 0 < self.lam < 1:
                raise LadderNotDecreasing("geometric ladder needs r0 > 0 and 0 < lam < 1")
        else:
            raise ValueError(f"unknown ladder kind {self.kind!r}")
        if self.k_max < self.k_min:
            raise ValueError("empty ladder")
        if not 0 < self.radius(self.k_max) <= self.radius(self.k_min) < 0.5:
            raise ValueError(
                f"radii must lie in (0, 1/2); r_{self.k_min} = {self.radius(self.k_min)}")

    @classmethod
    def power(cls, beta: float, k_min: int, k_max: int) -> "RadiusLadder":
        return cls("power", k_min, k_max, beta=beta)

    @classmethod
    def geometric(cls, k_min: int, k_max: int, r0: float = 1.0, lam: float = 0.5) -> "RadiusLadder":
        return cls("geometric", k_min, k_max, r0=r0, lam=lam)

    @classmethod
    def parse(cls, text: str) -> "RadiusLadder":
        """``power:beta=0.5,k=5..100000`` or ``geometric:r0=1,lam=0.5,k=4..18``."""
        kind, _, rest = text.strip().partition(":")
        opts = dict(item.split("=", 1) for item in rest.split(",") if item)
        lo, _, hi = opts.pop("k").partition("..")
        if kind == "power":
            return cls.power(float(opts.pop("beta")), int(lo), int(hi))
        return cls.geometric(int(lo), int(hi), float(opts.pop("r0", 1.0)), float(opts.pop("lam", 0.5)))

    def __str__(self):
        if self.kind == "power":
            return f"power:beta={self.beta},k={self.k_min}..{self.k_max}"
        return f"geometric:r0={self.r0},lam={self.lam},k={self.k_min}..{self.k_max}"

    def radius(self, k) -> float:
        if self.kind == "power":
            return float(k) ** -self.beta
        return self.r0 * self.lam ** k

    def radii_for(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.float64)
        if self.kind == "power":
            return ks ** -self.beta
        return self.r0 * self.lam ** ks

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def radii(self) -> np.ndarray:
        return self.radii_for(self.ks)

    def __len__(self):
        return self.k_max - self.k_min + 1


@dataclass
class ScalingEstimate:
    """A log-log slope fit over the tail of a radius ladder.

    For ``role="hitting"`` the points are ``(-log r_k, log tau_k)``; for
    ``role="dimension"`` they are ``(log r_k, log mu(B(x0, r_k)))``.
    ``slope_upper``/``slope_lower`` are the extreme slopes between consecutive
    tail points, so the least-squares slope always lies between them.
    ``ratio_upper``/``ratio_lower`` are the extreme single-scale ratios
    ``y_k / x_k`` over the same tail.
    """

    role: str
    points: np.ndarray
    slope_ls: float
    slope_upper: float
    slope_lower: float
    tail_window: int
    infinite: bool = False
    ratio_upper: float = math.nan
    ratio_lower: float = math.nan
    records: list = field(default_factory=list)
    excluded: list = field(default_factory=list)


def fit_scaling(xs, ys, tail_window: int, role: str) -> ScalingEstimate:
    """Least-squares and extreme consecutive slopes over the last ``tail_window`` points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size == 0:
        raise ValueError("no points to fit")
    w = min(tail_window, xs.size)
    tx, ty = xs[-w:], ys[-w:]
    if w >= 2:
        slope_ls = float(np.polyfit(tx, ty, 1)[0])
        seg = np.diff(ty) / np.diff(tx)
        upper, lower = float(seg.max()), float(seg.min())
        # rounding can push the LS slope a hair outside the segment range
        slope_ls = min(max(slope_ls, lower), upper)
    else:
        slope_ls = upper = lower = float(ty[0] / tx[0])
    ratios = ty / tx
    return ScalingEstimate(role, np.column_stack([xs, ys]), slope_ls, upper, lower, w,
                           ratio_upper=float(ratios.max()), ratio_lower=float(ratios.min()))


def _infinite(role: str, tail_window: int, records) -> ScalingEstimate:
    inf = math.inf
    return ScalingEstimate(role, np.empty((0, 2)), inf, inf, inf, tail_window, True,
                           inf, inf, records=list(records))


def first_entrances(sys: SystemSpec, x, x0, radii, n_max: int, start: int = 0):
    """Hitting times for a nested family of radii along one orbit.

    ``radii`` must be nonincreasing.  The search for each smaller ball resumes
    where the previous one stopped, since a smaller ball cannot be entered
    earlier.  Returns a list of taus with None for censored radii.
    """
    radii = [float(r) for r in radii]
    if any(b > a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be nonincreasing")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    for r in radii:
        if not 0 < r < 0.5:
            raise ValueError(f"radius {r} outside (0, 1/2)")
    x0c = as_point(x0).coords
    taus: list = [None] * len(radii)
    cur = OrbitCursor(sys, x)
    j = 0
    done = 0
    for size in chunk_sizes(n_max):
        if j == len(radii):
            break
        chunk = cur.next_chunk(size)
        d = distances(chunk, x0c)
        pos = 0
        while j < len(radii):
            r = radii[j]
            cand = np.flatnonzero(d[pos:] < r + AMBIGUITY) + pos
            hit = None
            for i in cand:
                if d[i] < r - AMBIGUITY or _decide(cur, chunk, int(i), x0, r):
                    hit = int(i)
                    break
            if hit is None:
                break
            taus[j] = done + hit + 1
            pos = hit
            j += 1
        done += len(chunk)
        if len(chunk) < size and j < len(radii):
            raise cur._exhausted
    return taus


def _decide(cur: OrbitCursor, chunk, i: int, x0, r: float) -> bool:
    verdict = cur.decide(i, x0, r)
    if verdict is None:
        pts = tuple(chunk[i]) if chunk.ndim > 1 else (chunk[i],)
        verdict = exact_distance_below(cur.sys.space, pts, x0, r)
    return verdict


def hitting_time(sys: SystemSpec, x, x0, r: float, n_max: int = 10**7) -> HittingRecord:
    """Least ``n in [1, n_max]`` with ``d(T^n x, x0) < r``; censored otherwise."""
    tau = first_entrances(sys, x, x0, [r], n_max)[0]
    return HittingRecord(r, tau, n_max)


def hitting_indicator(sys: SystemSpec, x, x0, ladder: RadiusLadder, n_max: int = 10**7,
                      tail_window: int = 8) -> ScalingEstimate:
    """Scaling of ``log tau_r`` against ``-log r`` along the ladder."""
    if tail_window < 1 or tail_window > len(ladder):
        raise ValueError("tail_window must be between 1 and the ladder length")
    radii = ladder.radii()
    taus = first_entrances(sys, x, x0, radii, n_max)
    records = [HittingRecord(float(r), t, n_max) for r, t in zip(radii, taus)]
    if any(rec.censored for rec in records[-tail_window:]):
        return _infinite("hitting", tail_window, records)
    keep = [i for i, t in enumerate(taus) if t is not None]
    xs = -np.log(radii[keep])
    ys = np.log(np.asarray([taus[i] for i in keep], dtype=np.float64))
    est = fit_scaling(xs, ys, tail_window, "hitting")
    est.records = records
    return est


def recurrence_indicator(sys: SystemSpec, x, ladder: RadiusLadder, n_max: int = 10**7,
                         tail_window: int = 8) -> ScalingEstimate:
    """Hitting indicator with the target centred at the starting point itself.

    On the bitstream backend the centre is the 53-bit projection of the tape.
    """
    st = initial_state(sys, x)
    centre = st if isinstance(st, Point) else st.point
    return hitting_indicator(sys, st, centre, ladder, n_max, tail_window)


@dataclass
class ApproachRate:
    """Running minimum of ``m**(1/alpha) * d(T^m x, x0)`` over ``m <= n``.

    Stored at the indices where the minimum strictly drops, plus the last n.
    """

    alpha: float
    n: np.ndarray
    running_min: np.ndarray

    @property
    def final(self) -> float:
        return float(self.running_min[-1])


def approach_rate(sys: SystemSpec, x, x0, alpha: float, N: int) -> ApproachRate:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    x0c = as_point(x0).coords
    cur = OrbitCursor(sys, x)
    ns, mins = [], []
    best = math.inf
    done = 0
    for size in chunk_sizes(N):
        chunk = cur.next_chunk(size)
        m = np.arange(done + 1, done + len(chunk) + 1, dtype=np.float64)
        stat = m ** (1.0 / alpha) * distances(chunk, x0c)
        run = np.minimum.accumulate(np.concatenate(([best], stat)))[1:]
        drops = np.flatnonzero(run < np.concatenate(([best], run[:-1])))
        ns.extend((done + drops + 1).tolist())
        mins.extend(run[drops].tolist())
        best = float(run[-1])
        done += len(chunk)
        if len(chunk) < size:
            raise cur._exhausted
    if not ns or ns[-1] != done:
        ns.append(done)
        mins.append(best)
    return ApproachRate(alpha, np.asarray(ns), np.asarray(mins))
