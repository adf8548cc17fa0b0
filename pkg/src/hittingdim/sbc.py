"""Shrinking-target counting processes, mixing and variance bounds, summability checks."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlation import DecayModel
from .errors import DivergenceWarning, LadderNotDecreasing, UndeterminedDecay
from .hitting import RadiusLadder
from .systems import (AMBIGUITY, EmpiricalMeasure, OrbitCursor, SystemSpec, as_point,
                      chunk_sizes, distances, random_start)

Z_MIN = 1e-3
PARTIAL_SUM_TERMS = 10**6


@dataclass(frozen=True)
class TargetSequence:
    """Targets ``S_k`` indexed by the ladder's k, starting at ``k_min``.

    ``shape="ball"``: ``S_k = B(x0, r_k)``.  ``shape="dyadic"`` (circle only):
    the half-open interval ``[x0, x0 + r_k)``, used for exact comparisons on
    the doubling map with ``x0`` and ``r_k`` dyadic.  Indices past ``k_max``
    follow the ladder formula.
    """

    x0: tuple
    ladder: RadiusLadder
    shape: str = "ball"

    def __post_init__(self):
        object.__setattr__(self, "x0", as_point(self.x0).coords)
        if self.shape not in ("ball", "dyadic"):
            raise ValueError(f"unknown target shape {self.shape!r}")
        if self.shape == "dyadic" and len(self.x0) != 1:
            raise ValueError("dyadic targets live on the circle")

    @property
    def k_min(self) -> int:
        return self.ladder.k_min

    def radius(self, k: int) -> float:
        """``r_k``; ``r_{-1}`` is 1/2 so that ``S_{-1}`` is the whole space."""
        if k == -1:
            return 0.5
        if k < self.k_min:
            raise IndexError(f"target index {k} precedes the ladder start {self.k_min}")
        return self.ladder.radius(k)

    def radii(self, lo: int, hi: int) -> np.ndarray:
        """``r_k`` for ``lo <= k <= hi`` (all at least ``k_min``)."""
        if lo < self.k_min:
            raise IndexError(f"target index {lo} precedes the ladder start {self.k_min}")
        return self.ladder.radii_for(np.arange(lo, hi + 1))


def build_targets(x0, ladder: RadiusLadder, shape: str = "ball") -> TargetSequence:
    if ladder.kind == "power" and not ladder.beta > 0:
        raise LadderNotDecreasing("power ladder needs beta > 0")
    return TargetSequence(x0, ladder, shape)


def _space_dim(measure) -> tuple[int, EmpiricalMeasure | None]:
    if isinstance(measure, EmpiricalMeasure):
        return measure.system.dim, measure
    if isinstance(measure, SystemSpec):
        if measure.measure != "lebesgue_exact":
            raise ValueError(f"{measure.family} needs an empirical measure")
        return measure.dim, None
    if measure in ("circle", "torus2"):
        return (2 if measure == "torus2" else 1), None
    raise TypeError(f"unsupported measure descriptor {measure!r}")


def target_measures(targets: TargetSequence, measure, radii: np.ndarray) -> np.ndarray:
    """``mu(S)`` for targets of the given radii, exact or empirical."""
    dim, emp = _space_dim(measure)
    radii = np.asarray(radii, dtype=np.float64)
    if emp is None:
        return radii.copy() if targets.shape == "dyadic" else (2.0 * radii) ** dim
    if targets.shape == "dyadic":
        key = np.sort((emp.points - targets.x0[0]) % 1.0)
    else:
        key = np.sort(distances(emp.points, targets.x0))
    return np.searchsorted(key, radii, side="left") / emp.size


def _member(targets: TargetSequence, chunk: np.ndarray, r: np.ndarray, cursor=None) -> np.ndarray:
    if targets.shape == "dyadic":
        return (chunk - targets.x0[0]) % 1.0 < r
    d = distances(chunk, targets.x0)
    mask = d < r
    if cursor is not None:
        for i in np.flatnonzero(np.abs(d - r) <= AMBIGUITY):
            verdict = cursor.decide(int(i), targets.x0, float(r[i]))
            if verdict is not None:
                mask[i] = verdict
    return mask


def default_checkpoints(N_max: int) -> np.ndarray:
    cps = [10**j for j in range(1, int(math.log10(N_max)) + 1) if 10**j <= N_max]
    if not cps or cps[-1] != N_max:
        cps.append(N_max)
    return np.asarray(cps, dtype=np.int64)


@dataclass
class SbcSeries:
    """Visit counts ``Z_N``, expectations ``E(Z_N)`` and ratios at checkpoints."""

    checkpoints: np.ndarray
    Z: np.ndarray
    EZ: np.ndarray
    ratio: np.ndarray = field(init=False)
    z_proxy: float = math.nan

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio = np.where(self.EZ > 0, self.Z / self.EZ, np.nan)

    @property
    def Y(self) -> np.ndarray:
        return self.ratio - 1.0


def _ez_curve(targets, measure, N_max):
    lo = targets.k_min
    if N_max < lo:
        return np.zeros(0)
    return np.cumsum(target_measures(targets, measure, targets.radii(lo, N_max)))


def _log_slope_top_half(k: np.ndarray, v: np.ndarray) -> float:
    """Least-squares slope of log v against log k over the upper half of log k."""
    ok = (k > 0) & (v > 0)
    k, v = k[ok], v[ok]
    if k.size < 2:
        return math.nan
    lk = np.log(k)
    top = lk >= 0.5 * (lk[0] + lk[-1])
    if np.count_nonzero(top) < 2:
        top = slice(-2, None)
    return float(np.polyfit(lk[top], np.log(v[top]), 1)[0])


def sbc_series(sys: SystemSpec, x, targets: TargetSequence, N_max: int, measure_mode=None,
               checkpoints=None) -> SbcSeries:
    """One orbit pass counting ``T^n(x) in S_n`` for ``k_min <= n <= N_max``.

    ``measure_mode`` is a Lebesgue descriptor or an :class:`EmpiricalMeasure`;
    by default the system itself (exact for Lebesgue systems).
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    measure_mode = sys if measure_mode is None else measure_mode
    cps = default_checkpoints(N_max) if checkpoints is None else np.asarray(sorted(checkpoints))
    if cps[-1] > N_max or cps[0] < 1:
        raise ValueError("checkpoints must lie in [1, N_max]")
    ez_all = _ez_curve(targets, measure_mode, N_max)
    hits = np.zeros(N_max + 1, dtype=np.int64)
    cur = OrbitCursor(sys, x)
    done = 0
    for size in chunk_sizes(N_max):
        chunk = cur.next_chunk(size)
        ns = np.arange(done + 1, done + len(chunk) + 1)
        live = ns >= targets.k_min
        if live.any():
            first = int(np.argmax(live))
            r = targets.radii(int(ns[first]), int(ns[-1]))
            hits[ns[first]:ns[-1] + 1] = _member(targets, chunk[first:], r, _Shifted(cur, first))
        done += len(chunk)
        if len(chunk) < size:
            raise cur._exhausted
    Z = np.cumsum(hits)[cps]
    EZ = np.array([ez_all[n - targets.k_min] if n >= targets.k_min else 0.0 for n in cps])
    if EZ[-1] < 10:
        warnings.warn(f"sum of target measures up to N={N_max} is {EZ[-1]:.3g} < 10; "
                      "the ratio carries little information", DivergenceWarning, stacklevel=2)
    ks = np.arange(targets.k_min, N_max + 1)
    z = _log_slope_top_half(ks, ez_all) if ks.size >= 2 else math.nan
    if not z > 0:
        warnings.warn(f"z proxy {z:.3g} is not positive; targets may have summable measure",
                      DivergenceWarning, stacklevel=2)
    return SbcSeries(cps, Z, EZ, z)


class _Shifted:
    """Cursor view whose local indices start ``offset`` entries into the chunk."""

    def __init__(self, cur: OrbitCursor, offset: int):
        self.cur, self.offset = cur, offset

    def decide(self, i, x0, r):
        return self.cur.decide(i + self.offset, x0, r)


def brute_force_Z(sys: SystemSpec, x, targets: TargetSequence, N: int) -> int:
    """``sum_{n <= N} [T^n x in S_n]`` by stepping one point at a time."""
    from .systems import orbit
    total = 0
    for n, p in enumerate(orbit(sys, x, N), start=1):
        if n < targets.k_min:
            continue
        r = targets.radius(n)
        if targets.shape == "dyadic":
            total += (p.x - targets.x0[0]) % 1.0 < r
        else:
            total += distances(np.asarray([p.coords]) if len(p) == 2 else np.asarray(p.coords),
                               targets.x0)[0] < r
    return int(total)


# ---------------------------------------------------------------- ensembles


@dataclass
class EnsembleReport:
    checkpoints: np.ndarray
    EZ: np.ndarray
    Z: np.ndarray            # trials x checkpoints
    seeds: list
    mean_ratio: np.ndarray
    sd_ratio: np.ndarray
    var_Z: np.ndarray
    var_se: np.ndarray
    bound: np.ndarray | None = None
    bound_ratio: np.ndarray | None = None
    alpha: float | None = None
    c1: float | None = None
    c2: float | None = None

    @property
    def within_bound(self) -> bool:
        return bool(self.bound is not None and np.all(self.var_Z <= self.bound))


def variance_bound(N, EZ, alpha: float, c1: float, c2: float, Phi: DecayModel) -> np.ndarray:
    """``(2N^a + 1) E(Z_N) + 2 N^(2+c1+c2) Phi(N^a)``."""
    N = np.asarray(N, dtype=np.float64)
    return (2 * N ** alpha + 1) * np.asarray(EZ) + 2 * N ** (2 + c1 + c2) * Phi(N ** alpha)


def _trial(args):
    sys, seed, targets, N_max, measure_mode, cps = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        s = sbc_series(sys, random_start(sys, seed), targets, N_max, measure_mode, cps)
    return s.Z, s.EZ


def trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def sbc_ensemble(sys: SystemSpec, targets: TargetSequence, N_max: int, trials: int, seed: int,
                 Phi: DecayModel | None = None, alpha: float | None = None,
                 c1: float | None = None, c2: float | None = None, report=None,
                 measure_mode=None, checkpoints=None, jobs: int = 1) -> EnsembleReport:
    """Independent seeded orbits; ratio statistics and the variance bound per checkpoint.

    ``alpha``, ``c1``, ``c2`` default to the values in ``report`` (a
    :class:`CorollaryReport`) when one is supplied.
    """
    if trials < 30:
        raise ValueError("an ensemble needs at least 30 trials")
    cps = default_checkpoints(N_max) if checkpoints is None else np.asarray(sorted(checkpoints))
    seeds = trial_seeds(seed, trials)
    tasks = [(sys, s, targets, N_max, measure_mode, cps) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_trial, tasks, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_trial(t) for t in tasks]
    Z = np.array([r[0] for r in results], dtype=np.float64)
    EZ = results[0][1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = Z / EZ
    var = Z.var(axis=0, ddof=1)
    # standard error of a sample variance, from the fourth central moment
    m4 = ((Z - Z.mean(axis=0)) ** 4).mean(axis=0)
    var_se = np.sqrt(np.maximum(m4 - var ** 2 * (trials - 3) / (trials - 1), 0.0) / trials)
    rep = EnsembleReport(cps, EZ, Z, seeds, ratios.mean(axis=0), ratios.std(axis=0, ddof=1),
                         var, var_se)
    if report is not None:
        alpha = report.alpha if alpha is None else alpha
        c1 = report.c1 if c1 is None else c1
        c2 = report.c2 if c2 is None else c2
    if Phi is not None and None not in (alpha, c1, c2):
        rep.bound = variance_bound(cps, EZ, alpha, c1, c2, Phi)
        rep.bound_ratio = var / rep.bound
        rep.alpha, rep.c1, rep.c2 = alpha, c1, c2
    return rep


# ---------------------------------------------------------------- mixing bound


@dataclass(frozen=True)
class MixingRecord:
    k: int
    j: int
    lhs: float
    rhs: float
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    exact: bool = False

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs


def _set_measure(targets, measure, k: int) -> float:
    if k == -1:
        return 1.0
    return float(target_measures(targets, measure, np.array([targets.radius(k)]))[0])


def mixing_bound_check(sys: SystemSpec, targets: TargetSequence, pairs, measure_mode,
                       Phi: DecayModel) -> list[MixingRecord]:
    """Both sides of ``mu(A_k & A_j) <= mu(A_{k-1}) mu(A_{j-1}) + Phi(k-j) / (dr_k dr_j)``.

    ``A_n = T^-n S_n``, ``dr_n = r_{n-1} - r_n`` and ``A_{-1}`` is the whole
    space.  ``measure_mode="exact"`` uses the dyadic oracle (doubling map with
    dyadic targets); an :class:`EmpiricalMeasure` gives Monte Carlo estimates
    with standard errors.
    """
    out = []
    for k, j in pairs:
        if not k > j >= 0:
            raise ValueError(f"pair ({k}, {j}) needs k > j >= 0")
        drk = targets.radius(k - 1) - targets.radius(k)
        drj = targets.radius(j - 1) - targets.radius(j)
        corr = float(Phi(k - j)) / (drk * drj)
        if isinstance(measure_mode, EmpiricalMeasure):
            emp = measure_mode
            in_j = _member(targets, emp.pushed(j) if j else emp.points,
                           np.full(emp.size, targets.radius(j)))
            in_k = _member(targets, emp.pushed(k), np.full(emp.size, targets.radius(k)))
            both = in_j & in_k
            p = both.mean()
            lhs_se = math.sqrt(p * (1 - p) / emp.size)
            mk, mj = _set_measure(targets, emp, k - 1), _set_measure(targets, emp, j - 1)
            prod = mk * mj
            rhs_se = math.sqrt(mk * (1 - mk) * mj ** 2 + mj * (1 - mj) * mk ** 2) / math.sqrt(emp.size)
            out.append(MixingRecord(k, j, float(p), prod + corr, lhs_se, rhs_se))
        elif measure_mode == "exact":
            from .oracle import DyadicInterval, exact_preimage_intersection
            if sys.family != "doubling" or targets.shape != "dyadic":
                raise ValueError("exact mixing checks need the doubling map and dyadic targets")
            I = DyadicInterval.from_interval(targets.x0[0], targets.radius(k))
            J = DyadicInterval.from_interval(targets.x0[0], targets.radius(j))
            lhs = exact_preimage_intersection(I, J, k - j)
            rhs = _set_measure(targets, "circle", k - 1) * _set_measure(targets, "circle", j - 1)
            out.append(MixingRecord(k, j, float(lhs), rhs + corr, exact=True))
        else:
            raise ValueError("measure_mode must be 'exact' or an EmpiricalMeasure")
    return out


# ---------------------------------------------------------------- corollary


@dataclass
class CorollaryReport:
    z: float
    c: float
    c1: float
    c2: float
    alpha: float
    epsilon: float
    summable: bool
    verdict: str
    decay_class: str = ""
    exponent: float = math.nan
    numeric_slope: float = math.nan
    numeric_summable: bool | None = None
    partial_sum: float = math.nan

    def as_text(self) -> str:
        keys = ["verdict", "z", "c", "c1", "c2", "alpha", "epsilon", "summable", "decay_class",
                "exponent", "numeric_slope", "numeric_summable", "partial_sum"]
        return "\n".join(f"{k}={getattr(self, k)}" for k in keys) + "\n"


def summability_exponent(z: float, c: float, epsilon: float, p: float, alpha: float) -> float:
    """Exponent of the general term ``n^(2-2c+eps) Phi(n^alpha) / E(Z_n)^2`` for ``Phi = n^-p``."""
    return 2.0 - 2.0 * c + epsilon - p * alpha - 2.0 * z


def check_corollary(targets: TargetSequence, measure_mode, Phi: DecayModel, alpha: float = 0.2,
                    epsilon: float = 0.01, n_terms: int = PARTIAL_SUM_TERMS) -> CorollaryReport:
    """Evaluate the divergence, radius-gap and summability conditions for ball targets.

    ``z`` and ``c`` are least-squares slopes over the upper half (in log k) of
    the ladder's k range.  Summability is decided from exponents: always for
    exponential decay, iff ``2 - 2c + eps - p*alpha - 2z < -1`` for
    polynomial decay ``n^-p`` (``p = 0`` for a constant bound).  Partial sums
    up to ``n_terms`` are reported alongside as a numerical cross-check.
    """
    if Phi.cls == "undetermined":
        raise UndeterminedDecay("the decay class must be determined before checking summability")
    if not (alpha > 0 and epsilon > 0):
        raise ValueError("alpha and epsilon must be positive")
    lo, hi = targets.k_min, targets.ladder.k_max
    ks = np.arange(lo, hi + 1)
    ez = np.cumsum(target_measures(targets, measure_mode, targets.radii(lo, hi)))
    z = _log_slope_top_half(ks, ez)
    if lo >= 1 and hi > lo + 1:
        gaps = -np.diff(targets.radii(lo, hi))
        c = _log_slope_top_half(ks[1:], gaps)
    else:
        c = math.nan
    c1 = c2 = -c

    if Phi.cls == "exponential":
        summable, expo = True, -math.inf
    else:
        p = Phi.rate if Phi.cls == "polynomial" else 0.0
        expo = summability_exponent(z, c, epsilon, p, alpha)
        summable = bool(expo < -1.0)

    # numerical partial sums of the general term over the extended ladder
    n = np.arange(max(lo, 1), max(n_terms, lo + 2) + 1, dtype=np.float64)
    ezn = np.cumsum(target_measures(targets, measure_mode, targets.radii(int(n[0]), int(n[-1]))))
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        terms = n ** (2 - 2 * c + epsilon) * Phi(n ** alpha) / ezn ** 2
        tail = n >= n[-1] / 10
        pos = tail & (terms > 0) & np.isfinite(terms)
        slope = (float(np.polyfit(np.log(n[pos]), np.log(terms[pos]), 1)[0])
                 if np.count_nonzero(pos) > 2 else -math.inf)
    partial = float(np.sum(terms))

    if not (z > Z_MIN and math.isfinite(c)) or not summable:
        verdict = "fails"
    elif alpha < z / 2:
        verdict = "SBC_expected"
    else:
        verdict = "inconclusive"
    return CorollaryReport(z, c, c1, c2, alpha, epsilon, summable, verdict, Phi.cls, expo,
                           slope, bool(slope < -1.0), partial)
