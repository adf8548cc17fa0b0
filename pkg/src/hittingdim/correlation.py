"""Lipschitz bump observables, correlation estimates and decay classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSignal
from .systems import EmpiricalMeasure, Pusher, SystemSpec, as_point, distances

DEFAULT_LAGS = np.unique(np.concatenate([np.arange(1, 51),
                                         np.round(np.geomspace(50, 1000, 30)).astype(int)]))
NOISE_SIGMAS = 3.0
MIN_SIGNAL = 10
CLASS_MARGIN = 0.9


@dataclass(frozen=True)
class Observable:
    """Radial bump ``scale * h(d(x0, x))`` or a constant.

    ``h`` is 1 on ``[0, r_in]``, falls linearly to 0 on ``[r_in, r_out]`` and
    is 0 beyond.
    """

    kind: str
    x0: tuple = (0.0,)
    r_in: float = 0.0
    r_out: float = 0.0
    value: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "bump":
            if not 0 < self.r_in < self.r_out < 0.5:
                raise ValueError("bump needs 0 < r_in < r_out < 1/2")
            object.__setattr__(self, "x0", as_point(self.x0).coords)
        elif self.kind != "constant":
            raise ValueError(f"unknown observable kind {self.kind!r}")

    @classmethod
    def bump(cls, x0, r_in: float, r_out: float) -> "Observable":
        return cls("bump", x0, r_in, r_out)

    @classmethod
    def constant(cls, v: float) -> "Observable":
        return cls("constant", value=v)

    def scaled(self, a: float) -> "Observable":
        return Observable(self.kind, self.x0, self.r_in, self.r_out, self.value, self.scale * a)

    @property
    def lipschitz_constant(self) -> float:
        if self.kind == "constant":
            return 0.0
        return abs(self.scale) / (self.r_out - self.r_in)

    def __str__(self):
        if self.kind == "constant":
            return f"const({self.value * self.scale:g})"
        c = ",".join(f"{v:g}" for v in self.x0)
        return f"bump({c};{self.r_in:g},{self.r_out:g})"


def eval_observable(obs: Observable, x) -> np.ndarray | float:
    """Evaluate at one point or at every row of an array of points."""
    scalar = not isinstance(x, np.ndarray)
    pts = np.asarray(as_point(x).coords if scalar else x, dtype=np.float64)
    if obs.kind == "constant":
        out = np.full(pts.shape[0] if pts.ndim > 1 or not scalar else 1,
                      obs.value * obs.scale, dtype=np.float64)
        if not scalar and pts.ndim == 1:
            out = np.full(pts.shape[0], obs.value * obs.scale)
    else:
        if scalar:
            pts = pts if len(obs.x0) == 1 else pts.reshape(1, -1)
        d = distances(pts, obs.x0)
        h = np.clip((obs.r_out - d) / (obs.r_out - obs.r_in), 0.0, 1.0)
        h[d <= obs.r_in] = 1.0
        out = obs.scale * h
    return float(out[0]) if scalar else out


def lipschitz_norm(obs: Observable) -> float:
    """``max(sup |phi|, Lip(phi))``."""
    sup = abs(obs.value * obs.scale) if obs.kind == "constant" else abs(obs.scale)
    return max(sup, obs.lipschitz_constant)


@dataclass
class CorrelationSeries:
    """Signed correlation estimates per lag; ``norm`` is ``|phi| * |psi|``."""

    lags: np.ndarray
    c_hat: np.ndarray
    se: np.ndarray
    norm: float = 1.0
    label: str = ""

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.c_hat = np.asarray(self.c_hat, dtype=np.float64)
        self.se = np.asarray(self.se, dtype=np.float64)
        if self.lags.size and (self.lags[0] < 1 or np.any(np.diff(self.lags) <= 0)):
            raise ValueError("lags must be strictly increasing and >= 1")

    @property
    def above_noise(self) -> np.ndarray:
        return np.abs(self.c_hat) >= NOISE_SIGMAS * self.se

    def entries(self):
        return list(zip(self.lags.tolist(), self.c_hat.tolist(), self.se.tolist()))


def _cov(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    m = a.size
    c = float(np.mean(a * b) - np.mean(a) * np.mean(b))
    prod = (a - a.mean()) * (b - b.mean())
    return c, float(prod.std() / math.sqrt(m))


def correlation_at(sys: SystemSpec, phi: Observable, psi: Observable, n: int,
                   sample: EmpiricalMeasure) -> tuple[float, float]:
    """``mean phi(T^n x) psi(x) - mean phi(T^n x) * mean psi(x)`` and its standard error."""
    if n < 1:
        raise ValueError("lag must be >= 1")
    pushed = sample.pushed(n)
    return _cov(eval_observable(phi, pushed), eval_observable(psi, sample.points))


def correlation_series(sys: SystemSpec, phi: Observable, psi: Observable, lags=None,
                       sample: EmpiricalMeasure = None) -> CorrelationSeries:
    lags = DEFAULT_LAGS if lags is None else np.asarray(sorted(set(int(n) for n in lags)))
    pusher = Pusher(sys, sample)
    b = eval_observable(psi, sample.points)
    cs, ses = [], []
    for n in lags:
        c, s = _cov(eval_observable(phi, pusher.at(int(n))), b)
        cs.append(c)
        ses.append(s)
    return CorrelationSeries(lags, cs, ses, lipschitz_norm(phi) * lipschitz_norm(psi),
                             f"{phi} x {psi}")


@dataclass
class DecayModel:
    """Fitted bound ``Phi(n)`` with its decay class.

    exponential: ``C exp(-rate n)``; polynomial: ``C n**-rate``; none and
    undetermined evaluate to the constant ``C``.
    """

    cls: str
    rate: float = math.nan
    C: float = 1.0
    quality: dict = field(default_factory=dict)
    used_lags: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __call__(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.cls == "exponential":
            out = self.C * np.exp(-self.rate * n)
        elif self.cls == "polynomial":
            out = self.C * n ** -self.rate
        else:
            out = self.C * np.ones_like(n)
        return float(out) if out.ndim == 0 else out

    def rescaled(self, a: float) -> "DecayModel":
        return DecayModel(self.cls, self.rate, self.C * a, dict(self.quality), self.used_lags)

    @property
    def param(self) -> float:
        return self.rate

    @classmethod
    def exponential(cls, rate: float, C: float = 1.0) -> "DecayModel":
        return cls("exponential", rate, C)

    @classmethod
    def polynomial(cls, p: float, C: float = 1.0) -> "DecayModel":
        return cls("polynomial", p, C)

    @classmethod
    def constant(cls, C: float = 1.0) -> "DecayModel":
        return cls("none", 0.0, C)


def _linfit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rss = float(resid @ resid)
    n = x.size
    sxx = float(((x - x.mean()) ** 2).sum())
    slope_se = math.sqrt(rss / max(n - 2, 1) / sxx) if sxx > 0 else math.inf
    return float(coef[0]), float(coef[1]), rss, slope_se


def decay_fit(series: CorrelationSeries, normalize: bool = True) -> DecayModel:
    """Classify the decay of ``|c_hat|`` over the lags above the noise floor.

    Both ``log|c|`` vs ``n`` and ``log|c|`` vs ``log n`` are fitted by least
    squares.  The class with the smaller residual sum of squares wins if it
    is below ``CLASS_MARGIN`` times the other one; otherwise the result is
    undetermined.  A series without a significant decrease is ``none``.  The
    normalization C is raised to the smallest value for which ``Phi`` bounds
    every used entry.
    """
    keep = series.above_noise & (series.c_hat != 0)
    if np.count_nonzero(keep) < MIN_SIGNAL:
        raise InsufficientSignal(
            f"{np.count_nonzero(keep)} lags above {NOISE_SIGMAS:g} standard errors, "
            f"need {MIN_SIGNAL}")
    n = series.lags[keep].astype(np.float64)
    scale = series.norm if normalize else 1.0
    mag = np.abs(series.c_hat[keep]) / scale
    y = np.log(mag)
    ln = np.log(n)

    s_pol, b_pol, rss_pol, se_pol = _linfit(ln, y)
    s_exp, b_exp, rss_exp, _ = _linfit(n, y)
    third = max(1, n.size // 3)
    early, late = np.median(mag[:third]), np.median(mag[-third:])
    quality = {"rss_exponential": rss_exp, "rss_polynomial": rss_pol,
               "loglog_slope": s_pol, "loglog_slope_se": se_pol,
               "early_late_ratio": float(early / late)}
    used = series.lags[keep]
    decreasing = s_pol < 0 and -s_pol > 3 * se_pol and late < 0.5 * early
    if not decreasing:
        return DecayModel("none", 0.0, float(mag.max()), quality, used)

    if rss_exp <= CLASS_MARGIN * rss_pol:
        rate = -s_exp
        C = float(np.max(mag * np.exp(rate * n)))
        return DecayModel("exponential", rate, C, quality, used)
    if rss_pol <= CLASS_MARGIN * rss_exp:
        p = -s_pol
        C = float(np.max(mag * n ** p))
        return DecayModel("polynomial", p, C, quality, used)
    return DecayModel("undetermined", math.nan, float(mag.max()), quality, used)


def fit_exponential(series: CorrelationSeries, normalize: bool = True,
                    min_points: int = 2) -> DecayModel:
    """Exponential envelope through the above-noise entries, without classification.

    Use this when the decay class is known on other grounds and only a rate
    and a normalization bounding every used entry are wanted; ``decay_fit``
    is the classifier and needs far more signal.
    """
    keep = series.above_noise & (series.c_hat != 0)
    if np.count_nonzero(keep) < min_points:
        raise InsufficientSignal(
            f"{np.count_nonzero(keep)} lags above {NOISE_SIGMAS:g} standard errors, "
            f"need {min_points}")
    n = series.lags[keep].astype(np.float64)
    mag = np.abs(series.c_hat[keep]) / (series.norm if normalize else 1.0)
    rate = -_linfit(n, np.log(mag))[0]
    if not rate > 0:
        raise InsufficientSignal("above-noise entries do not decrease")
    C = float(np.max(mag * np.exp(rate * n)))
    return DecayModel("exponential", rate, C, {"points": int(n.size)}, series.lags[keep])
