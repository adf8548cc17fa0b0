"""Self-verification: oracle crosschecks and definition-level invariants."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .correlation import Observable, correlation_at, eval_observable
from .dimension import ball_measure
from .hitting import RadiusLadder, hitting_time
from .oracle import (DyadicInterval, closed_form_preimage_intersection, crosscheck_backends,
                     exact_preimage_intersection)
from .sbc import brute_force_Z, build_targets, sbc_series
from .systems import (GOLDEN, Point, distance, orbit_array, pair_distances, parse_system,
                      random_start, sample_measure, step)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def _suite():
    return [parse_system("doubling"), parse_system("doubling:backend=fixed:512"),
            parse_system("tent:backend=fixed:512"), parse_system("cat"),
            parse_system(f"rotation:alpha={GOLDEN!r}")]


def _tau(rec):
    return math.inf if rec.tau is None else rec.tau


def check_shift_identity(cases: int = 60, seed: int = 1) -> Check:
    """``tau(T x) = tau(x) - 1`` whenever ``tau(x) >= 2``."""
    rng = np.random.default_rng(seed)
    tested = 0
    for sys in _suite():
        n_max = 400 if sys.backend.kind == "fixed_point" else 10**5
        for i in range(cases):
            x = random_start(sys, int(rng.integers(2**62)))
            x0 = tuple(rng.random(sys.dim))
            r = float(rng.uniform(0.005, 0.2))
            t0 = hitting_time(sys, x, x0, r, n_max)
            if t0.tau is None or t0.tau < 2:
                continue
            t1 = hitting_time(sys, step(sys, x), x0, r, n_max - 1)
            tested += 1
            if t1.tau != t0.tau - 1:
                return Check("shift_identity", False,
                             f"{sys.label()}: tau(x)={t0.tau}, tau(Tx)={t1.tau}")
    return Check("shift_identity", True, f"{tested} cases")


def check_nesting(cases: int = 40, seed: int = 2) -> Check:
    """Smaller balls are entered no earlier; ball measures grow with r."""
    rng = np.random.default_rng(seed)
    for sys in _suite():
        n_max = 400 if sys.backend.kind == "fixed_point" else 10**5
        for _ in range(cases):
            x = random_start(sys, int(rng.integers(2**62)))
            x0 = tuple(rng.random(sys.dim))
            r1, r2 = sorted(rng.uniform(0.001, 0.3, 2))
            big, small = hitting_time(sys, x, x0, r2, n_max), hitting_time(sys, x, x0, r1, n_max)
            if _tau(big) > _tau(small):
                return Check("ball_nesting", False,
                             f"{sys.label()}: tau(r={r2})={big.tau} > tau(r={r1})={small.tau}")
    emp = sample_measure(parse_system("cat"), 20_000, seed)
    for _ in range(200):
        x0 = tuple(rng.random(2))
        r1, r2 = sorted(rng.uniform(0.001, 0.45, 2))
        if ball_measure(emp, x0, r1) > ball_measure(emp, x0, r2):
            return Check("ball_nesting", False, f"empirical ball measure decreased at {x0}")
        if ball_measure("torus2", x0, r1) > ball_measure("torus2", x0, r2):
            return Check("ball_nesting", False, "exact ball measure decreased")
    return Check("ball_nesting", True)


def check_censoring(cases: int = 40, seed: int = 3) -> Check:
    """A censored search stays censored under a smaller cap; a found tau is cap-independent."""
    rng = np.random.default_rng(seed)
    sys = parse_system("doubling")
    for _ in range(cases):
        x = random_start(sys, int(rng.integers(2**62)))
        x0 = float(rng.random())
        r = float(rng.uniform(1e-4, 1e-2))
        cap = int(rng.integers(10, 2000))
        rec = hitting_time(sys, x, x0, r, cap)
        if rec.censored:
            smaller = hitting_time(sys, x, x0, r, int(rng.integers(1, cap)))
            if not smaller.censored:
                return Check("censoring", False, "censored search found a tau under a smaller cap")
        else:
            again = hitting_time(sys, x, x0, r, rec.tau)
            before = hitting_time(sys, x, x0, r, rec.tau - 1) if rec.tau > 1 else None
            if again.tau != rec.tau or (before is not None and not before.censored):
                return Check("censoring", False, f"tau {rec.tau} depends on the cap")
    return Check("censoring", True)


def check_linearity(seed: int = 4) -> Check:
    """Scaling phi by a power of two scales the estimate exactly."""
    sys = parse_system("doubling")
    sample = sample_measure(sys, 50_000, seed)
    phi, psi = Observable.bump(0.3, 0.05, 0.2), Observable.bump(0.6, 0.02, 0.3)
    for n in (1, 2, 5):
        base, base_se = correlation_at(sys, phi, psi, n, sample)
        for a in (2.0, 0.5, -4.0, 1024.0):
            c, se = correlation_at(sys, phi.scaled(a), psi, n, sample)
            if c != a * base or se != abs(a) * base_se:
                return Check("correlation_linearity", False, f"a={a}, n={n}: {c} != {a * base}")
    return Check("correlation_linearity", True)


def check_bump_lipschitz(pairs: int = 10**5, seed: int = 5) -> Check:
    """``|phi(x) - phi(y)| <= L d(x, y)`` on random pairs, up to a few ulps of rounding."""
    rng = np.random.default_rng(seed)
    for obs, dim in ((Observable.bump(0.5, 0.1, 0.2), 1), (Observable.bump(0.05, 0.01, 0.013), 1),
                     (Observable.bump((0.3, 0.9), 0.05, 0.3), 2)):
        L = obs.lipschitz_constant
        # each computed distance carries a few ulps, amplified by the slope
        slack = 8 * (L + 1) * np.finfo(float).eps
        # half the pairs are close together so the ramp is exercised
        x = rng.random((pairs, dim)) if dim == 2 else rng.random(pairs)
        y = (x + rng.normal(0, 0.02, x.shape)) % 1.0
        y[: pairs // 2] = rng.random(y[: pairs // 2].shape)
        fx, fy = eval_observable(obs, x), eval_observable(obs, y)
        d = pair_distances(x, y)
        if np.any(np.abs(fx - fy) > L * d + slack):
            return Check("bump_lipschitz", False, f"{obs} violates its Lipschitz bound")
        if np.any((fx < 0) | (fx > 1)):
            return Check("bump_lipschitz", False, f"{obs} leaves [0, 1]")
    return Check("bump_lipschitz", True, f"{pairs} pairs per observable")


def check_metric(triples: int = 10**5, seed: int = 6) -> Check:
    """Symmetry and identity exactly; the triangle inequality up to three ulps of rounding."""
    slack = 3 * 2.0**-53
    rng = np.random.default_rng(seed)
    for dim in (1, 2):
        x, y, z = (rng.random((triples, dim)) if dim == 2 else rng.random(triples) for _ in range(3))
        dxy, dyz, dxz, dyx = pair_distances(x, y), pair_distances(y, z), pair_distances(x, z), pair_distances(y, x)
        if np.any(dxy != dyx) or np.any(dxz > dxy + dyz + slack) or np.any(pair_distances(x, x) != 0):
            return Check("metric_axioms", False, f"dimension {dim}")
    return Check("metric_axioms", True)


def check_index_counts(seed: int = 7) -> Check:
    rng = np.random.default_rng(seed)
    for spec in ("doubling", "cat"):
        emp = sample_measure(parse_system(spec), 30_000, seed)
        for _ in range(200):
            x0 = tuple(rng.random(emp.system.dim))
            r = float(rng.uniform(1e-4, 0.49))
            if emp.ball_count(x0, r) != emp.linear_count(x0, r):
                return Check("index_counts", False, f"{spec} x0={x0} r={r}")
    return Check("index_counts", True)


def check_backend_crosscheck(seeds: int = 20, n_max: int = 10**4) -> Check:
    for seed, m in itertools.product(range(seeds), range(2, 11)):
        res = crosscheck_backends(seed, m, n_max)
        if not res:
            return Check("backend_crosscheck", False,
                         f"seed={seed} m={m}: first disagreement at {res.first_disagreement}")
    return Check("backend_crosscheck", True, f"{seeds} seeds x m=2..10")


def check_oracle_identities(max_rank: int = 4, max_shift: int = 6) -> Check:
    """Enumeration vs closed form, complement, additivity and independence identities."""
    for rI, rJ in itertools.product(range(max_rank + 1), repeat=2):
        for m in range(max_shift + 1):
            for i, j in itertools.product(range(1 << rI), range(1 << rJ)):
                I, J = DyadicInterval(rI, i), DyadicInterval(rJ, j)
                v = exact_preimage_intersection(I, J, m)
                if v != closed_form_preimage_intersection(I, J, m):
                    return Check("oracle_identities", False, f"closed form {I} {J} m={m}")
                if rJ <= m and v != I.measure * J.measure:
                    return Check("oracle_identities", False, f"independence {I} {J} m={m}")
                a, b = I.children()
                if exact_preimage_intersection(a, J, m) + exact_preimage_intersection(b, J, m) != v:
                    return Check("oracle_identities", False, f"additivity {I} {J} m={m}")
            if rJ == 2:
                I = DyadicInterval(rI, 0)
                J = DyadicInterval(rJ, 1)
                rest = sum(exact_preimage_intersection(I, K, m) for K in J.complement())
                if exact_preimage_intersection(I, J, m) + rest != I.measure:
                    return Check("oracle_identities", False, f"complement m={m}")
    return Check("oracle_identities", True)


def check_sbc_bruteforce(seed: int = 8) -> Check:
    rng = np.random.default_rng(seed)
    for spec in ("doubling", "cat", f"rotation:alpha={GOLDEN!r}"):
        sys = parse_system(spec)
        for _ in range(5):
            tg = build_targets(tuple(rng.random(sys.dim)), RadiusLadder.power(0.5, 5, 1000))
            x = random_start(sys, int(rng.integers(2**62)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                s = sbc_series(sys, x, tg, 1000, checkpoints=[1000])
            if int(s.Z[-1]) != brute_force_Z(sys, x, tg, 1000):
                return Check("sbc_bruteforce", False, spec)
    return Check("sbc_bruteforce", True)


def check_determinism(seed: int = 9) -> Check:
    for spec in ("doubling", "cat", "mp:s=0.5", "tent:backend=fixed:256"):
        sys = parse_system(spec)
        x = random_start(sys, seed)
        n = 200 if "fixed" in spec else 5000
        if not np.array_equal(orbit_array(sys, x, n), orbit_array(sys, x, n)):
            return Check("orbit_determinism", False, spec)
        a = sample_measure(sys, 1000, seed, "orbit_sample", burn_in=100, stride=2) \
            if sys.family in ("manneville_pomeau",) else sample_measure(sys, 1000, seed)
        b = sample_measure(sys, 1000, seed, "orbit_sample", burn_in=100, stride=2) \
            if sys.family in ("manneville_pomeau",) else sample_measure(sys, 1000, seed)
        if not np.array_equal(a.points, b.points):
            return Check("orbit_determinism", False, f"{spec} sample")
    return Check("orbit_determinism", True)


def check_worked_examples() -> Check:
    d = parse_system("doubling")
    if hitting_time(d, 5 / 16, 0.0, 0.25, 100).tau != 4:
        return Check("worked_examples", False, "doubling 5/16")
    if abs(distance("circle", 0.1, 0.9) - 0.2) > 1e-15:
        return Check("worked_examples", False, "circle distance")
    if step(parse_system("cat"), Point((0.0, 0.0))) != Point((0.0, 0.0)):
        return Check("worked_examples", False, "cat fixed point")
    I = DyadicInterval(2, 0)
    if exact_preimage_intersection(I, I, 1) - I.measure ** 2 != 1 / 16:
        return Check("worked_examples", False, "indicator correlation")
    return Check("worked_examples", True)


CHECKS = [check_worked_examples, check_shift_identity, check_nesting, check_censoring,
          check_linearity, check_bump_lipschitz, check_metric, check_index_counts,
          check_determinism, check_sbc_bruteforce, check_oracle_identities,
          check_backend_crosscheck]

DEFINITION_CHECKS = ("shift_identity", "ball_nesting", "censoring", "correlation_linearity",
                     "bump_lipschitz")


def run_all() -> list[Check]:
    out = []
    for fn in CHECKS:
        try:
            out.append(fn())
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            out.append(Check(fn.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}"))
    return out
