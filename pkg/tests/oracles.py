"""Independent ground truth for the tests.

Nothing here imports the package under test: orbits are exact fractions,
expectations come from small Markov chains solved in rational arithmetic,
and the intermittent-map density is integrated numerically.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate


def exact_step(family: str, x, alpha: Fraction | None = None):
    if family == "doubling":
        return (2 * x) % 1
    if family == "tent":
        return (2 * x if x <= Fraction(1, 2) else 2 - 2 * x) % 1
    if family == "rotation":
        return (x + alpha) % 1
    if family == "cat":
        a, b = x
        return ((2 * a + b) % 1, (a + b) % 1)
    raise ValueError(family)


def exact_orbit(family: str, x, n: int, alpha: Fraction | None = None) -> list:
    out = []
    for _ in range(n):
        x = exact_step(family, x, alpha)
        out.append(x)
    return out


def circle_distance(a: Fraction, b: Fraction) -> Fraction:
    d = abs(a - b) % 1
    return min(d, 1 - d)


def exact_tau(family: str, x, x0, r, n_max: int, alpha: Fraction | None = None):
    """First n in [1, n_max] with d(T^n x, x0) < r, by exact enumeration."""
    for n, y in enumerate(exact_orbit(family, x, n_max, alpha), start=1):
        if family == "cat":
            d = max(circle_distance(y[0], x0[0]), circle_distance(y[1], x0[1]))
        else:
            d = circle_distance(y, x0)
        if d < r:
            return n
    return None


def equal_run_wait(m: int) -> Fraction:
    """Expected first ``n >= 1`` with fair bits ``n+1 .. n+m`` all equal.

    The chain tracks the length of the current run of equal bits, starting
    with bit 2 (a run may not reach back to bit 1).  ``E[L]`` is the number of
    bits read until the run reaches m, and tau = L - m + 1.
    """
    # E_k = expected further bits when the current run has length k (k = 1..m-1)
    # E_k = 1 + 1/2 E_{k+1} + 1/2 E_1, E_m = 0; solve in closed rational form
    # by writing E_k = a_k + b_k E_1 backwards from k = m.
    a, b = Fraction(0), Fraction(0)
    for _ in range(m - 1):
        a, b = 1 + a / 2, Fraction(1, 2) + b / 2
    e1 = a / (1 - b)
    bits_until = 1 + e1          # the first bit read starts a run of length 1
    return bits_until - m + 1


def mp_density_ball(s: float, r: float) -> float:
    """``mu(B(0, r))`` for the density ``h(x) ~ x^-s`` near 0 and bounded near 1.

    The density is modelled as ``x^-s`` on the whole circle (its behaviour
    near the neutral fixed point); the ball covers ``[0, r)`` and ``(1-r, 1)``.
    """
    h = lambda x: x ** -s
    total = integrate.quad(h, 0, 1)[0]
    near = integrate.quad(h, 0, r)[0]
    far = integrate.quad(h, 1 - r, 1)[0]
    return (near + far) / total


def mp_scaling_exponent(s: float, radii) -> float:
    radii = np.asarray(radii, dtype=float)
    mu = np.array([mp_density_ball(s, r) for r in radii])
    return float(np.polyfit(np.log(radii), np.log(mu), 1)[0])


def power_ladder_exponents(beta: float, d: int = 1) -> tuple[float, float]:
    """Exact z and c for ``r_k = k^-beta`` with Lebesgue ball measure of dimension d."""
    return 1.0 - beta * d, -beta - 1.0


def summable(z: float, c: float, epsilon: float, p: float, alpha: float) -> bool:
    """Series ``sum n^e`` converges iff ``e < -1``."""
    e = 2 - 2 * c + epsilon - p * alpha - 2 * z
    return e < -1


def brute_force_visits(xs: np.ndarray, x0: float, radii: np.ndarray) -> int:
    """``#{n : d(x_n, x0) < r_n}`` for explicit orbit points and radii."""
    d = np.abs(xs - x0) % 1.0
    d = np.minimum(d, 1.0 - d)
    return int(np.count_nonzero(d < radii))


def binomial_ratio(mu: float) -> float:
    """Var/E for a count of independent Bernoulli(mu) events."""
    return 1.0 - mu


def factorial_angle(terms: int) -> Fraction:
    return sum((Fraction(1, 2 ** math.factorial(n)) for n in range(1, terms + 1)), Fraction(0))
