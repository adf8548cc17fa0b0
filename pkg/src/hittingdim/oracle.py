"""Exact ground truth for the doubling map with dyadic data.

Measures are exact rationals.  The table and histogram helpers return
integer or boolean numpy arrays for bulk comparisons against Monte Carlo
counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bits import BitTape
from .errors import BranchBudgetExceeded
from .hitting import HittingRecord, hitting_time
from .systems import Backend, FixedState, SystemSpec

MAX_SHIFT = 24
_TAIL_PROBE = 4096


@dataclass(frozen=True)
class DyadicInterval:
    """``[index / 2**rank, (index + 1) / 2**rank)``."""

    rank: int
    index: int

    def __post_init__(self):
        if self.rank < 0 or not 0 <= self.index < (1 << self.rank):
            raise ValueError(f"invalid dyadic interval rank={self.rank} index={self.index}")

    @classmethod
    def from_interval(cls, left, length) -> "DyadicInterval":
        """The dyadic interval starting at ``left`` with dyadic ``length``."""
        length, left = Fraction(length), Fraction(left)
        if length.numerator != 1 or length.denominator & (length.denominator - 1):
            raise ValueError(f"length {length} is not a power of 1/2")
        rank = length.denominator.bit_length() - 1
        idx = left * (1 << rank)
        if idx.denominator != 1:
            raise ValueError(f"{left} is not aligned to rank {rank}")
        return cls(rank, int(idx) % (1 << rank))

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << self.rank)

    @property
    def left(self) -> Fraction:
        return Fraction(self.index, 1 << self.rank)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return (DyadicInterval(self.rank + 1, 2 * self.index),
                DyadicInterval(self.rank + 1, 2 * self.index + 1))

    def complement(self) -> list["DyadicInterval"]:
        """Disjoint dyadic intervals of the same rank covering the rest of the circle."""
        return [DyadicInterval(self.rank, i) for i in range(1 << self.rank) if i != self.index]

    def contains(self, x) -> bool:
        return self.left <= Fraction(x) % 1 < self.left + self.measure


def exact_preimage_intersection(I: DyadicInterval, J: DyadicInterval, m: int) -> Fraction:
    """``mu(T^-m I & J)`` by enumerating the ``2**m`` preimage branches of I.

    Branch b of ``T^-m I`` is the rank ``rank(I) + m`` interval with index
    ``b * 2**rank(I) + index(I)``; each branch is intersected with J on a
    common integer grid.
    """
    if m < 0:
        raise ValueError("shift must be >= 0")
    if m > MAX_SHIFT:
        raise BranchBudgetExceeded(f"2**{m} branches exceed the 2**{MAX_SHIFT} budget")
    rp = I.rank + m
    R = max(rp, J.rank)
    unit_p = 1 << (R - rp)
    j_lo = J.index << (R - J.rank)
    j_hi = (J.index + 1) << (R - J.rank)
    if R < 62:
        b = np.arange(1 << m, dtype=np.int64)
        lo = ((b << I.rank) + I.index) * unit_p
        overlap = np.minimum(lo + unit_p, j_hi) - np.maximum(lo, j_lo)
        total = int(np.clip(overlap, 0, None).sum())
    else:
        total = 0
        for b in range(1 << m):
            lo = ((b << I.rank) + I.index) * unit_p
            total += max(0, min(lo + unit_p, j_hi) - max(lo, j_lo))
    return Fraction(total, 1 << R)


def closed_form_preimage_intersection(I: DyadicInterval, J: DyadicInterval, m: int) -> Fraction:
    """The same measure from bit constraints.

    ``x in J`` fixes bits ``1..rank(J)`` of x; ``T^m x in I`` fixes bits
    ``m+1..m+rank(I)``.  If the constraints overlap they must agree, and the
    measure is ``2**-(number of constrained bits)``.  Without overlap
    (``rank(J) <= m``) this is ``mu(I) mu(J)``.
    """
    if m < 0:
        raise ValueError("shift must be >= 0")
    rI, rJ = I.rank, J.rank
    lo, hi = m + 1, min(rJ, m + rI)
    if hi >= lo:
        # bits lo..hi as read from J (positions 1..rJ) and from I (positions m+1..m+rI)
        width = hi - lo + 1
        from_j = (J.index >> (rJ - hi)) & ((1 << width) - 1)
        from_i = (I.index >> (m + rI - hi)) & ((1 << width) - 1)
        if from_j != from_i:
            return Fraction(0)
    return Fraction(1, 1 << (rJ + rI - max(0, hi - lo + 1)))


def closed_form_table(rI: int, rJ: int, m: int) -> tuple[np.ndarray, Fraction]:
    """``mu(T^-m I & J)`` for every index pair at once.

    Returns a boolean support table (rows index J, columns I) and the common
    value of every nonzero entry.
    """
    lo, hi = m + 1, min(rJ, m + rI)
    width = max(0, hi - lo + 1)
    val = Fraction(1, 1 << (rJ + rI - width))
    if width == 0:
        return np.ones((1 << rJ, 1 << rI), dtype=bool), val
    jj = np.arange(1 << rJ)[:, None]
    ii = np.arange(1 << rI)[None, :]
    mask = (1 << width) - 1
    return ((jj >> (rJ - hi)) & mask) == ((ii >> (m + rI - hi)) & mask), val


def exact_correlation(I: DyadicInterval, J: DyadicInterval, n: int) -> Fraction:
    """``mu(T^-n I & J) - mu(I) mu(J)`` for indicator observables."""
    return exact_preimage_intersection(I, J, n) - I.measure * J.measure


def exact_hitting_bitstream(tape: BitTape, m: int, n_max: int) -> HittingRecord:
    """First ``n >= 1`` with ``T^n x`` in the open ball ``B(0, 2**-m)``.

    ``T^n x`` lies in the ball iff bits ``n+1 .. n+m`` are all 0, or all 1
    with a 1 somewhere further on (a tail of zeros would put the point on the
    boundary ``1 - 2**-m``).
    """
    if m < 2:
        raise ValueError("m >= 2 is needed for a radius below 1/2")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    block = 1 << 16
    n0 = 1
    while n0 <= n_max:
        count = min(block, n_max - n0 + 1)
        bits = tape.bits(n0 + 1, count + m - 1).astype(np.int64)
        eq = (bits[1:] == bits[:-1]).astype(np.int64)
        run = np.concatenate(([0], np.cumsum(eq)))
        # window starting at local i covers bits i..i+m-1, i.e. m-1 adjacent pairs
        full = (run[m - 1:m - 1 + count] - run[:count]) == m - 1
        for i in np.flatnonzero(full):
            n = n0 + int(i)
            if bits[i] == 0 or _tail_has_one(tape, n + m + 1):
                return HittingRecord(2.0 ** -m, n, n_max)
        n0 += count
    return HittingRecord(2.0 ** -m, None, n_max)


def _tail_has_one(tape: BitTape, start: int) -> bool:
    if tape.pattern is not None:
        # eventually periodic: one full period past the prefix decides it
        span = max(0, len(tape.prefix) - start + 1) + len(tape.pattern)
        return bool(tape.bits(start, span).any())
    pos = start
    while pos < start + (1 << 20):
        if tape.bits(pos, _TAIL_PROBE).any():
            return True
        pos += _TAIL_PROBE
    return False


@dataclass(frozen=True)
class CrosscheckResult:
    agree: bool
    tau_fixed: int | None
    tau_bitstream: int | None
    first_disagreement: int | None

    def __bool__(self):
        return self.agree


def crosscheck_backends(seed: int, m: int, n_max: int, budget: int | None = None) -> CrosscheckResult:
    """Hitting time of ``B(0, 2**-m)`` from the fixed_point backend vs the tape read-off.

    The fixed_point start holds the tape's first ``budget`` bits.  Returns
    the first index at which the two disagree on ball membership, if any.
    """
    if m < 2:
        raise ValueError("m >= 2 is needed for a radius below 1/2")
    budget = n_max + m + 64 if budget is None else budget
    tape = BitTape(seed)
    sys = SystemSpec("doubling", backend=Backend("fixed_point", budget))
    start = FixedState.from_value(tape, budget)
    rec_fixed = hitting_time(sys, start, 0.0, 2.0 ** -m, n_max)
    rec_tape = exact_hitting_bitstream(tape, m, n_max)
    if rec_fixed.tau == rec_tape.tau:
        return CrosscheckResult(True, rec_fixed.tau, rec_tape.tau, None)
    taus = [t for t in (rec_fixed.tau, rec_tape.tau) if t is not None]
    return CrosscheckResult(False, rec_fixed.tau, rec_tape.tau, min(taus))


def monte_carlo_preimage_counts(words: np.ndarray, m: int, max_rank: int = 10):
    """Joint histogram of the rank-``max_rank`` cells of ``x`` and ``T^m x``.

    ``words`` holds bits 1..64 of each sample point.  Entry ``[a, b]`` counts
    points whose first ``max_rank`` bits are ``a`` and whose bits
    ``m+1 .. m+max_rank`` are ``b``.
    """
    if m + max_rank > 64:
        raise ValueError("shift plus rank must fit in one 64-bit word")
    w = words.astype(np.uint64)
    mask = np.uint64((1 << max_rank) - 1)
    a = (w >> np.uint64(64 - max_rank)).astype(np.int64)
    b = ((w >> np.uint64(64 - m - max_rank)) & mask).astype(np.int64)
    size = 1 << max_rank
    return np.bincount(a * size + b, minlength=size * size).reshape(size, size)


def aggregate_counts(H: np.ndarray, rJ: int, rI: int) -> np.ndarray:
    """Collapse a full-rank joint histogram to ranks ``(rJ, rI)``: rows J, columns I."""
    R = int(np.log2(H.shape[0]))
    return H.reshape(1 << rJ, 1 << (R - rJ), 1 << rI, 1 << (R - rI)).sum(axis=(1, 3))


__all__ = ["BitTape", "DyadicInterval", "exact_preimage_intersection",
           "closed_form_preimage_intersection", "closed_form_table", "exact_correlation",
           "exact_hitting_bitstream", "crosscheck_backends", "CrosscheckResult",
           "monte_carlo_preimage_counts", "aggregate_counts", "MAX_SHIFT"]
