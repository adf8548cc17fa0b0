"""Seeded fair-bit tapes.

A tape stands for a Lebesgue-typical point ``x = 0.b1 b2 b3 ...`` of the
circle.  The doubling map acts on it as a shift, so ``T^n(x)`` is read off
the tape starting at bit ``n + 1``.  Bits are produced lazily in blocks, and
any bit can be reached in O(1) without generating the ones before it.
"""

from __future__ import annotations

from collections import OrderedDict
from fractions import Fraction

import numpy as np

WORD = 64
BLOCK_WORDS = 4096
_MANTISSA = 53
_SCALE53 = 2.0 ** -_MANTISSA
_U64 = np.uint64


def _shifted_windows(lo: np.ndarray, hi: np.ndarray, s: np.ndarray) -> np.ndarray:
    """64-bit windows ``(lo << s) | (hi >> (64 - s))`` with ``s == 0`` handled."""
    s = s.astype(_U64)
    left = lo << s
    right = np.where(s == 0, _U64(0), hi >> ((_U64(WORD) - s) & _U64(63)))
    return left | right


class BitTape:
    """Infinite reproducible bit sequence ``b1, b2, ...`` (1-based).

    ``prefix`` overrides the leading bits; ``pattern`` replaces the random
    source with a pattern repeated after the prefix, so eventually periodic
    expansions (every rational) are representable exactly.
    """

    def __init__(self, seed: int | None = 0, prefix=(), pattern=None, cache_blocks: int = 64):
        self.seed = seed
        self.prefix = tuple(int(b) & 1 for b in prefix)
        self.pattern = tuple(int(b) & 1 for b in pattern) if pattern is not None else None
        if self.pattern is not None and not self.pattern:
            raise ValueError("pattern must be nonempty")
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cache_blocks = cache_blocks

    def __repr__(self):
        return f"BitTape(seed={self.seed!r}, prefix={len(self.prefix)} bits)"

    def _raw_block(self, b: int) -> np.ndarray:
        if self.pattern is not None:
            nbits = BLOCK_WORDS * WORD
            start = b * nbits
            period = len(self.pattern)
            idx = (np.arange(start, start + nbits) - len(self.prefix)) % period
            arr = np.asarray(self.pattern, dtype=np.uint8)[idx]
            return np.packbits(arr).view(">u8").astype(_U64)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(b,))
        gen = np.random.Generator(np.random.PCG64(ss))
        return gen.integers(0, 2**64, size=BLOCK_WORDS, dtype=_U64, endpoint=False)

    def _block(self, b: int) -> np.ndarray:
        blk = self._cache.get(b)
        if blk is not None:
            self._cache.move_to_end(b)
            return blk
        blk = self._raw_block(b)
        if self.prefix and b * BLOCK_WORDS * WORD < len(self.prefix):
            bits = np.unpackbits(blk.astype(">u8").view(np.uint8))
            start = b * BLOCK_WORDS * WORD
            end = min(len(self.prefix), start + bits.size)
            bits[: end - start] = self.prefix[start:end]
            blk = np.packbits(bits).view(">u8").astype(_U64)
        self._cache[b] = blk
        if len(self._cache) > self._cache_blocks:
            self._cache.popitem(last=False)
        return blk

    def words(self, start: int, count: int) -> np.ndarray:
        """Words ``start .. start+count-1``; word w holds bits 64w+1 .. 64w+64, MSB first."""
        out = np.empty(count, dtype=_U64)
        pos = 0
        w = start
        while pos < count:
            b, off = divmod(w, BLOCK_WORDS)
            take = min(BLOCK_WORDS - off, count - pos)
            out[pos:pos + take] = self._block(b)[off:off + take]
            pos += take
            w += take
        return out

    def bit(self, i: int) -> int:
        """Bit ``b_i`` for ``i >= 1``."""
        if i < 1:
            raise IndexError("bits are 1-based")
        w, j = divmod(i - 1, WORD)
        return int((int(self.words(w, 1)[0]) >> (WORD - 1 - j)) & 1)

    def bits(self, start: int, count: int) -> np.ndarray:
        """Bits ``b_start .. b_{start+count-1}`` as a uint8 array."""
        w0 = (start - 1) // WORD
        w1 = (start - 1 + count - 1) // WORD
        raw = np.unpackbits(self.words(w0, w1 - w0 + 1).astype(">u8").view(np.uint8))
        off = (start - 1) - w0 * WORD
        return raw[off:off + count]

    def windows(self, offset: int, count: int) -> np.ndarray:
        """uint64 windows: entry j holds bits ``offset+j+1 .. offset+j+64``."""
        idx = np.arange(offset, offset + count, dtype=np.int64)
        w0 = offset // WORD
        wsrc = self.words(w0, (offset + count - 1) // WORD - w0 + 2)
        rel = (idx >> 6) - w0
        return _shifted_windows(wsrc[rel], wsrc[rel + 1], idx & 63)

    def values(self, offset: int, count: int) -> np.ndarray:
        """Float projections of ``T^n(x)`` for n = offset .. offset+count-1.

        Each value is the tape value truncated (rounded down) to 53 bits.
        """
        return (self.windows(offset, count) >> _U64(WORD - _MANTISSA)).astype(np.float64) * _SCALE53

    def prefix_int(self, nbits: int, offset: int = 0) -> int:
        """Integer formed by bits ``offset+1 .. offset+nbits`` (big-endian)."""
        if nbits <= 0:
            return 0
        w0 = offset // WORD
        w1 = (offset + nbits - 1) // WORD
        acc = 0
        for word in self.words(w0, w1 - w0 + 1):
            acc = (acc << WORD) | int(word)
        total = (w1 - w0 + 1) * WORD
        lead = offset - w0 * WORD
        acc &= (1 << (total - lead)) - 1
        return acc >> (total - lead - nbits)


def tape_for_fraction(q) -> BitTape:
    """Exact tape for a rational in [0, 1): preperiodic prefix plus period."""
    q = Fraction(q) % 1
    num, den = q.numerator, q.denominator
    seen = {}
    out = []
    while num not in seen:
        seen[num] = len(out)
        num *= 2
        out.append(num // den)
        num %= den
    start = seen[num]
    return BitTape(seed=None, prefix=out[:start], pattern=out[start:])


class BitMatrix:
    """M independent tapes read column-block by column-block.

    Row i is the binary expansion of sample point i.  Column word c (bits
    64c+1 .. 64c+64 of every row) is generated from ``(seed, c)`` alone, so
    ``T^n`` of the whole sample costs O(M) for any n.
    """

    def __init__(self, seed: int, size: int, cache_columns: int = 4):
        if size < 1:
            raise ValueError("size must be >= 1")
        self.seed = seed
        self.size = size
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cache_columns = cache_columns

    def column(self, c: int) -> np.ndarray:
        col = self._cache.get(c)
        if col is not None:
            self._cache.move_to_end(c)
            return col
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(c,))
        col = np.random.Generator(np.random.PCG64(ss)).integers(
            0, 2**64, size=self.size, dtype=_U64, endpoint=False)
        self._cache[c] = col
        if len(self._cache) > self._cache_columns:
            self._cache.popitem(last=False)
        return col

    def windows(self, offset: int) -> np.ndarray:
        w, s = divmod(offset, WORD)
        lo = self.column(w)
        if s == 0:
            return lo.copy()
        hi = self.column(w + 1)
        return (lo << _U64(s)) | (hi >> _U64(WORD - s))

    def values(self, offset: int) -> np.ndarray:
        """53-bit float projection of ``T^offset`` applied to every row."""
        return (self.windows(offset) >> _U64(WORD - _MANTISSA)).astype(np.float64) * _SCALE53

    def row_prefix_int(self, i: int, nbits: int, offset: int = 0) -> int:
        w0 = offset // WORD
        w1 = (offset + nbits - 1) // WORD
        acc = 0
        for c in range(w0, w1 + 1):
            acc = (acc << WORD) | int(self.column(c)[i])
        total = (w1 - w0 + 1) * WORD
        lead = offset - w0 * WORD
        acc &= (1 << (total - lead)) - 1
        return acc >> (total - lead - nbits)


def in_open_arc(read_bits, x0: float, r: float, max_bits: int = 4096) -> bool:
    """Exact test of ``d(v, x0) < r`` for a point v given by its bits.

    ``read_bits(k)`` must return the integer of the first k bits of v.  Bits
    are read in growing batches until the dyadic enclosure of v lies wholly
    inside or outside the open arc.  A point sitting exactly on the boundary
    after ``max_bits`` bits counts as outside.
    """
    c = Fraction(x0)
    rad = Fraction(r)
    k = 64
    while True:
        lo = Fraction(read_bits(k), 1 << k)
        hi = lo + Fraction(1, 1 << k)
        inside_lo = _arc_contains(c, rad, lo)
        # the enclosure [lo, hi) is decided when both ends agree and the
        # arc boundary does not fall strictly between them
        if inside_lo == _arc_contains(c, rad, hi) and not _boundary_between(c, rad, lo, hi):
            return inside_lo
        if k >= max_bits:
            return False
        k *= 2


def _circ(a: Fraction, b: Fraction) -> Fraction:
    d = abs(a - b) % 1
    return min(d, 1 - d)


def _arc_contains(c: Fraction, rad: Fraction, v: Fraction) -> bool:
    return _circ(v % 1, c) < rad


def _boundary_between(c: Fraction, rad: Fraction, lo: Fraction, hi: Fraction) -> bool:
    for e in ((c - rad) % 1, (c + rad) % 1):
        for shift in (-1, 0, 1):
            if lo <= e + shift <= hi:
                return True
    return False
