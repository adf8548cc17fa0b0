"""The map suite, its metric, orbit backends and empirical measures.

Five families live on the circle ``[0, 1)`` or the torus ``[0, 1)^2``:

=================  =====================================  ======
family             map                                    space
=================  =====================================  ======
doubling           x -> 2x mod 1                          circle
tent               x -> 1 - |1 - 2x|                      circle
rotation           x -> x + alpha mod 1                   circle
manneville_pomeau  x -> x + x^(1+s) mod 1                 circle
cat                (x, y) -> (2x + y, x + y) mod 1        torus2
=================  =====================================  ======

Three arithmetic backends are available.  ``float64`` is plain IEEE
arithmetic.  ``fixed_point`` keeps each coordinate as an integer over
``2**bit_budget`` and counts the significant bits the map has consumed.
``bitstream`` (doubling only) keeps the point as a seeded bit tape and
shifts it, which is exact for as long as you like.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _kernels as K
from .bits import BitMatrix, BitTape, in_open_arc, tape_for_fraction
from .errors import PrecisionExhausted

FAMILIES = ("doubling", "tent", "cat", "rotation", "manneville_pomeau")
ALIASES = {"mp": "manneville_pomeau", "pomeau": "manneville_pomeau", "arnold": "cat"}
LEBESGUE_FAMILIES = ("doubling", "tent", "cat", "rotation")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# significant bits are never spent below this many
GUARD_BITS = 10
FLOAT_BITS = 53
# exact fallbacks kick in when a float distance is this close to the radius
AMBIGUITY = 2.0 ** -48

_CODES = {"doubling": K.DOUBLING, "tent": K.TENT, "rotation": K.ROTATION,
          "manneville_pomeau": K.MP, "cat": K.CAT}


@dataclass(frozen=True)
class Backend:
    kind: str = "float64"
    bit_budget: int | None = None

    def __post_init__(self):
        if self.kind not in ("float64", "fixed_point", "bitstream"):
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.kind == "fixed_point":
            if self.bit_budget is None or int(self.bit_budget) <= GUARD_BITS:
                raise ValueError("fixed_point needs a bit budget above the guard bits")
        elif self.bit_budget is not None:
            raise ValueError(f"{self.kind} backend takes no bit budget")

    def __str__(self):
        if self.kind == "fixed_point":
            return f"fixed:{self.bit_budget}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Backend":
        text = text.strip()
        if text.startswith("fixed"):
            _, _, bits = text.partition(":")
            if not bits:
                raise ValueError("fixed backend needs a bit budget, e.g. fixed:4096")
            return cls("fixed_point", int(bits))
        return cls(text)


FLOAT64 = Backend()
BITSTREAM = Backend("bitstream")


@dataclass(frozen=True)
class SystemSpec:
    """A map family with its parameters, phase space, backend and measure."""

    family: str
    params: tuple = ()
    backend: Backend = FLOAT64
    measure: str | None = None
    space: str | None = None
    allow_rational: bool = False

    def __post_init__(self):
        fam = ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        natural = "torus2" if fam == "cat" else "circle"
        if self.space is None:
            object.__setattr__(self, "space", natural)
        elif self.space != natural:
            raise ValueError(f"{fam} lives on {natural}, not {self.space}")
        if self.measure is None:
            object.__setattr__(self, "measure",
                               "lebesgue_exact" if fam in LEBESGUE_FAMILIES else "orbit_empirical")
        if self.measure not in ("lebesgue_exact", "orbit_empirical"):
            raise ValueError(f"unknown measure descriptor {self.measure!r}")
        if self.measure == "lebesgue_exact" and fam not in LEBESGUE_FAMILIES:
            raise ValueError(f"{fam} does not preserve Lebesgue; use orbit_empirical")

        if fam == "rotation":
            if len(self.params) != 1 or not 0.0 < self.params[0] < 1.0:
                raise ValueError("rotation needs one angle alpha in (0, 1)")
        elif fam == "manneville_pomeau":
            if len(self.params) != 1 or not 0.0 < self.params[0] < 1.0:
                raise ValueError("manneville_pomeau needs s in (0, 1)")
        elif self.params:
            raise ValueError(f"{fam} takes no parameters")

        if self.backend.kind == "bitstream" and fam != "doubling":
            raise ValueError("the bitstream backend exists only for the doubling map")
        if self.backend.kind == "fixed_point" and fam == "manneville_pomeau":
            raise ValueError("manneville_pomeau is not exact on a dyadic grid; use float64")

    @property
    def dim(self) -> int:
        return 2 if self.space == "torus2" else 1

    @property
    def alpha(self) -> float:
        return self.params[0]

    @property
    def lipschitz(self) -> float:
        return {"doubling": 2.0, "tent": 2.0, "rotation": 1.0,
                "cat": (3.0 + math.sqrt(5.0)) / 2.0}.get(self.family, math.inf)

    @property
    def bits_per_step(self) -> float:
        """Significant bits lost per iteration in the fixed_point backend."""
        if self.family == "rotation":
            return 0.0
        return math.log2(self.lipschitz)

    @property
    def collapses_in_float(self) -> bool:
        """Doubling and tent shift a 53-bit mantissa to zero in float64."""
        return self.family in ("doubling", "tent")

    @property
    def is_rational_rotation(self) -> bool:
        if self.family != "rotation":
            return False
        q = Fraction(self.alpha).limit_denominator(10_000)
        return abs(float(q) - self.alpha) < 1e-12

    def label(self) -> str:
        short = {"manneville_pomeau": "mp"}.get(self.family, self.family)
        parts = []
        if self.family == "rotation":
            parts.append(f"alpha={self.alpha!r}")
        elif self.family == "manneville_pomeau":
            parts.append(f"s={self.alpha!r}")
        parts.append(f"backend={self.backend}")
        return short + ":" + ",".join(parts)


def default_backend(family: str) -> Backend:
    return BITSTREAM if ALIASES.get(family, family) == "doubling" else FLOAT64


def parse_system(text: str, backend: str | None = None) -> SystemSpec:
    """Parse ``family[:key=value,...]``.

    >>> parse_system("rotation:alpha=0.25").alpha
    0.25
    >>> parse_system("mp:s=0.5,backend=float64").family
    'manneville_pomeau'
    """
    name, _, rest = text.strip().partition(":")
    name = ALIASES.get(name.strip(), name.strip())
    opts = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed system option {item!r}")
        opts[key.strip()] = val.strip()
    if backend is not None:
        opts.setdefault("backend", backend)
    params = ()
    if name == "rotation":
        a = opts.pop("alpha", None)
        if a is None:
            raise ValueError("rotation needs alpha=...")
        params = (_parse_angle(a),)
    elif name == "manneville_pomeau":
        params = (float(opts.pop("s", "0.5")),)
    be = Backend.parse(opts.pop("backend")) if "backend" in opts else default_backend(name)
    measure = opts.pop("measure", None)
    allow = opts.pop("allow_rational", "0").lower() in ("1", "true", "yes")
    if opts:
        raise ValueError(f"unknown system options {sorted(opts)}")
    return SystemSpec(name, params, be, measure, allow_rational=allow)


def liouville_angle(terms: int = 6) -> float:
    """``sum_{n=1}^{terms} 2^(-n!)`` rounded to float64."""
    return float(sum(Fraction(1, 2 ** math.factorial(n)) for n in range(1, terms + 1)))


def _parse_angle(text: str) -> float:
    t = text.lower()
    if t in ("golden", "phi"):
        return GOLDEN
    if t.startswith("liouville"):
        _, _, n = t.partition("@")
        return liouville_angle(int(n) if n else 6)
    if "/" in t:
        return float(Fraction(t))
    return float(t)


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class Point:
    """A point of the circle or torus, coordinates reduced into [0, 1)."""

    coords: tuple

    def __post_init__(self):
        cs = []
        for c in self.coords:
            c = float(c) % 1.0
            if c >= 1.0:
                c = 0.0
            cs.append(c)
        object.__setattr__(self, "coords", tuple(cs))

    @property
    def x(self) -> float:
        return self.coords[0]

    def __len__(self):
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


def as_point(x) -> Point:
    if isinstance(x, Point):
        return x
    if isinstance(x, (FixedState, TapeState)):
        return x.point
    if isinstance(x, (int, float, Fraction, np.floating)):
        return Point((float(x),))
    return Point(tuple(float(c) for c in x))


@dataclass(frozen=True)
class FixedState:
    """Exact dyadic point ``nums[i] / 2**bits`` plus the bits already spent."""

    nums: tuple
    bits: int
    consumed: float = 0.0
    steps: int = 0

    @classmethod
    def from_value(cls, x, bits: int) -> "FixedState":
        if isinstance(x, BitTape):
            x = TapeState(x)
        if isinstance(x, TapeState):
            # the first ``bits`` bits of the tape, exactly
            return cls((x.read(bits),), bits)
        if isinstance(x, FixedState):
            x = x.exact
        if isinstance(x, Point):
            vals = x.coords
        elif isinstance(x, (tuple, list)):
            vals = x
        else:
            vals = (x,)
        scale = 1 << bits
        return cls(tuple(math.floor((Fraction(v) % 1) * scale) for v in vals), bits)

    @property
    def exact(self) -> tuple:
        return tuple(Fraction(n, 1 << self.bits) for n in self.nums)

    @property
    def remaining(self) -> float:
        return self.bits - self.consumed

    @property
    def point(self) -> Point:
        return Point(tuple(_floor53(n, self.bits) for n in self.nums))


def _floor53(n: int, bits: int) -> float:
    if bits > FLOAT_BITS:
        return math.ldexp(n >> (bits - FLOAT_BITS), -FLOAT_BITS)
    return math.ldexp(n, -bits)


@dataclass(frozen=True)
class TapeState:
    """Point ``T^offset`` of the tape's point, i.e. the tape read from bit offset+1."""

    tape: BitTape
    offset: int = 0

    @classmethod
    def from_value(cls, x) -> "TapeState":
        if isinstance(x, TapeState):
            return x
        if isinstance(x, BitTape):
            return cls(x)
        v = x.coords[0] if isinstance(x, Point) else x
        return cls(tape_for_fraction(Fraction(v)))

    @property
    def point(self) -> Point:
        return Point((float(self.tape.values(self.offset, 1)[0]),))

    def read(self, k: int) -> int:
        return self.tape.prefix_int(k, self.offset)


# ---------------------------------------------------------------- stepping


def _step_float(sys: SystemSpec, coords: tuple) -> tuple:
    fam = sys.family
    if fam == "cat":
        x, y = coords
        u = 2.0 * x + y
        v = x + y
        return (u - math.floor(u), v - math.floor(v))
    x = coords[0]
    if fam == "doubling":
        y = 2.0 * x
    elif fam == "tent":
        y = 2.0 * x if x <= 0.5 else 2.0 - 2.0 * x
    elif fam == "rotation":
        y = x + sys.alpha
    else:
        y = x + x ** (1.0 + sys.alpha)
    if y >= 1.0:
        y -= 1.0
    return (y,)


def _rotation_int(sys: SystemSpec, bits: int) -> int:
    return math.floor(Fraction(sys.alpha) * (1 << bits))


def _step_fixed(sys: SystemSpec, st: FixedState, index: int | None = None) -> FixedState:
    steps = st.steps + 1
    if sys.family == "rotation":
        # truncating alpha costs about log2(n) bits after n steps
        consumed = math.log2(steps + 1)
    else:
        consumed = st.consumed + sys.bits_per_step
    if consumed > st.bits - GUARD_BITS:
        raise PrecisionExhausted(
            f"fixed_point budget of {st.bits} bits exhausted", index)
    mod = (1 << st.bits) - 1
    fam = sys.family
    if fam == "doubling":
        nums = ((st.nums[0] << 1) & mod,)
    elif fam == "tent":
        n = st.nums[0]
        half = 1 << (st.bits - 1)
        nums = ((n << 1) if n <= half else ((1 << (st.bits + 1)) - (n << 1)),)
        nums = (nums[0] & mod,)
    elif fam == "rotation":
        nums = ((st.nums[0] + _rotation_int(sys, st.bits)) & mod,)
    else:
        x, y = st.nums
        nums = (((x << 1) + y) & mod, (x + y) & mod)
    return FixedState(nums, st.bits, consumed, steps)


def initial_state(sys: SystemSpec, x):
    """Convert a point (or a state) to the backend's native state."""
    kind = sys.backend.kind
    if kind == "bitstream":
        return TapeState.from_value(x)
    if kind == "fixed_point":
        if isinstance(x, FixedState) and x.bits == sys.backend.bit_budget:
            return x
        return FixedState.from_value(x, sys.backend.bit_budget)
    return as_point(x)


def random_start(sys: SystemSpec, seed) -> object:
    """A seeded Lebesgue-random starting point in the backend's native form.

    Bitstream and fixed_point doubling starts are read from the same tape, so
    both backends see identical leading bits for the same seed.
    """
    if sys.backend.kind == "bitstream":
        return TapeState(BitTape(seed))
    if sys.backend.kind == "fixed_point" and sys.dim == 1:
        return FixedState.from_value(BitTape(seed), sys.backend.bit_budget)
    return Point(tuple(np.random.default_rng(seed).random(sys.dim)))


def step(sys: SystemSpec, x):
    """Apply the map once.

    Points in, points out; native backend states (``FixedState``,
    ``TapeState``) are stepped in their own arithmetic and returned as such.
    """
    if isinstance(x, TapeState):
        return TapeState(x.tape, x.offset + 1)
    if isinstance(x, FixedState):
        return _step_fixed(sys, x)
    p = as_point(x)
    if len(p) != sys.dim:
        raise ValueError(f"point of dimension {len(p)} on {sys.space}")
    if sys.backend.kind != "float64":
        return step(sys, initial_state(sys, p)).point
    return Point(_step_float(sys, p.coords))


def iterate(sys: SystemSpec, x, n: int) -> Iterator:
    """Native states ``T^1(x) .. T^n(x)``; PrecisionExhausted carries the index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    st = initial_state(sys, x)
    budget = _float_budget(sys)
    for k in range(1, n + 1):
        if k > budget:
            raise PrecisionExhausted(
                f"float64 {sys.family} orbit collapses after {budget} steps", k)
        try:
            st = step(sys, st)
        except PrecisionExhausted as exc:
            exc.step_index = k
            raise
        yield st


def orbit(sys: SystemSpec, x, n: int) -> Iterator[Point]:
    """Lazily yield ``T^1(x) .. T^n(x)`` as points."""
    for st in iterate(sys, x, n):
        yield st if isinstance(st, Point) else st.point


def _float_budget(sys: SystemSpec) -> float:
    if sys.backend.kind == "float64" and sys.collapses_in_float:
        return FLOAT_BITS - GUARD_BITS
    return math.inf


# ---------------------------------------------------------------- metric


def distance(space: str, x, y) -> float:
    """Circle distance, or the sup of per-coordinate circle distances on the torus."""
    px, py = as_point(x).coords, as_point(y).coords
    if space == "circle" and len(px) == len(py) == 1:
        d = abs(px[0] - py[0])
        return min(d, 1.0 - d)
    if space == "torus2" and len(px) == len(py) == 2:
        return max(min(abs(a - b), 1.0 - abs(a - b)) for a, b in zip(px, py))
    raise ValueError(f"points do not belong to {space}")


def distances(pts: np.ndarray, x0: Sequence[float]) -> np.ndarray:
    """Vectorized distance from each row of ``pts`` (or each entry, in 1D) to x0."""
    pts = np.asarray(pts, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    if pts.ndim == 1:
        d = np.abs(pts - x0[0])
        return np.minimum(d, 1.0 - d)
    d = np.abs(pts - x0[None, :])
    return np.minimum(d, 1.0 - d).max(axis=1)


def pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise distances between two equally shaped arrays of points."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    d = np.minimum(d, 1.0 - d)
    return d if d.ndim == 1 else d.max(axis=1)


def exact_distance_below(space: str, coords, x0, r: float) -> bool:
    """``d(coords, x0) < r`` in exact rational arithmetic (coords are Fractions or floats)."""
    rad = Fraction(r)
    for c, c0 in zip(coords, as_point(x0).coords):
        d = abs(Fraction(c) - Fraction(c0)) % 1
        if min(d, 1 - d) >= rad:
            return False
    return True


# ---------------------------------------------------------------- cursors


class OrbitCursor:
    """Produces an orbit chunk by chunk as float arrays.

    ``next_chunk(L)`` returns the next L points (shape ``(L,)`` on the circle,
    ``(L, 2)`` on the torus).  ``decide(i, x0, r)`` answers ``d(T^i x, x0) < r``
    exactly for an index of the most recent chunk, for use when the float
    projection is too close to the boundary to be trusted.
    """

    def __init__(self, sys: SystemSpec, x):
        self.sys = sys
        self.state = initial_state(sys, x)
        self.position = 0
        self._chunk_start = 0
        self._chunk_states = None
        self._budget = _float_budget(sys)

    def next_chunk(self, length: int) -> np.ndarray:
        sys = self.sys
        start = self.position
        self._chunk_start = start
        if start + length > self._budget:
            self._exhausted = PrecisionExhausted(
                f"float64 {sys.family} orbit collapses after {int(self._budget)} steps",
                int(self._budget) + 1)
            length = int(self._budget) - start
            if length <= 0:
                raise self._exhausted
        st = self.state
        if isinstance(st, TapeState):
            out = st.tape.values(st.offset + 1, length)
            self.state = TapeState(st.tape, st.offset + length)
        elif isinstance(st, FixedState):
            states = []
            try:
                for _ in range(length):
                    st = _step_fixed(sys, st)
                    states.append(st)
            except PrecisionExhausted as exc:
                exc.step_index = start + len(states) + 1
                if not states:
                    raise
                self._exhausted = exc
            self._chunk_states = states
            self.state = st
            length = len(states)
            if sys.dim == 1:
                out = np.array([_floor53(s.nums[0], s.bits) for s in states])
            else:
                out = np.array([[_floor53(n, s.bits) for n in s.nums] for s in states])
        elif sys.family == "cat":
            out = np.empty((length, 2))
            u, v = K.orbit_cat(st.coords[0], st.coords[1], out)
            self.state = Point((u, v)) if length else st
        else:
            out = np.empty(length)
            y = K.orbit_1d(_CODES[sys.family], sys.params[0] if sys.params else 0.0,
                           st.coords[0], out)
            self.state = Point((y,)) if length else st
        self.position = start + length
        return out

    def decide(self, local_index: int, x0, r: float) -> bool:
        st = self.state
        if isinstance(st, TapeState):
            off = self._chunk_start + local_index + 1
            base = st.tape
            origin = st.offset - self.position  # tape offset of T^0
            return in_open_arc(lambda k: base.prefix_int(k, origin + off), as_point(x0).x, r)
        if isinstance(st, FixedState):
            s = self._chunk_states[local_index]
            return exact_distance_below(self.sys.space, s.exact, x0, r)
        # float64: the stored float is the state itself
        return None


def chunk_sizes(n_max: int, first: int = 4096, largest: int = 1 << 20):
    """Chunk lengths doubling from ``first`` up to ``largest`` until n_max is covered."""
    done = 0
    size = first
    while done < n_max:
        take = min(size, n_max - done)
        yield take
        done += take
        size = min(size * 2, largest)


def below(cursor: OrbitCursor, chunk: np.ndarray, x0, r: float) -> np.ndarray:
    """Boolean mask ``d < r`` over a chunk, exact near the boundary."""
    x0c = as_point(x0).coords
    d = distances(chunk, x0c)
    mask = d < r
    near = np.flatnonzero(np.abs(d - r) <= AMBIGUITY)
    for i in near:
        verdict = cursor.decide(int(i), x0, r)
        if verdict is None:
            pts = chunk[i] if chunk.ndim > 1 else (chunk[i],)
            verdict = exact_distance_below(cursor.sys.space, tuple(pts), x0, r)
        mask[i] = verdict
    return mask


def orbit_array(sys: SystemSpec, x, n: int) -> np.ndarray:
    """``T^1(x) .. T^n(x)`` as one float array (fast path of :func:`orbit`)."""
    cur = OrbitCursor(sys, x)
    parts = []
    got = 0
    for size in chunk_sizes(n, first=min(n, 1 << 16)):
        parts.append(cur.next_chunk(size))
        got += len(parts[-1])
        if len(parts[-1]) < size:
            raise getattr(cur, "_exhausted", PrecisionExhausted("orbit exhausted", got + 1))
    return np.concatenate(parts)


# ---------------------------------------------------------------- measures


class GridIndex:
    """Uniform-cell index over points of the circle or torus.

    Ball counts add whole cells that lie inside the ball and scan only the
    cells cut by its boundary.
    """

    def __init__(self, points: np.ndarray, cells: int):
        self.points = points
        self.dim = 1 if points.ndim == 1 else points.shape[1]
        self.cells = max(1, int(cells))
        cell = self._cell_of(points)
        flat = cell if self.dim == 1 else cell[:, 0] * self.cells + cell[:, 1]
        order = np.argsort(flat, kind="stable")
        self.order = order
        self.sorted_points = points[order]
        counts = np.bincount(flat, minlength=self.cells ** self.dim)
        self.starts = np.concatenate(([0], np.cumsum(counts)))
        self.counts = counts if self.dim == 1 else counts.reshape(self.cells, self.cells)

    def _cell_of(self, pts):
        c = np.floor(pts * self.cells).astype(np.int64)
        return np.clip(c, 0, self.cells - 1)

    def _axis_cells(self, c0: float, r: float):
        """Cells meeting the open arc (c0 - r, c0 + r): (full cells, partial cells)."""
        n = self.cells
        if 2 * r > 1.0:
            return np.arange(n), np.empty(0, dtype=np.int64)
        lo, hi = c0 - r, c0 + r
        first = math.floor(lo * n)
        last = math.ceil(hi * n) - 1
        ids = np.arange(first, last + 1)
        left = ids / n
        right = (ids + 1) / n
        full = (left > lo + 1e-12) & (right < hi - 1e-12)
        return np.unique(ids[full] % n), np.unique(ids[~full] % n)

    def count(self, x0, r: float) -> int:
        c0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        if self.dim == 1:
            full, part = self._axis_cells(c0[0], r)
            total = int(self.counts[full].sum())
            cand = [self.sorted_points[self.starts[c]:self.starts[c + 1]] for c in part]
        else:
            fx, px = self._axis_cells(c0[0], r)
            fy, py = self._axis_cells(c0[1], r)
            total = int(self.counts[np.ix_(fx, fy)].sum())
            full_x = set(fx.tolist())
            all_y = np.concatenate([fy, py])
            cand = []
            for cx in np.concatenate([fx, px]):
                ys = py if cx in full_x else all_y
                for cy in ys:
                    k = cx * self.cells + cy
                    cand.append(self.sorted_points[self.starts[k]:self.starts[k + 1]])
        if cand:
            pts = np.concatenate(cand)
            total += int(np.count_nonzero(distances(pts, c0) < r))
        return total


@dataclass
class EmpiricalMeasure:
    """M sample points standing in for the invariant measure."""

    system: SystemSpec
    points: np.ndarray
    generation: tuple
    tapes: BitMatrix | None = None
    cells: int | None = None
    index: GridIndex = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("an empirical measure needs at least one point")
        if self.cells is None:
            m = len(self.points)
            self.cells = max(1, int((m / 8) ** (1.0 / self.system.dim)))
            self.cells = min(self.cells, 1 << 20)
        self.index = GridIndex(self.points, self.cells)

    @property
    def size(self) -> int:
        return len(self.points)

    def ball_count(self, x0, r: float) -> int:
        return self.index.count(as_point(x0).coords, r)

    def linear_count(self, x0, r: float) -> int:
        return int(np.count_nonzero(distances(self.points, as_point(x0).coords) < r))

    def pushed(self, n: int) -> np.ndarray:
        """Images ``T^n(x_i)`` of every sample point."""
        return push_forward(self.system, self, n)


def sample_measure(sys: SystemSpec, M: int, seed: int, method: str = "iid_lebesgue",
                   burn_in: int = 10_000, stride: int = 16, cells: int | None = None
                   ) -> EmpiricalMeasure:
    """Draw an empirical measure.

    ``iid_lebesgue`` draws M independent uniform points (doubling with the
    bitstream backend draws M independent tapes).  ``orbit_sample`` follows
    one orbit from a seeded uniform start, drops ``burn_in`` iterates and
    keeps every ``stride``-th point.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(seed)
    tapes = None
    if method == "iid_lebesgue":
        if sys.measure != "lebesgue_exact":
            raise ValueError(f"{sys.family} does not preserve Lebesgue measure")
        if sys.backend.kind == "bitstream":
            tapes = BitMatrix(seed, M)
            pts = tapes.values(0)
        else:
            pts = rng.random((M, sys.dim)) if sys.dim == 2 else rng.random(M)
        gen = ("iid_lebesgue", seed)
    elif method == "orbit_sample":
        if stride < 1 or burn_in < 0:
            raise ValueError("stride >= 1 and burn_in >= 0 required")
        gen = ("orbit_sample", seed, burn_in, stride)
        if sys.backend.kind == "bitstream":
            tape = BitTape(seed)
            offs = burn_in + stride * np.arange(1, M + 1)
            pts = np.concatenate([tape.values(int(o), 1) for o in offs]) if M < 64 else \
                _tape_strided(tape, burn_in, stride, M)
        elif sys.backend.kind == "fixed_point":
            total = burn_in + stride * M
            budget = sys.backend.bit_budget - GUARD_BITS
            if total * sys.bits_per_step > budget:
                raise PrecisionExhausted(
                    f"orbit sample needs {total} steps, budget allows {int(budget / max(sys.bits_per_step, 1e-9))}",
                    int(budget / max(sys.bits_per_step, 1e-9)) + 1)
            arr = orbit_array(sys, tuple(rng.random(sys.dim)), total)
            pts = arr[burn_in + stride - 1::stride][:M]
        else:
            if sys.collapses_in_float:
                raise PrecisionExhausted(
                    f"float64 {sys.family} orbits collapse; use the bitstream or fixed_point backend",
                    FLOAT_BITS - GUARD_BITS + 1)
            start = rng.random(sys.dim)
            if sys.family == "cat":
                pts = np.empty((M, 2))
                K.orbit_sample_cat(start[0], start[1], burn_in, stride, pts)
            else:
                pts = np.empty(M)
                y = K.orbit_sample_1d(_CODES[sys.family], sys.params[0] if sys.params else 0.0,
                                      start[0], burn_in, stride, pts)
                if y == 0.0 and sys.family == "manneville_pomeau":
                    raise ArithmeticError("orbit fell onto the fixed point 0 in float64")
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return EmpiricalMeasure(sys, np.ascontiguousarray(pts), gen, tapes, cells)


def _tape_strided(tape: BitTape, burn_in: int, stride: int, M: int) -> np.ndarray:
    out = np.empty(M)
    block = 1 << 16
    for s in range(0, M, block):
        m = min(block, M - s)
        first = burn_in + stride * (s + 1)
        vals = tape.values(first, (m - 1) * stride + 1)
        out[s:s + m] = vals[::stride]
    return out


def push_forward(sys: SystemSpec, measure: EmpiricalMeasure, n: int) -> np.ndarray:
    """``T^n`` applied to each sample point, as floats."""
    if n == 0:
        return measure.points.copy()
    if measure.tapes is not None:
        return measure.tapes.values(n)
    if sys.backend.kind == "float64":
        if sys.collapses_in_float and n > FLOAT_BITS - GUARD_BITS:
            raise PrecisionExhausted(
                f"float64 {sys.family} orbits collapse after {FLOAT_BITS - GUARD_BITS} steps", n)
        pts = measure.points.copy()
        if sys.family == "cat":
            K.push_cat(pts, n)
        else:
            K.push_1d(_CODES[sys.family], sys.params[0] if sys.params else 0.0, pts, n)
        return pts
    out = []
    for p in measure.points:
        st = initial_state(sys, tuple(np.atleast_1d(p)))
        for _ in range(n):
            st = _step_fixed(sys, st)
        out.append(st.point.coords if sys.dim == 2 else st.point.x)
    return np.asarray(out)


class Pusher:
    """Incremental ``T^n`` of a sample for increasing n (reuses the last image)."""

    def __init__(self, sys: SystemSpec, measure: EmpiricalMeasure):
        self.sys = sys
        self.measure = measure
        self.n = 0
        self.pts = measure.points.copy()

    def at(self, n: int) -> np.ndarray:
        if self.measure.tapes is not None:
            return self.measure.tapes.values(n)
        if n < self.n:
            self.n, self.pts = 0, self.measure.points.copy()
        if self.sys.backend.kind == "float64" and not self.sys.collapses_in_float:
            if self.sys.family == "cat":
                K.push_cat(self.pts, n - self.n)
            else:
                K.push_1d(_CODES[self.sys.family], self.sys.params[0] if self.sys.params else 0.0,
                          self.pts, n - self.n)
        else:
            self.pts = push_forward(self.sys, self.measure, n)
        self.n = n
        return self.pts
