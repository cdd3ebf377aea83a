"""Dyadic grid arithmetic: cubes, cube sets, covering numbers and sumset covers.

Cubes of level k have side 2**-k.  They are half-open when counted and closed
when tested against tubes or balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._common import DomainError, PreconditionError, check_budget, dyadic_level, tol_geo
from .curve import CurvedTube, branch_domain, curve_from_record, tube_box_hits_exact

_OFF = 1 << 30


@dataclass(frozen=True)
class DyadicCube:
    level: int
    ix: int
    iy: int

    @property
    def side(self):
        return 2.0**-self.level

    def bounds(self):
        h = self.side
        return (self.ix * h, (self.ix + 1) * h, self.iy * h, (self.iy + 1) * h)

    def center(self):
        h = self.side
        return ((self.ix + 0.5) * h, (self.iy + 0.5) * h)


def encode(cells):
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if cells.size and (np.abs(cells).max() >= _OFF):
        raise DomainError("cube index out of range")
    return ((cells[:, 0] + _OFF) << 32) | (cells[:, 1] + _OFF)


def decode(keys):
    keys = np.asarray(keys, dtype=np.int64)
    return np.stack([(keys >> 32) - _OFF, (keys & 0xFFFFFFFF) - _OFF], axis=1)


class CubeSet:
    """Immutable set of level-k dyadic cubes, stored as sorted unique (ix, iy) rows."""

    __slots__ = ("level", "_cells", "_keys")

    def __init__(self, level, cells=()):
        if int(level) != level:
            raise DomainError("level must be an integer")
        self.level = int(level)
        keys = np.unique(encode(np.asarray(cells, dtype=np.int64).reshape(-1, 2)))
        self._keys = keys
        self._cells = decode(keys)
        self._keys.setflags(write=False)
        self._cells.setflags(write=False)

    @classmethod
    def _from_sorted_keys(cls, level, keys):
        obj = cls.__new__(cls)
        obj.level = int(level)
        obj._keys = keys
        obj._cells = decode(keys)
        obj._keys.setflags(write=False)
        obj._cells.setflags(write=False)
        return obj

    @classmethod
    def from_points(cls, points, level):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(level, np.floor(pts * 2.0**level).astype(np.int64))

    @property
    def members(self):
        return self._cells

    @property
    def keys(self):
        return self._keys

    @property
    def side(self):
        return 2.0**-self.level

    def __len__(self):
        return self._cells.shape[0]

    def __iter__(self):
        for ix, iy in self._cells:
            yield DyadicCube(self.level, int(ix), int(iy))

    def __contains__(self, cube):
        if isinstance(cube, DyadicCube):
            if cube.level != self.level:
                return False
            cube = (cube.ix, cube.iy)
        return bool(self.contains_many([cube])[0])

    def __eq__(self, other):
        return isinstance(other, CubeSet) and self.level == other.level and np.array_equal(self._keys, other._keys)

    def __hash__(self):
        return hash((self.level, self._keys.tobytes()))

    def __repr__(self):
        return f"CubeSet(level={self.level}, n={len(self)})"

    def contains_many(self, cells):
        k = encode(cells)
        pos = np.searchsorted(self._keys, k)
        pos = np.minimum(pos, max(len(self._keys) - 1, 0))
        if len(self._keys) == 0:
            return np.zeros(k.shape, dtype=bool)
        return self._keys[pos] == k

    def index_of(self, cells):
        """Row index of each cell in ``members``, -1 when absent."""
        k = encode(cells)
        if len(self._keys) == 0:
            return np.full(k.shape, -1)
        pos = np.minimum(np.searchsorted(self._keys, k), len(self._keys) - 1)
        return np.where(self._keys[pos] == k, pos, -1)

    def _check(self, other):
        if other.level != self.level:
            raise PreconditionError("cube sets live on different levels")

    def union(self, other):
        self._check(other)
        return CubeSet._from_sorted_keys(self.level, np.union1d(self._keys, other._keys))

    def intersection(self, other):
        self._check(other)
        return CubeSet._from_sorted_keys(self.level, np.intersect1d(self._keys, other._keys))

    def difference(self, other):
        self._check(other)
        return CubeSet._from_sorted_keys(self.level, np.setdiff1d(self._keys, other._keys))

    def translate(self, vx, vy):
        return CubeSet(self.level, self._cells + np.array([vx, vy], dtype=np.int64))

    def coarsen(self, level):
        """Parents at a coarser level (half-open cover of the union)."""
        if level > self.level:
            raise PreconditionError("coarsen needs a coarser level")
        return CubeSet(level, self._cells >> (self.level - level))

    def refine(self, level):
        """All descendants at a finer level."""
        if level < self.level:
            raise PreconditionError("refine needs a finer level")
        m = 1 << (level - self.level)
        off = np.stack(np.meshgrid(np.arange(m), np.arange(m), indexing="ij"), -1).reshape(-1, 2)
        cells = (self._cells[:, None, :] * m + off[None]).reshape(-1, 2)
        return CubeSet(level, cells)

    def lower_left(self):
        return self._cells * self.side

    def centers(self):
        return (self._cells + 0.5) * self.side

    def to_text(self):
        lines = [f"level={self.level}"]
        lines.extend(f"{ix} {iy}" for ix, iy in self._cells.tolist())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln for ln in text.splitlines() if ln.strip()]
        if not rows or not rows[0].startswith("level="):
            raise DomainError("missing 'level=<k>' header")
        level = int(rows[0].split("=", 1)[1])
        cells = np.array([[int(v) for v in ln.split()] for ln in rows[1:]], dtype=np.int64).reshape(-1, 2)
        return cls(level, cells)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def _interval_cells(intervals, delta):
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    a = np.floor(iv[:, 0] / delta).astype(np.int64)
    b = np.ceil(iv[:, 1] / delta).astype(np.int64) - 1
    b = np.maximum(a, b)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    return a, b


def interval_cover_cells(intervals, delta):
    """Sorted indices j of the cells [j d, (j+1) d) meeting a union of intervals.

    Intervals are read as half-open [a, b) (open intervals give the same cells);
    a degenerate interval [a, a] covers the cell holding a.
    """
    dyadic_level(delta)
    a, b = _interval_cells(intervals, delta)
    if a.size == 0:
        return np.zeros(0, dtype=np.int64)
    total = int((b - a + 1).sum())
    check_budget(total, what="interval cover")
    lens = b - a + 1
    starts = np.repeat(a - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    return np.unique(starts + np.arange(total))


def covering_number(obj, delta, kind="points"):
    """|obj|_delta: number of half-open dyadic delta-cubes meeting ``obj``.

    ``obj`` may be a :class:`CubeSet` (at any level), an (n, 2) array of points,
    or with ``kind="intervals"`` an (n, 2) array of 1-D intervals [a, b).
    """
    k = dyadic_level(delta)
    if isinstance(obj, CubeSet):
        if obj.level >= k:
            return len(obj.coarsen(k))
        return len(obj) * 4 ** (k - obj.level)
    if kind == "intervals":
        a, b = _interval_cells(obj, delta)
        if a.size == 0:
            return 0
        # merge sorted integer ranges
        run_end = np.maximum.accumulate(b)
        new = np.ones(a.size, dtype=bool)
        new[1:] = a[1:] > run_end[:-1]
        starts = a[new]
        ends = np.maximum.reduceat(b, np.flatnonzero(new))
        return int((ends - starts + 1).sum())
    if kind == "points":
        pts = np.asarray(obj, dtype=float).reshape(-1, 2)
        return len(CubeSet.from_points(pts, k))
    raise DomainError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# tubes


def _tube_cells(spec, level, q, branch):
    h = 2.0**-level
    delta = h
    T = delta + tol_geo(delta)
    lo, hi = branch_domain(spec, branch)
    qx, qy = q
    c0 = math.floor((qx + lo - T) / h)
    c1 = math.floor((qx + hi + T) / h)
    cols = np.arange(c0, c1 + 1, dtype=np.int64)
    # psi range over the u-window each column can reach
    ul = cols * h - qx - T
    uh = (cols + 1) * h - qx + T
    ulc = np.maximum(ul, lo)
    uhc = np.minimum(uh, hi)
    ok = ulc <= uhc
    uhc = np.where(ok, uhc, ulc)
    gmin = spec.func(np.clip(spec.vertex, ulc, uhc))[0]
    gmax = np.maximum(spec.func(ulc)[0], spec.func(uhc)[0])
    r0 = np.floor((qy + gmin - T) / h).astype(np.int64) - 1
    r1 = np.floor((qy + gmax + T) / h).astype(np.int64) + 1
    cols, r0, r1 = cols[ok], r0[ok], r1[ok]
    lens = r1 - r0 + 1
    total = int(lens.sum())
    check_budget(total, what="tube candidate scan")
    cx = np.repeat(cols, lens)
    cy = np.repeat(r0 - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens) + np.arange(total)
    boxes = np.stack([cx * h - qx, (cx + 1) * h - qx, cy * h - qy, (cy + 1) * h - qy], axis=1)
    hit = tube_box_hits_exact(spec, lo, hi, boxes, T)
    return np.stack([cx[hit], cy[hit]], axis=1)


@lru_cache(maxsize=64)
def _template(record_json, level, branch):
    import json
    spec = curve_from_record(json.loads(record_json))
    h = 2.0**-level
    cells = _tube_cells(spec, level, (0.5 * h, 0.5 * h), branch)
    cells.setflags(write=False)
    return cells


def _cacheable(spec):
    return spec.kind in ("builtin", "polynomial")


def tube_cells(spec, level, q, branch="full"):
    """(n, 2) indices of level cubes meeting the tube of width 2**-level around ``q``."""
    h = 2.0**-level
    fx = q[0] / h - 0.5
    fy = q[1] / h - 0.5
    if _cacheable(spec) and fx == math.floor(fx) and fy == math.floor(fy):
        tpl = _template(spec.to_json(), level, branch)
        return tpl + np.array([int(fx), int(fy)], dtype=np.int64)
    return _tube_cells(spec, level, (float(q[0]), float(q[1])), branch)


def cubes_on_tube(tube: CurvedTube, delta, window=None) -> CubeSet:
    """All level-k cubes meeting the tube, k = log2(1/delta).

    Candidates are generated column by column from the range of psi over the
    abscissae a column can reach, then decided exactly.  ``window`` = (x0, x1,
    y0, y1) keeps only cubes whose half-open cells lie inside that rectangle.
    """
    k = dyadic_level(delta)
    if tube.delta != delta:
        raise PreconditionError("tube width must equal delta")
    cells = tube_cells(tube.spec, k, tube.q, tube.branch)
    if window is not None:
        h = 2.0**-k
        x0, x1, y0, y1 = window
        m = ((cells[:, 0] * h >= x0) & ((cells[:, 0] + 1) * h <= x1)
             & (cells[:, 1] * h >= y0) & ((cells[:, 1] + 1) * h <= y1))
        cells = cells[m]
    return CubeSet(k, cells)


# ---------------------------------------------------------------------------
# sumsets


def _bits_from_rows(rows):
    v = 0
    for r in rows:
        v |= 1 << int(r)
    return v


def _set_bit_positions(x):
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def _columns(cells):
    """Group cells by column: dict ix -> bitset of (iy - ymin)."""
    cols = {}
    if cells.shape[0] == 0:
        return cols, 0
    ymin = int(cells[:, 1].min())
    order = np.lexsort((cells[:, 1], cells[:, 0]))
    cells = cells[order]
    ix = cells[:, 0]
    cut = np.flatnonzero(np.diff(ix)) + 1
    for grp in np.split(cells, cut):
        cols[int(grp[0, 0])] = _bits_from_rows(grp[:, 1] - ymin)
    return cols, ymin


def sumset_cells(E_cells, F_cells, budget=None):
    """Unique cells of {e + f}, as an (n, 2) int64 array.

    Columns are handled as Python integer bitsets: the sum of two columns is
    an OR of shifted copies of one bitset, one per row of the other.
    """
    E_cells = np.asarray(E_cells, dtype=np.int64).reshape(-1, 2)
    F_cells = np.asarray(F_cells, dtype=np.int64).reshape(-1, 2)
    check_budget(E_cells.shape[0] * F_cells.shape[0], budget, what="Minkowski sum")
    if E_cells.shape[0] == 0 or F_cells.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    ecol, eymin = _columns(E_cells)
    fcol, fymin = _columns(F_cells)
    cache = {}
    out = {}
    for ex, eb in ecol.items():
        for fx, fb in fcol.items():
            key = (eb, fb) if eb <= fb else (fb, eb)
            s = cache.get(key)
            if s is None:
                small, big = (eb, fb) if eb.bit_count() <= fb.bit_count() else (fb, eb)
                s = 0
                for r in _set_bit_positions(small):
                    s |= big << r
                cache[key] = s
            c = ex + fx
            out[c] = out.get(c, 0) | s
    xs, ys = [], []
    for c, bits in out.items():
        rows = _set_bit_positions(bits)
        xs.append(np.full(len(rows), c, dtype=np.int64))
        ys.append(np.asarray(rows, dtype=np.int64))
    cells = np.stack([np.concatenate(xs), np.concatenate(ys) + eymin + fymin], axis=1)
    return cells


def minkowski_cover(E: CubeSet, F: CubeSet, delta, mode="corners", budget=None) -> int:
    """|E + F|_delta.

    ``mode="corners"`` sums the lower-left corners of the cubes and counts the
    delta-cells meeting the resulting point set, so singletons give 1.
    ``mode="cubes"`` counts the cover of the true sum of the half-open cubes,
    which adds the neighbouring cells reached by the cube extents.
    """
    k = dyadic_level(delta)
    if E.level < k or F.level < k:
        raise PreconditionError("cube sets must have resolution at least delta")
    m = max(E.level, F.level)
    Ec = E.members << (m - E.level)
    Fc = F.members << (m - F.level)
    sums = sumset_cells(Ec, Fc, budget)
    if mode == "corners":
        return len(CubeSet(k, sums >> (m - k)))
    if mode == "cubes":
        # [c, c + ext) in fine units per axis, ext = sum of the two sides
        ext = (1 << (m - E.level)) + (1 << (m - F.level))
        H = 1 << (m - k)
        first = sums >> (m - k)
        last = -((-(sums + ext)) // H) - 1
        span = int((last - first).max()) + 1
        cells = []
        for dx in range(span):
            for dy in range(span):
                d = np.array([dx, dy])
                ok = np.all(first + d <= last, axis=1)
                cells.append((first + d)[ok])
        return len(CubeSet(k, np.concatenate(cells)))
    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# ball queries


class CubeIndex:
    """Uniform-grid index over a CubeSet (the grid is the cube level itself)."""

    def __init__(self, cubes: CubeSet):
        self.cubes = cubes
        self.level = cubes.level

    def ball_query(self, center, r) -> CubeSet:
        h = 2.0**-self.level
        cx, cy = (float(v) for v in center)
        if len(self.cubes) == 0:
            return CubeSet(self.level)
        i0, i1 = math.floor((cx - r) / h) - 1, math.floor((cx + r) / h) + 1
        j0, j1 = math.floor((cy - r) / h) - 1, math.floor((cy + r) / h) + 1
        area = (i1 - i0 + 1) * (j1 - j0 + 1)
        if area <= len(self.cubes):
            g = np.stack(np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij"), -1).reshape(-1, 2)
            cand = g[self.cubes.contains_many(g)]
        else:
            cand = self.cubes.members
        dx = np.maximum(np.maximum(cand[:, 0] * h - cx, cx - (cand[:, 0] + 1) * h), 0.0)
        dy = np.maximum(np.maximum(cand[:, 1] * h - cy, cy - (cand[:, 1] + 1) * h), 0.0)
        keep = dx * dx + dy * dy <= r * r
        return CubeSet(self.level, cand[keep])


def ball_query(index, center, r) -> CubeSet:
    if isinstance(index, CubeSet):
        index = CubeIndex(index)
    return index.ball_query(center, r)


def grid_cells(level, lo=0, hi=None):
    """All cells of [lo, hi)^2 in level units (default the unit square)."""
    n = 1 << level
    hi = n if hi is None else hi
    r = np.arange(lo, hi, dtype=np.int64)
    return np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)


def brute_force_tube_cubes(tube: CurvedTube, delta, margin=2):
    """Reference filter of every cube in the tube's bounding region, using the certified predicate."""
    from .curve import tube_cubes_intersect_many
    k = dyadic_level(delta)
    h = 2.0**-k
    lo, hi = tube.domain
    qx, qy = tube.q
    xs = np.arange(math.floor((qx + lo) / h) - margin, math.floor((qx + hi) / h) + margin + 1)
    g = tube.spec.func(np.linspace(lo, hi, 257))[0]
    ys = np.arange(math.floor((qy + g.min()) / h) - margin - 1, math.floor((qy + g.max()) / h) + margin + 2)
    cells = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
    check_budget(cells.shape[0] * 64, what="brute-force tube scan")
    hit = tube_cubes_intersect_many(tube, k, cells)
    return CubeSet(k, cells[hit])
