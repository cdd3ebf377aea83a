"""Convex curves, their translates, and curved delta-tubes.

A :class:`CurveSpec` describes a C^2 function psi with psi'' > 0 on [-3, 3].
The reference curve is the graph of psi over [-1, 1]; the tube around ``q`` is
the closed delta-neighbourhood of ``q + graph``.  All geometry below is done in
coordinates local to the tube centre, ``p - q``, which keeps results for
dyadic centres bit-identical under grid translations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from ._common import DegenerateInputError, DomainError, PreconditionError, tol_geo

DOMAIN = 3.0
BRANCHES = ("full", "decreasing", "increasing")


@dataclass(frozen=True, eq=False)
class CurveSpec:
    """A strictly convex curve psi with certified bounds on [-3, 3].

    ``func`` maps an array of abscissae to the triple (psi, psi', psi'').
    """

    name: str
    func: Callable[[np.ndarray], tuple]
    kappa_min: float
    lip: float
    kind: str = "builtin"
    coefficients: tuple | None = None
    vertex: float = field(init=False)

    def __post_init__(self):
        if not self.kappa_min > 0:
            raise DomainError("kappa_min must be positive")
        object.__setattr__(self, "vertex", _argmin_on_unit(self.func))

    def __call__(self, x):
        return eval_curve(self, x)

    def value(self, x):
        return self.func(x)[0]

    def slope(self, x):
        return self.func(x)[1]

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "coefficients": list(self.coefficients) if self.coefficients is not None else None,
            "kappa_min": self.kappa_min,
            "lip": self.lip,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def _argmin_on_unit(func):
    lo, hi = -1.0, 1.0
    if func(np.array(lo))[1] >= 0:
        return lo
    if func(np.array(hi))[1] <= 0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if func(np.array(mid))[1] > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-16:
            break
    v = 0.5 * (lo + hi)
    snapped = round(v, 12)
    if func(np.array(snapped))[1] == 0:
        v = snapped + 0.0
    return v


def _parabola_func(x):
    x = np.asarray(x, dtype=float)
    return x * x, 2.0 * x, np.full_like(x, 2.0)


def _exp_func(x):
    e = np.exp(np.asarray(x, dtype=float))
    return e, e, e


def parabola() -> CurveSpec:
    return CurveSpec("parabola", _parabola_func, kappa_min=2.0, lip=2.0 * DOMAIN)


def exp_curve() -> CurveSpec:
    return CurveSpec("exp", _exp_func, kappa_min=math.exp(-DOMAIN), lip=math.exp(DOMAIN))


BUILTINS = {"parabola": parabola, "exp": exp_curve}


def _interval_horner(coeffs, a, b):
    """Enclosure of a polynomial (highest degree first) over [a, b]."""
    lo = np.full_like(a, coeffs[0])
    hi = lo.copy()
    for c in coeffs[1:]:
        prods = np.stack([lo * a, lo * b, hi * a, hi * b])
        lo = prods.min(axis=0) + c
        hi = prods.max(axis=0) + c
    return lo, hi


def polynomial_curve(coefficients: Sequence[float], name: str = "polynomial", pieces: int = 4096) -> CurveSpec:
    """Curve from polynomial coefficients, highest degree first (``numpy.polyval`` order).

    Positivity of psi'' is certified by interval Horner evaluation on ``pieces``
    subintervals of [-3, 3]; the enclosures also give kappa_min and lip.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 1 or c.size < 3:
        raise DomainError("need at least a quadratic")
    d1 = np.polyder(c)
    d2 = np.polyder(c, 2)
    edges = np.linspace(-DOMAIN, DOMAIN, pieces + 1)
    a, b = edges[:-1], edges[1:]
    k_lo, _ = _interval_horner(d2, a, b)
    if not np.all(k_lo > 0):
        raise DomainError(f"psi'' is not certified positive on [-3, 3] for {name!r}")
    s_lo, s_hi = _interval_horner(d1, a, b)
    lip = float(np.max(np.maximum(np.abs(s_lo), np.abs(s_hi))))

    def func(x):
        x = np.asarray(x, dtype=float)
        return np.polyval(c, x), np.polyval(d1, x), np.polyval(d2, x)

    return CurveSpec(name, func, kappa_min=float(k_lo.min()), lip=lip, kind="polynomial",
                     coefficients=tuple(float(v) for v in c))


def curve_from_record(rec: dict) -> CurveSpec:
    kind = rec.get("kind", "builtin")
    if kind == "builtin":
        try:
            return BUILTINS[rec["name"]]()
        except KeyError:
            raise DomainError(f"unknown builtin curve {rec.get('name')!r}") from None
    if kind == "polynomial":
        spec = polynomial_curve(rec["coefficients"], name=rec.get("name", "polynomial"))
        # recorded bounds may be tighter or looser; keep the certified ones
        return spec
    raise DomainError(f"unknown curve kind {kind!r}")


def eval_curve(spec: CurveSpec, x):
    """Return (psi(x), psi'(x), psi''(x)); raises DomainError outside [-3, 3]."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > DOMAIN) or np.any(~np.isfinite(xa)):
        raise DomainError("abscissa outside [-3, 3]")
    v, s, k = spec.func(xa)
    if xa.ndim == 0:
        return float(v), float(s), float(k)
    return v, s, k


def branch_domain(spec: CurveSpec, branch: str = "full"):
    if branch == "full":
        return -1.0, 1.0
    if branch == "decreasing":
        return -1.0, spec.vertex
    if branch == "increasing":
        return spec.vertex, 1.0
    raise DomainError(f"unknown branch {branch!r}")


@dataclass(frozen=True)
class CurvedTube:
    q: tuple
    delta: float
    spec: CurveSpec
    branch: str = "full"

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        if self.branch not in BRANCHES:
            raise DomainError(f"unknown branch {self.branch!r}")
        qx, qy = (float(v) for v in self.q)
        if max(abs(qx), abs(qy)) > 1.0 + 1e-12:
            raise DomainError("tube centre must lie in [-1, 1]^2")
        object.__setattr__(self, "q", (qx, qy))

    @property
    def domain(self):
        return branch_domain(self.spec, self.branch)


# ---------------------------------------------------------------------------
# distances


_CHUNK = 1 << 15


def _local_distance(spec, lo, hi, a, b, window=None, n_coarse=33, iters=48):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.size <= _CHUNK:
        return _local_distance_chunk(spec, lo, hi, a, b, window, n_coarse, iters)
    out = np.empty(a.size)
    for i in range(0, a.size, _CHUNK):
        out[i:i + _CHUNK] = _local_distance_chunk(spec, lo, hi, a[i:i + _CHUNK], b[i:i + _CHUNK],
                                                  window, n_coarse, iters)
    return out


def _local_distance_chunk(spec, lo, hi, a, b, window, n_coarse, iters):
    """Distance from local points (a, b) to the graph of psi over [lo, hi].

    With ``window`` the search is restricted to |u - a| <= window; the result is
    then exact whenever the true distance is <= window and exceeds window
    otherwise.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if window is None:
        L = np.full_like(a, lo)
        H = np.full_like(a, hi)
    else:
        L = np.maximum(lo, a - window)
        H = np.minimum(hi, a + window)
    empty = L > H
    H = np.where(empty, L, H)
    t = np.linspace(0.0, 1.0, n_coarse)
    U = L[:, None] + (H - L)[:, None] * t[None, :]
    g = spec.func(U)[0]
    d2 = (U - a[:, None]) ** 2 + (g - b[:, None]) ** 2
    best = d2.min(axis=1)

    # discrete local minima, two best
    left = np.concatenate([np.full((a.size, 1), np.inf), d2[:, :-1]], axis=1)
    right = np.concatenate([d2[:, 1:], np.full((a.size, 1), np.inf)], axis=1)
    cand = np.where((d2 <= left) & (d2 <= right), d2, np.inf)
    m = min(2, n_coarse)
    order = np.argsort(cand, axis=1)[:, :m]
    rows = np.arange(a.size)[:, None]
    lo_i = np.clip(order - 1, 0, n_coarse - 1)
    hi_i = np.clip(order + 1, 0, n_coarse - 1)
    l = U[rows, lo_i]
    r = U[rows, hi_i]
    aa = a[:, None]
    bb = b[:, None]

    def deriv(u):
        v, s, _ = spec.func(u)
        return (u - aa) + s * (v - bb)

    fl = deriv(l)
    fr = deriv(r)
    at_left = fl >= 0
    at_right = fr <= 0
    x0, x1 = l.copy(), r.copy()
    for _ in range(iters):
        mid = 0.5 * (x0 + x1)
        pos = deriv(mid) > 0
        x1 = np.where(pos, mid, x1)
        x0 = np.where(pos, x0, mid)
    u = np.where(at_left, l, np.where(at_right, r, 0.5 * (x0 + x1)))
    gu = spec.func(u)[0]
    d2u = (u - aa) ** 2 + (gu - bb) ** 2
    best = np.minimum(best, np.where(np.isfinite(cand[rows, order]), d2u, np.inf).min(axis=1))
    out = np.sqrt(best)
    out[empty] = np.inf
    return out


def curve_distance(spec: CurveSpec, q, p, branch: str = "full"):
    """Distance from ``p`` (one point or an (n, 2) array) to the translate ``q + graph``."""
    qx, qy = (float(v) for v in q)
    if math.hypot(qx, qy) > 1.0 + 1e-12 and max(abs(qx), abs(qy)) > 1.0 + 1e-12:
        raise DomainError("q must lie in [-1, 1]^2")
    pa = np.asarray(p, dtype=float)
    scalar = pa.ndim == 1
    pa = np.atleast_2d(pa)
    if np.any(np.abs(pa) > 4.0):
        raise DomainError("p must lie in [-4, 4]^2")
    lo, hi = branch_domain(spec, branch)
    d = _local_distance(spec, lo, hi, pa[:, 0] - qx, pa[:, 1] - qy)
    return float(d[0]) if scalar else d


# ---------------------------------------------------------------------------
# tube versus box predicates (local coordinates, boxes as (x0, x1, y0, y1))


def _psi_range(spec, lo, hi, ul, uh):
    ul = np.maximum(ul, lo)
    uh = np.minimum(uh, hi)
    ok = ul <= uh
    uh = np.where(ok, uh, ul)
    gmin = spec.func(np.clip(spec.vertex, ul, uh))[0]
    gmax = np.maximum(spec.func(ul)[0], spec.func(uh)[0])
    return ok, gmin, gmax


def _graph_meets_rect(spec, lo, hi, xa, xb, ya, yb):
    ok, gmin, gmax = _psi_range(spec, lo, hi, xa, xb)
    return ok & (gmin <= yb) & (gmax >= ya)


def tube_box_hits_exact(spec, lo, hi, boxes, thresh):
    """Closed thresh-neighbourhood of the graph versus closed boxes.

    The neighbourhood meets a box iff the graph meets the box dilated by a
    disc of radius ``thresh``, which is the union of two crossed rectangles and
    four corner discs.  Rectangles are decided from the convex range of psi,
    corner discs by a windowed distance computation.
    """
    boxes = np.atleast_2d(np.asarray(boxes, dtype=float))
    X0, X1, Y0, Y1 = boxes.T
    hit = _graph_meets_rect(spec, lo, hi, X0 - thresh, X1 + thresh, Y0, Y1)
    hit |= _graph_meets_rect(spec, lo, hi, X0, X1, Y0 - thresh, Y1 + thresh)
    rest = np.flatnonzero(~hit)
    if rest.size:
        cx = np.concatenate([X0[rest], X0[rest], X1[rest], X1[rest]])
        cy = np.concatenate([Y0[rest], Y1[rest], Y0[rest], Y1[rest]])
        # a corner disc can only be reached if the graph passes near the corner column
        near = _graph_meets_rect(spec, lo, hi, cx - thresh, cx + thresh, cy - thresh, cy + thresh)
        d = np.full(cx.shape, np.inf)
        idx = np.flatnonzero(near)
        if idx.size:
            d[idx] = _local_distance(spec, lo, hi, cx[idx], cy[idx], window=thresh * 1.001 + 1e-300)
        corner_hit = (d <= thresh).reshape(4, rest.size).any(axis=0)
        hit[rest] = corner_hit
    return hit


def _box_point_distance(px, py, boxes):
    dx = np.maximum(np.maximum(boxes[:, 0] - px, px - boxes[:, 1]), 0.0)
    dy = np.maximum(np.maximum(boxes[:, 2] - py, py - boxes[:, 3]), 0.0)
    return np.hypot(dx, dy)


def tube_box_hits_certified(spec, lo, hi, boxes, thresh, n_init=16, resolution=1e-3):
    """Independent branch-and-bound version of :func:`tube_box_hits_exact`.

    The graph is parametrised by u in [lo, hi]; on a parameter interval of
    half-width h the curve point moves by at most h * sqrt(1 + max|psi'|^2),
    so a distance sample at the midpoint gives a certified lower bound for the
    whole piece.  Pieces are halved until decided or until the certificate is
    finer than ``resolution * 1e-3 * thresh``; undecided boxes at that
    point lie inside the tolerance shell and count as hits.
    """
    boxes = np.atleast_2d(np.asarray(boxes, dtype=float))
    n = boxes.shape[0]
    step = _CHUNK // n_init
    if n > step:
        return np.concatenate([tube_box_hits_certified(spec, lo, hi, boxes[i:i + step], thresh, n_init, resolution)
                               for i in range(0, n, step)])
    hit = np.zeros(n, dtype=bool)
    if n == 0:
        return hit
    edges = np.linspace(lo, hi, n_init + 1)
    idx = np.repeat(np.arange(n), n_init)
    ua = np.tile(edges[:-1], n)
    ub = np.tile(edges[1:], n)
    minw = max(thresh * resolution * 1e-3, 1e-15)
    while idx.size:
        mid = 0.5 * (ua + ub)
        hw = 0.5 * (ub - ua)
        g = spec.func(mid)[0]
        d = _box_point_distance(mid, g, boxes[idx])
        hit[idx[d <= thresh]] = True
        speed = np.sqrt(1.0 + np.maximum(spec.func(ua)[1] ** 2, spec.func(ub)[1] ** 2))
        slack = speed * hw
        live = (d - slack <= thresh) & ~hit[idx]
        fine = live & (slack <= minw)
        if fine.any():
            hit[idx[fine]] = True
        live &= ~fine
        idx, ua, ub, mid = idx[live], ua[live], ub[live], mid[live]
        idx = np.concatenate([idx, idx])
        ua, ub = np.concatenate([ua, mid]), np.concatenate([mid, ub])
    return hit


def _cube_boxes(level, cells, q):
    h = 2.0**-level
    cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
    x0 = cells[:, 0] * h - q[0]
    y0 = cells[:, 1] * h - q[1]
    return np.stack([x0, x0 + h, y0, y0 + h], axis=1)


def tube_cube_intersects(tube: CurvedTube, cube) -> bool:
    """Does the closed dyadic ``cube`` meet the closed tube?  Conservative on a tol_geo shell."""
    if cube.level < 0:
        raise PreconditionError("cube side must be <= 1")
    return bool(tube_cubes_intersect_many(tube, cube.level, [(cube.ix, cube.iy)])[0])


def tube_cubes_intersect_many(tube: CurvedTube, level: int, cells) -> np.ndarray:
    """Vectorised :func:`tube_cube_intersects` over an (n, 2) array of cube indices."""
    lo, hi = tube.domain
    boxes = _cube_boxes(level, cells, tube.q)
    return tube_box_hits_certified(tube.spec, lo, hi, boxes, tube.delta + tol_geo(tube.delta))


def monotone_split(tube: CurvedTube):
    """Split a full tube at the minimum of psi into (decreasing, increasing) branch tubes."""
    if tube.branch != "full":
        raise PreconditionError("only full tubes can be split")
    return (CurvedTube(tube.q, tube.delta, tube.spec, "decreasing"),
            CurvedTube(tube.q, tube.delta, tube.spec, "increasing"))


# ---------------------------------------------------------------------------
# two-tube geometry


def vertical_tubes_may_meet(spec: CurveSpec, q1, q2, delta) -> bool:
    """Necessary condition for two tubes with equal first coordinates to meet.

    Any common point is within delta of both graphs, which forces
    |y1 - y2| <= (2 * lip + 2) * delta.
    """
    return abs(float(q1[1]) - float(q2[1])) <= (2.0 * spec.lip + 2.0) * delta


def _tube_slices(spec, q, xs, delta, m=129):
    """Vertical extent [low, high] of the closed delta-tube over each abscissa in ``xs``."""
    lo, hi = -1.0, 1.0
    a = xs - q[0]
    L = np.maximum(lo, a - delta)
    H = np.minimum(hi, a + delta)
    empty = L > H
    H = np.where(empty, L, H)
    t = np.linspace(0.0, 1.0, m)
    U = L[:, None] + (H - L)[:, None] * t
    r = np.sqrt(np.maximum(delta**2 - (a[:, None] - U) ** 2, 0.0))
    g = spec.func(U)[0] + q[1]
    low = (g - r).min(axis=1)
    high = (g + r).max(axis=1)
    low[empty] = np.inf
    high[empty] = -np.inf
    return low, high


def tube_intersection_diameter(spec: CurveSpec, q1, q2, delta: float, columns: int = 801) -> float:
    """Diameter of the intersection of the delta-tubes around q1 and q2 (0 if empty).

    Only abscissae where |psi_1 - psi_2| <= (2 lip + 2) delta can carry common
    points; since psi' is increasing, psi_1 - psi_2 is monotone and that set is
    one interval, found by bisection.  Over it each tube's vertical slices are
    computed exactly up to sampling and intersected.
    """
    x1, y1 = (float(v) for v in q1)
    x2, y2 = (float(v) for v in q2)
    if x1 == x2:
        raise DegenerateInputError(
            "equal first coordinates; use vertical_tubes_may_meet for this case")
    X0 = max(x1, x2) - 1.0
    X1 = min(x1, x2) + 1.0
    if X0 > X1 + 2 * delta:
        return 0.0
    bound = (2.0 * spec.lip + 2.0) * delta

    def G(x):
        x = min(max(x, X0), X1)
        return (spec.func(np.array(x - x1))[0] + y1) - (spec.func(np.array(x - x2))[0] + y2)

    if X0 <= X1:
        sgn = 1.0 if G(X1) >= G(X0) else -1.0

        def first_at_least(level):
            # smallest x in [X0, X1] with sgn*G(x) >= level (X1 if none)
            if sgn * G(X0) >= level:
                return X0
            a, b = X0, X1
            if sgn * G(b) < level:
                return None
            for _ in range(100):
                mid = 0.5 * (a + b)
                if sgn * G(mid) >= level:
                    b = mid
                else:
                    a = mid
            return b

        lo_x = first_at_least(-bound)
        if lo_x is None:
            return 0.0
        hi_x = first_at_least(bound)
        hi_x = X1 if hi_x is None else hi_x
        if sgn * G(lo_x) > bound:
            return 0.0
    else:
        lo_x, hi_x = X1, X0
    lo_x -= delta
    hi_x += delta
    xs = np.linspace(lo_x, hi_x, columns)
    l1, h1 = _tube_slices(spec, (x1, y1), xs, delta)
    l2, h2 = _tube_slices(spec, (x2, y2), xs, delta)
    low = np.maximum(l1, l2)
    high = np.minimum(h1, h2)
    keep = low <= high
    if not keep.any():
        return 0.0
    pts = np.concatenate([np.stack([xs[keep], low[keep]], 1), np.stack([xs[keep], high[keep]], 1)])
    if pts.shape[0] < 2:
        return 0.0
    return float(pdist(pts).max())
