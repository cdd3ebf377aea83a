"""Incidences between dyadic cubes and curved tubes, bound checkers, and
pocket regularization of concentrated cube families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ._common import DomainError, PreconditionError, check_budget, tol_geo
from .curve import CurvedTube, CurveSpec, _local_distance, branch_domain, parabola, tube_box_hits_certified
from .dyadic import CubeSet, cubes_on_tube, encode, tube_cells
from .measures import (DeltaMeasure, WeightedCubeSet, gamma, katz_tao_constant,
                       riesz_energy_spatial)

C_ACCEPT = 100.0
CSV_HEADER = "s,t,delta,A,B,sizeP,sizeF,measured,envelope,ratio,verdict"


@dataclass(frozen=True, eq=False)
class TubeFamily:
    """Tubes of width 2**-level centred at the midpoints of the cubes in P."""

    P: CubeSet
    spec: CurveSpec = field(default_factory=parabola)
    w1: np.ndarray | None = None
    branch: str = "full"

    def __post_init__(self):
        w = np.ones(len(self.P), dtype=np.int64) if self.w1 is None else np.asarray(self.w1)
        if w.shape != (len(self.P),) or np.any(w < 1) or np.any(w != np.round(w)):
            raise DomainError("w1 must hold one integer weight >= 1 per parameter cube")
        w = w.astype(np.int64)
        w.setflags(write=False)
        object.__setattr__(self, "w1", w)

    @property
    def level(self):
        return self.P.level

    @property
    def delta(self):
        return 2.0**-self.P.level

    def __len__(self):
        return len(self.P)

    def centers(self):
        return self.P.centers()

    def tube(self, i) -> CurvedTube:
        c = self.P.centers()[i]
        return CurvedTube((float(c[0]), float(c[1])), self.delta, self.spec, self.branch)

    def cells(self, i):
        return tube_cells(self.spec, self.level, tuple(self.P.centers()[i]), self.branch)

    def with_branch(self, branch):
        return TubeFamily(self.P, self.spec, self.w1, branch)


@dataclass
class BoundReport:
    measured: float
    envelope: float
    params: dict
    c_accept: float = C_ACCEPT
    kind: str = "main"
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self):
        if self.envelope == 0:
            return 0.0 if self.measured == 0 else math.inf
        return self.measured / self.envelope

    @property
    def verdict(self):
        return "pass" if self.ratio <= self.c_accept else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"

    def csv_row(self):
        p = self.params
        vals = [p.get("s"), p.get("t"), p.get("delta"), p.get("A"), p.get("B"),
                p.get("sizeP"), p.get("sizeF"), self.measured, self.envelope, self.ratio, self.verdict]
        return ",".join("" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
                        for v in vals)


# ---------------------------------------------------------------------------
# counting


def _tube_offsets(T: TubeFamily):
    """Template cells of the tube at cube (0, 0) plus the integer shift of every tube."""
    k = T.level
    h = 2.0**-k
    tpl = tube_cells(T.spec, k, (0.5 * h, 0.5 * h), T.branch)
    return tpl, T.P.members


def per_tube_counts(F, T: TubeFamily, budget=None):
    """For each tube, the total w2 weight of the cubes of F meeting it."""
    if isinstance(F, WeightedCubeSet):
        base, w2 = F.base, F.w.astype(np.int64)
    else:
        base, w2 = F, np.ones(len(F), dtype=np.int64)
    if base.level != T.level:
        raise PreconditionError("cubes and tubes live on different levels")
    out = np.zeros(len(T), dtype=np.int64)
    if len(T) == 0 or len(base) == 0:
        return out
    tpl, shifts = _tube_offsets(T)
    m = tpl.shape[0]
    check_budget(m * len(T), budget, what="incidence lookup")
    step = max(1, 2_000_000 // max(m, 1))
    for i in range(0, len(T), step):
        sh = shifts[i:i + step]
        cells = (sh[:, None, :] + tpl[None, :, :]).reshape(-1, 2)
        idx = base.index_of(cells).reshape(sh.shape[0], m)
        out[i:i + step] = np.where(idx >= 0, w2[np.maximum(idx, 0)], 0).sum(axis=1)
    return out


def weighted_incidences(F, T: TubeFamily, budget=None) -> int:
    """sum_q sum_p w1(q) w2(p) [p meets the tube of q]."""
    return int(np.dot(T.w1, per_tube_counts(F, T, budget)))


def tube_subfamilies(F: CubeSet, T: TubeFamily):
    """F(q) = F restricted to the cubes meeting each tube, as CubeSets."""
    tpl, shifts = _tube_offsets(T)
    out = []
    for sh in shifts:
        cells = tpl + sh
        out.append(CubeSet(F.level, cells[F.contains_many(cells)]))
    return out


def brute_force_incidences(F, T: TubeFamily, budget=None) -> int:
    """Reference double loop with the certified predicate (bounding-box pruning only)."""
    if isinstance(F, WeightedCubeSet):
        base, w2 = F.base, F.w.astype(np.int64)
    else:
        base, w2 = F, np.ones(len(F), dtype=np.int64)
    check_budget(len(T) * len(base), budget, what="brute-force incidences")
    k = T.level
    h = 2.0**-k
    lo, hi = branch_domain(T.spec, T.branch)
    g = T.spec.func(np.linspace(lo, hi, 513))[0]
    gmin, gmax = g.min() - 1e-9, g.max() + 1e-9
    thresh = h + tol_geo(h)
    total = 0
    cells = base.members
    for i, (qx, qy) in enumerate(T.centers()):
        x0 = cells[:, 0] * h - qx
        y0 = cells[:, 1] * h - qy
        near = (x0 + h >= lo - 2 * thresh) & (x0 <= hi + 2 * thresh) \
            & (y0 + h >= gmin - 2 * thresh) & (y0 <= gmax + 2 * thresh)
        idx = np.flatnonzero(near)
        if idx.size == 0:
            continue
        boxes = np.stack([x0[idx], x0[idx] + h, y0[idx], y0[idx] + h], axis=1)
        hit = tube_box_hits_certified(T.spec, lo, hi, boxes, thresh)
        total += int(T.w1[i]) * int(w2[idx[hit]].sum())
    return total


def incidence_offsets(spec: CurveSpec, level, branch="full", width=None):
    """Integer offsets o with dist(o * delta, graph) <= width (default delta, plus tolerance)."""
    h = 2.0**-level
    r = h if width is None else width
    T = r + tol_geo(h)
    lo, hi = branch_domain(spec, branch)
    c0 = math.floor((lo - T) / h) - 1
    c1 = math.ceil((hi + T) / h) + 1
    cols = np.arange(c0, c1 + 1)
    ul = np.maximum(cols * h - T, lo)
    uh = np.minimum(cols * h + T, hi)
    ok = ul <= uh
    uh = np.where(ok, uh, ul)
    gmin = spec.func(np.clip(spec.vertex, ul, uh))[0]
    gmax = np.maximum(spec.func(ul)[0], spec.func(uh)[0])
    r0 = np.floor((gmin - T) / h).astype(np.int64)
    r1 = np.ceil((gmax + T) / h).astype(np.int64)
    cols, r0, r1 = cols[ok], r0[ok], r1[ok]
    lens = r1 - r0 + 1
    total = int(lens.sum())
    ox = np.repeat(cols, lens)
    oy = np.repeat(r0 - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens) + np.arange(total)
    d = _local_distance(spec, lo, hi, ox * h, oy * h, window=T)
    keep = d <= T
    return np.stack([ox[keep], oy[keep]], axis=1)


def delta_incidences(mu: DeltaMeasure, nu: DeltaMeasure, delta=None, spec=None, branch="full", budget=None):
    """sum_{q, p} nu(q) mu(p) [midpoint(p) in the delta-tube around midpoint(q)].

    This is the midpoint quadrature of the product-measure incidence
    integral; boundary cells make its relative error O(delta * lip).
    """
    spec = parabola() if spec is None else spec
    if mu.level != nu.level:
        raise PreconditionError("measures on different levels")
    k = mu.level
    delta = 2.0**-k if delta is None else delta
    K = incidence_offsets(spec, k, branch, width=delta)
    if len(mu) == 0 or len(nu) == 0:
        return 0.0
    direct = len(nu) * K.shape[0]
    a1, o1 = mu.to_dense()
    a2, o2 = nu.to_dense()
    fft_cost = 4 * (a1.shape[0] + a2.shape[0]) * (a1.shape[1] + a2.shape[1]) * 20
    if direct <= max(fft_cost, 10**6):
        check_budget(direct, budget, what="delta incidences")
        keys = encode(mu.cells)
        total = 0.0
        step = max(1, 4_000_000 // max(K.shape[0], 1))
        for i in range(0, len(nu), step):
            q = nu.cells[i:i + step]
            cells = (q[:, None, :] + K[None, :, :]).reshape(-1, 2)
            tgt = encode(cells)
            pos = np.minimum(np.searchsorted(keys, tgt), keys.size - 1)
            hit = keys[pos] == tgt
            wmu = np.where(hit, mu.weights[pos], 0.0).reshape(q.shape[0], -1).sum(axis=1)
            total += float(nu.weights[i:i + step] @ wmu)
        return total
    check_budget(fft_cost, budget, what="delta incidences FFT")
    # C(o) = sum_q nu(q) mu(q + o) as a full cross-correlation
    C = fftconvolve(a1, a2[::-1, ::-1])
    # C index (i, j) corresponds to offset (i - (n2x - 1) + o1x - o2x, ...)
    bx = a2.shape[0] - 1 - o1[0] + o2[0]
    by = a2.shape[1] - 1 - o1[1] + o2[1]
    ix = K[:, 0] + bx
    iy = K[:, 1] + by
    ok = (ix >= 0) & (ix < C.shape[0]) & (iy >= 0) & (iy < C.shape[1])
    return float(np.sum(C[ix[ok], iy[ok]]))


# ---------------------------------------------------------------------------
# bound checkers


def _family_stats(T, F_of_q, verify):
    if len(F_of_q) != len(T):
        raise PreconditionError("need one sub-family per tube")
    if verify:
        for i, Fq in enumerate(F_of_q):
            if len(Fq) == 0:
                continue
            if Fq.level != T.level:
                raise PreconditionError("sub-family on the wrong level")
            cells = T.cells(i)
            if not CubeSet(T.level, cells).contains_many(Fq.members).all():
                raise PreconditionError(f"F(q) for tube {i} contains a cube off the tube")
    measured = sum(len(Fq) for Fq in F_of_q)
    nonempty = [Fq.members for Fq in F_of_q if len(Fq)]
    F = CubeSet(T.level, np.concatenate(nonempty)) if nonempty else CubeSet(T.level)
    return measured, F


def _constants(T, F_of_q, s, t, A, B):
    if A is None:
        A = max(1.0, katz_tao_constant(T.P, t)) if len(T) else 1.0
    if B is None:
        B = max([1.0] + [katz_tao_constant(Fq, s) for Fq in F_of_q if len(Fq)])
    return float(A), float(B)


def _report(kind, measured, envelope, s, t, delta, A, B, sizeP, sizeF, c_accept, **extra):
    params = dict(s=s, t=t, delta=delta, A=A, B=B, sizeP=sizeP, sizeF=sizeF)
    return BoundReport(float(measured), float(envelope), params, c_accept, kind, extra)


def check_bound_main(T: TubeFamily, F_of_q, s, t, A=None, B=None, c_accept=C_ACCEPT, verify=True):
    """Incidences against sqrt(delta^-1 A B |F| |P|) for s + t < 2."""
    if not s + t < 2:
        raise PreconditionError("requires s + t < 2")
    measured, F = _family_stats(T, F_of_q, verify)
    A, B = _constants(T, F_of_q, s, t, A, B)
    d = T.delta
    env = math.sqrt(A * B * len(F) * len(T) / d)
    return _report("main", measured, env, s, t, d, A, B, len(T), len(F), c_accept)


def check_bound_gamma(T: TubeFamily, F_of_q, s, t, epsilon, A=None, B=None, c_accept=C_ACCEPT, verify=True):
    """Incidences against sqrt(delta^(-gamma(s,t)-eps) A B |F| |P|)."""
    if not 0 <= epsilon < 1:
        raise DomainError("epsilon must lie in [0, 1)")
    g = gamma(s, t)
    measured, F = _family_stats(T, F_of_q, verify)
    A, B = _constants(T, F_of_q, s, t, A, B)
    d = T.delta
    env = math.sqrt(d ** (-g - epsilon) * A * B * len(F) * len(T))
    return _report("gamma", measured, env, s, t, d, A, B, len(T), len(F), c_accept, gamma=g, epsilon=epsilon)


def check_bound_easy(T: TubeFamily, F_of_q, s, t, A=None, B=None, c_accept=C_ACCEPT, verify=True):
    """Incidences against log2(1/delta) sqrt(A B delta^-s |P| |F|), for t <= s."""
    if t > s:
        raise PreconditionError("requires t <= s")
    measured, F = _family_stats(T, F_of_q, verify)
    A, B = _constants(T, F_of_q, s, t, A, B)
    d = T.delta
    env = math.log2(1.0 / d) * math.sqrt(A * B * d ** (-s) * len(T) * len(F))
    return _report("easy", measured, env, s, t, d, A, B, len(T), len(F), c_accept)


def check_bound_weighted(F: WeightedCubeSet, T: TubeFamily, s, t, A=None, B=None, c_accept=C_ACCEPT):
    """Weighted incidences against sqrt(delta^-1 A B sum w1 sum w2), for s + t < 3.

    ``s`` is the weighted Katz-Tao exponent of F, ``t`` that of the tube parameters.
    """
    if not s + t < 3:
        raise PreconditionError("requires s + t < 3")
    if A is None:
        A = max(1.0, katz_tao_constant(WeightedCubeSet(T.P, T.w1), t)) if len(T) else 1.0
    if B is None:
        B = max(1.0, katz_tao_constant(F, s)) if len(F) else 1.0
    measured = weighted_incidences(F, T)
    d = T.delta
    env = math.sqrt(A * B * float(T.w1.sum()) * float(F.w.sum()) / d)
    return _report("weighted", measured, env, s, t, d, float(A), float(B), len(T), len(F), c_accept)


def check_bound_measures(mu: DeltaMeasure, nu: DeltaMeasure, t, delta=None, spec=None, c_accept=C_ACCEPT):
    """delta-incidences against delta sqrt(I_{3-t}(mu) I_t(nu)) for t in (1, 2)."""
    if not 1 < t < 2:
        raise PreconditionError("requires t in (1, 2)")
    delta = mu.delta if delta is None else delta
    measured = delta_incidences(mu, nu, delta, spec)
    e_mu = riesz_energy_spatial(mu, 3 - t)
    e_nu = riesz_energy_spatial(nu, t)
    env = delta * math.sqrt(e_mu * e_nu)
    return _report("measures", measured, env, None, t, delta, None, None, len(nu), len(mu), c_accept,
                   energy_mu=e_mu, energy_nu=e_nu)


def check_bound_branches(T: TubeFamily, F_of_q, s, t, checker=check_bound_main, **kw):
    """Run a checker on the decreasing and increasing halves of every tube."""
    out = {}
    for br in ("decreasing", "increasing"):
        Tb = T.with_branch(br)
        subs = []
        for i, Fq in enumerate(F_of_q):
            cells = Tb.cells(i)
            subs.append(CubeSet(T.level, Fq.members[CubeSet(T.level, cells).contains_many(Fq.members)])
                        if len(Fq) else Fq)
        out[br] = checker(Tb, subs, s, t, **kw)
    return out


# ---------------------------------------------------------------------------
# parity classes


def parity_classes(F: CubeSet):
    """Split F by the parity of the upper-right vertex indices (ix + 1, iy + 1)."""
    m = F.members + 1
    out = {}
    for i in (0, 1):
        for j in (0, 1):
            sel = (m[:, 0] % 2 == i) & (m[:, 1] % 2 == j)
            out[(i, j)] = CubeSet(F.level, F.members[sel])
    return out


def largest_parity_class(F: CubeSet):
    """The largest parity class, translated so its upper-right vertices are odd multiples of delta.

    Returns (class, (i, j), shift) with ``shift`` the applied integer translation.
    """
    classes = parity_classes(F)
    key = max(sorted(classes), key=lambda k: len(classes[k]))
    shift = ((1 - key[0]) % 2, (1 - key[1]) % 2)
    return classes[key].translate(*shift), key, shift


# ---------------------------------------------------------------------------
# pockets


def cantor_columns(omega, delta, s):
    """Indices m in [1, omega/delta] with m delta within delta of the Cantor set on [0, omega].

    The Cantor set keeps two end pieces of ratio 2^(-1/s) at every stage; it
    is resolved down to the first stage whose pieces are no longer than delta.
    """
    if not 0 < s <= 1:
        raise DomainError("s must lie in (0, 1]")
    n_cells = omega / delta
    if n_cells != int(n_cells) or n_cells < 2:
        raise DomainError("need dyadic omega >= 2 delta")
    n_cells = int(n_cells)
    r = 2.0 ** (-1.0 / s)
    starts = np.array([0.0])
    length = omega
    while length > delta:
        piece = length * r
        starts = np.concatenate([starts, starts + (length - piece)])
        length = piece
    starts.sort()
    m = np.arange(1, n_cells + 1)
    x = m * delta
    pos = np.searchsorted(starts, x, side="right") - 1
    d = np.full(x.shape, np.inf)
    for cand in (pos, pos + 1):
        c = np.clip(cand, 0, starts.size - 1)
        a = starts[c]
        d = np.minimum(d, np.maximum(np.maximum(a - x, x - (a + length)), 0.0))
    return m[d <= delta * (1 + 1e-12)]


def cantor_pocket(omega, delta, s) -> CubeSet:
    """F_omega: cubes of [0, omega]^2 whose upper-right vertex (m delta, n delta) has m or n in the Cantor columns."""
    k = int(round(-math.log2(delta)))
    if 2.0**-k != delta:
        raise DomainError("delta must be dyadic")
    cols = cantor_columns(omega, delta, s)
    n = int(round(omega / delta))
    sel = np.zeros(n + 1, dtype=bool)
    sel[cols] = True
    M, N = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    keep = sel[M] | sel[N]
    return CubeSet(k, np.stack([M[keep] - 1, N[keep] - 1], axis=1))


def pocket_constants(omega, delta, s):
    """(|F_omega| / (omega/delta)^(s+1), min over d of count(m delta <= d) / (d/delta)^s)."""
    cols = cantor_columns(omega, delta, s)
    n = omega / delta
    size = len(cantor_pocket(omega, delta, s))
    ds = np.arange(1, int(n) + 1)
    counts = np.searchsorted(cols, ds, side="right")
    lower = float(np.min(counts / ds**s))
    return size / n ** (s + 1), lower


@dataclass
class PocketReport:
    regions: list
    sum_weights: int
    size_F: int
    c_P1: float
    c_P2: float
    incidences_before: int | None = None
    incidences_after: int | None = None
    c_dominance: float | None = None
    fixed_point: bool | None = None


def _heavy_regions(F: CubeSet, s, B):
    """Maximal dyadic cubes (side >= 2 delta) holding >= B (omega/delta)^(1+s) cubes of F, coarse to fine."""
    k = F.level
    accepted = []
    acc_sets = []
    for j in range(0, k):
        rel = k - j
        keys, counts = np.unique(encode(F.members >> rel), return_counts=True)
        thresh = B * (2.0**rel) ** (1 + s)
        heavy = keys[counts >= thresh]
        if heavy.size == 0:
            continue
        cells = np.stack([(heavy >> 32) - (1 << 30), (heavy & 0xFFFFFFFF) - (1 << 30)], axis=1)
        for ix, iy in sorted(map(tuple, cells.tolist())):
            covered = False
            for (jj, ax, ay) in accepted:
                if (ix >> (j - jj), iy >> (j - jj)) == (ax, ay):
                    covered = True
                    break
            if not covered:
                accepted.append((j, ix, iy))
    return accepted


def regularize_pockets(F: CubeSet, T: TubeFamily | None, s, B, check_fixed_point=False):
    """Replace over-concentrated parts of F by weighted Cantor pockets.

    Every maximal dyadic cube Q (side omega >= 2 delta) holding at least
    B (omega/delta)^(1+s) cubes of F loses those cubes and receives a copy of
    the pocket F_omega at its lower-left corner with weight B; all other
    cubes keep weight 1.  Returns the weighted family and a PocketReport with
    the measured constants of the sum-of-weights and Katz-Tao properties.
    """
    if B < 1:
        raise DomainError("B must be >= 1")
    k = F.level
    regions = _heavy_regions(F, s, B)
    inside = np.zeros(len(F), dtype=bool)
    pocket_cells = []
    for j, ix, iy in regions:
        rel = k - j
        inside |= ((F.members[:, 0] >> rel) == ix) & ((F.members[:, 1] >> rel) == iy)
        pk = cantor_pocket(2.0**-j, 2.0**-k, s)
        pocket_cells.append(pk.members + np.array([ix << rel, iy << rel]))
    keep = F.members[~inside]
    pc = np.concatenate(pocket_cells) if pocket_cells else np.zeros((0, 2), dtype=np.int64)
    cells = np.concatenate([keep, pc])
    weights = np.concatenate([np.ones(len(keep), dtype=np.int64), np.full(len(pc), int(math.ceil(B)), dtype=np.int64)])
    base = CubeSet(k, cells)
    order = base.index_of(cells)
    w = np.zeros(len(base), dtype=np.int64)
    w[order] = weights
    Fw = WeightedCubeSet(base, w)
    total = int(w.sum())
    c1 = total / max(len(F), 1)
    c2 = katz_tao_constant(Fw, s + 1) / B if len(base) else 0.0
    rep = PocketReport(regions, total, len(F), c1, c2)
    if T is not None and len(T):
        before = int(per_tube_counts(F, T).sum())
        after = int(np.dot(T.w1, per_tube_counts(Fw, T)))
        rep.incidences_before = before
        rep.incidences_after = after
        rep.c_dominance = before / after if after else (0.0 if before == 0 else math.inf)
    if check_fixed_point:
        again, _ = regularize_pockets(base, None, s, B)
        rep.fixed_point = again.base == base
    return Fw, rep
