"""Explicit extremal configurations and seeded random instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._common import DomainError, WorkBudgetExceeded, dyadic_level, loglog_slope
from .curve import CurveSpec, parabola
from .dyadic import CubeSet, decode, encode, grid_cells
from .incidence import TubeFamily
from .measures import (DeltaMeasure, frostman_constant, katz_tao_constant, normalize_mass,
                       riesz_energy_spatial)
from .spectral import CurveMeasure, pushforward_cells, pushforward_measure


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# sharpness example on the parabola


@dataclass
class SharpnessInstance:
    delta: float
    tau: float
    s: float
    t: float
    A_set: np.ndarray          # grid indices of the centres of A
    B_set: np.ndarray
    D_set: np.ndarray
    j: int
    mu: DeltaMeasure           # normalised, mu / sqrt(c1)
    sigma: DeltaMeasure        # normalised, sigma / c
    c: float
    c1: float
    diagnostics: dict = field(default_factory=dict)


def _open_cover(lo, hi):
    """Cells (in grid units) met by a union of open intervals (lo, hi); returns the count."""
    a = np.floor(lo).astype(np.int64)
    b = np.ceil(hi).astype(np.int64)
    base = a.min()
    mark = np.zeros(int(b.max() - base) + 2, dtype=np.int64)
    np.add.at(mark, a - base, 1)
    np.add.at(mark, b - base, -1)
    return int(np.count_nonzero(np.cumsum(mark) > 0))


def _lattice(step, delta, upper=1.0):
    """Grid indices of round(k step / delta), k = 1.. with k step <= upper."""
    n = int(math.floor(upper / step + 1e-12))
    return np.round(np.arange(1, n + 1) * step / delta).astype(np.int64)


def sharpness_covers(cA, cB, cD, delta):
    """Exact delta-covering numbers of A+A, psi(A)+B, A x B and A x B + G(D) for open delta-neighbourhoods.

    All sets are given by grid indices of their centres; each neighbourhood
    is the open interval of half-width delta about a centre.
    """
    out = {}
    S = np.unique(cA[:, None] + cA[None, :])
    out["A+A"] = _open_cover(S - 2.0, S + 2.0)
    SB = np.unique(cB[:, None] + cB[None, :])
    out["B+B"] = _open_cover(SB - 2.0, SB + 2.0)
    psi_lo = (cA - 1.0) ** 2 * delta
    psi_hi = (cA + 1.0) ** 2 * delta
    out["psi(A)+B"] = _open_cover((psi_lo[:, None] + cB[None, :] - 1).ravel(),
                                  (psi_hi[:, None] + cB[None, :] + 1).ravel())
    out["AxB"] = 4 * cA.size * cB.size
    # A x B + G(D): a pair (a, e) reaches the four columns S-2..S+1 of its
    # x-sum S = a + e, and in each column its y-section is an open interval
    pa, pe = np.meshgrid(cA, cD, indexing="ij")
    pa, pe = pa.ravel(), pe.ravel()
    cols, los, his = [], [], []
    for dx in (-2, -1, 0, 1):
        X = pa + pe + dx
        lo = np.maximum(pe - 1.0, X - pa - 1.0)
        hi = np.minimum(pe + 1.0, X - pa + 2.0)
        ok = hi > lo
        cols.append(X[ok])
        los.append(lo[ok])
        his.append(hi[ok])
    cols, los, his = np.concatenate(cols), np.concatenate(los), np.concatenate(his)
    total = 0
    order = np.argsort(cols, kind="stable")
    cols, los, his = cols[order], los[order], his[order]
    bounds = np.r_[0, np.nonzero(np.diff(cols))[0] + 1, cols.size]
    for i0, i1 in zip(bounds[:-1], bounds[1:]):
        ylo = los[i0:i1] ** 2 * delta
        yhi = his[i0:i1] ** 2 * delta
        total += _open_cover((ylo[:, None] + cB[None, :] - 1).ravel(),
                             (yhi[:, None] + cB[None, :] + 1).ravel())
    out["AxB+G(D)"] = total
    return out


def build_sharpness_instance(delta, tau, s, t=None, spec: CurveSpec | None = None, energy_level=9):
    """Lattice sets A, B, D and the measures mu on A(delta) x B(delta) and sigma on G(D(delta)).

    Centres are rounded to the delta-grid, so every neighbourhood is exactly
    two grid cells wide.  The Frostman constant c of sigma and the energy
    c1 = I_t(mu) are measured; I_t is evaluated after coarsening mu to
    ``energy_level`` when delta is finer.
    """
    if spec is not None and spec.name != "parabola":
        raise DomainError("the construction is for the parabola only")
    spec = parabola()
    k = dyadic_level(delta)
    if not (0 <= s <= 0.5 and 3 * s < tau <= 1.5):
        raise DomainError("need s in [0, 1/2] and tau in (3s, 3/2]")
    a = delta ** (tau / 3)
    b = delta ** (2 * tau / 3)
    if not (a < delta**s and b > 2 * delta):
        raise DomainError("delta too large for the lattice scales")
    if t is None:
        t = 0.5 * (3 * s + tau)
    if not 0 < t < tau:
        raise DomainError("t must lie in (0, tau)")
    j = max(1, int(math.floor(delta**s / a + 1e-12)))
    cA = _lattice(a, delta)
    cB = _lattice(b, delta)
    cD = _lattice(j * a, delta, upper=1.0 - delta)

    # mu: uniform on the 2 x 2 blocks around the lattice points
    off = np.array([[-1, -1], [-1, 0], [0, -1], [0, 0]])
    ctr = np.stack(np.meshgrid(cA, cB, indexing="ij"), -1).reshape(-1, 2)
    cells = (ctr[:, None, :] + off[None]).reshape(-1, 2)
    mu = normalize_mass(k, cells, np.ones(len(cells)))
    # sigma: push forward of normalised length on D(delta)
    seg = np.stack([(cD - 1) * delta, (cD + 1) * delta], 1)
    cm = pushforward_measure(spec, seg, np.full(len(cD), 1.0 / len(cD)))
    sc, sw = pushforward_cells(cm, k)
    sigma = DeltaMeasure(k, sc, sw / sw.sum())

    c = max(1.0, frostman_constant(sigma, s))
    mu_e = mu.coarsen(min(k, energy_level))
    c1 = max(1.0, riesz_energy_spatial(mu_e, t))
    covers = sharpness_covers(cA, cB, cD, delta)
    pred = {"A+A": tau / 3, "B+B": 2 * tau / 3, "psi(A)+B": 2 * tau / 3, "AxB": tau, "AxB+G(D)": tau}
    diag = {"covers": covers,
            "ratios": {key: covers[key] * delta ** pred[key] for key in pred},
            "frostman_mu_tau": frostman_constant(mu, tau),
            "frostman_sigma_s": frostman_constant(sigma, s),
            "energy_level": min(k, energy_level),
            "sizes": {"A": int(cA.size), "B": int(cB.size), "D": int(cD.size)}}
    return SharpnessInstance(delta, tau, s, t, cA, cB, cD, j, mu.scaled(1 / math.sqrt(c1)),
                             sigma.scaled(1 / c), c, c1, diag)


# name used by the operation table
build_example13 = build_sharpness_instance


def sharpness_sweep(levels, tau, s):
    """Covering numbers of the sum set over several scales and the fitted log-log slope."""
    rows = []
    for k in levels:
        inst = build_sharpness_instance(2.0**-k, tau, s, energy_level=min(k, 8))
        rows.append((2.0**-k, inst.diagnostics["covers"], inst.diagnostics["ratios"]))
    inv = np.array([1 / r[0] for r in rows])
    sums = np.array([r[1]["AxB+G(D)"] for r in rows], dtype=float)
    return rows, loglog_slope(inv, sums)


# ---------------------------------------------------------------------------
# Cantor measures on the curve


@dataclass
class CantorCurveMeasure:
    curve: CurveMeasure
    grid: DeltaMeasure
    s: float
    stage: int
    frostman: float


def cantor_segments(s, stage, base=(0.0, 1.0)):
    """Intervals of the stage-n Cantor set with two end pieces of ratio 2^(-1/s)."""
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    r = 2.0 ** (-1.0 / s)
    a, b = base
    starts = np.array([a])
    length = b - a
    for _ in range(stage):
        piece = length * r
        starts = np.concatenate([starts, starts + (length - piece)])
        length = piece
    starts.sort()
    return np.stack([starts, np.minimum(starts + length, b)], 1)


def cantor_measure_on_curve(spec: CurveSpec, s, level, base=(0.0, 1.0)):
    """Uniform self-similar Cantor measure of dimension s pushed onto the graph.

    The Cantor set is resolved to the first stage whose pieces are no longer
    than 2**-level.  The grid version is divided by its Frostman constant at
    exponent s when that constant exceeds one.
    """
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    stage = 0
    r = 2.0 ** (-1.0 / s)
    while (base[1] - base[0]) * r**stage > 2.0**-level:
        stage += 1
    seg = cantor_segments(s, stage, base)
    masses = np.full(len(seg), 2.0**-stage)
    cm = pushforward_measure(spec, seg, masses)
    cells, w = pushforward_cells(cm, level)
    grid = DeltaMeasure(level, cells, w / w.sum())
    c = frostman_constant(grid, s)
    if c > 1:
        grid = grid.scaled(1.0 / c)
        cm = pushforward_measure(spec, seg, masses / c)
    return CantorCurveMeasure(cm, grid, s, stage, c)


# ---------------------------------------------------------------------------
# Katz-Tao sets


def katz_tao_thin(cells, level, s, C, rng):
    """Random subset of the given cells satisfying the Katz-Tao (delta, s, C) window bounds.

    Cells are put in random order; for every level from fine to coarse a
    window keeps only its first floor(C (r/delta)^s) cells.  Only
    removals happen, so bounds enforced earlier stay valid.
    """
    cells = decode(np.unique(encode(np.asarray(cells, dtype=np.int64).reshape(-1, 2))))
    # visit cells in random priority order; stable sorts keep that order in each window
    cells = cells[_rng(rng).permutation(len(cells))]
    # at most C delta^-s cells survive, so a long tail of the order never matters much
    cells = cells[:max(1, int(32 * C * 2.0 ** (level * s)))]
    for j in range(level, -1, -1):
        if len(cells) == 0:
            break
        cap = int(math.floor(C * 2.0 ** ((level - j) * s) + 1e-9))
        if cap < 1:
            return cells[:0]
        if cap >= len(cells):
            continue
        g = encode(cells >> (level - j))
        order = np.argsort(g, kind="stable")
        gs = g[order]
        start = np.r_[0, np.nonzero(gs[1:] != gs[:-1])[0] + 1]
        rank = np.arange(len(gs)) - np.repeat(start, np.diff(np.r_[start, len(gs)]))
        keep = np.zeros(len(cells), dtype=bool)
        keep[order[rank < cap]] = True
        cells = cells[keep]
    return cells


def random_katz_tao(delta, t, A, seed, fill=1.0, max_cells=1 << 22):
    """Seeded Katz-Tao (delta, t, A) subset of the unit square's level cubes.

    A random fraction ``fill`` of the grid is proposed and thinned by
    :func:`katz_tao_thin`; the measured constant is verified.
    """
    k = dyadic_level(delta)
    if not 0 <= t <= 2:
        raise DomainError("t must lie in [0, 2]")
    if A < 1:
        raise WorkBudgetExceeded("no nonempty set has Katz-Tao constant below 1")
    if 4**k > max_cells:
        raise WorkBudgetExceeded("grid too large")
    rng = _rng(seed)
    cells = grid_cells(k)
    if fill < 1:
        cells = cells[rng.random(len(cells)) < fill]
    P = CubeSet(k, katz_tao_thin(cells, k, t, A, rng))
    if len(P) and katz_tao_constant(P, t) > A * (1 + 1e-12):
        raise RuntimeError("thinning failed to enforce the window bounds")
    return P


# ---------------------------------------------------------------------------
# incidence instances


@dataclass
class IncidenceInstance:
    T: TubeFamily
    F_of_q: list
    F: CubeSet
    s: float
    t: float


def random_incidence_instance(level, s, t, seed, n_tubes=16, spec=None, A=1.0, B=1.0, cluster=0.25,
                              branch="full"):
    """Tubes with Katz-Tao (delta, t, A) parameters and cubes F(q) on each tube.

    Tube centres are proposed in a random square of side ``cluster`` so that
    tubes overlap; F is a Katz-Tao (delta, s, B) thinning of the union of the
    tube cells and F(q) is its part on tube q.
    """
    spec = parabola() if spec is None else spec
    rng = _rng(seed)
    n = 1 << level
    side = max(4, int(cluster * n))
    x0, y0 = rng.integers(0, n - side + 1, size=2)
    prop = np.stack([rng.integers(0, side, 8 * n_tubes) + x0, rng.integers(0, side, 8 * n_tubes) + y0], 1)
    pc = katz_tao_thin(prop, level, t, A, rng)
    pc = pc[rng.permutation(len(pc))[:n_tubes]]
    T = TubeFamily(CubeSet(level, pc), spec, branch=branch)
    tube = [T.cells(i) for i in range(len(T))]
    allc = np.concatenate(tube) if tube else np.zeros((0, 2), dtype=np.int64)
    F = CubeSet(level, katz_tao_thin(allc, level, s, B, rng))
    F_of_q = [F.intersection(CubeSet(level, c)) for c in tube]
    return IncidenceInstance(T, F_of_q, F, s, t)


def clustered_instance(level, s, B, seed, n_clusters=3, background=200, n_tubes=16, spec=None):
    """Cube family with a few completely filled dyadic blocks over a sparse background.

    The filled blocks exceed B (omega/delta)^(1+s) cubes and so must be
    replaced by pockets; tubes are centred near the blocks.
    """
    spec = parabola() if spec is None else spec
    rng = _rng(seed)
    n = 1 << level
    parts = [rng.integers(0, n, size=(background, 2))]
    anchors = []
    for _ in range(n_clusters):
        rel = int(rng.integers(2, max(3, level - 1)))
        w = 1 << rel
        ax, ay = rng.integers(0, n // w, size=2) * w
        g = np.stack(np.meshgrid(np.arange(w), np.arange(w), indexing="ij"), -1).reshape(-1, 2)
        parts.append(g + [ax, ay])
        anchors.append((ax + w // 2, ay + w // 2))
    F = CubeSet(level, np.concatenate(parts))
    an = np.array(anchors)
    pick = an[rng.integers(0, len(an), n_tubes)] + rng.integers(-n // 16 - 1, n // 16 + 1, size=(n_tubes, 2))
    P = CubeSet(level, np.clip(pick, 0, n - 1))
    return F, TubeFamily(P, spec)


# ---------------------------------------------------------------------------
# random grid measures


def random_grid_measure(level, seed, n_blobs=4, region=(0.25, 0.75)):
    """Unit-mass sum of random Gaussian blobs on the level grid of the given square region."""
    rng = _rng(seed)
    n = 1 << level
    lo, hi = int(region[0] * n), int(region[1] * n)
    idx = np.arange(lo, hi)
    X, Y = np.meshgrid((idx + 0.5) / n, (idx + 0.5) / n, indexing="ij")
    dens = np.zeros_like(X)
    for _ in range(n_blobs):
        c = rng.uniform(region[0], region[1], 2)
        w = rng.uniform(0.02, 0.15)
        dens += rng.uniform(0.5, 1.5) * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / (2 * w * w))
    cells = np.stack([np.repeat(idx, idx.size), np.tile(idx, idx.size)], 1)
    return normalize_mass(level, cells, dens.ravel())
