"""Fourier-side tools: transforms of curve and grid measures, decay and L6
profiles, the curve-averaging operator and homogeneous Sobolev norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import integrate
from scipy.signal import fftconvolve

from ._common import DomainError, PreconditionError, ResolutionError, check_budget, work_budget
from .curve import CurveSpec, branch_domain
from .measures import DeltaMeasure

XI_MAX = 2.0**16
NODES_PER_PERIOD = 20
_GL = {}


class FrequencyTooHigh(ResolutionError):
    """The quadrature would need more nodes than the budget allows."""


def _gauss(n):
    if n not in _GL:
        _GL[n] = np.polynomial.legendre.leggauss(n)
    return _GL[n]


# ---------------------------------------------------------------------------
# measures on the curve


@dataclass(frozen=True, eq=False)
class CurveMeasure:
    """A finite measure on the graph of psi over [-1, 1].

    ``kind="arclength"`` is one-dimensional Hausdorff measure on the graph.
    ``kind="pushforward"`` pushes a 1-D measure with uniform density on each
    of the intervals ``segments[i]`` (mass ``masses[i]``) forward under
    x -> (x, psi(x)).
    """

    spec: CurveSpec
    kind: str = "arclength"
    segments: np.ndarray | None = None
    masses: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "arclength":
            return
        if self.kind != "pushforward":
            raise DomainError(f"unknown curve measure kind {self.kind!r}")
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 2)
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if seg.shape[0] != m.shape[0] or np.any(m < 0) or np.any(seg[:, 1] < seg[:, 0]):
            raise DomainError("bad segments or masses")
        if np.any(seg < -1) or np.any(seg > 1):
            raise DomainError("segments must lie in [-1, 1]")
        seg.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "masses", m)

    @property
    def mass(self):
        if self.kind == "arclength":
            return arclength(self.spec)
        return float(self.masses.sum())

    def _pieces(self):
        if self.kind == "arclength":
            return np.array([[-1.0, 1.0]]), None
        return self.segments, self.masses

    def nodes(self, xi_max):
        """Quadrature nodes and weights resolving frequencies up to ``xi_max``."""
        seg, masses = self._pieces()
        slope = np.abs(self.spec.func(np.array([-1.0, 1.0]))[1]).max()
        speed = math.sqrt(1.0 + slope**2)
        length = seg[:, 1] - seg[:, 0]
        periods = length * max(xi_max, 1.0) * speed
        panels = np.maximum(1, np.ceil(periods)).astype(np.int64)
        per = np.where(periods >= 1, NODES_PER_PERIOD,
                       np.maximum(4, np.ceil(NODES_PER_PERIOD * periods))).astype(np.int64)
        if self.kind == "arclength":
            panels = np.maximum(panels, 8)
            per[:] = NODES_PER_PERIOD
        xs, ws = [], []
        for (p, g) in sorted(set(zip(panels.tolist(), per.tolist()))):
            sel = (panels == p) & (per == g)
            t, tw = _gauss(g)
            a = seg[sel, 0][:, None]
            h = (length[sel] / p)[:, None]
            left = a + h * np.arange(p)[None, :]
            x = (left[:, :, None] + 0.5 * h[:, :, None] * (t + 1.0)).reshape(sel.sum(), -1)
            w = (0.5 * h[:, :, None] * tw * np.ones((1, p, 1))).reshape(sel.sum(), -1)
            if self.kind == "arclength":
                w = w * np.sqrt(1.0 + self.spec.func(x)[1] ** 2)
            else:
                dens = np.where(length[sel] > 0, masses[sel] / np.where(length[sel] > 0, length[sel], 1.0), 0.0)
                w = w * dens[:, None]
            xs.append(x.ravel())
            ws.append(w.ravel())
        # degenerate segments are atoms
        if self.kind == "pushforward" and np.any(length == 0):
            z = length == 0
            xs.append(seg[z, 0])
            ws.append(masses[z])
        x = np.concatenate(xs)
        return x, np.concatenate(ws)

    def discretize(self, level):
        """Exact masses of the level cubes (half-open) as (cells, weights)."""
        return pushforward_cells(self, level)


def arclength(spec, a=-1.0, b=1.0):
    val, _ = integrate.quad(lambda x: math.sqrt(1.0 + float(spec.func(np.array(x))[1]) ** 2), a, b,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def arclength_measure(spec):
    return CurveMeasure(spec, "arclength")


def pushforward_measure(spec, segments, masses):
    return CurveMeasure(spec, "pushforward", segments, masses)


def _invert_monotone(spec, lo, hi, targets, increasing, iters=60):
    a = np.full(targets.shape, lo)
    b = np.full(targets.shape, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        above = spec.func(mid)[0] > targets
        if increasing:
            b = np.where(above, mid, b)
            a = np.where(above, a, mid)
        else:
            a = np.where(above, mid, a)
            b = np.where(above, b, mid)
    return 0.5 * (a + b)


def pushforward_cells(m: CurveMeasure, level):
    """Mass of each half-open level cube under the curve measure.

    Every piece of the parametrisation is cut where x or psi(x) crosses a
    grid line; between cuts the curve stays in one cube, so masses are exact
    up to the quadrature of the density.
    """
    h = 2.0**-level
    spec = m.spec
    v = spec.vertex
    seg, masses = m._pieces()
    cells, weights = [], []
    check_budget(int(((seg[:, 1] - seg[:, 0]).sum() / h + seg.shape[0]) * 8), what="pushforward")
    for i, (a, b) in enumerate(seg):
        if b == a:
            y = float(spec.func(np.array(a))[0])
            cells.append(np.array([[math.floor(a / h), math.floor(y / h)]]))
            weights.append(np.array([masses[i]]))
            continue
        cuts = [a, b]
        if a < v < b:
            cuts.append(v)
        cuts.extend((np.arange(math.floor(a / h) + 1, math.ceil(b / h)) * h).tolist())
        for lo, hi in ((a, min(b, v)), (max(a, v), b)):
            if hi <= lo:
                continue
            ylo, yhi = spec.func(np.array([lo, hi]))[0]
            inc = yhi >= ylo
            y0, y1 = min(ylo, yhi), max(ylo, yhi)
            lines = np.arange(math.floor(y0 / h) + 1, math.ceil(y1 / h)) * h
            if lines.size:
                cuts.extend(_invert_monotone(spec, lo, hi, lines, inc).tolist())
        cuts = np.unique(np.asarray(cuts))
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        if m.kind == "arclength":
            t, tw = _gauss(8)
            left, right = cuts[:-1, None], cuts[1:, None]
            x = left + 0.5 * (right - left) * (t + 1)
            w = (0.5 * (right - left) * tw * np.sqrt(1 + spec.func(x)[1] ** 2)).sum(axis=1)
        else:
            w = np.diff(cuts) * masses[i] / (b - a)
        ix = np.floor(mids / h).astype(np.int64)
        iy = np.floor(spec.func(mids)[0] / h).astype(np.int64)
        cells.append(np.stack([ix, iy], 1))
        weights.append(w)
    cells = np.concatenate(cells)
    weights = np.concatenate(weights)
    from .dyadic import decode, encode
    keys, inv = np.unique(encode(cells), return_inverse=True)
    return decode(keys), np.bincount(inv.ravel(), weights=weights)


def delta_measure_of(m: CurveMeasure, level, normalize=True):
    """Level-cube discretization; rescaled to unit mass unless ``normalize`` is False."""
    cells, w = pushforward_cells(m, level)
    if normalize:
        w = w / w.sum()
    return DeltaMeasure(level, cells, w)


# ---------------------------------------------------------------------------
# transforms


def _as_xi(xi):
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[-1] != 2:
        raise DomainError("frequencies must be 2-vectors")
    if np.any(np.hypot(xi[:, 0], xi[:, 1]) > XI_MAX):
        raise DomainError("|xi| must not exceed 2**16")
    return xi, single


def _sum_exp(px, py, w, xi, chunk=4_000_000):
    out = np.empty(xi.shape[0], dtype=complex)
    step = max(1, chunk // max(px.size, 1))
    for i in range(0, xi.shape[0], step):
        z = xi[i:i + step]
        ph = np.outer(z[:, 0], px) + np.outer(z[:, 1], py)
        out[i:i + step] = np.exp(-2j * np.pi * ph) @ w
    return out


def fourier_at(m, xi, budget=None):
    """hat m(xi) = int exp(-2 pi i w . xi) dm(w) at one frequency or an (n, 2) array of them.

    Curve measures use composite Gauss-Legendre panels with at least 20
    nodes per oscillation; a DeltaMeasure is summed exactly over cube
    midpoints, which approximates the underlying continuous measure to
    O(delta |xi|).
    """
    xi, single = _as_xi(xi)
    if isinstance(m, DeltaMeasure):
        c = m.centers()
        check_budget(len(m) * xi.shape[0], budget, what="Fourier sum")
        out = _sum_exp(c[:, 0], c[:, 1], m.weights.astype(complex), xi)
    elif isinstance(m, CurveMeasure):
        xmax = float(np.hypot(xi[:, 0], xi[:, 1]).max())
        x, w = m.nodes(xmax)
        work = x.size * xi.shape[0]
        if work > work_budget(budget):
            raise FrequencyTooHigh(f"needs {work:.3g} node evaluations")
        out = _sum_exp(x, m.spec.func(x)[0], w.astype(complex), xi)
    else:
        raise DomainError("unsupported measure type")
    return complex(out[0]) if single else out


def decay_profile(m: CurveMeasure, R_list, n_dir=720):
    """[(R, sup_{|xi|=R} |hat m(xi)|, that sup times R^(1/2))] over n_dir directions.

    |hat m| is even for real measures, so half of the directions are evaluated.
    """
    if n_dir < 720:
        raise DomainError("at least 720 directions")
    out = []
    half = n_dir // 2
    th = np.pi * np.arange(half) / half
    for R in R_list:
        if R < 1:
            raise DomainError("R >= 1 required")
        xi = R * np.stack([np.cos(th), np.sin(th)], 1)
        v = float(np.abs(fourier_at(m, xi)).max())
        out.append((float(R), v, v * math.sqrt(R)))
    return out


# ---------------------------------------------------------------------------
# L6 norms


def _disc_weights(coords1, coords2, R, h, sub=8):
    """Area fraction of each frequency cell [xi - h/2, xi + h/2]^2 inside the closed ball B(R)."""
    r = np.hypot(coords1[:, None], coords2[None, :])
    out = (r <= R).astype(float)
    rim = np.abs(r - R) <= h * 0.7072
    if rim.any():
        ia, ib = np.nonzero(rim)
        s = (np.arange(sub) + 0.5) / sub - 0.5
        sx = coords1[ia][:, None, None] + h * s[None, :, None]
        sy = coords2[ib][:, None, None] + h * s[None, None, :]
        out[ia, ib] = (np.hypot(sx, sy) <= R).mean(axis=(1, 2))
    return out


def _frequency_grid(px, py, R, spacing=None):
    ext = max(px.max() - px.min(), py.max() - py.min(), 1e-9)
    h = min(0.25, 1.0 / (4.0 * ext)) if spacing is None else spacing
    M = int(math.ceil(R / h)) + 1
    f1 = h * np.arange(-M, M + 1)
    f2 = h * np.arange(0, M + 1)
    return f1, f2, h


def _separable_transform(px, py, w, f1, f2):
    E1 = np.exp(-2j * np.pi * np.outer(f1, px)) * w[None, :]
    E2 = np.exp(-2j * np.pi * np.outer(py, f2))
    return E1 @ E2


def _ball_integrals(G, f1, f2, h, R_list):
    row = np.full(f2.size, 2.0)
    row[0] = 1.0
    out = []
    for R in R_list:
        if R <= 0:
            out.append(0.0)
            continue
        W = _disc_weights(f1, f2, R, h)
        out.append(float(h * h * np.sum(G * W * row[None, :])))
    return out


def l6_profile(sigma, R_list, delta=None, level=None, budget=None):
    """[(R, ||hat sigma||_{L6(B(R))}^6)] for a measure discretized at the given level.

    The discretized sigma is a finite sum of atoms, so the transform of its
    triple self-convolution is exactly hat(sigma)^3; that transform is
    evaluated on a Cartesian frequency grid by a separable matrix product and
    |.|^2 is integrated over each ball with exact-area rim weights.  The grid
    spacing 1/(4 * diameter) keeps aliases of the triple convolution out of
    the integral.
    """
    if level is None and isinstance(sigma, DeltaMeasure):
        level = sigma.level
    if level is None:
        if delta is None:
            raise DomainError("need delta or level")
        level = int(round(-math.log2(delta)))
    delta = 2.0**-level
    R_list = [float(R) for R in R_list]
    if max(R_list) > 1.0 / (4.0 * delta):
        raise ResolutionError("R exceeds 1/(4 delta)")
    if isinstance(sigma, DeltaMeasure):
        c, w = sigma.centers(), sigma.weights
    else:
        cells, w = pushforward_cells(sigma, level)
        c = (cells + 0.5) * delta
    f1, f2, h = _frequency_grid(c[:, 0], c[:, 1], max(R_list))
    check_budget(f1.size * f2.size * c.shape[0], budget, what="L6 transform")
    F = _separable_transform(c[:, 0], c[:, 1], w.astype(complex), f1, f2)
    G = np.abs(F) ** 6
    return list(zip(R_list, _ball_integrals(G, f1, f2, h, R_list)))


def triple_convolution(mu: DeltaMeasure):
    """Grid weights of mu * mu * mu as (positions, weights); positions are exact sums of midpoints."""
    arr, origin = mu.to_dense()
    a2 = fftconvolve(arr, arr)
    a3 = fftconvolve(a2, arr)
    a3[np.abs(a3) < 1e-300] = 0.0
    ix, iy = np.nonzero(a3 > 0)
    d = mu.delta
    px = (ix + 3 * origin[0] + 1.5) * d
    py = (iy + 3 * origin[1] + 1.5) * d
    return np.stack([px, py], 1), a3[ix, iy]


def l6_crosscheck(mu: DeltaMeasure, R, n_theta=None):
    """Compare ||(mu*mu*mu)^||^2 over B(R) (explicit grid convolution) with a polar quadrature of |hat mu|^6.

    Returns (via_convolution, direct_polar, relative_gap).
    """
    pos, w3 = triple_convolution(mu)
    f1, f2, h = _frequency_grid(pos[:, 0], pos[:, 1], R, spacing=None)
    F3 = _separable_transform(pos[:, 0], pos[:, 1], w3.astype(complex), f1, f2)
    via = _ball_integrals(np.abs(F3) ** 2, f1, f2, h, [R])[0]
    c = mu.centers()
    ext = max(np.ptp(c[:, 0]), np.ptp(c[:, 1]), 1e-9)
    # radial Gauss panels and a uniform angle rule; |hat mu| is even so half the circle suffices
    panels = max(4, int(math.ceil(R * ext * 3)))
    t, tw = _gauss(16)
    edges = np.linspace(0, R, panels + 1)
    r = (edges[:-1, None] + 0.5 * np.diff(edges)[:, None] * (t + 1)).ravel()
    wr = (0.5 * np.diff(edges)[:, None] * tw).ravel() * r
    nt = n_theta or max(256, int(math.ceil(2 * np.pi * R * ext * 3)))
    th = np.pi * np.arange(nt) / nt
    xi = np.stack([np.outer(r, np.cos(th)).ravel(), np.outer(r, np.sin(th)).ravel()], 1)
    vals = np.abs(_sum_exp(c[:, 0], c[:, 1], mu.weights.astype(complex), xi)) ** 6
    direct = float(2.0 * (np.pi / nt) * np.sum(vals.reshape(r.size, nt).sum(axis=1) * wr))
    return via, direct, abs(via - direct) / abs(direct)


# ---------------------------------------------------------------------------
# grid fields, the averaging operator and Sobolev norms


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a function on the n x n grid of [-L/2, L/2)^2."""

    n: int
    extent: float
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise DomainError("n must be a power of two")
        v = np.asarray(self.values)
        if v.shape != (self.n, self.n):
            raise DomainError("values must be n x n")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self):
        return self.extent / self.n

    def coords(self):
        return -0.5 * self.extent + self.h * np.arange(self.n)

    def frequencies(self):
        return np.fft.fftfreq(self.n, d=self.h)

    def hat(self):
        """Continuous-normalised transform samples h^2 * DFT (phase of the offset origin dropped)."""
        return self.h**2 * sfft.fft2(self.values)

    def l2(self):
        return float(math.sqrt(np.sum(np.abs(self.values) ** 2) * self.h**2))

    def __add__(self, other):
        return GridField(self.n, self.extent, self.values + other.values)


@lru_cache(maxsize=16)
def _cell_power_integral(alpha):
    """int over [-1/2, 1/2]^2 of |u|^alpha."""
    f = lambda th: (0.5 / math.cos(th)) ** (alpha + 2.0)
    val, _ = integrate.quad(f, 0, math.pi / 4)
    return 8.0 * val / (alpha + 2.0)


def zero_cell_term(fhat, extent, s):
    """Exact contribution of the zero-frequency cell, |fhat(0)|^2 times the integral of |xi|^(2s) over it.

    The norm quadrature leaves this cell out; this is the size of what it drops.
    """
    d = 1.0 / extent
    return float(abs(fhat[0, 0]) ** 2) * d ** (2 + 2 * s) * _cell_power_integral(2.0 * s)


def sobolev_norm_hat(fhat, freqs, extent, s, zero_cell="exclude"):
    """Homogeneous H^s norm from transform samples on the frequency lattice of spacing 1/extent.

    The zero-frequency cell is left out by default (``zero_cell="exclude"``);
    ``"exact"`` adds its exact integral from :func:`zero_cell_term`.
    """
    if not -1 < s <= 1:
        raise DomainError("s must lie in (-1, 1]")
    d = 1.0 / extent
    r2 = freqs[:, None] ** 2 + freqs[None, :] ** 2
    p = np.abs(fhat) ** 2
    with np.errstate(divide="ignore"):
        wgt = np.where(r2 > 0, r2 ** s, 0.0)
    total = d * d * float(np.sum(p * wgt))
    if zero_cell == "exact":
        total += zero_cell_term(fhat, extent, s)
    elif zero_cell != "exclude":
        raise DomainError("zero_cell must be 'exclude' or 'exact'")
    return math.sqrt(total)


def sobolev_norm(f: GridField, s, zero_cell="exclude"):
    return sobolev_norm_hat(f.hat(), f.frequencies(), f.extent, s, zero_cell)


def _cic_window(n):
    k = np.fft.fftfreq(n)
    w = np.sinc(k) ** 2
    return w[:, None] * w[None, :]


@lru_cache(maxsize=8)
def _curve_kernel_hat(spec_json, n, extent, variant):
    from .curve import curve_from_record
    import json
    spec = curve_from_record(json.loads(spec_json))
    return _curve_kernel_hat_spec(spec, n, extent, variant)


def _curve_kernel_hat_spec(spec, n, extent, variant):
    """DFT of the arclength measure deposited on grid offsets, with the deposit window divided out."""
    h = extent / n
    m = CurveMeasure(spec, "arclength")
    x, w = m.nodes(4.0 / h)
    y = spec.func(x)[0]
    if variant == "R-tilde":
        x, y = -x, -y
    elif variant != "R":
        raise DomainError("variant must be 'R' or 'R-tilde'")
    fx, fy = x / h, y / h
    i0, j0 = np.floor(fx).astype(np.int64), np.floor(fy).astype(np.int64)
    tx, ty = fx - i0, fy - j0
    M = np.zeros((n, n))
    for di, wx in ((0, 1 - tx), (1, tx)):
        for dj, wy in ((0, 1 - ty), (1, ty)):
            np.add.at(M, ((i0 + di) % n, (j0 + dj) % n), w * wx * wy)
    return sfft.fft2(M) / _cic_window(n)


def curve_kernel_hat(spec, n, extent, variant="R"):
    if spec.kind in ("builtin", "polynomial"):
        return _curve_kernel_hat(spec.to_json(), n, float(extent), variant)
    return _curve_kernel_hat_spec(spec, n, extent, variant)


def _support_box(f: GridField, tol=1e-12):
    v = np.abs(f.values)
    big = v > tol * max(v.max(), 1e-300)
    if not big.any():
        return None
    x = f.coords()
    ix = np.nonzero(big.any(axis=1))[0]
    iy = np.nonzero(big.any(axis=0))[0]
    return x[ix[0]], x[ix[-1]] + f.h, x[iy[0]], x[iy[-1]] + f.h


def _check_quarter(f: GridField, tol=1e-12):
    box = _support_box(f, tol)
    q = f.extent / 4.0
    if box is not None and (box[0] < -q or box[1] > q or box[2] < -q or box[3] > q):
        raise PreconditionError("f must be supported in the central quarter of the grid")
    return box


def r_operator(f: GridField, spec: CurveSpec, variant="R") -> GridField:
    """Convolution of f with arclength on the graph (``"R"``) or on its reflection (``"R-tilde"``).

    f must vanish outside [-L/4, L/4]^2 and the support of the output must
    fit in the grid, so the circular convolution does not wrap around.
    """
    box = _check_quarter(f)
    ys = spec.func(np.linspace(-1, 1, 2001))[0]
    cx, cy = (-1.0, 1.0), (float(ys.min()), float(ys.max()))
    if variant == "R-tilde":
        cx, cy = (-cx[1], -cx[0]), (-cy[1], -cy[0])
    half = f.extent / 2.0
    if box is not None and (box[0] + cx[0] < -half or box[1] + cx[1] > half
                            or box[2] + cy[0] < -half or box[3] + cy[1] > half):
        raise PreconditionError("grid extent too small for the curve")
    K = curve_kernel_hat(spec, f.n, f.extent, variant)
    out = sfft.ifft2(sfft.fft2(f.values) * K)
    if np.isrealobj(f.values):
        out = out.real
    return GridField(f.n, f.extent, out)


def smooth_bump(r2):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1, np.exp(-1.0 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)


def random_bandlimited_field(n, extent, K, seed, radius=None):
    """Real random field with frequencies |xi| <= K, times a smooth bump of the given radius.

    The random coefficients live on the lattice (1/extent) Z^2 and depend only
    on ``seed``, so the same field is sampled on every grid size.
    """
    radius = extent / 4.0 if radius is None else radius
    rng = np.random.default_rng(seed)
    kmax = int(math.floor(K * extent))
    ks = np.arange(-kmax, kmax + 1)
    KX, KY = np.meshgrid(ks, ks, indexing="ij")
    inside = KX**2 + KY**2 <= kmax**2
    coef = rng.standard_normal(inside.sum()) + 1j * rng.standard_normal(inside.sum())
    if 2 * kmax + 1 > n:
        raise ResolutionError("grid too coarse for the band")
    spec = np.zeros((n, n), dtype=complex)
    spec[KX[inside] % n, KY[inside] % n] = coef
    field = sfft.ifft2(spec).real * n * n / math.sqrt(coef.size)
    x = -0.5 * extent + (extent / n) * np.arange(n)
    r2 = (x[:, None] ** 2 + x[None, :] ** 2) / radius**2
    return GridField(n, extent, field * smooth_bump(r2))


@dataclass
class SobolevReport:
    s: float
    n: int
    variant: str
    ratios: np.ndarray
    zero_cell: np.ndarray | None = None  # dropped zero-cell mass relative to ||f||^2

    @property
    def max_ratio(self):
        return float(self.ratios.max())


def sobolev_ratio_suite(spec, s_list=(-0.5, 0.0, 0.5), trials=50, grids=(512, 1024, 2048), extent=8.0,
                        band=8.0, seed=0, variants=("R-tilde", "R")):
    """Ratios ||R f||_{H^(s+1/2)} / ||f||_{H^s} over random band-limited fields.

    Returns (reports, drift) where drift[(variant, s)] is the relative spread
    max/min - 1 of the per-grid maximal ratios.
    """
    for s in s_list:
        if not -0.5 <= s <= 0.5:
            raise DomainError("s must lie in [-1/2, 1/2]")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    reports = []
    for n in grids:
        freqs = np.fft.fftfreq(n, d=extent / n)
        kernels = {v: curve_kernel_hat(spec, n, extent, v) for v in variants}
        acc = {(v, s): [] for v in variants for s in s_list}
        trunc = {s: [] for s in s_list}
        for ss in seeds:
            f = random_bandlimited_field(n, extent, band, ss)
            _check_quarter(f)
            fh = f.hat()
            for s in s_list:
                den = sobolev_norm_hat(fh, freqs, extent, s)
                trunc[s].append(zero_cell_term(fh, extent, s) / den**2)
            for v in variants:
                gh = fh * kernels[v]
                for s in s_list:
                    num = sobolev_norm_hat(gh, freqs, extent, s + 0.5)
                    den = sobolev_norm_hat(fh, freqs, extent, s)
                    acc[(v, s)].append(num / den)
        for (v, s), r in acc.items():
            reports.append(SobolevReport(s, n, v, np.asarray(r), np.asarray(trunc[s])))
    drift = {}
    for v in variants:
        for s in s_list:
            mx = [r.max_ratio for r in reports if r.variant == v and r.s == s]
            drift[(v, s)] = max(mx) / min(mx) - 1.0
    return reports, drift
