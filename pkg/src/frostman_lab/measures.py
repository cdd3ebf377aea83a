"""Discrete measures on the dyadic grid: Frostman and Katz-Tao constants,
Riesz energies on both sides of the Fourier transform, mollified L2 norms,
and the exponent tables."""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import integrate, ndimage, special

from ._common import DomainError, PreconditionError, ResolutionError, check_budget, dyadic_level
from .dyadic import CubeSet, decode, encode

MASS_TOL = 1e-12


class DeltaMeasure:
    """Non-negative weights on level-k dyadic cubes with total mass <= 1.

    Duplicate cells are merged and zero weights dropped; storage is sorted by
    cell like :class:`CubeSet`.
    """

    __slots__ = ("level", "cells", "weights", "mass")

    def __init__(self, level, cells, weights):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != cells.shape[0]:
            raise DomainError("cells and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and non-negative")
        keys, inv = np.unique(encode(cells), return_inverse=True)
        merged = np.bincount(inv.ravel(), weights=w, minlength=keys.size)
        keep = merged > 0
        self.level = int(level)
        self.cells = decode(keys[keep])
        self.weights = merged[keep]
        self.mass = float(self.weights.sum())
        if self.mass > 1.0 + MASS_TOL:
            raise DomainError(f"total mass {self.mass!r} exceeds 1; use normalize_mass")
        self.cells.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return self.cells.shape[0]

    def __repr__(self):
        return f"DeltaMeasure(level={self.level}, n={len(self)}, mass={self.mass:.6g})"

    @property
    def delta(self):
        return 2.0**-self.level

    @property
    def support(self):
        return CubeSet(self.level, self.cells)

    def centers(self):
        return (self.cells + 0.5) * self.delta

    @classmethod
    def from_dense(cls, level, arr, origin=(0, 0)):
        arr = np.asarray(arr, dtype=float)
        ix, iy = np.nonzero(arr)
        cells = np.stack([ix + origin[0], iy + origin[1]], axis=1)
        return cls(level, cells, arr[ix, iy])

    def to_dense(self, pad=0):
        """Dense weight array over the bounding box; returns (array, origin)."""
        if len(self) == 0:
            return np.zeros((1, 1)), (0, 0)
        lo = self.cells.min(axis=0)
        hi = self.cells.max(axis=0)
        shape = tuple(int(v) + pad for v in hi - lo + 1)
        arr = np.zeros(shape)
        arr[self.cells[:, 0] - lo[0], self.cells[:, 1] - lo[1]] = self.weights
        return arr, (int(lo[0]), int(lo[1]))

    def scaled(self, factor):
        return DeltaMeasure(self.level, self.cells, self.weights * factor)

    def coarsen(self, level):
        if level > self.level:
            raise PreconditionError("coarsen needs a coarser level")
        return DeltaMeasure(level, self.cells >> (self.level - level), self.weights)

    def to_text(self):
        lines = [f"level={self.level} mass={self.mass!r}"]
        lines.extend(f"{ix} {iy} {w!r}" for (ix, iy), w in zip(self.cells.tolist(), self.weights.tolist()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln for ln in text.splitlines() if ln.strip()]
        head = dict(part.split("=", 1) for part in rows[0].split()) if rows else {}
        if "level" not in head:
            raise DomainError("missing 'level=<k> mass=<m>' header")
        data = [ln.split() for ln in rows[1:]]
        cells = np.array([[int(a), int(b)] for a, b, _ in data], dtype=np.int64).reshape(-1, 2)
        w = np.array([float(c) for _, _, c in data])
        return cls(int(head["level"]), cells, w)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def normalize_mass(level, cells, weights, mass=1.0):
    """DeltaMeasure proportional to ``weights`` with the given total mass."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DomainError("cannot normalize a zero measure")
    return DeltaMeasure(level, cells, w * (mass / total))


def uniform_measure(level):
    n = 1 << level
    r = np.arange(n)
    cells = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
    return DeltaMeasure(level, cells, np.full(n * n, 1.0 / (n * n)))


class WeightedCubeSet:
    """A CubeSet with a positive integer weight on each member."""

    __slots__ = ("base", "w")

    def __init__(self, base: CubeSet, w=None):
        self.base = base
        if w is None:
            w = np.ones(len(base), dtype=np.int64)
        w = np.asarray(w)
        if w.shape != (len(base),):
            raise DomainError("one weight per member required")
        if np.any(w != np.round(w)) or np.any(w < 1):
            raise DomainError("weights must be integers >= 1")
        self.w = w.astype(np.int64)
        self.w.setflags(write=False)

    @property
    def level(self):
        return self.base.level

    def __len__(self):
        return len(self.base)

    def total(self):
        return int(self.w.sum())


# ---------------------------------------------------------------------------
# dyadic scans


def _window_max(level, cells, weights, norm):
    """max over levels j <= level and level-j cells Q of weight(Q) / norm(j)."""
    best = 0.0
    cells = np.asarray(cells, dtype=np.int64)
    for j in range(level, -1, -1):
        if cells.shape[0] == 0:
            break
        keys, inv = np.unique(encode(cells >> (level - j)), return_inverse=True)
        sums = np.bincount(inv.ravel(), weights=weights)
        best = max(best, float(sums.max()) / norm(j))
    return best


def window_profile(level, cells, weights):
    """List of (j, max weight in a level-j cube) for j = 0..level."""
    out = []
    for j in range(level + 1):
        keys, inv = np.unique(encode(np.asarray(cells) >> (level - j)), return_inverse=True)
        out.append((j, float(np.bincount(inv.ravel(), weights=weights).max())))
    return out


def frostman_constant(mu: DeltaMeasure, u):
    """Least C with mu(Q) <= C r^u for dyadic cubes Q of side r in [delta, 1].

    Windows are dyadic cubes; a ball of radius r meets at most 9 of them, so
    the ball version is within a factor 9.
    """
    if not 0 <= u <= 2:
        raise DomainError("u must lie in [0, 2]")
    if len(mu) == 0:
        return 0.0
    return _window_max(mu.level, mu.cells, mu.weights, lambda j: 2.0 ** (-j * u))


def katz_tao_constant(P, s):
    """Least C with sum_{q in P, q in Q} w(q) <= C (r/delta)^s over dyadic windows Q."""
    if not 0 <= s <= 2:
        raise DomainError("s must lie in [0, 2]")
    if isinstance(P, WeightedCubeSet):
        cells, w, k = P.base.members, P.w.astype(float), P.level
    else:
        cells, w, k = P.members, np.ones(len(P)), P.level
    if cells.shape[0] == 0:
        return 0.0
    return _window_max(k, cells, w, lambda j: 2.0 ** ((k - j) * s))


# ---------------------------------------------------------------------------
# Riesz energies


def _check_omega(omega):
    if not 0 < omega < 2:
        raise DomainError("omega must lie in (0, 2)")


def riesz_constant(omega):
    """c(omega, 2) with I_omega(mu) = c * int |mu^(xi)|^2 |xi|^(omega-2) d xi."""
    return math.pi ** (omega - 1.0) * math.gamma(1.0 - omega / 2.0) / math.gamma(omega / 2.0)


def gaussian_energy(sigma, omega):
    """I_omega of the centred isotropic Gaussian density with standard deviation sigma."""
    return (4.0 * sigma**2) ** (-omega / 2.0) * math.gamma(1.0 - omega / 2.0)


def _direct_energy(xy, w, omega, chunk=1024):
    total = 0.0
    n = xy.shape[0]
    for i in range(0, n, chunk):
        a = xy[i:i + chunk]
        d = np.hypot(a[:, None, 0] - xy[None, :, 0], a[:, None, 1] - xy[None, :, 1])
        with np.errstate(divide="ignore"):
            k = np.where(d > 0, d ** (-omega), 0.0)
        total += float(w[i:i + chunk] @ (k @ w))
    return total


def _fft_energy(mu, omega):
    arr, _ = mu.to_dense()
    nx, ny = arr.shape
    fx = sfft.next_fast_len(2 * nx - 1, real=True)
    fy = sfft.next_fast_len(2 * ny - 1, real=True)
    ox = np.fft.fftfreq(fx, 1.0 / fx)
    oy = np.fft.fftfreq(fy, 1.0 / fy)
    r = np.hypot(ox[:, None], oy[None, :]) * mu.delta
    with np.errstate(divide="ignore"):
        K = np.where(r > 0, r ** (-omega), 0.0)
    conv = sfft.irfft2(sfft.rfft2(arr, (fx, fy)) * sfft.rfft2(K), (fx, fy))[:nx, :ny]
    return float(np.sum(arr * conv))


def riesz_energy_spatial(mu: DeltaMeasure, omega, offset=1.0, budget=None, method="auto"):
    """offset + sum_{p != q} mu(p) mu(q) |c_p - c_q|^-omega over cube midpoints.

    Small supports use a chunked direct double sum; larger ones an exact
    FFT convolution with the same kernel on the bounding box.
    """
    _check_omega(omega)
    n = len(mu)
    if n < 2:
        return float(offset)
    if method == "auto":
        arr_cells = np.prod(mu.cells.max(axis=0) - mu.cells.min(axis=0) + 1)
        method = "direct" if n * n <= 4 * arr_cells * max(1, math.log2(arr_cells)) or n <= 2048 else "fft"
    if method == "direct":
        check_budget(n * n, budget, what="energy double sum")
        return offset + _direct_energy(mu.centers(), mu.weights, omega)
    ext = mu.cells.max(axis=0) - mu.cells.min(axis=0) + 1
    size = 4 * int(ext[0]) * int(ext[1])
    check_budget(size * max(1, int(math.log2(size))) * 10, budget, what="energy FFT")
    return offset + _fft_energy(mu, omega)


def _dirichlet_beta(z, terms=64):
    """Dirichlet beta for z > 0 via the Cohen-Villegas-Zagier alternating-series acceleration."""
    if z <= 0:
        # functional equation beta(1 - s) = (2/pi)^s sin(pi s / 2) Gamma(s) beta(s)
        s = 1.0 - z
        return (2.0 / math.pi) ** s * math.sin(math.pi * s / 2.0) * math.gamma(s) * _dirichlet_beta(s, terms)
    n = terms
    d = (3.0 + math.sqrt(8.0)) ** n
    d = (d + 1.0 / d) / 2.0
    b, c, s = -1.0, -d, 0.0
    for k in range(n):
        c = b - c
        s += c * (2 * k + 1.0) ** (-z)
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d


def lattice_zeta(s):
    """sum over nonzero j in Z^2 of |j|^-s, analytically continued in s."""
    z = s / 2.0
    return 4.0 * float(special.zeta(z)) * _dirichlet_beta(z)


@lru_cache(maxsize=16)
def _box_self_energy(omega):
    """int int over two copies of the unit square of |x - y|^-omega."""
    f = lambda v, u: (1 - u) * (1 - v) * (u * u + v * v) ** (-omega / 2.0)
    # split along the diagonal, polar-friendly halves
    val, _ = integrate.dblquad(f, 0, 1, 0, lambda u: u, epsabs=1e-11, epsrel=1e-10)
    return 8.0 * val


@lru_cache(maxsize=16)
def _periodic_weight_table(omega, n=65, m0=32):
    """Sum over m != 0 of sinc^2(u1+m1) sinc^2(u2+m2) |u+m|^(omega-2) on [0, 1/2]^2."""
    alpha = omega - 2.0
    u = np.linspace(0.0, 0.5, n)
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    out = np.zeros_like(U1)
    ms = np.arange(-m0, m0 + 1)
    s1 = np.sinc(U1[..., None] + ms) ** 2
    s2 = np.sinc(U2[..., None] + ms) ** 2
    for a in ms:
        x = U1 + a
        r2 = x[..., None] ** 2 + (U2[..., None] + ms) ** 2
        with np.errstate(divide="ignore"):
            term = s1[..., a + m0, None] * s2 * np.where(r2 > 0, r2, np.inf) ** (alpha / 2.0)
        if a == 0:
            term[..., m0] = 0.0
        out += term.sum(axis=-1)
    # rows beyond the box along each axis: |u + m|^alpha ~ |u_i + m_i|^alpha
    def tail(ui):
        return special.zeta(2.0 - alpha, m0 + 1 + ui) + special.zeta(2.0 - alpha, m0 + 1 - ui)
    sin1 = np.sin(np.pi * U1) ** 2 / np.pi**2
    sin2 = np.sin(np.pi * U2) ** 2 / np.pi**2
    out += sin1 * tail(U1) * s2.sum(axis=-1)
    out += sin2 * tail(U2) * s1.sum(axis=-1)
    return out


def _periodic_weight(omega, U1, U2):
    tab = _periodic_weight_table(omega)
    n = tab.shape[0]
    scale = (n - 1) / 0.5
    coords = np.stack([np.abs(U1) * scale, np.abs(U2) * scale])
    return ndimage.map_coordinates(tab, coords, order=3, mode="mirror")


def _fourier_quadrature(P, omega, N, var_sum, mass):
    """Corrected trapezoid rule for int over the torus of |M|^2 W on an N-grid.

    ``P`` holds |M(j/N)|^2 for the rfft half-grid.  The punctured sum at the
    singular point is completed with the lattice-zeta terms of order
    h^(2+alpha) and h^(4+alpha).
    """
    alpha = omega - 2.0
    h = 1.0 / N
    f1 = np.fft.fftfreq(N)
    f2 = np.fft.rfftfreq(N)
    U1, U2 = np.meshgrid(f1, f2, indexing="ij")
    r = np.hypot(U1, U2)
    with np.errstate(divide="ignore"):
        W0 = np.where(r > 0, np.sinc(U1) ** 2 * np.sinc(U2) ** 2 * r**alpha, 0.0)
    W = W0 + _periodic_weight(omega, U1, U2)
    colw = np.full(f2.size, 2.0)
    colw[0] = 1.0
    if N % 2 == 0:
        colw[-1] = 1.0
    total = h * h * float(np.sum(P * W * colw[None, :]))
    phi0 = mass * mass
    # Laplacian of |M|^2 sinc^2 sinc^2 at the origin
    lap = -8.0 * math.pi**2 * var_sum - 4.0 * math.pi**2 / 3.0 * phi0
    total -= h ** (2.0 + alpha) * lattice_zeta(-alpha) * phi0
    total -= h ** (4.0 + alpha) * lattice_zeta(-alpha - 2.0) * lap / 4.0
    return total


def riesz_energy_fourier(mu: DeltaMeasure, omega, pad=4, min_grid=256, rtol=0.05, return_parts=False):
    """Fourier-side counterpart of :func:`riesz_energy_spatial`.

    Each weight is spread uniformly over its cube, the Fourier energy of that
    box measure is integrated with the classical constant c(omega, 2), and the
    exact self-energies of the boxes are replaced by the unit offset.  The
    integral is computed twice (full grid and even-index subgrid); a relative
    gap above ``rtol`` raises ResolutionError.
    """
    _check_omega(omega)
    if mu.level > 12:
        raise PreconditionError("grid level must be <= 12")
    if len(mu) == 0:
        return 1.0
    arr, origin = mu.to_dense()
    L = max(arr.shape)
    N = max(min_grid, 1 << int(math.ceil(math.log2(pad * L))))
    check_budget(N * N * 40, what="Fourier energy grid")
    P = np.abs(sfft.rfft2(arr, (N, N))) ** 2
    idx = np.stack(np.nonzero(arr), 1).astype(float)
    w = arr[arr > 0]
    mass = float(w.sum())
    mean = (w[:, None] * idx).sum(0) / mass
    var_sum = float((w * ((idx - mean) ** 2).sum(1)).sum()) * mass
    full = _fourier_quadrature(P, omega, N, var_sum, mass)
    half = _fourier_quadrature(P[::2, ::2], omega, N // 2, var_sum, mass)
    dk = mu.delta ** (-omega)
    c = riesz_constant(omega)
    self_e = _box_self_energy(omega) * float(np.sum(w * w))
    e_full = 1.0 + dk * (c * full - self_e)
    e_half = 1.0 + dk * (c * half - self_e)
    if abs(e_full - e_half) > rtol * abs(e_full):
        raise ResolutionError(f"Fourier energy not resolved: {e_full:.6g} vs {e_half:.6g} at half resolution")
    if return_parts:
        return e_full, {"grid": N, "half": e_half, "box_energy": dk * c * full, "self": dk * self_e}
    return e_full


# ---------------------------------------------------------------------------
# mollified L2


@lru_cache(maxsize=1)
def _bump_constant():
    val, _ = integrate.quad(lambda r: 2 * math.pi * r * math.exp(-1.0 / (1.0 - r * r)), 0, 1)
    return 1.0 / val


def bump(x, y):
    """The mollifier eta: normalized exp(-1/(1-|x|^2)) on the unit disc."""
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(r2 < 1, np.exp(-1.0 / np.where(r2 < 1, 1.0 - r2, 1.0)), 0.0)
    return _bump_constant() * out


@lru_cache(maxsize=1)
def bump_overlaps(n=1201):
    """H(d) = int eta(x) eta(x - d) dx for integer offsets d with |d| < 2: (H(0), H(1), H(sqrt 2))."""
    g = np.linspace(-1, 1, n)
    h = g[1] - g[0]
    X, Y = np.meshgrid(g, g, indexing="ij")
    e = bump(X, Y)
    out = []
    for dx, dy in [(0, 0), (1, 0), (1, 1)]:
        out.append(float(np.sum(e * bump(X - dx, Y - dy))) * h * h)
    return tuple(out)


def bump_l2_squared():
    return bump_overlaps()[0]


def convolve_measures(mu: DeltaMeasure, sigma: DeltaMeasure, budget=None):
    """Weights of mu * sigma on the grid (index sums), as (cells, weights)."""
    if mu.level != sigma.level:
        raise PreconditionError("measures on different levels")
    n1, n2 = len(mu), len(sigma)
    if n1 == 0 or n2 == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    if n1 * n2 <= min(5 * 10**7, 4 * 10**7 if budget is None else budget):
        check_budget(n1 * n2, budget, what="sparse convolution")
        out_c, out_w = [], []
        step = max(1, 2_000_000 // max(n2, 1))
        acc_keys, acc_w = [], []
        for i in range(0, n1, step):
            c = (mu.cells[i:i + step, None, :] + sigma.cells[None, :, :]).reshape(-1, 2)
            w = (mu.weights[i:i + step, None] * sigma.weights[None, :]).ravel()
            k, inv = np.unique(encode(c), return_inverse=True)
            acc_keys.append(k)
            acc_w.append(np.bincount(inv.ravel(), weights=w))
        keys = np.concatenate(acc_keys)
        ws = np.concatenate(acc_w)
        k, inv = np.unique(keys, return_inverse=True)
        return decode(k), np.bincount(inv.ravel(), weights=ws)
    a1, o1 = mu.to_dense()
    a2, o2 = sigma.to_dense()
    shape = (a1.shape[0] + a2.shape[0] - 1, a1.shape[1] + a2.shape[1] - 1)
    check_budget(4 * shape[0] * shape[1] * 30, budget, what="FFT convolution")
    from scipy.signal import fftconvolve
    conv = fftconvolve(a1, a2)
    conv[conv < 1e-300] = 0.0
    ix, iy = np.nonzero(conv)
    cells = np.stack([ix + o1[0] + o2[0], iy + o1[1] + o2[1]], 1)
    return cells, conv[ix, iy]


def mollified_l2(mu: DeltaMeasure, sigma: DeltaMeasure, delta=None, budget=None):
    """|| mu * sigma * eta_delta ||_2^2 with point masses at cube midpoints.

    Equals delta^-2 sum_d A(d) H(d) where A is the autocorrelation of the
    convolved weights and H the overlap of two unit bumps at integer offset
    d; H vanishes for |d| >= 2, so only nine offsets contribute.
    """
    if delta is None:
        delta = mu.delta
    k = dyadic_level(delta)
    if mu.level != k or sigma.level != k:
        raise PreconditionError("both measures must live at the level of delta")
    cells, w = convolve_measures(mu, sigma, budget)
    if w.size == 0:
        return 0.0
    H0, H1, H2 = bump_overlaps()
    order = np.argsort(encode(cells))
    cells, w = cells[order], w[order]
    keys = encode(cells)
    total = H0 * float(w @ w)
    for (dx, dy), H in [((1, 0), H1), ((0, 1), H1), ((1, 1), H2), ((1, -1), H2)]:
        tgt = encode(cells + np.array([dx, dy]))
        pos = np.minimum(np.searchsorted(keys, tgt), keys.size - 1)
        hit = keys[pos] == tgt
        total += 2.0 * H * float(np.sum(w[hit] * w[pos[hit]]))
    return total / delta**2


# ---------------------------------------------------------------------------
# exponent tables


def _check_st(s, t, t_closed=False):
    if not 0 <= s <= 1:
        raise DomainError("s must lie in [0, 1]")
    if t_closed:
        if not 0 <= t <= 2:
            raise DomainError("t must lie in [0, 2]")
    elif not 0 < t < 2:
        raise DomainError("t must lie in (0, 2)")


def zeta(s, t):
    """Exponent of the mollified L2 estimate; s + t for t <= s, else 2s + t - 1 for t <= 2 - s."""
    _check_st(s, t)
    if 0 < s and t <= s:
        return s + t
    if t <= 2 - s:
        return 2 * s + t - 1
    raise DomainError("no case of the exponent table covers t > max(s, 2 - s)")


def gamma(s, t):
    """Exponent of the Katz-Tao incidence estimate; s for t <= s, else 1 for t <= 2 - s."""
    _check_st(s, t, t_closed=True)
    if t <= s:
        return s
    if t <= 2 - s:
        return 1.0
    raise DomainError("no case of the exponent table covers t > max(s, 2 - s)")


def f_known(s, t):
    """Known value of the sumset-energy exponent, or None on the unresolved region."""
    _check_st(s, t)
    if 0 < s and t <= s:
        return s + t
    if s >= 0.5 and 2 - s <= t <= s + 1:
        return s + 1
    if s <= 0.5 and 3 * s <= t <= s + 1:
        return t
    if s < 1 and t >= s + 1:
        return t
    return None


def conjecture_value(s, t):
    _check_st(s, t)
    return (3 * s + t) / 2.0
