"""Dirichlet spectral data of the disk and the heat-kernel covariance machinery.

The eigenfunctions of -Laplace on the unit disk with zero boundary data are
J_|n|(j_{|n|,k} r) e^{i n theta} / (sqrt(pi) J_{|n|+1}(j_{|n|,k})), with
eigenvalue j_{|n|,k}^2.  A SpectralCache holds the zero/normalization table
once and all evaluations vectorize over points or point pairs.

Time integrals of the heat kernel are assembled from three pieces:
  * the plane kernel integral in closed form (exponential integrals),
  * the termwise-integrated eigen-series for times above a split point s*,
  * an analytic bound on the boundary-remainder integral below s*, which is
    dropped and reported as part of the error estimate.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import special

from .disk import DomainError, require_in_disk

CACHE_FORMAT_VERSION = 1

#: include eigen-modes with a*j^2 <= TAIL_EXP + 2 log(1 + 1/a); the dropped
#: tail is then < ~1e-14 relative.
TAIL_EXP = 36.0

#: direct eigen-series evaluations of the heat kernel refuse below this time.
T_FLOOR = 1e-3


class CacheMissError(RuntimeError):
    """A request needs modes beyond the warmed table."""


def _zero_lower_bound(n: int, k: int) -> float:
    return n * n + (k - 0.25) ** 2 * math.pi**2


@dataclass(frozen=True)
class SpectralCache:
    """Immutable table of Bessel zeros j_{n,k} and eigenfunction norms."""

    j_max: float
    order: np.ndarray  # |n| per mode, int
    index: np.ndarray  # k per mode, int
    zero: np.ndarray   # j_{|n|,k}
    norm: np.ndarray   # 1 / (sqrt(pi) J_{|n|+1}(j_{|n|,k}))

    @property
    def n_modes(self) -> int:
        return self.zero.size

    def required_jmax(self, a: float) -> float:
        """Largest frequency needed for series work at lower time endpoint a."""
        return math.sqrt((TAIL_EXP + 2.0 * math.log1p(1.0 / a)) / a)

    def mode_slice(self, a: float) -> slice:
        """Modes needed for a termwise time-integral starting at a (zeros sorted)."""
        need = self.required_jmax(a)
        if need > self.j_max:
            raise CacheMissError(
                f"series at time {a:g} needs zeros up to j={need:.1f}; "
                f"cache holds j<={self.j_max:g} -- warm a larger cache"
            )
        hi = int(np.searchsorted(self.zero, need, side="right"))
        return slice(0, hi)


def warm_cache(j_max: float = 300.0) -> SpectralCache:
    """Compute all zeros j_{n,k} <= j_max with normalization constants."""
    orders, indices, zeros = [], [], []
    n = 0
    while True:
        # count of zeros of J_n below j_max, from the lower bound
        if special.jn_zeros(n, 1)[0] > j_max:
            break
        k_guess = int(math.ceil(j_max / math.pi)) + 2
        zs = special.jn_zeros(n, k_guess)
        # one Newton polish pass keeps |J_n| at the zero near machine precision
        zs = zs - special.jv(n, zs) / special.jvp(n, zs)
        keep = zs <= j_max
        zs = zs[keep]
        orders.extend([n] * zs.size)
        indices.extend(range(1, zs.size + 1))
        zeros.extend(zs.tolist())
        n += 1
    order = np.asarray(orders, dtype=int)
    index = np.asarray(indices, dtype=int)
    zero = np.asarray(zeros, dtype=float)
    srt = np.argsort(zero, kind="stable")
    order, index, zero = order[srt], index[srt], zero[srt]
    norm = 1.0 / (math.sqrt(math.pi) * special.jv(order + 1, zero))
    lb = np.array([_zero_lower_bound(n_, k_) for n_, k_ in zip(order, index)])
    if np.any(zero**2 < lb - 1e-9):
        raise RuntimeError("computed Bessel zero violates the spectral lower bound")
    return SpectralCache(j_max=float(j_max), order=order, index=index, zero=zero, norm=norm)


def save_cache(cache: SpectralCache, path: str) -> None:
    doc = {
        "format": CACHE_FORMAT_VERSION,
        "j_max": cache.j_max,
        "records": [
            {"n": int(n), "k": int(k), "zero": repr(z), "norm": repr(c)}
            for n, k, z, c in zip(cache.order, cache.index, cache.zero, cache.norm)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_cache(path: str) -> SpectralCache:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CACHE_FORMAT_VERSION:
        raise RuntimeError(f"unsupported cache format in {path}")
    recs = doc["records"]
    order = np.array([r["n"] for r in recs], dtype=int)
    index = np.array([r["k"] for r in recs], dtype=int)
    zero = np.array([float(r["zero"]) for r in recs])
    norm = np.array([float(r["norm"]) for r in recs])
    bad = zero**2 < np.array([_zero_lower_bound(n, k) for n, k in zip(order, index)]) - 1e-9
    if np.any(bad):
        raise RuntimeError(f"cache {path} contains zeros violating the spectral lower bound")
    return SpectralCache(j_max=float(doc["j_max"]), order=order, index=index, zero=zero, norm=norm)


def default_cache_path(cache_dir: str | None = None) -> str:
    base = cache_dir or os.environ.get("BOSO_CACHE_DIR") or os.path.join(
        os.path.expanduser("~"), ".cache", "boso"
    )
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, "disk_spectrum_j300.json")


_SHARED: SpectralCache | None = None


def shared_cache(cache_dir: str | None = None) -> SpectralCache:
    """Process-wide cache, loaded from disk or warmed on first use."""
    global _SHARED
    if _SHARED is None:
        path = default_cache_path(cache_dir)
        if os.path.exists(path):
            _SHARED = load_cache(path)
        else:
            _SHARED = warm_cache()
            save_cache(_SHARED, path)
    return _SHARED


def bessel_zero(cache: SpectralCache, n: int, k: int) -> float:
    hit = (cache.order == n) & (cache.index == k)
    if not np.any(hit):
        raise CacheMissError(f"zero (n={n}, k={k}) not in cache; warm with larger j_max")
    return float(cache.zero[hit][0])


def eigenfunction(cache: SpectralCache, n: int, k: int, x, radius: float = 1.0):
    """Eigenfunction e_{n,k} at points x of the disk of given radius."""
    j = bessel_zero(cache, abs(n), k)
    hit = (cache.order == abs(n)) & (cache.index == k)
    c = float(cache.norm[hit][0]) / radius
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    th = np.angle(x)
    return c * special.jv(abs(n), j * r / radius) * np.exp(1j * n * th)


def plane_heat_kernel(t, x, y):
    """Whole-plane heat kernel (1/4pi t) exp(-|x-y|^2 / 4t)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    d2 = np.abs(x - y) ** 2
    return np.exp(-d2 / (4.0 * t)) / (4.0 * math.pi * t)


def _pair_series(cache, sl, rx, ry, dth, weights):
    """sum_k w_k * N_k^2 J_n(j r_x) J_n(j r_y) * angular factor, vectorized.

    rx, ry, dth are broadcast-compatible arrays of radii and angle differences;
    weights has the shape of the selected mode slice.
    """
    n = cache.order[sl]
    j = cache.zero[sl]
    c2 = cache.norm[sl] ** 2
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    dth = np.atleast_1d(np.asarray(dth, dtype=float))
    # modes axis last
    jx = special.jv(n[None, :], j[None, :] * rx[:, None])
    jy = special.jv(n[None, :], j[None, :] * ry[:, None])
    ang = np.cos(n[None, :] * dth[:, None])
    fold = np.where(n == 0, 1.0, 2.0)  # +-n folded into a cosine
    return np.sum((weights * c2 * fold)[None, :] * jx * jy * ang, axis=1)


def heat_kernel(cache: SpectralCache, t: float, x, y, radius: float = 1.0):
    """Dirichlet heat kernel of the disk of given radius by eigen-series."""
    ts = t / radius**2
    if ts < T_FLOOR:
        need = cache.required_jmax(ts)
        raise DomainError(
            f"heat_kernel: t/R^2 = {ts:g} below series floor {T_FLOOR:g} "
            f"(would need J_max ~ {need:.0f}); use covariance routines instead"
        )
    sl = cache.mode_slice(ts)
    w = np.exp(-ts * cache.zero[sl] ** 2)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    x, y = np.broadcast_arrays(x, y)
    val = _pair_series(cache, sl, np.abs(x) / radius, np.abs(y) / radius,
                       np.angle(x) - np.angle(y), w) / radius**2
    return val if val.size > 1 else float(val[0])


def remainder(cache: SpectralCache, t: float, x, y, radius: float = 1.0):
    """Boundary remainder R_t = plane kernel minus disk kernel."""
    return plane_heat_kernel(t, np.asarray(x), np.asarray(y)) - heat_kernel(cache, t, x, y, radius)


def _plane_time_integral(a: float, b: float, d2):
    """Closed form of int_a^b (1/4pi s) exp(-d^2/4s) ds, elementwise in d2 = |x-y|^2."""
    d2 = np.atleast_1d(np.asarray(d2, dtype=float))
    out = np.empty_like(d2)
    diag = d2 <= 0.0
    if np.any(diag):
        if a == 0.0:
            raise DomainError("diverging diagonal time integral with eps2 = 0")
        out[diag] = math.log(b / a) / (4.0 * math.pi) if np.isfinite(b) else np.inf
    off = ~diag
    if np.any(off):
        if not np.isfinite(b):
            raise DomainError("plane time integral diverges at b = inf")
        e_hi = special.exp1(d2[off] / (4.0 * a)) if a > 0.0 else 0.0
        e_lo = special.exp1(d2[off] / (4.0 * b))
        out[off] = (e_lo - e_hi) / (4.0 * math.pi)
    return out


def _remainder_tail_bound(s_hi: float, delta: float):
    """Bound on int_0^{s_hi} R_s ds for points at distance >= delta from the boundary.

    Valid for s_hi <= delta^2/4, from R_s <= (1/4pi s) exp(-delta^2/4s).
    """
    if s_hi <= 0.0:
        return 0.0
    z = delta * delta / (4.0 * s_hi)
    return float(special.exp1(z)) / (4.0 * math.pi)


def _series_time_integral(cache, a: float, b: float, x, y):
    """Termwise-integrated eigen-series: int_a^b p_disk(s,x,y) ds, a >= split."""
    sl = cache.mode_slice(a)
    j2 = cache.zero[sl] ** 2
    w = np.exp(-a * j2)
    if np.isfinite(b):
        w = w - np.exp(-b * j2)
    w = w / j2
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return _pair_series(cache, sl, np.abs(x), np.abs(y), np.angle(x) - np.angle(y), w)


def truncated_covariance(cache: SpectralCache, eps2: float, t: float, x, y,
                         with_error: bool = False):
    """int_{eps2}^{t} p_disk(s, x, y) ds for the unit disk; t may be np.inf.

    x, y may be equal-length arrays of pair endpoints (diagonal pairs allowed
    when eps2 > 0).  The boundary-remainder integral below the series split
    point is dropped; its analytic bound is returned as the error estimate.
    """
    if eps2 < 0 or not (t > eps2):
        raise DomainError("truncated_covariance needs 0 <= eps2 < t")
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    x, y = np.broadcast_arrays(x, y)
    require_in_disk(x, "x")
    require_in_disk(y, "y")
    delta = np.maximum(1.0 - np.abs(x), 1.0 - np.abs(y))
    dmin = float(np.min(delta))
    s_star = min(dmin * dmin / 54.0, 1e-2)
    s_star = max(s_star, eps2)
    s_star = min(s_star, t)
    d2 = np.abs(x - y) ** 2
    if eps2 == 0.0 and np.any(d2 <= 0.0):
        raise DomainError("diagonal covariance diverges at eps2 = 0")
    val = np.zeros(x.shape, dtype=float)
    err = 0.0
    if s_star > eps2:
        val += _plane_time_integral(eps2, s_star, d2)
        err = _remainder_tail_bound(s_star, dmin)
        if s_star > dmin * dmin / 4.0:
            raise DomainError(
                "points too close to the boundary for the covariance split; "
                "reduce eps2 or keep points further inside"
            )
    if t > s_star:
        val += _series_time_integral(cache, s_star, t, x, y)
    if with_error:
        return (val if val.size > 1 else float(val[0])), err
    return val if val.size > 1 else float(val[0])


def mode_covariance(cache: SpectralCache, a: float, b: float, x, y):
    """Pure eigen-series int_a^b over the cached mode set only.

    This is the covariance of the *truncated* Gaussian field built from the
    cache; sampling and renormalized-potential kernels that must match a
    sampled field exactly use this. a must be large enough for the cache.
    """
    if not (b > a >= 0.0):
        raise DomainError("mode_covariance needs 0 <= a < b")
    j2 = cache.zero**2
    w = np.exp(-a * j2)
    if np.isfinite(b):
        w -= np.exp(-b * j2)
    w /= j2
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    x, y = np.broadcast_arrays(x, y)
    val = _pair_series(cache, slice(0, cache.n_modes), np.abs(x), np.abs(y),
                       np.angle(x) - np.angle(y), w)
    return val if val.size > 1 else float(val[0])


class FieldSample:
    """One draw of a Gaussian field built on the cached mode set.

    kind selects the per-mode variance from the time range of the covariance:
      "regularized": [eps2, inf)   (the cutoff field phi_eps)
      "tail":        [t, inf)      (the large-scale field phi_sqrt(t))
      "band":        [eps2, t]     (the complementary small-scale field)

    Mode coefficients are standard complex Gaussians with the conjugation
    constraint of a real field, drawn from a counter-based generator keyed by
    the seed, in canonical mode order; a sample is a deterministic function of
    (seed, cache, kind, eps2, t).
    """

    def __init__(self, cache: SpectralCache, kind: str, seed: int,
                 eps2: float = 0.0, t: float = np.inf):
        j2 = cache.zero**2
        if kind == "regularized":
            a, b = eps2, np.inf
        elif kind == "tail":
            a, b = t, np.inf
        elif kind == "band":
            a, b = eps2, t
        else:
            raise ValueError(f"unknown field kind {kind!r}")
        if not (b > a >= 0.0) or a == 0.0:
            raise DomainError("field sampling needs a positive lower time endpoint")
        var = np.exp(-a * j2)
        if np.isfinite(b):
            var -= np.exp(-b * j2)
        var /= j2
        self.cache = cache
        self.kind = kind
        self.seed = int(seed)
        self.amp = np.sqrt(var)
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        z = rng.standard_normal(2 * cache.n_modes)
        re, im = z[0::2], z[1::2]
        n = cache.order
        # V for n = 0 is real standard; for n > 0, (re + i im)/sqrt(2)
        self.coef = np.where(n == 0, re, (re + 1j * im) / math.sqrt(2.0))

    def basis_matrix(self, points) -> np.ndarray:
        """Per-mode field contributions at the given points, modes x points."""
        cache = self.cache
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        r = np.abs(pts)
        th = np.angle(pts)
        n = cache.order
        j = cache.zero
        jr = special.jv(n[:, None], j[:, None] * r[None, :])
        base = cache.norm[:, None] * jr
        # n = 0 mode: c V e; n > 0: c (V e + conj(V) conj(e)) = 2 c Re(V e)
        return base, np.exp(1j * np.outer(n, th))

    def eval(self, points):
        base, phase = self.basis_matrix(points)
        term = (self.amp[:, None] * base) * (self.coef[:, None] * phase)
        n0 = self.cache.order == 0
        vals = np.where(n0[:, None], term.real, 2.0 * term.real).sum(axis=0)
        pts = np.atleast_1d(np.asarray(points))
        return vals if pts.size > 1 else float(vals[0])


def sample_field(cache: SpectralCache, kind: str, seed: int,
                 eps2: float = 0.0, t: float = np.inf) -> FieldSample:
    return FieldSample(cache, kind, seed, eps2=eps2, t=t)


def field_values(cache: SpectralCache, kind: str, seeds, points,
                 eps2: float = 0.0, t: float = np.inf) -> np.ndarray:
    """Field values at fixed points for many seeds, (n_seeds, n_points).

    Equivalent to stacking FieldSample(seed).eval(points) but shares the
    point-basis work across samples.
    """
    proto = FieldSample(cache, kind, int(seeds[0]), eps2=eps2, t=t)
    base, phase = proto.basis_matrix(points)
    weighted = proto.amp[:, None] * base
    n0 = cache.order == 0
    fold = np.where(n0, 1.0, 2.0)[:, None]
    out = np.empty((len(seeds), np.atleast_1d(np.asarray(points)).size))
    for row, seed in enumerate(seeds):
        s = proto if int(seed) == proto.seed else FieldSample(cache, kind, int(seed), eps2=eps2, t=t)
        term = weighted * (s.coef[:, None] * phase)
        out[row] = (fold * term.real).sum(axis=0)
    return out
