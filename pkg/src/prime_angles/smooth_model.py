"""Smoothed angle counts and their Fourier (Hecke character) expansion.

The smooth count around ``theta`` is

    psi(theta) = sum_a Phi(N(a)/X) * Lambda(a) * F_K(theta_a - theta),

with ``F_K`` the ``pi/2``-periodisation of ``f(K * t / (pi/2))``.  Its
Fourier coefficients are ``fhat(k/K)/K`` at frequency ``e^{4ik theta}``, so
``psi`` is a combination of the sums ``H(k) = sum_a w_a e^{4ik theta_a}``
and its variance over ``theta`` is ``sum_{k != 0} |fhat(k/K)/K|^2 |H(k)|^2``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .gaussian_primes import HALF_PI, PowerTable, prime_power_records

_NODES = 8193  # trapezoid nodes on [-1, 1]; roundoff-limited (~1e-15) for the bumps used
TRUNCATION = 1e-14


def bump(x):
    """``exp(-1/(1-x^2))`` on ``(-1, 1)``, zero outside."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


def radial_bump(t):
    """``exp(-1/((t-1/4)(1-t)))`` on ``(1/4, 1)``, zero outside."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    m = (t > 0.25) & (t < 1.0)
    out[m] = np.exp(-1.0 / ((t[m] - 0.25) * (1.0 - t[m])))
    return out


@dataclass(frozen=True, eq=False)
class WindowPair:
    """Angular window ``f`` (even, support in [-1, 1]) and radial window ``Phi``.

    ``Phi`` must vanish outside ``[phi_lo, phi_hi]``.  Transforms and
    integrals are computed by the trapezoid rule, which converges faster
    than any power for windows vanishing to all orders at the endpoints.
    """

    f: Callable
    Phi: Callable
    phi_lo: float = 0.25
    phi_hi: float = 1.0
    name: str = "bump"
    _x: np.ndarray = field(init=False, repr=False)
    _fx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.linspace(-1.0, 1.0, _NODES)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_fx", np.asarray(self.f(x), dtype=np.float64))

    @property
    def _h(self):
        return self._x[1] - self._x[0]

    def fhat(self, y):
        """``int f(x) e^{-2 pi i x y} dx`` (real because f is even)."""
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        flat = y.ravel()
        res = np.empty(flat.size)
        # even integrand: fold onto [0, 1]; np.sum is pairwise, BLAS dot is not
        half = _NODES // 2
        xs = self._x[half:]
        wts = self._fx[half:] * self._h * 2
        wts[0] /= 2
        step = max(1, 2_000_000 // xs.size)
        for s in range(0, flat.size, step):
            blk = flat[s : s + step]
            res[s : s + step] = (np.cos(2 * np.pi * np.outer(blk, xs)) * wts).sum(axis=1)
        return res.reshape(y.shape)

    @functools.cached_property
    def int_f(self) -> float:
        return float(self._fx.sum() * self._h)

    @functools.cached_property
    def int_f2(self) -> float:
        return float((self._fx**2).sum() * self._h)

    @functools.cached_property
    def _phi_grid(self):
        t = np.linspace(self.phi_lo, self.phi_hi, _NODES)
        return t, np.asarray(self.Phi(t), dtype=np.float64)

    @functools.cached_property
    def int_Phi(self) -> float:
        t, v = self._phi_grid
        return float(v.sum() * (t[1] - t[0]))

    @functools.cached_property
    def int_Phi2(self) -> float:
        t, v = self._phi_grid
        return float((v**2).sum() * (t[1] - t[0]))

    @property
    def c1(self) -> float:
        return self.int_f * self.int_Phi

    @property
    def c2(self) -> float:
        return self.int_f2 * self.int_Phi2

    @functools.cached_property
    def cutoff(self) -> float:
        """Smallest ``y`` beyond which ``|fhat| < TRUNCATION * fhat(0)``, scanning to 200."""
        ys = np.arange(0.0, 200.0, 0.25)
        v = np.abs(self.fhat(ys))
        big = np.flatnonzero(v >= TRUNCATION * v[0])
        return float(ys[big[-1]] + 0.25)

    @functools.cached_property
    def autocorrelation(self) -> CubicSpline:
        """Spline of ``g(s) = int f(t) f(t+s) dt`` on ``[-2, 2]``."""
        x, fx, h = self._x, self._fx, self._h
        n = x.size
        shifts = np.arange(-(n - 1), n)
        full = np.correlate(fx, fx, mode="full") * h
        return CubicSpline(shifts * h, full)


@functools.lru_cache(maxsize=None)
def standard_windows() -> WindowPair:
    return WindowPair(bump, radial_bump)


def default_kmax(K: int, w: WindowPair) -> int:
    return int(min(math.ceil(w.cutoff * K), 200 * K))


# ---------------------------------------------------------------------------
# direct side


def window_fk(theta, K: int, w: WindowPair | None = None):
    """``F_K(theta) = sum_j f(K (theta - j pi/2) / (pi/2))``."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    w = w or standard_windows()
    t = np.mod(np.asarray(theta, dtype=np.float64), HALF_PI)
    # support of f(K t/(pi/2)) is |t| <= pi/(2K) <= pi/2, so j in {0, 1} suffice
    return w.f(K * t / HALF_PI) + w.f(K * (t - HALF_PI) / HALF_PI)


def weighted_records(X: int, w: WindowPair, primes_only: bool = False,
                     table: PowerTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Angles and weights ``Phi(N/X) * Lambda`` of prime powers inside the radial support."""
    if table is None:
        table = prime_power_records(X)
    if primes_only:
        table = table.primes_only()
    table = table.window(w.phi_lo * X, w.phi_hi * X)
    weights = np.asarray(w.Phi(table.norm / X), dtype=np.float64) * table.lam
    keep = weights != 0
    return table.angle[keep], weights[keep]


def _window_sum(angles, weights, thetas, K, w):
    """``sum_a weights_a F_K(angles_a - theta)`` for each theta."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    if angles.size == 0:
        return np.zeros(thetas.shape)
    if K < 4:
        out = np.empty(thetas.size)
        for i, th in enumerate(thetas.ravel()):
            out[i] = np.dot(weights, window_fk(angles - th, K, w))
        return out.reshape(thetas.shape)
    order = np.argsort(angles, kind="stable")
    a = angles[order]
    wt = weights[order]
    ext = np.concatenate([a - HALF_PI, a, a + HALF_PI])
    extw = np.concatenate([wt, wt, wt])
    half = HALF_PI / K
    th = np.mod(thetas.ravel(), HALF_PI)
    lo = np.searchsorted(ext, th - half, side="left")
    lens = np.searchsorted(ext, th + half, side="right") - lo
    out = np.zeros(th.size)
    ends = np.cumsum(lens)
    start = 0
    while start < th.size:
        # take thetas until about 4e6 (theta, record) pairs are queued
        base = ends[start - 1] if start else 0
        stop = max(start + 1, int(np.searchsorted(ends, base + 4_000_000, side="right")))
        ln = lens[start:stop]
        total = int(ln.sum())
        if total:
            rows = np.repeat(np.arange(start, stop), ln)
            offs = np.concatenate([[0], np.cumsum(ln)[:-1]])
            idx = np.arange(total) - np.repeat(offs, ln) + np.repeat(lo[start:stop], ln)
            vals = extw[idx] * w.f(K * (ext[idx] - th[rows]) / HALF_PI)
            out[start:stop] = np.bincount(rows - start, weights=vals, minlength=stop - start)
        start = stop
    return out.reshape(thetas.shape)


def psi_direct(theta, K: int, X: int, w: WindowPair | None = None, primes_only: bool = False,
               table: PowerTable | None = None):
    """Smooth count of prime-power angles near ``theta`` (scalar or array)."""
    if X < 2:
        raise ValidationError("X must be >= 2")
    w = w or standard_windows()
    angles, weights = weighted_records(X, w, primes_only, table)
    out = _window_sum(angles, weights, theta, K, w)
    return float(out[0]) if np.ndim(theta) == 0 else out


# ---------------------------------------------------------------------------
# Fourier side


def hecke_sum(k: int, X: int, w: WindowPair | None = None, primes_only: bool = False,
              table: PowerTable | None = None) -> complex:
    """``sum_a Phi(N a / X) Lambda(a) e^{4 i k theta_a}`` evaluated term by term."""
    w = w or standard_windows()
    angles, weights = weighted_records(X, w, primes_only, table)
    return complex(np.dot(weights, np.exp(4j * k * angles)))


def hecke_sums(kmax: int, angles, weights, resync: int = 32) -> np.ndarray:
    """``H(k)`` for ``k = 0..kmax`` by repeated multiplication.

    The powers ``e^{4ik theta}`` are rebuilt from ``exp`` every ``resync``
    steps so rounding cannot accumulate.
    """
    z = np.exp(4j * angles)
    out = np.empty(kmax + 1, dtype=np.complex128)
    for k0 in range(0, kmax + 1, resync):
        cur = np.exp(4j * k0 * angles)
        for k in range(k0, min(k0 + resync, kmax + 1)):
            out[k] = np.dot(weights, cur)
            cur *= z
    return out


def fourier_coefficients(K: int, kmax: int, w: WindowPair) -> np.ndarray:
    """``fhat(k/K)/K`` for ``k = 0..kmax``."""
    return w.fhat(np.arange(kmax + 1) / K) / K


def _check_truncation(K, kmax, w):
    if kmax < math.ceil(w.cutoff * K) and kmax < 200 * K:
        warnings.warn(
            f"k_max={kmax} leaves |fhat(k/K)| above {TRUNCATION:g} of its peak "
            f"(need about {math.ceil(w.cutoff * K)})",
            RuntimeWarning,
            stacklevel=3,
        )


@dataclass
class FourierModel:
    """Coefficients and Hecke sums for one (K, X, window) triple."""

    K: int
    X: int
    kmax: int
    coeffs: np.ndarray  # fhat(k/K)/K, k = 0..kmax
    sums: np.ndarray  # H(k), k = 0..kmax

    @property
    def mean(self) -> float:
        return float(self.coeffs[0] * self.sums[0].real)

    def psi(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        ks = np.arange(1, self.kmax + 1)
        out = np.full(theta.shape, self.mean)
        for s in range(0, theta.size, 256):
            th = theta.ravel()[s : s + 256]
            phase = np.exp(-4j * np.outer(th, ks))
            out.ravel()[s : s + 256] += 2 * (phase @ (self.coeffs[1:] * self.sums[1:])).real
        return out

    @property
    def variance(self) -> float:
        return float(2 * np.sum(self.coeffs[1:] ** 2 * np.abs(self.sums[1:]) ** 2))


def fourier_model(K: int, X: int, w: WindowPair | None = None, kmax: int | None = None,
                  primes_only: bool = False, table: PowerTable | None = None) -> FourierModel:
    w = w or standard_windows()
    if kmax is None:
        kmax = default_kmax(K, w)
    _check_truncation(K, kmax, w)
    angles, weights = weighted_records(X, w, primes_only, table)
    return FourierModel(K, X, kmax, fourier_coefficients(K, kmax, w),
                        hecke_sums(kmax, angles, weights))


def psi_fourier(theta, K: int, X: int, w: WindowPair | None = None, kmax: int | None = None,
                primes_only: bool = False, table: PowerTable | None = None):
    """The smooth count rebuilt from its truncated Hecke-character expansion."""
    model = fourier_model(K, X, w, kmax, primes_only, table)
    out = model.psi(theta)
    return float(out[0]) if np.ndim(theta) == 0 else out


# ---------------------------------------------------------------------------
# variance


def _pair_variance(angles, weights, K, w):
    """``sum_{a,b} w_a w_b C_K(theta_a - theta_b) - mean^2``.

    ``C_K(d) = (1/K) sum_l g(K (d - l pi/2)/(pi/2))`` is the autocorrelation of
    ``F_K``; summing it over pairs is the same quantity as the Parseval sum
    over all frequencies, but costs only the pairs closer than ``pi/K``.
    """
    g = w.autocorrelation
    order = np.argsort(angles, kind="stable")
    a = angles[order]
    wt = weights[order]
    n = a.size
    reach = 2 * HALF_PI / K
    ext = np.concatenate([a - HALF_PI, a, a + HALF_PI])
    extw = np.concatenate([wt, wt, wt])
    lo = np.searchsorted(ext, a - reach, side="left")
    hi = np.searchsorted(ext, a + reach, side="right")
    total = 0.0
    for i in range(n):
        d = ext[lo[i] : hi[i]] - a[i]
        s = K * d / HALF_PI
        inside = np.abs(s) < 2
        total += wt[i] * float(np.dot(extw[lo[i] : hi[i]][inside], g(s[inside])))
    second = total / K
    mean = w.int_f / K * float(weights.sum())
    return second - mean * mean


def variance_parseval(K: int, X: int, w: WindowPair | None = None, kmax: int | None = None,
                      primes_only: bool = False, table: PowerTable | None = None,
                      method: str = "auto") -> float:
    """Variance of the smooth count over ``theta`` from its Fourier side.

    ``method="fourier"`` sums ``|fhat(k/K)/K|^2 |H(k)|^2`` over
    ``0 < |k| <= kmax``; ``method="pairs"`` evaluates the same untruncated
    sum through the window autocorrelation.  ``auto`` picks the cheaper.
    """
    w = w or standard_windows()
    angles, weights = weighted_records(X, w, primes_only, table)
    if angles.size == 0:
        return 0.0
    if kmax is None:
        kmax = default_kmax(K, w)
    if method == "auto":
        method = "fourier" if kmax * angles.size <= 3e8 else "pairs"
    if method == "pairs":
        return _pair_variance(angles, weights, K, w)
    if method != "fourier":
        raise ValidationError(f"unknown method {method!r}")
    _check_truncation(K, kmax, w)
    coeffs = fourier_coefficients(K, kmax, w)
    sums = hecke_sums(kmax, angles, weights)
    return float(2 * np.sum(coeffs[1:] ** 2 * np.abs(sums[1:]) ** 2))


def variance_quadrature(K: int, X: int, w: WindowPair | None = None, M: int | None = None,
                        primes_only: bool = False, table: PowerTable | None = None) -> float:
    """Variance of :func:`psi_direct` over ``M`` equally spaced ``theta``."""
    w = w or standard_windows()
    if M is None:
        M = max(10_000, 20 * K)
    thetas = np.arange(M) * (HALF_PI / M)
    vals = psi_direct(thetas, K, X, w, primes_only, table)
    return float(np.mean(vals**2) - np.mean(vals) ** 2)


def trivial_prediction(K: int, X: int, w: WindowPair | None = None) -> float:
    """``c2 * X log X / K``, the variance when sectors outnumber the points."""
    w = w or standard_windows()
    return w.c2 * X * math.log(X) / K


def variance_vs_prediction(K: int, X: int, w: WindowPair | None = None,
                       table: PowerTable | None = None) -> tuple[float, float]:
    """Measured variance and ``c2 (X/K) min(log X, 2 log K)``."""
    if K < 2:
        raise ValidationError("K must be >= 2")
    w = w or standard_windows()
    measured = variance_parseval(K, X, w, table=table)
    predicted = w.c2 * X / K * min(math.log(X), 2 * math.log(K))
    return measured, predicted


SMOOTH_CSV_HEADER = ("X", "K", "kmax", "var_parseval", "var_quadrature", "predicted", "ratio")
