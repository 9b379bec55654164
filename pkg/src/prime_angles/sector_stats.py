"""Sector counts, number variance and gap statistics of prime angles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gaussian_primes import HALF_PI, AngleTable, prime_ideal_angles

CSV_HEADER = ("x", "K", "N", "beta", "mean", "variance", "ratio")


@dataclass(frozen=True)
class VarianceReport:
    x: int | None
    K: int
    N: int
    mean: float
    variance: float
    ratio: float
    beta: float | None  # None when N < 2

    def row(self):
        return (self.x, self.K, self.N, self.beta, self.mean, self.variance, self.ratio)


def _angles(angles):
    if isinstance(angles, AngleTable):
        return angles.angle
    return np.asarray(angles, dtype=np.float64)


def bin_index(angles, K: int) -> np.ndarray:
    """Arc index ``j`` with ``angle in [j*pi/(2K), (j+1)*pi/(2K))``."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    t = _angles(angles)
    j = np.floor(t * (K / HALF_PI)).astype(np.int64)
    # rounding can push an angle just below pi/2 onto K
    np.clip(j, 0, K - 1, out=j)
    return j


def bin_counts(angles, K: int) -> np.ndarray:
    """Histogram of angles over the ``K`` half-open arcs of ``[0, pi/2)``."""
    return np.bincount(bin_index(angles, K), minlength=K)


def occupied_counts(angles, K: int) -> np.ndarray:
    """Counts of the non-empty arcs only; usable when ``K`` is too large to allocate."""
    _, counts = np.unique(bin_index(angles, K), return_counts=True)
    return counts


def discrete_variance(bins, K: int | None = None, x: int | None = None) -> VarianceReport:
    """Mean and variance of arc counts.

    ``bins`` may list only the occupied arcs when ``K`` is passed
    explicitly; missing arcs count as empty.  The variance is formed from
    exact integers, ``(K * sum(b^2) - N^2) / K^2``.
    """
    bins = np.asarray(bins, dtype=np.int64)
    if K is None:
        K = bins.size
    K = int(K)
    if K < 1:
        raise ValidationError("K must be >= 1")
    if bins.size > K:
        raise ValidationError("more bins than K")
    N = int(bins.sum())
    s2 = sum(int(b) * int(b) for b in bins) if bins.size < 4096 else int(np.dot(bins, bins))
    variance = (K * s2 - N * N) / (K * K)
    mean = N / K
    ratio = variance / mean if N else 0.0
    beta = math.log(K) / math.log(N) if N >= 2 else None
    return VarianceReport(x, K, N, mean, variance, ratio, beta)


def sector_variance(angles, K: int, x: int | None = None) -> VarianceReport:
    """:func:`discrete_variance` of the K-arc partition, for any size of K."""
    if isinstance(angles, AngleTable) and x is None:
        x = angles.x
    return discrete_variance(occupied_counts(angles, K), K=K, x=x)


def sliding_variance(angles, K: int, M: int) -> float:
    """Variance of the centred-window count, averaged over ``M`` uniform centres.

    The window around ``theta`` is ``[theta - pi/(4K), theta + pi/(4K)]``
    (periodic mod ``pi/2``); centres are ``(m + 1/2) * pi / (2M)``.
    """
    if M < K:
        raise ValidationError("grid size M must be >= K")
    t = np.sort(_angles(angles))
    if t.size == 0:
        return 0.0
    half = HALF_PI / (2 * K)
    centres = (np.arange(M) + 0.5) * (HALF_PI / M)
    # three periodic copies cover every window for K >= 1
    ext = np.concatenate([t - HALF_PI, t, t + HALF_PI])
    counts = np.searchsorted(ext, centres + half, side="right") - np.searchsorted(
        ext, centres - half, side="left"
    )
    if K == 1:
        counts = np.full(M, t.size)
    c = counts.astype(np.float64)
    return float(np.mean(c * c) - np.mean(c) ** 2)


def sliding_variance_exact(angles, K: int) -> float:
    """The same variance integrated exactly over the piecewise-constant count."""
    t = _angles(angles)
    n = t.size
    if n == 0 or K == 1:
        return 0.0
    width = HALF_PI / K
    starts = np.mod(t - width / 2, HALF_PI)
    ends = np.mod(t + width / 2, HALF_PI)
    pos = np.concatenate([starts, ends])
    step = np.concatenate([np.ones(n), -np.ones(n)])
    order = np.argsort(pos, kind="stable")
    pos, step = pos[order], step[order]
    at_zero = np.count_nonzero(starts > ends)
    level = np.concatenate([[at_zero], at_zero + np.cumsum(step)])
    seg = np.diff(np.concatenate([[0.0], pos, [HALF_PI]]))
    m1 = float(np.dot(seg, level)) / HALF_PI
    m2 = float(np.dot(seg, level * level)) / HALF_PI
    return m2 - m1 * m1


def gap_statistics(angles) -> tuple[float, float]:
    """Smallest and largest circular gap between distinct angles on ``[0, pi/2)``."""
    t = np.unique(_angles(angles))
    if t.size < 2:
        raise ValidationError("gap statistics need at least 2 distinct angles")
    gaps = np.diff(np.concatenate([t, [t[0] + HALF_PI]]))
    return float(gaps.min()), float(gaps.max())


def repulsion_margin(table: AngleTable) -> float:
    """Minimum of ``sqrt(Np * Nq) * sin(d)`` over pairs with distinct angles.

    ``d`` is the circular distance; since ``sin`` is increasing on
    ``[0, pi/2]`` this bounds the plain ``|theta_p - theta_q|`` version too.
    Pairs are pruned by sorted-neighbour search: a pair can only violate
    the bound when ``sin(d) < 1/sqrt(2 * Np)``.
    """
    order = np.argsort(table.angle, kind="stable")
    t = table.angle[order]
    n = table.norm[order].astype(np.float64)
    size = t.size
    ext_t = np.concatenate([t, t + HALF_PI])
    ext_n = np.concatenate([n, n])
    reach = np.arcsin(np.minimum(1.0, 1.0 / np.sqrt(2.0 * n)))
    hi = np.searchsorted(ext_t, t + reach, side="right")
    hi = np.minimum(hi, np.arange(size) + size)
    worst = math.inf
    for i in range(size):
        j = np.arange(i + 1, hi[i])
        if j.size == 0:
            continue
        d = ext_t[j] - t[i]
        d = np.minimum(d, HALF_PI - d)
        keep = d > 0
        if not np.any(keep):
            continue
        val = np.sqrt(n[i] * ext_n[j[keep]]) * np.sin(d[keep])
        worst = min(worst, float(val.min()))
    return worst


def beta_grid(spec: str) -> list[float]:
    """Parse ``start:stop:step`` (inclusive) or a comma list."""
    if ":" in spec:
        start, stop, step = (float(s) for s in spec.split(":"))
        if step <= 0:
            raise ValidationError("beta step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(s) for s in spec.split(",") if s.strip()]


def ratio_curve(x: int, betas, table: AngleTable | None = None,
                  split_only: bool = False) -> list[VarianceReport]:
    """Variance-to-mean ratio of K-arc counts for ``K = round(N^beta)``.

    ``beta = 0`` is allowed and gives ``K = 1``; rows come back sorted by beta.
    """
    if x < 100:
        raise ValidationError("ratio curve needs x >= 100")
    if table is None:
        table = prime_ideal_angles(x, split_only=split_only)
    elif split_only:
        table = table.split_only()
    N = len(table)
    out = []
    for beta in sorted(betas):
        if not 0 <= beta <= 1.5:
            raise ValidationError(f"beta={beta} outside [0, 1.5]")
        K = max(1, int(round(N ** beta)))
        out.append(sector_variance(table, K, x=x))
    return out
