"""Trace moments of Haar-random unitary and unitary symplectic matrices.

Exact second moments of traces of powers, Haar sampling, and the
weighted linear statistic ``S_n(U) = sum_j w(gamma_j) exp(2 pi i n gamma_j)``
whose mean square is ``min(n, N)`` times the mean square of ``w`` to
leading order.

Randomness: sample block ``b`` of a run with seed ``s`` draws from
``Philox(SeedSequence([s, b]))``; blocks have a fixed size, so results do
not depend on how many threads process them.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

BLOCK = 2000  # samples per RNG substream
MAX_DIM = 256
RMT_CSV_HEADER = ("group", "dim", "n", "samples", "mc_mean", "mc_se", "exact", "prediction")


class Group(str, enum.Enum):
    UNITARY = "u"
    SYMPLECTIC = "usp"

    @classmethod
    def parse(cls, value) -> "Group":
        if isinstance(value, Group):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown group {value!r}; use 'u' or 'usp'") from None


def eta(n: int) -> int:
    return 1 if n % 2 == 0 else 0


@dataclass(frozen=True)
class MomentSpec:
    """``E[tr U^m * conj(tr U^n)]`` over ``U(dim)`` or ``USp(dim)``."""

    group: Group
    dim: int
    m: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "group", Group.parse(self.group))
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.group is Group.SYMPLECTIC and self.dim % 2:
            raise ValidationError("USp needs an even dimension")


def _unitary_moment(N, m, mp):
    if m == 0 and mp == 0:
        return float(N * N)
    return float(min(abs(m), N)) if m == mp else 0.0


def _symplectic_mean_trace(g, n):
    # E tr U^n = -eta(n) for 1 <= n <= 2g, else 0
    if n == 0:
        return 2.0 * g
    return -float(eta(n)) if n <= 2 * g else 0.0


def _symplectic_moment(g, m, n):
    m, n = sorted((abs(m), abs(n)))
    if m == 0:
        return 2.0 * g * _symplectic_mean_trace(g, n)
    if m == n:
        if n <= g:
            return float(n + eta(n))
        if n <= 2 * g:
            return float(n - 1 + eta(n))
        return float(2 * g)
    if m + n <= 2 * g:
        return float(eta(m) * eta(n))
    if n <= 2 * g:
        return float(eta(m) * eta(n) - eta(m + n))
    if n - m <= 2 * g:
        return float(-eta(m + n))
    return 0.0


def exact_moment(spec: MomentSpec) -> float:
    """Dyson's formula for ``U(N)``; the Keating-Odgers cases for ``USp(2g)``.

    Symplectic traces are real, so the conjugation is immaterial there and
    negative powers reduce to positive ones.
    """
    if spec.group is Group.UNITARY:
        return _unitary_moment(spec.dim, spec.m, spec.n)
    return _symplectic_moment(spec.dim // 2, spec.m, spec.n)


# ---------------------------------------------------------------------------
# sampling


def _rng(seed: int, substream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(substream)])))


def _ginibre(rng, size, rows, cols):
    z = rng.standard_normal((size, rows, cols, 2))
    return (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2)


def _haar_unitary(rng, size, N):
    q, r = np.linalg.qr(_ginibre(rng, size, N, N))
    d = np.diagonal(r, axis1=1, axis2=2)
    if np.any(np.abs(d) < 1e-12):
        raise np.linalg.LinAlgError("rank-deficient Gaussian draw")
    return q * (d / np.abs(d))[:, None, :]


def symplectic_form(g: int) -> np.ndarray:
    J = np.zeros((2 * g, 2 * g))
    J[:g, g:] = np.eye(g)
    J[g:, :g] = -np.eye(g)
    return J


def _haar_symplectic(rng, size, dim):
    """Gram-Schmidt on Gaussian quaternion vectors.

    Each column ``v`` is paired with ``-J conj(v)``; orthonormalising the
    ``v`` against all earlier columns and their partners gives a unitary
    ``U`` with ``U^T J U = J``.
    """
    g = dim // 2
    J = symplectic_form(g)
    raw = _ginibre(rng, size, dim, g)
    cols_v, cols_w = [], []
    for j in range(g):
        v = raw[:, :, j]
        for _ in range(2):  # re-orthogonalise once for stability
            for u in cols_v + cols_w:
                v = v - u * np.einsum("bi,bi->b", u.conj(), v)[:, None]
        nrm = np.linalg.norm(v, axis=1)
        if np.any(nrm < 1e-12):
            raise np.linalg.LinAlgError("degenerate quaternion column")
        v = v / nrm[:, None]
        cols_v.append(v)
        cols_w.append(v.conj() @ J)  # row form of -J conj(v)
    return np.stack(cols_v + cols_w, axis=2)


def sample_haar(group, dim: int, seed: int, size: int | None = None, substream: int = 0) -> np.ndarray:
    """Haar-random matrix (or a batch of ``size``) from ``U(dim)`` or ``USp(dim)``.

    A numerically degenerate draw is replaced by a draw from the next substream.
    """
    group = Group.parse(group)
    MomentSpec(group, dim, 0, 0)  # validates dim
    if dim > MAX_DIM:
        raise ValidationError(f"dim {dim} above the sampling limit {MAX_DIM}")
    count = 1 if size is None else int(size)
    for attempt in range(8):
        rng = _rng(seed, substream + attempt * (1 << 32))
        try:
            if group is Group.UNITARY:
                out = _haar_unitary(rng, count, dim)
            else:
                out = _haar_symplectic(rng, count, dim)
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise ValidationError("repeated degenerate Haar draws")
    return out[0] if size is None else out


def eigenphases(U: np.ndarray) -> np.ndarray:
    """Eigenphases ``gamma`` in ``[0, 1)`` with eigenvalues ``exp(2 pi i gamma)``."""
    lam = np.linalg.eigvals(U)
    return np.mod(np.angle(lam) / (2 * math.pi), 1.0)


# ---------------------------------------------------------------------------
# weights and the linear statistic


@dataclass(frozen=True)
class Weight:
    """Periodic weight on ``[0, 1)`` from finitely many Fourier modes."""

    modes: tuple[tuple[int, complex], ...]

    @classmethod
    def constant(cls, c: complex = 1.0) -> "Weight":
        return cls(((0, complex(c)),))

    @classmethod
    def from_dict(cls, d: dict) -> "Weight":
        out = []
        for key, val in d.items():
            if isinstance(val, (list, tuple)):
                val = complex(val[0], val[1])
            out.append((int(key), complex(val)))
        return cls(tuple(sorted(out)))

    @classmethod
    def from_json(cls, path) -> "Weight":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("modes", data))

    @classmethod
    def random(cls, modes: int, seed: int) -> "Weight":
        """``modes`` consecutive frequencies centred on 0, Gaussian coefficients."""
        rng = _rng(seed, 0)
        half = modes // 2
        c = rng.standard_normal((modes, 2)) @ np.array([1.0, 1j])
        return cls(tuple((l, complex(v)) for l, v in zip(range(-half, modes - half), c)))

    @classmethod
    def from_function(cls, fn, max_modes: int = 257, tol: float = 1e-12, grid: int = 4096) -> "Weight":
        """Fourier-truncate a callable; fails when the dropped tail exceeds ``tol``."""
        x = np.arange(grid) / grid
        c = np.fft.fft(fn(x)) / grid
        ells = np.fft.fftfreq(grid, 1.0 / grid).astype(int)
        half = max_modes // 2
        keep = np.abs(ells) <= half
        tail = float(np.sqrt(np.sum(np.abs(c[~keep]) ** 2)))
        if tail > tol:
            raise ValidationError(f"weight truncation tail {tail:.3g} above {tol:g}")
        pairs = sorted((int(l), complex(v)) for l, v in zip(ells[keep], c[keep]) if abs(v) > 0)
        return cls(tuple(pairs))

    def mean_square(self) -> float:
        return math.fsum(abs(v) ** 2 for _, v in self.modes)

    def __call__(self, gamma):
        gamma = np.asarray(gamma, dtype=float)
        out = np.zeros(gamma.shape, dtype=complex)
        for l, v in self.modes:
            out += v * np.exp(2j * np.pi * l * gamma)
        return out


def linear_statistic(U, n: int, w: Weight, method: str = "direct") -> complex:
    """``S_n(U)``; ``method`` is ``"direct"`` (eigenphases) or ``"fourier"`` (traces of powers)."""
    U = np.asarray(U)
    if method == "direct":
        gam = eigenphases(U)
        return complex(np.sum(w(gam) * np.exp(2j * np.pi * n * gam)))
    if method != "fourier":
        raise ValidationError(f"unknown method {method!r}")
    total = 0j
    for l, v in w.modes:
        m = l + n
        P = np.linalg.matrix_power(U if m >= 0 else U.conj().T, abs(m))
        total += v * np.trace(P)
    return complex(total)


def _batched_stat(U, n, w):
    gam = eigenphases(U)
    return np.sum(w(gam) * np.exp(2j * np.pi * n * gam), axis=-1)


# ---------------------------------------------------------------------------
# Monte Carlo


def _blocks(samples):
    return [(b, min(BLOCK, samples - b * BLOCK)) for b in range(math.ceil(samples / BLOCK))]


def _map_blocks(fn, samples, threads):
    blocks = _blocks(samples)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def _mean_se(sums, sqsums, count):
    mean = math.fsum(sums) / count
    second = math.fsum(sqsums) / count
    var = max(second - mean * mean, 0.0) * count / max(count - 1, 1)
    return mean, math.sqrt(var / count)


@dataclass(frozen=True)
class MomentTable:
    group: Group
    dim: int
    powers: np.ndarray  # trace exponents 0..max_power
    exact: np.ndarray  # (P, P)
    mean: np.ndarray  # complex (P, P)
    se_re: np.ndarray
    se_im: np.ndarray
    samples: int
    seed: int

    def z_scores(self) -> np.ndarray:
        """Largest of the real/imaginary deviations in units of their SE (0/0 counts as 0)."""
        dr = np.abs(self.mean.real - self.exact)
        di = np.abs(self.mean.imag)
        with np.errstate(divide="ignore", invalid="ignore"):
            zr = np.where(self.se_re > 0, dr / self.se_re, np.where(dr < 1e-9, 0.0, np.inf))
            zi = np.where(self.se_im > 0, di / self.se_im, np.where(di < 1e-9, 0.0, np.inf))
        return np.maximum(zr, zi)


def moment_table(group, dim: int, max_power: int, samples: int, seed: int,
                 threads: int = 1) -> MomentTable:
    """Monte Carlo ``E[tr U^m conj(tr U^m')]`` for ``0 <= m, m' <= max_power`` next to the exact values."""
    group = Group.parse(group)
    P = max_power + 1
    powers = np.arange(P)

    def run(block):
        b, size = block
        U = sample_haar(group, dim, seed, size=size, substream=b)
        lam = np.linalg.eigvals(U)
        tr = np.sum(lam[:, None, :] ** powers[None, :, None], axis=2)  # (size, P)
        prod = tr[:, :, None] * tr[:, None, :].conj()
        return (prod.real.sum(0), (prod.real ** 2).sum(0), prod.imag.sum(0), (prod.imag ** 2).sum(0))

    parts = _map_blocks(run, samples, threads)
    mean = np.zeros((P, P), dtype=complex)
    se_re = np.zeros((P, P))
    se_im = np.zeros((P, P))
    for i in range(P):
        for j in range(P):
            mr, sr = _mean_se([p[0][i, j] for p in parts], [p[1][i, j] for p in parts], samples)
            mi, si = _mean_se([p[2][i, j] for p in parts], [p[3][i, j] for p in parts], samples)
            mean[i, j] = complex(mr, mi)
            se_re[i, j], se_im[i, j] = sr, si
    exact = np.array([[exact_moment(MomentSpec(group, dim, int(i), int(j))) for j in powers] for i in powers])
    return MomentTable(group, dim, powers, exact, mean, se_re, se_im, samples, seed)


def exact_mean_square(group, N: int, n: int, w: Weight) -> float:
    """``sum_{m,m'} w^(m-n) conj(w^(m'-n)) E[tr U^m conj(tr U^m')]`` exactly."""
    group = Group.parse(group)
    terms = []
    for l1, v1 in w.modes:
        for l2, v2 in w.modes:
            e = exact_moment(MomentSpec(group, N, l1 + n, l2 + n))
            if e:
                terms.append((v1 * v2.conjugate() * e).real)
    return math.fsum(terms)


@dataclass(frozen=True)
class LinearStatisticResult:
    group: Group
    dim: int
    n: int
    samples: int
    mc_mean: float
    mc_se: float
    exact: float
    prediction: float

    def row(self):
        return (self.group.value, self.dim, self.n, self.samples, self.mc_mean, self.mc_se,
                self.exact, self.prediction)


def linear_statistic_check(group, N: int, n: int, w: Weight, samples: int, seed: int = 0,
                           threads: int = 1) -> LinearStatisticResult:
    """Mean of ``|S_n(U)|^2``: Monte Carlo, exact trace-moment sum, and ``min(n, N) * sum |w^|^2``."""
    group = Group.parse(group)
    if n < 1:
        raise ValidationError("n must be >= 1")
    if samples > 0:
        def run(block):
            b, size = block
            s = _batched_stat(sample_haar(group, N, seed, size=size, substream=b), n, w)
            a = np.abs(s) ** 2
            return a.sum(), (a * a).sum()

        parts = _map_blocks(run, samples, threads)
        mc_mean, mc_se = _mean_se([p[0] for p in parts], [p[1] for p in parts], samples)
    else:
        mc_mean, mc_se = math.nan, math.nan
    exact = exact_mean_square(group, N, n, w)
    return LinearStatisticResult(group, N, n, samples, mc_mean, mc_se, exact, min(n, N) * w.mean_square())


@dataclass(frozen=True)
class SweepSpec:
    """Matrix size and frequency matched to ``K`` sectors: ``N = log K / pi``, ``n = (alpha/2) N``."""

    N: int
    n: int
    alpha: float
    weight: Weight

    @classmethod
    def from_sectors(cls, K: float, alpha: float, weight: Weight) -> "SweepSpec":
        N = max(1, round(math.log(K) / math.pi))
        n = max(1, round(alpha / 2 * math.log(K) / math.pi))
        return cls(N, n, float(alpha), weight)


def dictionary_curve(K: float, alphas, weight: Weight, group="u") -> list[tuple[float, int, int, float, float]]:
    """Rows ``(alpha, N, n, exact, prediction)`` across ``alpha`` at fixed ``K``."""
    out = []
    for a in alphas:
        s = SweepSpec.from_sectors(K, a, weight)
        dim = s.N if Group.parse(group) is Group.UNITARY else 2 * (s.N // 2 or 1)
        r = linear_statistic_check(group, dim, s.n, weight, samples=0)
        out.append((float(a), r.dim, s.n, r.exact, r.prediction))
    return out
