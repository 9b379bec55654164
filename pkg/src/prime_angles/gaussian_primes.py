"""Prime ideals of Z[i] and their angles.

Rational primes come from an odd-only segmented sieve.  Each prime
``p = 1 mod 4`` is written as ``a^2 + b^2`` (square root of -1 by a
non-residue power, then Euclidean descent) and contributes the two ideals
``(a+bi)`` and ``(b+ai)``.  Inert primes ``p = 3 mod 4`` give the ideal
``(p)`` of norm ``p^2`` and angle 0; ``2`` ramifies as ``(1+i)`` with angle
``pi/4``.

Large populations are kept as column arrays (:class:`AngleTable`,
:class:`PowerTable`); the per-record dataclasses are there for iteration
and for small cases.
"""

from __future__ import annotations

import enum
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ValidationError, check_budget

HALF_PI = math.pi / 2
DEFAULT_BLOCK = 1 << 22  # odd residues per sieve segment


class Kind(enum.IntEnum):
    SPLIT = 0
    INERT = 1
    RAMIFIED = 2


@dataclass(frozen=True)
class PrimeAngle:
    norm: int
    angle: float
    kind: Kind
    rep: tuple[int, int]


@dataclass(frozen=True)
class PrimePowerRecord:
    norm: int
    angle: float
    lam: float


# ---------------------------------------------------------------------------
# sieve


def _small_sieve(n):
    is_p = np.ones(n + 1, dtype=bool)
    is_p[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if is_p[p]:
            is_p[p * p :: p] = False
    return np.flatnonzero(is_p).astype(np.int64)


def _sieve_segment(lo, hi, base):
    """Odd primes in [lo, hi) for odd lo; ``base`` holds odd primes <= sqrt(hi)."""
    count = (hi - lo + 1) // 2
    mask = np.ones(count, dtype=bool)
    for p in base:
        p = int(p)
        p2 = p * p
        if p2 >= hi:
            break
        start = max(p2, ((lo + p - 1) // p) * p)
        if start % 2 == 0:
            start += p
        if start >= hi:
            continue
        mask[(start - lo) // 2 :: p] = False
    return lo + 2 * np.flatnonzero(mask).astype(np.int64)


def sieve_primes(x: int, block: int = DEFAULT_BLOCK, threads: int = 1) -> np.ndarray:
    """All rational primes ``<= x`` in ascending order (int64 array).

    The odd numbers in ``[3, x]`` are split into segments of ``block``
    residues; segments are independent, so ``threads > 1`` sieves them
    concurrently and the result is identical for any worker count.
    """
    x = int(x)
    if x < 2:
        raise ValidationError("sieve_primes needs x >= 2")
    if block < 1:
        raise ValidationError("block must be positive")
    # output plus one segment mask
    est = int(1.3 * x / max(math.log(x), 1.0)) + 2
    check_budget(8 * est + block, f"sieving primes up to {x}")

    root = math.isqrt(x)
    base = _small_sieve(max(root, 2))
    base = base[base > 2]
    bounds = []
    lo = 3
    while lo <= x:
        hi = min(lo + 2 * block, x + 1)
        bounds.append((lo, hi))
        lo = hi if hi % 2 == 1 else hi + 1
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _sieve_segment(b[0], b[1], base), bounds))
    else:
        parts = [_sieve_segment(lo, hi, base) for lo, hi in bounds]
    return np.concatenate([np.array([2], dtype=np.int64), *parts])


# ---------------------------------------------------------------------------
# sums of two squares


def sqrt_minus_one(p: int) -> int:
    """A square root of -1 modulo a prime ``p = 1 mod 4``.

    For ``p = 1 mod 4`` Tonelli-Shanks on -1 collapses to one step: if ``c``
    is a quadratic non-residue then ``c^((p-1)/4)`` squares to -1.
    """
    e = (p - 1) // 4
    for c in range(2, p):
        t = pow(c, e, p)
        t2 = t * t % p
        if t2 == p - 1:
            return t
        if t2 != 1:
            # Euler's criterion fails, so p is composite
            raise ValidationError(f"{p} is not prime")
    raise ValidationError(f"no square root of -1 modulo {p}")


def decompose_split_prime(p: int) -> tuple[int, int]:
    """Return ``(a, b)`` with ``a^2 + b^2 = p`` and ``a > b > 0``.

    Uses the Hermite-Serret descent: run Euclid on ``(p, s)`` with
    ``s^2 = -1 mod p`` until the remainder drops below ``sqrt(p)``.
    """
    p = int(p)
    if p < 5 or p % 4 != 1:
        raise ValidationError(f"{p} is not a prime congruent to 1 mod 4")
    s = sqrt_minus_one(p)
    r0, r1 = p, s
    while r1 * r1 > p:
        r0, r1 = r1, r0 % r1
    a = r1
    b = math.isqrt(p - a * a)
    if a * a + b * b != p:
        raise ValidationError(f"{p} is not prime (no sum-of-squares decomposition found)")
    return (a, b) if a > b else (b, a)


def _powmod_vec(base, e, p):
    """Elementwise ``base**e mod p`` for int64 arrays with ``p < 3e9``."""
    result = np.ones_like(p)
    base = base % p
    e = e.copy()
    while np.any(e):
        odd = (e & 1).astype(bool)
        result = np.where(odd, result * base % p, result)
        base = base * base % p
        e >>= 1
    return result


_VEC_LIMIT = 3_000_000_000  # keeps p^2 inside int64


def decompose_split_primes(primes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`decompose_split_prime` over an array of primes."""
    primes = np.asarray(primes, dtype=np.int64)
    if primes.size == 0:
        return primes.copy(), primes.copy()
    if np.any(primes % 4 != 1):
        raise ValidationError("all primes must be 1 mod 4")
    if primes.max() >= _VEC_LIMIT:
        pairs = [decompose_split_prime(int(p)) for p in primes]
        a, b = zip(*pairs)
        return np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)

    e = (primes - 1) // 4
    s = np.zeros_like(primes)
    todo = np.ones(primes.size, dtype=bool)
    c = 2
    while np.any(todo):
        idx = np.flatnonzero(todo)
        p = primes[idx]
        t = _powmod_vec(np.full(idx.size, c, dtype=np.int64), e[idx], p)
        hit = t * t % p == p - 1
        s[idx[hit]] = t[hit]
        todo[idx[hit]] = False
        c += 1

    r0, r1 = primes.copy(), s
    active = r1 * r1 > primes
    while np.any(active):
        nr = np.where(active, r0 % np.where(active, r1, 1), r1)
        r0 = np.where(active, r1, r0)
        r1 = nr
        active = r1 * r1 > primes
    a = r1
    b = np.floor(np.sqrt((primes - a * a).astype(np.float64))).astype(np.int64)
    b += (b + 1) * (b + 1) <= primes - a * a
    b -= b * b > primes - a * a
    if np.any(a * a + b * b != primes):
        raise ValidationError("input contains composites")
    return np.maximum(a, b), np.minimum(a, b)


# ---------------------------------------------------------------------------
# angle tables


@dataclass
class AngleTable:
    """Column storage of :class:`PrimeAngle` records, sorted by (norm, angle)."""

    x: int
    norm: np.ndarray
    angle: np.ndarray
    kind: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __len__(self):
        return int(self.norm.size)

    def __iter__(self) -> Iterator[PrimeAngle]:
        for n, t, k, a, b in zip(self.norm, self.angle, self.kind, self.a, self.b):
            yield PrimeAngle(int(n), float(t), Kind(int(k)), (int(a), int(b)))

    def split_only(self) -> "AngleTable":
        keep = self.kind == Kind.SPLIT
        return AngleTable(self.x, self.norm[keep], self.angle[keep], self.kind[keep],
                          self.a[keep], self.b[keep])

    def restrict(self, x: int) -> "AngleTable":
        keep = self.norm <= x
        return AngleTable(x, self.norm[keep], self.angle[keep], self.kind[keep],
                          self.a[keep], self.b[keep])


def prime_ideal_angles(x: int, split_only: bool = False, threads: int = 1,
                       primes: np.ndarray | None = None) -> AngleTable:
    """Every prime ideal of Z[i] with norm ``<= x`` and its angle in ``[0, pi/2)``.

    Count of records: one ramified ideal, two per split prime ``p <= x``,
    one per inert prime with ``p^2 <= x``.  ``split_only`` drops the inert
    and ramified records.
    """
    x = int(x)
    if x < 2:
        raise ValidationError("prime_ideal_angles needs x >= 2")
    if primes is None:
        primes = sieve_primes(x, threads=threads)
    check_budget(3 * 29 * primes.size, f"angle table up to {x}")

    split = primes[primes % 4 == 1]
    big, small = decompose_split_primes(split)
    inert = primes[(primes % 4 == 3) & (primes <= math.isqrt(x))]

    norm = np.concatenate([[2], split, split, inert * inert]).astype(np.int64)
    a = np.concatenate([[1], big, small, inert]).astype(np.int64)
    b = np.concatenate([[1], small, big, np.zeros_like(inert)]).astype(np.int64)
    kind = np.concatenate([
        [Kind.RAMIFIED],
        np.full(2 * split.size, Kind.SPLIT),
        np.full(inert.size, Kind.INERT),
    ]).astype(np.uint8)
    angle = np.arctan2(b.astype(np.float64), a.astype(np.float64))

    order = np.lexsort((angle, norm))
    table = AngleTable(x, norm[order], angle[order], kind[order], a[order], b[order])
    return table.split_only() if split_only else table


# ---------------------------------------------------------------------------
# prime powers


@dataclass
class PowerTable:
    """Column storage of :class:`PrimePowerRecord` records, sorted by (norm, angle)."""

    X: int
    norm: np.ndarray
    angle: np.ndarray
    lam: np.ndarray
    is_prime: np.ndarray

    def __len__(self):
        return int(self.norm.size)

    def __iter__(self) -> Iterator[PrimePowerRecord]:
        for n, t, l in zip(self.norm, self.angle, self.lam):
            yield PrimePowerRecord(int(n), float(t), float(l))

    def primes_only(self) -> "PowerTable":
        k = self.is_prime
        return PowerTable(self.X, self.norm[k], self.angle[k], self.lam[k], self.is_prime[k])

    def window(self, lo: float, hi: float) -> "PowerTable":
        """Records with ``lo <= norm <= hi``."""
        k = (self.norm >= lo) & (self.norm <= hi)
        return PowerTable(self.X, self.norm[k], self.angle[k], self.lam[k], self.is_prime[k])


def _normalize_generator(a, b):
    """Multiply ``a+bi`` by a unit so that ``a > 0`` and ``b >= 0``."""
    for _ in range(4):
        if a > 0 and b >= 0:
            return a, b
        a, b = -b, a
    raise ValidationError("zero has no angle")


def gaussian_angle(a: int, b: int) -> float:
    """Angle in ``[0, pi/2)`` of the ideal generated by ``a+bi``."""
    a, b = _normalize_generator(a, b)
    return math.atan2(b, a)


def prime_power_records(X: int, threads: int = 1) -> PowerTable:
    """Every prime-ideal power ``p^r`` with norm ``<= X``, with von Mangoldt weight.

    Powers are formed in exact Gaussian-integer arithmetic, so the angle of
    ``p^r`` is ``atan2`` of integers rather than ``r * theta`` reduced in
    floating point.
    """
    X = int(X)
    if X < 2:
        raise ValidationError("prime_power_records needs X >= 2")
    base = prime_ideal_angles(X, threads=threads)
    norms = [base.norm]
    angles = [base.angle]
    lams = [np.log(base.norm.astype(np.float64))]
    flags = [np.ones(len(base), dtype=bool)]

    extra_n, extra_t, extra_l = [], [], []
    sq = base.norm * base.norm <= X
    for n, a, b in zip(base.norm[sq], base.a[sq], base.b[sq]):
        n, a, b = int(n), int(a), int(b)
        ga, gb = a, b
        pw = n
        while pw * n <= X:
            ga, gb = ga * a - gb * b, ga * b + gb * a
            pw *= n
            extra_n.append(pw)
            extra_t.append(gaussian_angle(ga, gb))
            extra_l.append(math.log(n))
    if extra_n:
        norms.append(np.array(extra_n, dtype=np.int64))
        angles.append(np.array(extra_t))
        lams.append(np.array(extra_l))
        flags.append(np.zeros(len(extra_n), dtype=bool))

    norm = np.concatenate(norms)
    angle = np.concatenate(angles)
    lam = np.concatenate(lams)
    flag = np.concatenate(flags)
    order = np.lexsort((angle, norm))
    return PowerTable(X, norm[order], angle[order], lam[order], flag[order])


# ---------------------------------------------------------------------------
# binary cache

CACHE_MAGIC = b"GPAN1\0"
_RECORD = np.dtype([("norm", "<u8"), ("angle", "<f8"), ("kind", "u1"), ("a", "<u4"), ("b", "<u4")])


def write_angle_cache(path, table: AngleTable) -> None:
    """Write ``table`` in the little-endian GPAN1 record format."""
    rec = np.empty(len(table), dtype=_RECORD)
    rec["norm"] = table.norm
    rec["angle"] = table.angle
    rec["kind"] = table.kind
    rec["a"] = table.a
    rec["b"] = table.b
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<QQ", table.x, len(table)))
        fh.write(rec.tobytes())


def read_angle_cache(path) -> AngleTable:
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise ValidationError(f"{path}: not a GPAN1 angle cache")
        x, count = struct.unpack("<QQ", fh.read(16))
        rec = np.frombuffer(fh.read(), dtype=_RECORD)
    if rec.size != count:
        raise ValidationError(f"{path}: header says {count} records, found {rec.size}")
    return AngleTable(
        int(x),
        rec["norm"].astype(np.int64),
        rec["angle"].copy(),
        rec["kind"].copy(),
        rec["a"].astype(np.int64),
        rec["b"].astype(np.int64),
    )
