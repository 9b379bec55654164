"""Prime polynomials, von Mangoldt weights and sector counts in F_q[S].

Everything here is exhaustive enumeration in exact integers.  Monic
polynomials of degree ``nu`` are indexed by the base-``q`` code of their
lower ``nu`` coefficients; :func:`lambda_table` gives the von Mangoldt
weight for every code at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import BudgetError, ValidationError, budget_bytes
from .ff_core import (
    DirectionElement,
    PolyFq,
    _check_prime,
    batch_direction,
    group_index,
    group_order,
    monic_block,
    poly_divmod,
    poly_gcd,
    poly_powmod,
    poly_sub,
)

FF_CSV_HEADER = ("q", "k", "kappa", "nu", "mean_psi", "var_psi", "var_n", "prediction", "ratio")


def _prime_factors(n):
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(f: PolyFq) -> bool:
    """Rabin's test: ``S^(q^n) = S mod f`` and no factor of degree ``n/r``."""
    if not f.is_monic():
        raise ValidationError("is_irreducible expects a monic polynomial")
    n, p = f.degree, f.p
    if n < 1:
        raise ValidationError("is_irreducible needs degree >= 1")
    if n == 1:
        return True
    x = (0, 1)
    for r in _prime_factors(n):
        h = poly_sub(poly_powmod(x, p ** (n // r), f.coeffs, p), x, p)
        if len(poly_gcd(f.coeffs, h, p)) > 1:
            return False
    return poly_sub(poly_powmod(x, p ** n, f.coeffs, p), x, p) == ()


def von_mangoldt(f: PolyFq) -> int:
    """``deg P`` if ``f`` is a unit times ``P^j`` with ``P`` prime, else 0."""
    if f.degree < 1:
        raise ValidationError("von_mangoldt needs degree >= 1")
    p = f.p
    inv = pow(f.coeffs[-1], -1, p)
    g = PolyFq(tuple(c * inv for c in f.coeffs), p)
    n = g.degree
    for d in range(1, n + 1):
        if n % d:
            continue
        # the distinct-degree part of g in degree d
        x = (0, 1)
        h = poly_gcd(g.coeffs, poly_sub(poly_powmod(x, p ** d, g.coeffs, p), x, p), p)
        if len(h) == 1:
            continue
        if len(h) - 1 != d:
            return 0  # two or more distinct prime factors of degree d
        rest, P = g.coeffs, h
        while len(rest) > 1:
            q_, r = poly_divmod(rest, P, p)
            if r:
                return 0
            rest = q_
        return d
    return 0  # unreachable for n >= 1


def necklace_count(q: int, n: int) -> int:
    """Number of monic irreducibles of degree ``n`` over ``F_q``."""
    total = 0
    for d in range(1, n + 1):
        if n % d == 0:
            total += _mobius(d) * q ** (n // d)
    return total // n


def _mobius(n):
    out = 1
    for r in _prime_factors(n):
        if n % (r * r) == 0:
            return 0
        out = -out
    return out


# ---------------------------------------------------------------------------
# batched enumeration


def _check_rows(rows, width, what):
    need = rows * width * 8 * 3
    if need > budget_bytes():
        raise BudgetError(f"{what}: {rows} polynomials exceed the enumeration budget")


def _monic_coeffs(q, n):
    """Full coefficient arrays ``(q^n, n+1)`` of monic degree-``n`` polynomials."""
    return monic_block(q, n, n + 1)


def _poly_codes(c, q):
    """Codes of monic polynomials given full coefficient rows."""
    n = c.shape[1] - 1
    code = np.zeros(c.shape[0], dtype=np.int64)
    for i in range(n - 1, -1, -1):
        code = code * q + c[:, i]
    return code


def _batch_poly_mul(a, b, q):
    da, db = a.shape[1], b.shape[1]
    out = np.zeros((max(a.shape[0], b.shape[0]), da + db - 1), dtype=np.int64)
    for i in range(da):
        out[:, i:i + db] += a[:, i:i + 1] * b
    return out % q


@lru_cache(maxsize=64)
def irreducible_flags(q: int, n: int) -> np.ndarray:
    """Boolean mask over monic degree-``n`` codes, by sieving out products."""
    q = _check_prime(q)
    _check_rows(q ** n, n + 1, "irreducible sieve")
    flags = np.ones(q ** n, dtype=bool)
    for i in range(1, n // 2 + 1):
        a = _monic_coeffs(q, i)
        b = _monic_coeffs(q, n - i)
        ia = np.repeat(np.arange(a.shape[0]), b.shape[0])
        ib = np.tile(np.arange(b.shape[0]), a.shape[0])
        flags[_poly_codes(_batch_poly_mul(a[ia], b[ib], q), q)] = False
    flags.setflags(write=False)
    return flags


@lru_cache(maxsize=64)
def lambda_table(q: int, nu: int) -> np.ndarray:
    """von Mangoldt weight of every monic degree-``nu`` polynomial, by code."""
    q = _check_prime(q)
    if nu < 1:
        raise ValidationError("nu must be >= 1")
    _check_rows(q ** nu, nu + 1, "von Mangoldt table")
    lam = np.zeros(q ** nu, dtype=np.int64)
    for d in range(1, nu + 1):
        if nu % d:
            continue
        primes = _monic_coeffs(q, d)[irreducible_flags(q, d)]
        power = primes
        for _ in range(nu // d - 1):
            power = _batch_poly_mul(power, primes, q)
        lam[_poly_codes(power, q)] = d
    lam.setflags(write=False)
    return lam


def _check_params(q, k, nu):
    q = _check_prime(q)
    k, nu = int(k), int(nu)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if nu < 1:
        raise ValidationError("nu must be >= 1")
    return q, k, nu


@lru_cache(maxsize=64)
def sector_tables(q: int, k: int, nu: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sector ``Psi`` and prime counts, indexed like the direction group.

    Only polynomials with ``f(0) != 0`` are counted.
    """
    q, k, nu = _check_params(q, k, nu)
    lam = lambda_table(q, nu)
    K = group_order(q, k)
    codes = np.flatnonzero(lam)
    codes = codes[codes % q != 0]  # f(0) != 0
    psi = np.zeros(K, dtype=np.int64)
    primes = np.zeros(K, dtype=np.int64)
    chunk = 1 << 18
    for s in range(0, codes.size, chunk):
        c = codes[s:s + chunk]
        rows = _rows_for_codes(c, q, nu, k)
        idx = group_index(batch_direction(rows, q), q)
        w = lam[c]
        np.add.at(psi, idx, w)
        np.add.at(primes, idx[w == nu], 1)
    psi.setflags(write=False)
    primes.setflags(write=False)
    return psi, primes


def _rows_for_codes(codes, q, n, k):
    out = np.zeros((codes.size, k), dtype=np.int64)
    idx = codes.copy()
    for i in range(min(n, k)):
        out[:, i] = idx % q
        idx //= q
    if n < k:
        out[:, n] = 1
    return out


def _sector_position(u: DirectionElement, q, k):
    if u.p != q or u.k != k:
        raise ValidationError("sector element has the wrong field or truncation")
    return int(group_index(np.array([u.inner.coeffs], dtype=np.int64), q)[0])


def psi_sector(u: DirectionElement, k: int, nu: int) -> int:
    """Sum of von Mangoldt weights over monic degree-``nu`` f, f(0) != 0, in sector ``u``."""
    psi, _ = sector_tables(u.p, k, nu)
    return int(psi[_sector_position(u, u.p, k)])


def n_sector(u: DirectionElement, k: int, nu: int) -> int:
    """Number of monic primes of degree ``nu``, not ``S``, in sector ``u``."""
    _, primes = sector_tables(u.p, k, nu)
    return int(primes[_sector_position(u, u.p, k)])


def eta(nu: int) -> int:
    return 1 if nu % 2 == 0 else 0


def symplectic_factor(kappa: int, nu: int) -> int:
    """The bracketed factor of the large-q variance law, for ``nu >= 1``."""
    if nu <= kappa - 1:
        return nu + eta(nu)
    if nu <= 2 * kappa - 2:
        return nu - 1 + eta(nu)
    return 2 * kappa - 2


def theorem_applies(q: int, kappa: int) -> bool:
    return kappa >= 3 or (kappa == 2 and q % 5 != 0)


@dataclass(frozen=True)
class FfVarianceReport:
    q: int
    k: int
    kappa: int
    nu: int
    mean_psi: float
    var_psi: float
    mean_n: float
    var_n: float
    theorem_prediction: float  # q^(nu-kappa) times the symplectic factor
    eta: int
    var_psi_exact: Fraction | None = None
    var_n_exact: Fraction | None = None
    method: str = "brute"

    @property
    def theorem_applies(self) -> bool:
        return theorem_applies(self.q, self.kappa)

    @property
    def ratio(self) -> float:
        if self.theorem_prediction == 0:
            return math.nan
        return self.var_psi / self.theorem_prediction

    @property
    def n_ratio(self) -> float:
        """``nu^2 Var(N) / q^(nu - kappa)``."""
        return self.nu ** 2 * self.var_n / self.q ** (self.nu - self.kappa)

    def row(self):
        return (self.q, self.k, self.kappa, self.nu, self.mean_psi, self.var_psi,
                self.var_n, self.theorem_prediction, self.ratio)


def _exact_var(values: np.ndarray) -> tuple[Fraction, Fraction]:
    K = values.size
    total = sum(int(v) for v in values)
    sq = sum(int(v) * int(v) for v in values)
    return Fraction(total, K), Fraction(K * sq - total * total, K * K)


def prediction(q: int, k: int, nu: int) -> float:
    kappa = k // 2
    return float(q) ** (nu - kappa) * symplectic_factor(kappa, nu)


def ff_variance(q: int, k: int, nu: int) -> FfVarianceReport:
    """Exact sector mean and variance of ``Psi`` and ``N`` by enumeration."""
    q, k, nu = _check_params(q, k, nu)
    try:
        psi, primes = sector_tables(q, k, nu)
    except BudgetError as exc:
        raise BudgetError(f"{exc}; use the spectral path (ff_spectral.spectral_variance)") from exc
    m_psi, v_psi = _exact_var(psi)
    m_n, v_n = _exact_var(primes)
    kappa = k // 2
    return FfVarianceReport(
        q, k, kappa, nu, float(m_psi), float(v_psi), float(m_n), float(v_n),
        prediction(q, k, nu), eta(nu), v_psi, v_n, "brute",
    )


def remainder_meansquare(q: int, k: int, nu: int) -> float:
    """Sector average of ``R(u)^2`` with ``R = Psi - nu * N`` (prime powers of degree < nu)."""
    q, k, nu = _check_params(q, k, nu)
    psi, primes = sector_tables(q, k, nu)
    r = [int(a) - nu * int(b) for a, b in zip(psi, primes)]
    return float(Fraction(sum(x * x for x in r), len(r)))


def remainder_bound(q: int, k: int, nu: int) -> float:
    kappa = k // 2
    return float(q) ** (nu - 2 * kappa) + float(q) ** (2 * nu / 3 - kappa)


def prime_count(q: int, nu: int, exclude_s: bool = True) -> int:
    n = necklace_count(q, nu)
    return n - 1 if exclude_s and nu == 1 else n
