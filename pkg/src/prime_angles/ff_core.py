"""Polynomials and truncated power series over a prime field F_p.

The variable is ``S``.  ``sigma`` sends ``S`` to ``-S``; the norm of a
series is ``f * sigma(f)``.  The norm-one series with constant term 1
form the direction group of order ``p^kappa`` (``kappa = k // 2``), and the
direction of a polynomial is the unique square root of ``f / sigma(f)``
in that group.

Scalar values are small frozen dataclasses over tuples.  Functions whose
names start with ``batch_`` act on ``(n, k)`` int64 arrays of series
coefficients and are what the enumeration code uses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError, check_budget


def _check_prime(p: int) -> int:
    p = int(p)
    if p < 3 or p % 2 == 0 or any(p % d == 0 for d in range(3, int(p ** 0.5) + 1, 2)):
        raise ValidationError(f"q={p} must be an odd prime")
    return p


@dataclass(frozen=True)
class FqElem:
    residue: int
    p: int

    def __post_init__(self):
        _check_prime(self.p)
        if not 0 <= self.residue < self.p:
            raise ValidationError(f"residue {self.residue} not in [0, {self.p})")

    def __add__(self, other):
        return FqElem((self.residue + other.residue) % self.p, self.p)

    def __sub__(self, other):
        return FqElem((self.residue - other.residue) % self.p, self.p)

    def __mul__(self, other):
        return FqElem(self.residue * other.residue % self.p, self.p)

    def __neg__(self):
        return FqElem(-self.residue % self.p, self.p)

    def inverse(self):
        if self.residue == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return FqElem(pow(self.residue, -1, self.p), self.p)


@dataclass(frozen=True)
class PolyFq:
    """Polynomial in ``S``; ``coeffs`` ascending, no trailing zeros."""

    coeffs: tuple[int, ...]
    p: int

    def __post_init__(self):
        _check_prime(self.p)
        c = tuple(int(x) % self.p for x in self.coeffs)
        while c and c[-1] == 0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % self.p
        return acc

    def __mul__(self, other):
        return PolyFq(poly_mul(self.coeffs, other.coeffs, self.p), self.p)

    def __pow__(self, e: int):
        out = PolyFq((1,), self.p)
        for _ in range(e):
            out = out * self
        return out

    def __str__(self):
        return format_poly(self.coeffs)


@dataclass(frozen=True)
class SeriesModSk:
    """Element of ``F_p[S]/(S^k)``; always exactly ``k`` coefficients."""

    coeffs: tuple[int, ...]
    p: int

    def __post_init__(self):
        _check_prime(self.p)
        if not self.coeffs:
            raise ValidationError("series needs k >= 1 coefficients")
        object.__setattr__(self, "coeffs", tuple(int(x) % self.p for x in self.coeffs))

    @classmethod
    def from_poly(cls, f: PolyFq, k: int) -> "SeriesModSk":
        c = list(f.coeffs[:k]) + [0] * max(0, k - len(f.coeffs))
        return cls(tuple(c), f.p)

    @classmethod
    def one(cls, p: int, k: int) -> "SeriesModSk":
        return cls((1,) + (0,) * (k - 1), p)

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def is_unit(self) -> bool:
        return self.coeffs[0] != 0

    def __mul__(self, other):
        _same(self, other)
        return SeriesModSk(series_mul(self.coeffs, other.coeffs, self.p), self.p)

    def inverse(self):
        return SeriesModSk(series_inv(self.coeffs, self.p), self.p)

    def __truediv__(self, other):
        return self * other.inverse()

    def __pow__(self, e: int):
        return SeriesModSk(series_pow(self.coeffs, int(e), self.p), self.p)

    def code(self) -> int:
        return series_code(self.coeffs, self.p)

    def __str__(self):
        return format_series(self.coeffs)


def _same(a, b):
    if a.p != b.p or len(a.coeffs) != len(b.coeffs):
        raise ValidationError("series over different fields or truncations")


@dataclass(frozen=True)
class DirectionElement:
    """A norm-one series with constant term 1."""

    inner: SeriesModSk

    def __post_init__(self):
        c = self.inner.coeffs
        if c[0] != 1:
            raise ValidationError("direction element needs constant term 1")
        if norm(self.inner).coeffs != SeriesModSk.one(self.inner.p, len(c)).coeffs:
            raise ValidationError("direction element must have norm 1")

    @property
    def p(self):
        return self.inner.p

    @property
    def k(self):
        return self.inner.k

    def __mul__(self, other):
        return DirectionElement(self.inner * other.inner)

    def inverse(self):
        # norm one means the inverse is sigma
        return DirectionElement(sigma(self.inner))

    def __pow__(self, e: int):
        return DirectionElement(self.inner ** (e % group_order(self.p, self.k)))

    def code(self) -> int:
        return self.inner.code()

    def __str__(self):
        return str(self.inner)


# ---------------------------------------------------------------------------
# tuple-level arithmetic


def poly_mul(a, b, p):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return tuple(c % p for c in out)


def _trim(c):
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def poly_sub(a, b, p):
    n = max(len(a), len(b))
    return _trim(((a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)) % p for i in range(n))


def poly_divmod(a, b, p):
    a, b = list(_trim(a)), _trim(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv = pow(b[-1], -1, p)
    db = len(b) - 1
    quot = [0] * max(0, len(a) - db)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i] * inv % p
        if c:
            quot[i - db] = c
            for j in range(db + 1):
                a[i - db + j] = (a[i - db + j] - c * b[j]) % p
    return _trim(quot), _trim(a[:db])


def poly_gcd(a, b, p):
    """Monic gcd (empty tuple when both are zero)."""
    a, b = _trim(a), _trim(b)
    while b:
        a, b = b, poly_divmod(a, b, p)[1]
    if not a:
        return a
    inv = pow(a[-1], -1, p)
    return tuple(c * inv % p for c in a)


def poly_powmod(a, e, m, p):
    out = (1,)
    base = poly_divmod(a, m, p)[1]
    while e:
        if e & 1:
            out = poly_divmod(poly_mul(out, base, p), m, p)[1]
        base = poly_divmod(poly_mul(base, base, p), m, p)[1]
        e >>= 1
    return out


def series_mul(a, b, p):
    k = len(a)
    out = [0] * k
    for i, x in enumerate(a):
        if x:
            for j in range(k - i):
                out[i + j] += x * b[j]
    return tuple(c % p for c in out)


def series_inv(a, p):
    if a[0] % p == 0:
        raise ValidationError("series with zero constant term is not invertible")
    k = len(a)
    inv0 = pow(a[0], -1, p)
    b = [inv0] + [0] * (k - 1)
    for i in range(1, k):
        s = sum(a[j] * b[i - j] for j in range(1, i + 1))
        b[i] = -inv0 * s % p
    return tuple(b)


def series_pow(a, e, p):
    if e < 0:
        a, e = series_inv(a, p), -e
    out = (1,) + (0,) * (len(a) - 1)
    base = tuple(a)
    while e:
        if e & 1:
            out = series_mul(out, base, p)
        base = series_mul(base, base, p)
        e >>= 1
    return out


def series_code(coeffs, p) -> int:
    code = 0
    for c in reversed(coeffs):
        code = code * p + int(c)
    return code


def series_from_code(code: int, p: int, k: int) -> tuple[int, ...]:
    out = []
    for _ in range(k):
        code, r = divmod(code, p)
        out.append(r)
    return tuple(out)


# ---------------------------------------------------------------------------
# the involution, norm, group


def sigma(f: SeriesModSk) -> SeriesModSk:
    return SeriesModSk(tuple(-c if i % 2 else c for i, c in enumerate(f.coeffs)), f.p)


def norm(f: SeriesModSk) -> SeriesModSk:
    return f * sigma(f)


def kappa_of(k: int) -> int:
    return k // 2


def group_order(p: int, k: int) -> int:
    return p ** (k // 2)


def _check_qk(q, k):
    _check_prime(q)
    if int(k) < 1:
        raise ValidationError("k must be >= 1")
    return int(q), int(k)


def enumerate_direction_group(q: int, k: int) -> list[DirectionElement]:
    """All elements, ordered by their base-``q`` coefficient code."""
    q, k = _check_qk(q, k)
    arr = direction_group_array(q, k)
    return [DirectionElement(SeriesModSk(tuple(int(c) for c in row), q)) for row in arr]


@lru_cache(maxsize=32)
def direction_group_array(q: int, k: int) -> np.ndarray:
    """Group elements as a read-only ``(q^kappa, k)`` array sorted by code.

    Built as ``r / sigma(r)`` over the representatives ``r = 1 + (odd
    powers of S)``.  Two such ``r`` with equal image differ by a
    sigma-invariant factor, which forces them equal, so the map is injective
    and hits all ``q^kappa`` elements.
    """
    q, k = _check_qk(q, k)
    size = group_order(q, k)
    check_budget(size * k * 8 * 4, "direction group")
    odd = list(range(1, k, 2))
    reps = np.zeros((size, k), dtype=np.int64)
    reps[:, 0] = 1
    idx = np.arange(size)
    for pos in odd:
        reps[:, pos] = idx % q
        idx //= q
    g = batch_mul(reps, batch_inv(batch_sigma(reps, q), q), q)
    g = g[np.argsort(batch_codes(g, q), kind="stable")]
    g.setflags(write=False)
    return g


def sqrt_in_group(u: DirectionElement) -> DirectionElement:
    """Unique square root in the odd-order group, ``u^((q^kappa + 1) / 2)``."""
    e = (group_order(u.p, u.k) + 1) // 2
    return DirectionElement(SeriesModSk(series_pow(u.inner.coeffs, e, u.p), u.p))


def _as_poly(f, p=None) -> PolyFq:
    if isinstance(f, PolyFq):
        return f
    if isinstance(f, str):
        if p is None:
            raise ValidationError("parsing a polynomial needs the field size")
        return parse_poly(f, p)
    raise ValidationError(f"expected a polynomial, got {type(f).__name__}")


def direction(f: PolyFq, k: int) -> DirectionElement:
    f = _as_poly(f)
    if not f.coeffs or f.coeffs[0] == 0:
        raise ValidationError("direction needs f(0) != 0")
    s = SeriesModSk.from_poly(f, k)
    ratio = s / sigma(s)
    # f/sigma(f) has constant term 1 and norm 1 by construction
    return sqrt_in_group(DirectionElement(ratio))


def same_sector(f: PolyFq, u: DirectionElement, k: int) -> bool:
    return direction(f, k).inner.coeffs == u.inner.coeffs


def same_coset(f: PolyFq, u: DirectionElement, k: int) -> bool:
    """Independent sector test: ``f * u^-1`` is sigma-invariant mod ``S^k``."""
    f = _as_poly(f)
    if not f.coeffs or f.coeffs[0] == 0:
        raise ValidationError("same_coset needs f(0) != 0")
    g = SeriesModSk.from_poly(f, k) * sigma(u.inner)
    return sigma(g).coeffs == g.coeffs


def factor_even_direction(g: SeriesModSk) -> tuple[SeriesModSk, DirectionElement]:
    """Split a unit as ``h * u`` with ``h`` sigma-invariant and ``u`` of norm one."""
    if not g.is_unit():
        raise ValidationError("only units factor")
    u = sqrt_in_group(DirectionElement((g / sigma(g))))
    return g * sigma(u.inner), u


def to_ab(f: PolyFq) -> tuple[PolyFq, PolyFq]:
    """``(A, B)`` with ``f(S) = A(T) + S*B(T)`` under ``T = -S^2``.

    Then ``f(S) f(-S) = A(T)^2 + T*B(T)^2``.
    """
    p = f.p
    ev = f.coeffs[0::2]
    od = f.coeffs[1::2]
    A = tuple(c if i % 2 == 0 else -c for i, c in enumerate(ev))
    B = tuple(c if i % 2 == 0 else -c for i, c in enumerate(od))
    return PolyFq(A, p), PolyFq(B, p)


def from_ab(A: PolyFq, B: PolyFq) -> PolyFq:
    p = A.p
    n = max(len(A.coeffs), len(B.coeffs))
    out = [0] * (2 * n)
    for i, c in enumerate(A.coeffs):
        out[2 * i] = c if i % 2 == 0 else -c
    for i, c in enumerate(B.coeffs):
        out[2 * i + 1] = c if i % 2 == 0 else -c
    return PolyFq(tuple(out), p)


# ---------------------------------------------------------------------------
# text format


_TERM = re.compile(r"^\s*(\d*)\s*(\*?\s*S(?:\s*\^\s*(\d+))?)?\s*$")


def _parse_terms(text: str, p: int) -> dict[int, int]:
    text = text.strip()
    if not text:
        raise ValidationError("empty polynomial text")
    terms: dict[int, int] = {}
    for part in text.split("+"):
        m = _TERM.match(part)
        if not m or (not m.group(1) and not m.group(2)):
            raise ValidationError(f"cannot parse term {part!r}")
        coef = int(m.group(1)) if m.group(1) else 1
        if m.group(2) and m.group(1) and "*" not in m.group(2):
            raise ValidationError(f"missing '*' in term {part!r}")
        if not m.group(1) and m.group(2) and "*" in m.group(2):
            raise ValidationError(f"dangling '*' in term {part!r}")
        deg = 0 if not m.group(2) else int(m.group(3) or 1)
        if coef >= p:
            raise ValidationError(f"coefficient {coef} not in [0, {p})")
        if deg in terms:
            raise ValidationError(f"degree {deg} appears twice")
        terms[deg] = coef
    return terms


def parse_poly(text: str, p: int) -> PolyFq:
    """Inverse of :func:`format_poly`; also accepts omitted or reordered terms."""
    p = _check_prime(p)
    terms = _parse_terms(text, p)
    c = [0] * (max(terms) + 1)
    for d, v in terms.items():
        c[d] = v
    return PolyFq(tuple(c), p)


def parse_series(text: str, p: int, k: int) -> SeriesModSk:
    terms = _parse_terms(text, _check_prime(p))
    if max(terms) >= k:
        raise ValidationError(f"term of degree {max(terms)} does not fit mod S^{k}")
    c = [0] * k
    for d, v in terms.items():
        c[d] = v
    return SeriesModSk(tuple(c), p)


def _term(i, c):
    if i == 0:
        return str(c)
    if i == 1:
        return f"{c}*S"
    return f"{c}*S^{i}"


def format_poly(coeffs) -> str:
    """Every coefficient up to the degree, e.g. ``1+0*S+2*S^2``; ``0`` for zero."""
    if not coeffs:
        return "0"
    return "+".join(_term(i, int(c)) for i, c in enumerate(coeffs))


def format_series(coeffs) -> str:
    return "+".join(_term(i, int(c)) for i, c in enumerate(coeffs))


# ---------------------------------------------------------------------------
# batched arithmetic on (n, k) coefficient arrays


def batch_sigma(a: np.ndarray, q: int) -> np.ndarray:
    out = a.copy()
    out[:, 1::2] = (-out[:, 1::2]) % q
    return out


def batch_mul(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    n, k = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros((n, k), dtype=np.int64)
    for i in range(k):
        acc = np.zeros(n, dtype=np.int64)
        for j in range(i + 1):
            acc += a[:, j] * b[:, i - j]
        out[:, i] = acc % q
    return out


def batch_inv(a: np.ndarray, q: int) -> np.ndarray:
    if np.any(a[:, 0] % q == 0):
        raise ValidationError("non-unit in batch_inv")
    inv_table = np.array([0] + [pow(x, -1, q) for x in range(1, q)], dtype=np.int64)
    n, k = a.shape
    inv0 = inv_table[a[:, 0] % q]
    b = np.zeros((n, k), dtype=np.int64)
    b[:, 0] = inv0
    for i in range(1, k):
        acc = np.zeros(n, dtype=np.int64)
        for j in range(1, i + 1):
            acc += a[:, j] * b[:, i - j]
        b[:, i] = (-(inv0 * (acc % q))) % q
    return b


def batch_pow(a: np.ndarray, e: int, q: int) -> np.ndarray:
    n, k = a.shape
    out = np.zeros((n, k), dtype=np.int64)
    out[:, 0] = 1
    base = a.copy()
    while e:
        if e & 1:
            out = batch_mul(out, base, q)
        e >>= 1
        if e:
            base = batch_mul(base, base, q)
    return out


def batch_codes(a: np.ndarray, q: int) -> np.ndarray:
    code = np.zeros(a.shape[0], dtype=np.int64)
    for i in range(a.shape[1] - 1, -1, -1):
        code = code * q + a[:, i]
    return code


def batch_direction(f: np.ndarray, q: int) -> np.ndarray:
    """Directions of units given by their low ``k`` coefficients."""
    k = f.shape[1]
    ratio = batch_mul(f, batch_inv(batch_sigma(f, q), q), q)
    return batch_pow(ratio, (group_order(q, k) + 1) // 2, q)


def group_index(elements: np.ndarray, q: int) -> np.ndarray:
    """Position of each row in :func:`direction_group_array` order."""
    k = elements.shape[1]
    ref = batch_codes(direction_group_array(q, k), q)
    codes = batch_codes(elements, q)
    idx = np.searchsorted(ref, codes)
    idx_c = np.minimum(idx, ref.size - 1)
    if np.any(ref[idx_c] != codes):
        raise ValidationError("element outside the direction group")
    return idx_c


def monic_block(q: int, n: int, k: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Low ``k`` coefficients of monic degree-``n`` polynomials.

    Row ``i`` is the polynomial whose lower coefficients are the base-``q``
    digits of ``i``; ``start``/``stop`` slice that order.
    """
    total = q ** n
    stop = total if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.zeros((idx.size, k), dtype=np.int64)
    for i in range(min(n, k)):
        out[:, i] = idx % q
        idx = idx // q
    if n < k:
        out[:, n] = 1
    return out
