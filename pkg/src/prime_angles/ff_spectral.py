"""Super-even characters, their L-polynomials and the spectral variance.

The direction group is abelian of order ``q^kappa``; a basis of cyclic
factors is found greedily and every element gets an exponent vector.
Characters are exponent vectors too, so character values stay exact
(integers mod the group exponent) until a sum is formed.  On a unit ``f``
the character is ``chi(direction(f))`` and it vanishes on multiples of ``S``.

L-polynomial coefficients ``c_n = sum over monic deg n of Xi(f)`` are the
group Fourier transform of the direction histogram of degree-``n``
polynomials, so all characters are handled by one ``fftn`` per degree.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError, check_budget
from .ff_core import (
    DirectionElement,
    PolyFq,
    _check_prime,
    batch_codes,
    batch_direction,
    batch_mul,
    batch_pow,
    direction,
    direction_group_array,
    group_index,
    group_order,
    monic_block,
)
from .ff_stats import (
    FfVarianceReport,
    eta,
    lambda_table,
    prediction,
    prime_count,
)

TABLE_BUDGET = 10 ** 5  # characters
CERT_BUDGET = 2 * 10 ** 6  # polynomials enumerated for the degree certificate


# ---------------------------------------------------------------------------
# group structure


@dataclass(frozen=True)
class GroupBasis:
    q: int
    k: int
    orders: tuple[int, ...]  # cyclic factor orders, non-increasing
    coords: np.ndarray  # (K, r) exponent vector of each element, group order

    @property
    def size(self) -> int:
        return int(np.prod(self.orders, dtype=np.int64)) if self.orders else 1

    @property
    def exponent(self) -> int:
        return self.orders[0] if self.orders else 1


def _power_q(x, q):
    return batch_pow(x, q, q)


@lru_cache(maxsize=16)
def group_basis(q: int, k: int) -> GroupBasis:
    """Cyclic decomposition of the direction group by greedy order-finding.

    Take an element of largest order modulo the span found so far, lift it
    so its order equals that quotient order, and extend the span.
    """
    q = _check_prime(q)
    G = direction_group_array(q, k)
    K = G.shape[0]
    if K > TABLE_BUDGET:
        check_budget(K * K, "character table")  # raises unless the budget was raised
    kk = G.shape[1]
    ident = np.zeros((1, kk), dtype=np.int64)
    ident[0, 0] = 1
    span = ident
    span_codes = batch_codes(span, q)
    span_coords = np.zeros((1, 0), dtype=np.int64)
    orders: list[int] = []
    basis_rows: list[np.ndarray] = []
    while span.shape[0] < K:
        order_sorted = np.argsort(span_codes)
        sorted_codes = span_codes[order_sorted]

        def lookup(rows):
            c = batch_codes(rows, q)
            i = np.minimum(np.searchsorted(sorted_codes, c), sorted_codes.size - 1)
            return sorted_codes[i] == c, order_sorted[i]

        # quotient order exponent of every element
        y = G.copy()
        e = np.zeros(K, dtype=np.int64)
        inside, _ = lookup(y)
        while not inside.all():
            out = ~inside
            e[out] += 1
            y[out] = _power_q(y[out], q)
            inside[out] = lookup(y[out])[0]
        pick = int(np.argmax(e))  # first element of the largest quotient order
        ep = int(e[pick])
        x = G[pick:pick + 1]
        z = x
        for _ in range(ep):
            z = _power_q(z, q)
        _, pos = lookup(z)
        c = span_coords[pos[0]]
        step = q ** ep
        if np.any(c % step):
            raise ValidationError("greedy basis lift failed; group is not a direct sum here")
        # x * prod g_i^(-c_i / q^e) has order exactly q^e
        for i, o in enumerate(orders):
            t = int((-c[i] // step) % o)
            if t:
                x = batch_mul(x, batch_pow(basis_rows[i], t, q), q)
        basis_rows.append(x)
        powers = [ident]
        for _ in range(step - 1):
            powers.append(batch_mul(powers[-1], x, q))
        new_rows, new_coords = [], []
        for j, pw in enumerate(powers):
            new_rows.append(batch_mul(span, pw, q))
            new_coords.append(np.hstack([span_coords, np.full((span.shape[0], 1), j, dtype=np.int64)]))
        span = np.vstack(new_rows)
        span_coords = np.vstack(new_coords)
        span_codes = batch_codes(span, q)
        orders.append(step)
    ref = batch_codes(G, q)
    order = np.argsort(span_codes)
    if not np.array_equal(span_codes[order], ref):
        raise ValidationError("basis span does not match the direction group")
    coords = span_coords[order]
    coords.setflags(write=False)
    return GroupBasis(q, k, tuple(orders), coords)


# ---------------------------------------------------------------------------
# characters


@dataclass(frozen=True)
class SuperEvenCharacter:
    """Character of the direction group, pulled back to units mod ``S^k``."""

    q: int
    k: int
    id: int
    exponents: tuple[int, ...]
    swan: int  # 0 for the trivial character

    @property
    def is_trivial(self) -> bool:
        return not any(self.exponents)

    def _basis(self):
        return group_basis(self.q, self.k)

    def phase_exponents(self, coords: np.ndarray) -> np.ndarray:
        """Exponents mod the group exponent ``E``; value is ``exp(2 pi i e / E)``."""
        b = self._basis()
        E = b.exponent
        scale = np.array([E // o for o in b.orders], dtype=np.int64)
        a = np.array(self.exponents, dtype=np.int64)
        return (coords @ (a * scale)) % E if coords.size else np.zeros(coords.shape[0], dtype=np.int64)

    def values(self) -> np.ndarray:
        """Complex values on the direction group, in group order."""
        b = self._basis()
        return np.exp(2j * np.pi * self.phase_exponents(b.coords) / b.exponent)

    def value(self, u: DirectionElement) -> complex:
        if u.p != self.q or u.k != self.k:
            raise ValidationError("element from a different direction group")
        i = int(group_index(np.array([u.inner.coeffs], dtype=np.int64), self.q)[0])
        b = self._basis()
        e = int(self.phase_exponents(b.coords[i:i + 1])[0])
        return cmath.exp(2j * math.pi * e / b.exponent)

    def __call__(self, f) -> complex:
        """Value on a polynomial (0 when ``f(0) = 0``) or a direction element."""
        if isinstance(f, DirectionElement):
            return self.value(f)
        if not isinstance(f, PolyFq):
            raise ValidationError("character argument must be PolyFq or DirectionElement")
        if not f.coeffs or f.coeffs[0] == 0:
            return 0j
        return self.value(direction(f, self.k))


@dataclass(frozen=True)
class CharacterTable:
    q: int
    k: int
    basis: GroupBasis
    exponents: np.ndarray  # (K, r), row id = character id
    swans: np.ndarray

    def __len__(self):
        return self.exponents.shape[0]

    def __getitem__(self, i) -> SuperEvenCharacter:
        return SuperEvenCharacter(self.q, self.k, int(i), tuple(int(a) for a in self.exponents[i]),
                                  int(self.swans[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def value_exponents(self) -> np.ndarray:
        """``(chars, elements)`` integer phase table mod the group exponent."""
        E = self.basis.exponent
        scale = np.array([E // o for o in self.basis.orders], dtype=np.int64)
        return (self.exponents * scale) @ self.basis.coords.T % E

    def value_matrix(self) -> np.ndarray:
        check_budget(len(self) ** 2 * 16, "character value matrix")
        return np.exp(2j * np.pi * self.value_exponents() / self.basis.exponent)

    def power_ids(self, m: int) -> np.ndarray:
        """Id of ``Xi^m`` for every character ``Xi``."""
        orders = np.array(self.basis.orders, dtype=np.int64)
        if orders.size == 0:
            return np.zeros(len(self), dtype=np.int64)
        e = (self.exponents * m) % orders
        return np.ravel_multi_index(tuple(e.T), self.basis.orders)

    def conj_ids(self) -> np.ndarray:
        return self.power_ids(-1)


def _exponent_grid(orders):
    if not orders:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(orders).reshape(len(orders), -1).T
    return grids.astype(np.int64)


@lru_cache(maxsize=16)
def build_character_table(q: int, k: int) -> CharacterTable:
    """All ``q^kappa`` super-even characters mod ``S^k`` with their Swan conductors."""
    q = _check_prime(q)
    k = int(k)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if group_order(q, k) > TABLE_BUDGET:
        check_budget(group_order(q, k) ** 2, "character table")
    basis = group_basis(q, k)
    ex = _exponent_grid(basis.orders)
    ex.setflags(write=False)
    swans = _swan_conductors(q, k, basis, ex)
    swans.setflags(write=False)
    return CharacterTable(q, k, basis, ex, swans)


def _swan_conductors(q, k, basis, ex):
    """Largest ``d < k`` with the character nontrivial on some ``1 + c S^j``, ``j >= d``.

    ``1 + (S^d)`` is generated by the elements ``1 + c S^j`` with ``j >= d``.
    """
    swans = np.zeros(ex.shape[0], dtype=np.int64)
    if not basis.orders:
        return swans
    E = basis.exponent
    scale = np.array([E // o for o in basis.orders], dtype=np.int64)
    for j in range(1, k):
        gens = np.zeros((q - 1, k), dtype=np.int64)
        gens[:, 0] = 1
        gens[:, j] = np.arange(1, q)
        idx = group_index(batch_direction(gens, q), q)
        ph = (ex * scale) @ basis.coords[idx].T % E
        nontrivial = np.any(ph != 0, axis=1)
        swans[nontrivial] = j
    return swans


# ---------------------------------------------------------------------------
# L-polynomials


def _histogram(q, k, n):
    """Direction histogram of monic degree-``n`` polynomials with ``f(0) != 0``."""
    K = group_order(q, k)
    hist = np.zeros(K, dtype=np.int64)
    total = q ** n
    chunk = 1 << 18
    for s in range(0, total, chunk):
        rows = monic_block(q, n, k, s, min(total, s + chunk))
        rows = rows[rows[:, 0] != 0]
        if rows.size:
            np.add.at(hist, group_index(batch_direction(rows, q), q), 1)
    return hist


def _fourier(table: CharacterTable, hist: np.ndarray) -> np.ndarray:
    """``sum_x hist[x] * Xi(x)`` for every character ``Xi``, in id order."""
    orders = table.basis.orders
    if not orders:
        return hist.astype(complex)
    grid = np.zeros(orders, dtype=np.float64)
    grid[tuple(table.basis.coords.T)] = hist
    # numpy's ifftn carries exp(+2 pi i a.c / ord) and a 1/size factor
    return (np.fft.ifftn(grid) * grid.size).ravel()


@lru_cache(maxsize=16)
def l_coefficients(q: int, k: int, upto: int | None = None) -> np.ndarray:
    """``(chars, upto + 1)`` complex array of ``c_n`` for ``n = 0..upto``.

    Degrees ``n >= k`` are enumerated only while ``q^n`` is within
    ``CERT_BUDGET``; beyond that they are set to 0, since the direction
    histogram of a full residue system mod ``S^k`` is flat.
    """
    table = build_character_table(q, k)
    upto = k - 1 if upto is None else int(upto)
    out = np.zeros((len(table), upto + 1), dtype=complex)
    for n in range(upto + 1):
        if n >= k and q ** n > CERT_BUDGET:
            continue
        out[:, n] = _fourier(table, _histogram(q, k, n))
    out.setflags(write=False)
    return out


def prime_sums_from_l(coeffs: np.ndarray, nu_max: int) -> np.ndarray:
    """``Psi(nu)`` for ``nu = 1..nu_max`` from ``z L'/L = sum Psi(nu) z^nu``."""
    coeffs = np.atleast_2d(coeffs)
    m, d1 = coeffs.shape
    c = np.zeros((m, nu_max + 1), dtype=complex)
    c[:, :min(d1, nu_max + 1)] = coeffs[:, :nu_max + 1]
    psi = np.zeros((m, nu_max + 1), dtype=complex)
    for nu in range(1, nu_max + 1):
        acc = nu * c[:, nu]
        for j in range(1, nu):
            acc = acc - psi[:, j] * c[:, nu - j]
        psi[:, nu] = acc
    return psi[:, 1:]


@dataclass(frozen=True)
class FrobeniusSpectrum:
    id: int
    swan: int
    lpoly: np.ndarray  # coefficients c_0..c_d
    eigenangles: np.ndarray  # angles of the unitarized Frobenius eigenvalues
    roots: np.ndarray  # zeros of L(z) / (1 - z)
    trivial_zero_residual: float  # |L(1)|
    root_residual: float  # max |L(z_j)|
    rh_residual: float  # max | |z_j| sqrt(q) - 1 |
    certificate: tuple[tuple[int, float], ...] = field(default=())  # (n, |c_n|) above the degree
    q: int = 0

    def trace(self, nu: int) -> complex:
        return complex(np.exp(1j * nu * self.eigenangles).sum())

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "swan": self.swan,
            "lpoly": [[float(c.real), float(c.imag)] for c in self.lpoly],
            "eigenangles": [float(a) for a in self.eigenangles],
            "rh_residual": self.rh_residual,
            "trivial_zero_residual": self.trivial_zero_residual,
            "root_residual": self.root_residual,
        }


def _deflate(c):
    """``L(z) = (1 - z) Q(z)``; returns ``Q`` and the remainder ``L(1)``."""
    Q = np.cumsum(c[:-1])
    return Q, c.sum()


def _companion_roots(Q):
    """Roots of ``sum Q_i z^i`` as eigenvalues of the companion matrix."""
    d = Q.size - 1
    if d < 1:
        return np.zeros(0, dtype=complex)
    lead = Q[-1]
    C = np.zeros((d, d), dtype=complex)
    C[1:, :-1] = np.eye(d - 1)
    C[:, -1] = -Q[:-1] / lead
    return np.linalg.eigvals(C)


def l_polynomial(xi: SuperEvenCharacter) -> FrobeniusSpectrum:
    if xi.is_trivial:
        raise ValidationError("l_polynomial needs a nontrivial character")
    d = xi.swan
    if d < 1:
        raise ValidationError("nontrivial character with swan 0")
    coeffs = l_coefficients(xi.q, xi.k, max(xi.k - 1, d + 2))[xi.id]
    c = np.array(coeffs[:d + 1])
    cert = tuple((n, float(abs(coeffs[n]))) for n in range(d + 1, d + 3))
    Q, rem = _deflate(c)
    roots = _companion_roots(Q)
    vals = np.array([np.polyval(c[::-1], z) for z in roots]) if roots.size else np.zeros(0)
    sq = math.sqrt(xi.q)
    eig = 1.0 / (roots * sq) if roots.size else roots
    return FrobeniusSpectrum(
        id=xi.id,
        swan=d,
        lpoly=c,
        eigenangles=np.sort(np.angle(eig)) if roots.size else np.zeros(0),
        roots=roots,
        trivial_zero_residual=float(abs(rem)),
        root_residual=float(np.abs(vals).max()) if vals.size else 0.0,
        rh_residual=float(np.abs(np.abs(roots) * sq - 1).max()) if roots.size else 0.0,
        certificate=cert,
        q=xi.q,
    )


# ---------------------------------------------------------------------------
# prime sums and variance


@lru_cache(maxsize=32)
def prime_sums(q: int, k: int, nu_max: int) -> np.ndarray:
    """``(chars, nu_max)`` array of ``Psi(nu; Xi)`` through the L-polynomials.

    Row 0 (trivial character) holds the principal value ``q^nu - 1``.
    """
    c = l_coefficients(q, k)
    out = prime_sums_from_l(c, nu_max)
    out[0] = [q ** nu - 1 for nu in range(1, nu_max + 1)]
    out.setflags(write=False)
    return out


def character_prime_sum(xi: SuperEvenCharacter, nu: int, method: str = "trace",
                        include_s_multiples: bool = False) -> complex:
    """``sum over monic deg nu of Lambda(f) Xi(f)``.

    For the trivial character the principal version (``f(0) != 0``) gives
    ``q^nu - 1``; ``include_s_multiples`` counts every monic and gives ``q^nu``.
    ``method`` is ``"trace"`` (L-polynomial power sums) or ``"direct"``.
    """
    if nu < 1:
        raise ValidationError("nu must be >= 1")
    if xi.is_trivial:
        return complex(xi.q ** nu if include_s_multiples else xi.q ** nu - 1)
    if method == "trace":
        return complex(prime_sums(xi.q, xi.k, nu)[xi.id, nu - 1])
    if method != "direct":
        raise ValidationError(f"unknown method {method!r}")
    return complex(_direct_prime_sums(xi.q, xi.k, nu)[xi.id])


@lru_cache(maxsize=32)
def _direct_prime_sums(q, k, nu):
    lam = lambda_table(q, nu)
    K = group_order(q, k)
    hist = np.zeros(K, dtype=np.int64)
    codes = np.flatnonzero(lam)
    codes = codes[codes % q != 0]
    rows = monic_block(q, nu, k, 0, q ** nu)[codes]
    np.add.at(hist, group_index(batch_direction(rows, q), q), lam[codes])
    return _fourier(build_character_table(q, k), hist)


def explicit_formula(spec: FrobeniusSpectrum, nu: int) -> complex:
    """``-q^(nu/2) tr Theta^nu - 1``."""
    return -(spec.q ** (nu / 2)) * spec.trace(nu) - 1


def reconstruct_psi_sector(q: int, k: int, nu: int) -> np.ndarray:
    """``q^-kappa sum_Xi conj(Xi(u)) Psi(nu; Xi)`` for every sector ``u``."""
    table = build_character_table(q, k)
    psi = prime_sums(q, k, nu)[:, nu - 1]
    V = table.value_matrix()
    return (V.conj().T @ psi) / len(table)


def _check_nu(nu):
    if int(nu) < 1:
        raise ValidationError("nu must be >= 1")
    return int(nu)


def spectral_variance(q: int, k: int, nu: int) -> float:
    """``q^(-2 kappa) sum over nontrivial Xi of |Psi(nu; Xi)|^2``."""
    nu = _check_nu(nu)
    psi = prime_sums(q, k, nu)[1:, nu - 1]
    return float(np.sum(np.abs(psi) ** 2) / group_order(q, k) ** 2)


def prime_character_sums(q: int, k: int, nu: int) -> np.ndarray:
    """``sum over monic primes P of degree nu of nu * Xi(P)`` for every character.

    Obtained from ``Psi(nu; Xi) = sum_{d | nu} A(d, Xi^(nu/d))`` by peeling
    off the proper divisors.  The trivial row uses the principal character.
    """
    nu = _check_nu(nu)
    table = build_character_table(q, k)
    psi = prime_sums(q, k, nu)
    A: dict[int, np.ndarray] = {}
    for d in range(1, nu + 1):
        if nu % d:
            continue
        a = psi[:, d - 1].copy()
        for e in range(1, d):
            if d % e == 0:
                a -= A[e][table.power_ids(d // e)]
        A[d] = a
    return A[nu]


def spectral_report(q: int, k: int, nu: int) -> FfVarianceReport:
    """Sector mean and variance of ``Psi`` and ``N`` without enumerating degree ``nu``."""
    q = _check_prime(q)
    nu = _check_nu(nu)
    K = group_order(q, k)
    var_psi = spectral_variance(q, k, nu)
    a = prime_character_sums(q, k, nu)[1:] / nu
    var_n = float(np.sum(np.abs(a) ** 2) / K ** 2)
    return FfVarianceReport(
        q, k, k // 2, nu, (q ** nu - 1) / K, var_psi, prime_count(q, nu) / K, var_n,
        prediction(q, k, nu), eta(nu), None, None, "spectral",
    )


def swan_breakdown(q: int, k: int, nu: int) -> dict[int, float]:
    """Share of the spectral variance carried by each Swan conductor."""
    nu = _check_nu(nu)
    table = build_character_table(q, k)
    psi = prime_sums(q, k, nu)[:, nu - 1]
    K2 = group_order(q, k) ** 2
    out: dict[int, float] = {}
    for d in sorted(set(int(s) for s in table.swans[1:])):
        sel = table.swans == d
        sel[0] = False
        out[d] = float(np.sum(np.abs(psi[sel]) ** 2) / K2)
    return out


def frobenius_traces(q: int, k: int, nu: int) -> np.ndarray:
    """``tr Theta^nu = -(Psi(nu; Xi) + 1) / q^(nu/2)`` for every nontrivial character."""
    psi = prime_sums(q, k, _check_nu(nu))[1:, nu - 1]
    return -(psi + 1) / q ** (nu / 2)


def katz_moment_comparison(q: int, k: int, nu: int) -> tuple[float, float]:
    """Average of ``|tr Theta^nu|^2`` over primitive characters mod ``S^(2 kappa)``.

    Returned with the unitary symplectic moment for ``USp(2 kappa - 2)``.
    """
    from .rmt_model import Group, MomentSpec, exact_moment

    kappa = int(k) // 2
    if kappa < 2:
        raise ValidationError("the comparison needs kappa >= 2")
    nu = _check_nu(nu)
    kk = 2 * kappa
    table = build_character_table(q, kk)
    prim = table.swans[1:] == kk - 1
    tr = frobenius_traces(q, kk, nu)[prim]
    empirical = float(np.mean(np.abs(tr) ** 2))
    usp = exact_moment(MomentSpec(Group.SYMPLECTIC, 2 * kappa - 2, nu, nu))
    return empirical, float(usp)


def spectra(q: int, k: int) -> list[FrobeniusSpectrum]:
    table = build_character_table(q, k)
    return [l_polynomial(table[i]) for i in range(1, len(table))]


def dump_spectra(spectra_list, path=None) -> str:
    text = json.dumps([s.to_dict() for s in spectra_list], indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
