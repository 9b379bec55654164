import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prime_angles.errors import ValidationError
from prime_angles.ff_core import (
    DirectionElement,
    FqElem,
    PolyFq,
    SeriesModSk,
    batch_direction,
    direction,
    direction_group_array,
    enumerate_direction_group,
    factor_even_direction,
    format_poly,
    format_series,
    from_ab,
    group_index,
    group_order,
    norm,
    parse_poly,
    parse_series,
    same_coset,
    same_sector,
    sigma,
    sqrt_in_group,
    to_ab,
)


def ser(coeffs, p):
    return SeriesModSk(tuple(coeffs), p)


def random_series(rng, p, k, unit=False):
    c = [rng.randrange(p) for _ in range(k)]
    if unit and c[0] == 0:
        c[0] = 1
    return ser(c, p)


def random_poly(rng, p, deg):
    c = [rng.randrange(1, p)] + [rng.randrange(p) for _ in range(deg - 1)] + [1]
    return PolyFq(tuple(c), p)


def test_field_and_poly_basics():
    a, b = FqElem(2, 5), FqElem(4, 5)
    assert (a + b).residue == 1 and (a * b).residue == 3 and (a * a.inverse()).residue == 1
    with pytest.raises(ValidationError):
        FqElem(5, 5)
    with pytest.raises(ValidationError):
        PolyFq((1,), 4)
    with pytest.raises(ValidationError):
        PolyFq((1,), 2)
    f = PolyFq((1, 2, 0, 0), 3)
    assert f.coeffs == (1, 2) and f.degree == 1
    assert PolyFq((), 3).degree == -1
    assert (f * f).coeffs == (1, 1, 1)
    assert f(1) == 0


def test_sigma_and_norm_examples():
    assert sigma(ser((1, 1), 3)).coeffs == (1, 2)
    rng = random.Random(1)
    for _ in range(100):
        f = random_series(rng, 5, 6)
        assert sigma(sigma(f)) == f
    even = ser((2, 0, 1, 0, 4), 5)
    assert sigma(even) == even
    for c in range(7):
        assert norm(ser((1, c, 0, 0), 7)).coeffs == (1, 0, (-c * c) % 7, 0)
    for _ in range(100):
        f, g = random_series(rng, 7, 5), random_series(rng, 7, 5)
        assert norm(f * g) == norm(f) * norm(g)
        assert sigma(norm(f)) == norm(f)


def test_enumeration_examples():
    g = [u.inner.coeffs for u in enumerate_direction_group(3, 2)]
    assert sorted(g) == [(1, 0), (1, 1), (1, 2)]
    g3 = {u.inner.coeffs for u in enumerate_direction_group(3, 3)}
    assert g3 == {(1, a, 2 * a * a % 3) for a in range(3)}
    assert len(enumerate_direction_group(5, 5)) == 25


@pytest.mark.parametrize("q", [3, 5, 7, 11])
@pytest.mark.parametrize("k", range(1, 8))
def test_group_order(q, k):
    if q ** (k // 2) > 20_000:
        pytest.skip("enumeration too large for a unit test")
    arr = direction_group_array(q, k)
    assert arr.shape == (group_order(q, k), k)
    assert len({tuple(r) for r in arr}) == arr.shape[0]
    assert np.all(arr[:, 0] == 1)


@pytest.mark.parametrize("q,k", [(3, 4), (3, 6), (5, 4), (5, 5), (7, 4)])
def test_group_axioms(q, k):
    els = enumerate_direction_group(q, k)
    members = {u.inner.coeffs for u in els}
    one = SeriesModSk.one(q, k).coeffs
    assert one in members
    for u in els:
        assert (u * u.inverse()).inner.coeffs == one
        assert norm(u.inner).coeffs == one
    rng = random.Random(q * 100 + k)
    for _ in range(300):
        a, b = rng.choice(els), rng.choice(els)
        assert (a * b).inner.coeffs in members


@pytest.mark.parametrize("q,k", [(3, 2), (3, 5), (3, 7), (5, 4), (7, 3)])
def test_direct_product(q, k):
    # every unit is uniquely (sigma-invariant) * (norm one)
    units = [c for c in itertools.product(range(q), repeat=k) if c[0]]
    group = {u.inner.coeffs for u in enumerate_direction_group(q, k)}
    seen = set()
    for c in units:
        g = ser(c, q)
        h, u = factor_even_direction(g)
        assert sigma(h) == h and u.inner.coeffs in group
        assert h * u.inner == g
        seen.add((h.coeffs, u.inner.coeffs))
    assert len(seen) == len(units)


def test_sqrt_examples():
    one = DirectionElement(SeriesModSk.one(3, 4))
    assert sqrt_in_group(one) == one
    assert sqrt_in_group(DirectionElement(ser((1, 2), 3))).inner.coeffs == (1, 1)
    for u in enumerate_direction_group(3, 4):
        assert sqrt_in_group(u) ** 2 == u


def test_direction_examples():
    assert direction(PolyFq((1, 1), 3), 2).inner.coeffs == (1, 1)
    assert direction(PolyFq((2, 0, 1, 0, 1), 5), 4).inner == SeriesModSk.one(5, 4)
    with pytest.raises(ValidationError):
        direction(PolyFq((0, 1), 3), 3)
    rng = random.Random(5)
    for _ in range(200):
        f = random_poly(rng, 5, rng.randrange(1, 7))
        g = random_poly(rng, 5, rng.randrange(1, 7))
        assert direction(f * g, 4) == direction(f, 4) * direction(g, 4)
        c = rng.randrange(1, 5)
        assert direction(PolyFq(tuple(c * x for x in f.coeffs), 5), 4) == direction(f, 4)


def test_sector_criteria_agree():
    rng = random.Random(7)
    els = enumerate_direction_group(3, 4)
    for _ in range(500):
        f = random_poly(rng, 3, rng.randrange(1, 8))
        u = rng.choice(els)
        assert same_sector(f, u, 4) == same_coset(f, u, 4)
        assert same_coset(f, direction(f, 4), 4)


def test_even_polynomial_in_trivial_sector():
    one = DirectionElement(SeriesModSk.one(3, 4))
    assert same_sector(PolyFq((1, 0, 2), 3), one, 4)


@pytest.mark.parametrize("q,k", [(3, 4), (3, 6), (5, 4)])
def test_big_hole_below_k_minus_1(q, k):
    # k even: 1+S^(k-1) is its own direction and nothing of degree < k-1 reaches it
    u = direction(PolyFq((1,) + (0,) * (k - 2) + (1,), q), k)
    for deg in range(0, k - 1):
        for low in itertools.product(range(q), repeat=deg):
            if deg and low[0] == 0:
                continue
            f = PolyFq(tuple(low) + (1,), q)
            if f.coeffs[0] == 0:
                continue
            assert not same_sector(f, u, k)


def test_batch_direction_matches_scalar():
    rng = random.Random(9)
    q, k = 5, 5
    rows = []
    for _ in range(200):
        rows.append(random_series(rng, q, k, unit=True).coeffs)
    arr = np.array(rows, dtype=np.int64)
    got = batch_direction(arr, q)
    for r, g in zip(rows, got):
        assert tuple(g) == direction(PolyFq(r, q), k).inner.coeffs
    idx = group_index(got, q)
    assert np.array_equal(direction_group_array(q, k)[idx], got)


def test_ab_split():
    rng = random.Random(13)
    for _ in range(100):
        f = random_poly(rng, 7, rng.randrange(1, 9))
        A, B = to_ab(f)
        assert from_ab(A, B) == f
        # f(S) f(-S) = A(T)^2 + T B(T)^2 with T = -S^2
        k = 2 * f.degree + 1
        lhs = norm(SeriesModSk.from_poly(f, k))
        T2 = PolyFq((0, 0, 6), 7)  # -S^2
        a2 = _compose(A * A, T2)
        tb2 = T2 * _compose(B * B, T2)
        rhs = SeriesModSk.from_poly(PolyFq(tuple(_add(a2.coeffs, tb2.coeffs, 7)), 7), k)
        assert lhs == rhs


def _compose(f, g):
    out = PolyFq((), f.p)
    for c in reversed(f.coeffs):
        out = PolyFq(_add((out * g).coeffs, (c,), f.p), f.p)
    return out


def _add(a, b, p):
    n = max(len(a), len(b))
    a = tuple(a) + (0,) * (n - len(a))
    b = tuple(b) + (0,) * (n - len(b))
    return tuple((x + y) % p for x, y in zip(a, b))


def test_text_format():
    assert format_poly((1, 0, 2)) == "1+0*S+2*S^2"
    assert format_poly(()) == "0"
    assert parse_poly("1+2*S^3", 3).coeffs == (1, 0, 0, 2)
    assert parse_poly("S", 5).coeffs == (0, 1)
    assert parse_series("1+2*S^3", 3, 4).coeffs == (1, 0, 0, 2)
    for bad in ("", "1+3*S", "1+2S", "1++S", "1+S+S", "x"):
        with pytest.raises(ValidationError):
            parse_poly(bad, 3)
    with pytest.raises(ValidationError):
        parse_series("1+S^4", 3, 4)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([3, 5, 7, 11]), st.lists(st.integers(0, 10), max_size=12))
def test_text_round_trip(p, raw):
    f = PolyFq(tuple(c % p for c in raw), p)
    assert parse_poly(format_poly(f.coeffs), p) == f
    if raw:
        s = SeriesModSk(tuple(c % p for c in raw), p)
        assert parse_series(format_series(s.coeffs), p, s.k) == s
