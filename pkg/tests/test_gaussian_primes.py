import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prime_angles.errors import ValidationError
from prime_angles.gaussian_primes import (
    HALF_PI,
    Kind,
    decompose_split_prime,
    decompose_split_primes,
    gaussian_angle,
    prime_ideal_angles,
    prime_power_records,
    read_angle_cache,
    sieve_primes,
    sqrt_minus_one,
    write_angle_cache,
)


def naive_primes(n):
    return [p for p in range(2, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


@pytest.mark.parametrize("x", [2, 3, 10, 97, 1000, 4099])
def test_sieve_small(x):
    assert sieve_primes(x).tolist() == naive_primes(x)


def test_sieve_rejects_tiny_x():
    with pytest.raises(ValidationError):
        sieve_primes(1)


def test_sieve_million():
    assert sieve_primes(10 ** 6).size == 78498


def test_sieve_segments_and_threads_agree():
    ref = sieve_primes(300_000)
    assert np.array_equal(sieve_primes(300_000, block=1000), ref)
    assert np.array_equal(sieve_primes(300_000, block=4096, threads=3), ref)
    assert ref.size == 25997


def test_x25_records():
    t = prime_ideal_angles(25)
    assert len(t) == 8
    by_norm = sorted(zip(t.norm.tolist(), t.kind.tolist()))
    assert by_norm == [(2, Kind.RAMIFIED), (5, 0), (5, 0), (9, Kind.INERT), (13, 0), (13, 0), (17, 0), (17, 0)]
    expect = sorted([0.0, math.pi / 4]
                    + [math.atan2(1, 2), math.atan2(2, 1)]
                    + [math.atan2(2, 3), math.atan2(3, 2)]
                    + [math.atan2(1, 4), math.atan2(4, 1)])
    assert np.allclose(np.sort(t.angle), expect, atol=1e-15)


def test_record_invariants():
    t = prime_ideal_angles(20_000)
    assert np.all((t.angle >= 0) & (t.angle < HALF_PI))
    split = t.kind == Kind.SPLIT
    assert np.array_equal(t.a[split].astype(np.int64) ** 2 + t.b[split].astype(np.int64) ** 2, t.norm[split])
    assert np.all(t.angle[t.kind == Kind.INERT] == 0)
    # split angles pair up as theta and pi/2 - theta
    s = np.sort(t.angle[split])
    assert np.allclose(s, np.sort(HALF_PI - s), atol=1e-12)
    assert not np.any(np.isclose(t.angle[split], math.pi / 4))
    # ordered by norm, ties by angle
    assert np.all(np.diff(t.norm) >= 0)
    tie = np.diff(t.norm) == 0
    assert np.all(np.diff(t.angle)[tie] > 0)


def test_x3_is_ramified_only():
    t = prime_ideal_angles(3)
    assert len(t) == 1 and t.kind[0] == Kind.RAMIFIED and math.isclose(t.angle[0], math.pi / 4)


def test_prime_ideal_theorem_sanity():
    x = 10 ** 6
    assert 0.9 <= len(prime_ideal_angles(x)) / (x / math.log(x)) <= 1.1


def test_count_matches_prime_counts():
    x = 50_000
    ps = naive_primes(x)
    n_split = sum(1 for p in ps if p % 4 == 1)
    n_inert = sum(1 for p in ps if p % 4 == 3 and p * p <= x)
    assert len(prime_ideal_angles(x)) == 1 + 2 * n_split + n_inert
    assert len(prime_ideal_angles(x, split_only=True)) == 2 * n_split


def test_decompose_examples():
    assert decompose_split_prime(5) == (2, 1)
    assert decompose_split_prime(13) == (3, 2)
    a, b = decompose_split_prime(10 ** 6 + 33)
    assert a * a + b * b == 10 ** 6 + 33
    for bad in (2, 3, 7, 1):
        with pytest.raises(ValidationError):
            decompose_split_prime(bad)


def test_vectorized_matches_scalar():
    ps = sieve_primes(200_000)
    ps = ps[ps % 4 == 1]
    a, b = decompose_split_primes(ps)
    assert np.array_equal(a * a + b * b, ps)
    for i in range(0, ps.size, 997):
        assert decompose_split_prime(int(ps[i])) == (int(a[i]), int(b[i]))


def test_composite_rejected():
    with pytest.raises(ValidationError):
        decompose_split_prime(21 * 5)  # 105 = 1 mod 4, composite


def test_large_prime_scalar_path():
    p = 3_000_000_037  # prime, above the int64 vector limit
    assert p % 4 == 1 and all(p % d for d in range(2, 54_773))
    a, b = decompose_split_primes(np.array([p], dtype=np.int64))
    assert int(a[0]) ** 2 + int(b[0]) ** 2 == p


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(naive_primes(20_000)))
def test_sqrt_minus_one_property(p):
    if p % 4 != 1:
        return
    r = sqrt_minus_one(p)
    assert (r * r + 1) % p == 0


@given(st.integers(1, 10 ** 6), st.integers(0, 10 ** 6))
def test_gaussian_angle_unit_invariant(a, b):
    t = gaussian_angle(a, b)
    assert 0 <= t < HALF_PI
    # multiplying by i rotates by pi/2, which the angle forgets
    assert math.isclose(gaussian_angle(-b, a), t, abs_tol=1e-12) or (t == 0 and gaussian_angle(-b, a) == 0)


def test_power_records_x25():
    t = prime_power_records(25)
    rec = sorted(zip(t.norm.tolist(), np.round(t.angle, 6).tolist(), np.round(t.lam, 9).tolist()))
    assert (4, 0.0, round(math.log(2), 9)) in rec
    assert (8, round(math.pi / 4, 6), round(math.log(2), 9)) in rec
    assert (9, 0.0, round(math.log(9), 9)) in rec
    assert (16, 0.0, round(math.log(2), 9)) in rec
    fives = sorted(a for n, a, _ in rec if n == 25)
    assert fives == [round(math.atan2(3, 4), 6), round(math.atan2(4, 3), 6)]
    assert t.primes_only().norm.size == 8


def test_cache_round_trip(tmp_path):
    t = prime_ideal_angles(10_000)
    path = tmp_path / "angles.bin"
    write_angle_cache(path, t)
    u = read_angle_cache(path)
    assert u.x == t.x
    for f in ("norm", "angle", "kind", "a", "b"):
        assert np.array_equal(getattr(u, f), getattr(t, f))


def test_cache_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" * 10)
    with pytest.raises(ValidationError):
        read_angle_cache(path)


def test_restrict_matches_direct():
    t = prime_ideal_angles(30_000).restrict(12_345)
    u = prime_ideal_angles(12_345)
    assert np.array_equal(t.norm, u.norm) and np.array_equal(t.angle, u.angle)
