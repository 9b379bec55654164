import itertools
import json
import math
import random

import numpy as np
import pytest

from prime_angles.errors import ValidationError
from prime_angles.ff_core import PolyFq, direction, group_order
from prime_angles.ff_spectral import (
    build_character_table,
    character_prime_sum,
    dump_spectra,
    explicit_formula,
    frobenius_traces,
    katz_moment_comparison,
    l_polynomial,
    prime_character_sums,
    prime_sums,
    reconstruct_psi_sector,
    spectra,
    spectral_report,
    spectral_variance,
    swan_breakdown,
)
from prime_angles.ff_stats import ff_variance, lambda_table, prediction, sector_tables


def monics(q, n):
    for low in itertools.product(range(q), repeat=n):
        yield PolyFq(tuple(low) + (1,), q)


def test_small_table_is_cyclic_of_order_3():
    t = build_character_table(3, 2)
    assert len(t) == 3
    V = t.value_matrix()
    assert np.allclose(V[0], 1)
    # every value is a cube root of unity
    assert np.allclose(V ** 3, 1)
    assert sorted(t.swans.tolist()) == [0, 1, 1]


@pytest.mark.parametrize("q,k", [(3, 5), (5, 4), (3, 7)])
def test_orthogonality(q, k):
    V = build_character_table(q, k).value_matrix()
    K = V.shape[0]
    assert np.abs(V @ V.conj().T / K - np.eye(K)).max() < 1e-10


@pytest.mark.parametrize("q,k", [(3, 4), (3, 6), (5, 5)])
def test_swan_conductors(q, k):
    t = build_character_table(q, k)
    kappa = k // 2
    for xi in t:
        # the largest j < k with xi nontrivial on some 1 + c S^j
        d = 0
        for j in range(1, k):
            for c in range(1, q):
                f = PolyFq((1,) + (0,) * (j - 1) + (c,), q)
                if abs(xi(direction(f, k)) - 1) > 1e-9:
                    d = j
        assert d == xi.swan
        assert xi.is_trivial == (d == 0)
        assert d == 0 or d % 2 == 1
    if k % 2 == 0:
        assert int(np.sum(t.swans == 2 * kappa - 1)) == q ** kappa - q ** (kappa - 1)


def test_characters_multiplicative():
    q, k = 5, 4
    t = build_character_table(q, k)
    rng = random.Random(2)
    for _ in range(100):
        xi = t[rng.randrange(len(t))]
        f = PolyFq(tuple(rng.randrange(1, q) for _ in range(3)) + (1,), q)
        g = PolyFq(tuple(rng.randrange(1, q) for _ in range(2)) + (1,), q)
        assert abs(xi(f * g) - xi(f) * xi(g)) < 1e-12
        assert abs(abs(xi(f)) - 1) < 1e-12
    assert t[1](PolyFq((0, 1), q)) == 0


@pytest.mark.parametrize("q,k", [(3, 4), (5, 3)])
def test_l_coefficients_by_enumeration(q, k):
    t = build_character_table(q, k)
    for xi in list(t)[1:]:
        spec = l_polynomial(xi)
        assert spec.lpoly[0] == 1
        for n in range(1, xi.swan + 1):
            ref = sum(xi(f) for f in monics(q, n))
            assert abs(spec.lpoly[n] - ref) < 1e-9
        assert all(v < 1e-9 for _, v in spec.certificate)


@pytest.mark.parametrize("q", [3, 5, 7])
def test_riemann_hypothesis_and_trivial_zero(q):
    for spec in spectra(q, 4):
        assert spec.trivial_zero_residual < 1e-9
        assert spec.rh_residual < 1e-9
        assert spec.root_residual < 1e-9
        assert len(spec.eigenangles) == spec.swan - 1


def test_trivial_character_sums():
    t = build_character_table(3, 4)
    for nu in range(1, 6):
        assert character_prime_sum(t[0], nu, include_s_multiples=True) == 3 ** nu
        assert int(lambda_table(3, nu).sum()) == 3 ** nu
        assert character_prime_sum(t[0], nu) == 3 ** nu - 1


def test_direct_equals_trace_and_explicit_formula():
    q, k = 3, 4
    t = build_character_table(q, k)
    specs = {s.id: s for s in spectra(q, k)}
    for xi in list(t)[1:]:
        for nu in range(1, 7):
            a = character_prime_sum(xi, nu, method="trace")
            b = character_prime_sum(xi, nu, method="direct")
            assert abs(a - b) < 1e-6
            assert abs(explicit_formula(specs[xi.id], nu) - b) < 1e-6
            assert abs(b + 1) <= (xi.swan - 1) * q ** (nu / 2) + 1e-9


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_explicit_formula_to_degree_8(k):
    q = 3
    t = build_character_table(q, k)
    for spec in spectra(q, k):
        xi = t[spec.id]
        for nu in range(1, 9):
            assert abs(explicit_formula(spec, nu) - character_prime_sum(xi, nu, method="direct")) < 1e-6


@pytest.mark.parametrize("q,k,nu", [(3, 4, 3), (3, 5, 5), (5, 4, 4), (5, 3, 2)])
def test_spectral_matches_brute(q, k, nu):
    brute = ff_variance(q, k, nu)
    assert math.isclose(spectral_variance(q, k, nu), brute.var_psi, rel_tol=1e-6, abs_tol=1e-9)
    rep = spectral_report(q, k, nu)
    assert math.isclose(rep.var_n, brute.var_n, rel_tol=1e-6, abs_tol=1e-9)
    assert math.isclose(rep.mean_n, brute.mean_n, rel_tol=1e-12)
    psi, _ = sector_tables(q, k, nu)
    assert np.abs(reconstruct_psi_sector(q, k, nu) - psi).max() < 1e-6


def test_prime_character_sums_trivial_row():
    q, k, nu = 3, 4, 6
    _, primes = sector_tables(q, k, nu)
    assert math.isclose(prime_character_sums(q, k, nu)[0].real, nu * primes.sum())


def test_rejects_nu_zero():
    with pytest.raises(ValidationError):
        spectral_variance(3, 4, 0)
    with pytest.raises(ValidationError):
        character_prime_sum(build_character_table(3, 4)[1], 0)


def test_large_q_spectral_run():
    q, k, nu = 13, 6, 9
    v = spectral_variance(q, k, nu)
    assert abs(v / q ** (nu - 3) / 4 - 1) <= 0.25
    assert math.isclose(prediction(q, k, nu), 4 * q ** (nu - 3))


def test_swan_breakdown_sums_to_variance():
    q, k, nu = 5, 6, 5
    parts = swan_breakdown(q, k, nu)
    assert set(parts) <= {1, 3, 5}
    assert math.isclose(sum(parts.values()), spectral_variance(q, k, nu), rel_tol=1e-12)


def test_katz_comparison():
    emp, usp = katz_moment_comparison(3, 4, 1)
    assert usp == 1
    # at nu = 1 the Frobenius traces are fixed by counting, so the match is exact
    for q in (3, 7, 11, 13):
        emp, usp = katz_moment_comparison(q, 4, 1)
        assert abs(emp - usp) < 1e-12
    assert katz_moment_comparison(13, 4, 3)[1] == 2
    for nu in (2, 3):
        gaps = [abs(e - u) for e, u in (katz_moment_comparison(q, 4, nu) for q in (5, 7, 11, 13))]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValidationError):
        katz_moment_comparison(3, 3, 1)


def test_traces_match_eigenangles():
    q, k = 5, 4
    specs = spectra(q, k)
    for nu in (1, 2, 5):
        tr = frobenius_traces(q, k, nu)
        assert np.allclose(tr, [s.trace(nu) for s in specs], atol=1e-9)


def test_spectrum_dump(tmp_path):
    specs = spectra(3, 4)
    path = tmp_path / "spec.json"
    text = dump_spectra(specs, path)
    data = json.loads(path.read_text())
    assert data == json.loads(text)
    assert len(data) == group_order(3, 4) - 1
    assert data[0]["lpoly"][0] == [1.0, 0.0]
    assert all(isinstance(a, float) for d in data for a in d["eigenangles"])
