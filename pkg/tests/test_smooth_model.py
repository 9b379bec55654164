import math

import numpy as np
import pytest
from scipy import integrate

from prime_angles.gaussian_primes import HALF_PI, prime_power_records
from prime_angles.smooth_model import (
    fourier_model,
    hecke_sum,
    psi_direct,
    psi_fourier,
    standard_windows,
    trivial_prediction,
    variance_parseval,
    variance_quadrature,
    variance_vs_prediction,
    window_fk,
)

W = standard_windows()


def _factor(n):
    out, d = {}, 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def brute_hecke(k, X):
    """Walk every Gaussian integer a + bi (a > 0, b >= 0), one per ideal."""
    total = 0j
    lo, hi = W.phi_lo * X, W.phi_hi * X
    r = math.isqrt(int(hi))
    for a in range(1, r + 1):
        for b in range(0, r + 1):
            n = a * a + b * b
            if not lo < n < hi:
                continue
            fac = _factor(n)
            if len(fac) != 1:
                continue
            (p, j), = fac.items()
            if p == 2:
                lam = math.log(2)
            elif p % 4 == 3:
                lam = 2 * math.log(p)
            elif math.gcd(a, b) % p:
                lam = math.log(p)  # a power of one split prime
            else:
                continue  # mixes a prime with its conjugate
            theta = math.atan2(b, a)
            total += W.Phi(n / X) * lam * complex(math.cos(4 * k * theta), math.sin(4 * k * theta))
    return total


def test_window_constants():
    assert math.isclose(W.c1, 8.26064e-5, rel_tol=1e-5)
    assert math.isclose(W.c2, 1.48852e-8, rel_tol=1e-5)
    assert W.c2 > 0
    ys = np.linspace(0, 30, 61)
    assert np.allclose(W.fhat(ys), W.fhat(-ys), atol=1e-15)
    quad = integrate.quad(lambda x: math.exp(-1 / (1 - x * x)) * math.cos(2 * math.pi * 1.5 * x), -1, 1,
                          epsabs=1e-14, limit=200)[0]
    assert abs(W.fhat(1.5)[0] - quad) < 1e-12


def test_window_fk_basics():
    assert math.isclose(window_fk(0.0, 10), math.exp(-1))
    rng = np.random.default_rng(3)
    th = rng.uniform(-3, 3, 100)
    assert np.allclose(window_fk(th + HALF_PI, 10), window_fk(th, 10), atol=1e-15)


@pytest.mark.parametrize("K", [3, 10])
def test_window_fk_fourier_coefficients(K):
    for k in (0, 1, 5, K):
        def re(t):
            return float(window_fk(t, K)) * math.cos(4 * k * t)

        # the window is supported near 0 and pi/2 only
        edge = HALF_PI / K
        val = sum(integrate.quad(re, a, b, epsabs=1e-14, limit=200)[0]
                  for a, b in ((0, edge), (HALF_PI - edge, HALF_PI)))
        assert abs(val / HALF_PI - W.fhat(k / K)[0] / K) < 1e-10


def test_psi_direct_small_and_two_pass():
    assert psi_direct(0.3, 5, 2) == 0.0
    X, K, theta = 1000, 5, math.pi / 8
    t = prime_power_records(X)
    ref = 0.0
    for n, a, lam in zip(t.norm, t.angle, t.lam):
        ref += float(W.Phi(n / X)) * lam * float(window_fk(a - theta, K))
    assert math.isclose(psi_direct(theta, K, X), ref, rel_tol=1e-12)


def test_psi_mean():
    th = np.linspace(0, HALF_PI, 400, endpoint=False)
    m = psi_direct(th, 10, 10 ** 5).mean()
    assert abs(m / (10 ** 5 / 10 * W.c1) - 1) < 0.1


def test_hecke_sum_properties():
    X = 10 ** 5
    h0 = hecke_sum(0, X)
    assert h0.imag == 0
    assert abs(h0.real / (X * W.int_Phi) - 1) < 0.1
    for k in (1, 7):
        assert hecke_sum(-k, X) == hecke_sum(k, X).conjugate()
    higher = h0.real - hecke_sum(0, X, primes_only=True).real
    assert 0 <= higher < 5 * math.sqrt(X)


def test_hecke_sum_brute_force():
    X = 10 ** 4
    for k in (0, 3):
        ref = brute_hecke(k, X)
        assert abs(hecke_sum(k, X) - ref) <= 1e-9 * abs(ref)


def test_psi_fourier_matches_direct():
    X, K = 10 ** 4, 20
    rng = np.random.default_rng(11)
    th = rng.uniform(0, HALF_PI, 100)
    a = psi_direct(th, K, X)
    b = psi_fourier(th, K, X)
    assert np.max(np.abs(a - b)) <= 1e-6 * X / K
    assert math.isclose(psi_fourier(0.4 + HALF_PI, K, X), psi_fourier(0.4, K, X), rel_tol=1e-12)


def test_psi_fourier_truncated_to_mean():
    X, K = 10 ** 4, 20
    with pytest.warns(RuntimeWarning):
        m = fourier_model(K, X, kmax=0)
    assert np.allclose(m.psi(np.array([0.1, 0.9])), m.mean)


@pytest.mark.parametrize("K", [10, 40, 160])
def test_parseval_vs_quadrature(K):
    X = 10 ** 4
    a = variance_parseval(K, X)
    b = variance_quadrature(K, X)
    assert abs(a - b) <= 1e-4 * b


def test_pairs_method_agrees():
    X, K = 10 ** 4, 40
    a = variance_parseval(K, X, method="fourier")
    b = variance_parseval(K, X, method="pairs")
    assert abs(a - b) <= 1e-6 * a


def test_trivial_regime_and_empty():
    assert variance_parseval(10, 2) == 0.0  # only norm 2, where Phi vanishes
    X, K = 1000, 10 ** 6
    assert abs(variance_parseval(K, X) / trivial_prediction(K, X) - 1) <= 0.15


def test_variance_vs_prediction_trivial_regime():
    X, K = 1000, 10 ** 6
    measured, predicted = variance_vs_prediction(K, X)
    assert predicted > 0
    # for K >> X the min picks log X
    assert math.isclose(predicted, trivial_prediction(K, X), rel_tol=1e-12)
    assert math.isclose(measured, variance_parseval(K, X), rel_tol=1e-12)
