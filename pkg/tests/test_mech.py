import random
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from miniduet.mech import (DomainError, NoiseParams, NoiseRng, gauss_sigma,
                           laplace_scale, sample_gauss, sample_laplace)


def sigma_oracle(sens: str, eps: str, delta: str) -> float:
    """Independent high-precision evaluation of sens*sqrt(2 ln(1.25/delta))/eps."""
    getcontext().prec = 50
    x = (Decimal("1.25") / Decimal(delta)).ln()
    return float(Decimal(sens) * (2 * x).sqrt() / Decimal(eps))


def test_laplace_scale_closed_form():
    assert laplace_scale(Decimal("1.0"), Decimal("1.0")) == 1.0
    assert laplace_scale(Decimal("1.0"), Decimal("0.5")) == 2.0
    assert laplace_scale(Decimal("2.5"), Decimal("0.5")) == 5.0


def test_laplace_scale_domain():
    with pytest.raises(DomainError):
        laplace_scale(1, 0)
    with pytest.raises(DomainError):
        laplace_scale(1, -1)
    with pytest.raises(DomainError):
        laplace_scale(-1, 1)


def test_gauss_sigma_against_oracle():
    assert gauss_sigma(1, 1, Decimal("0.001")) == pytest.approx(
        sigma_oracle("1", "1", "0.001"), rel=1e-12)
    assert gauss_sigma(1, 1, Decimal("0.000001")) == pytest.approx(
        sigma_oracle("1", "1", "0.000001"), rel=1e-12)
    # frozen oracle values
    assert gauss_sigma(1, 1, Decimal("0.001")) == pytest.approx(
        3.776479532659047, rel=1e-12)
    assert gauss_sigma(1, 1, Decimal("0.000001")) == pytest.approx(
        5.298802526850474, rel=1e-12)


def test_gauss_sigma_zero_sensitivity():
    assert gauss_sigma(0, Decimal("0.5"), Decimal("0.001")) == 0.0


def test_gauss_sigma_domain():
    for sens, eps, delta in [(1, 0, "0.001"), (1, "1.5", "0.001"),
                             (1, 1, "0"), (1, 1, "1"), (-1, 1, "0.001")]:
        with pytest.raises(DomainError):
            gauss_sigma(Decimal(str(sens)), Decimal(str(eps)), Decimal(delta))


_eps01 = st.decimals(min_value="0.01", max_value="1",
                     allow_nan=False, allow_infinity=False, places=3)
_deltas = st.decimals(min_value="0.000001", max_value="0.5",
                      allow_nan=False, allow_infinity=False, places=6)
_senses = st.decimals(min_value="0", max_value="100",
                      allow_nan=False, allow_infinity=False, places=3)


@given(_senses, _eps01, _eps01, _deltas)
def test_gauss_sigma_nonincreasing_in_eps(sens, e1, e2, delta):
    lo, hi = sorted([e1, e2])
    assert gauss_sigma(sens, hi, delta) <= gauss_sigma(sens, lo, delta)


@given(_senses, _eps01, _deltas, _deltas)
def test_gauss_sigma_nonincreasing_in_delta(sens, eps, d1, d2):
    lo, hi = sorted([d1, d2])
    assert gauss_sigma(sens, eps, hi) <= gauss_sigma(sens, eps, lo)


@given(_senses, _senses, _eps01, _deltas)
def test_gauss_sigma_nondecreasing_in_sens(s1, s2, eps, delta):
    lo, hi = sorted([s1, s2])
    assert gauss_sigma(lo, eps, delta) <= gauss_sigma(hi, eps, delta)


def test_zero_scale_samples_are_exactly_zero():
    rand = random.Random(1)
    assert sample_laplace(rand, 0.0) == 0.0
    assert sample_gauss(rand, 0.0) == 0.0


def test_seed_determinism():
    a = NoiseRng(1234)
    b = NoiseRng(1234)
    seq_a = [a.laplace(1.0) for _ in range(50)] + [a.gauss(2.0) for _ in range(50)]
    seq_b = [b.laplace(1.0) for _ in range(50)] + [b.gauss(2.0) for _ in range(50)]
    assert seq_a == seq_b


def test_different_seeds_differ():
    assert NoiseRng(1).gauss(1.0) != NoiseRng(2).gauss(1.0)


def test_laplace_moments_100k():
    rand = random.Random(20260808)
    xs = np.array([sample_laplace(rand, 1.0) for _ in range(100_000)])
    assert -0.02 <= xs.mean() <= 0.02
    assert 2 * 0.95 <= xs.var() <= 2 * 1.05  # Var(Laplace(b)) = 2 b^2


def test_gauss_std_100k():
    sigma = gauss_sigma(1, 1, Decimal("0.001"))
    rand = random.Random(20260808)
    xs = np.array([sample_gauss(rand, sigma) for _ in range(100_000)])
    assert abs(xs.std() - sigma) / sigma < 0.02


def test_laplace_ks_against_cdf():
    rand = random.Random(987654321)
    xs = [sample_laplace(rand, 1.0) for _ in range(100_000)]

    def laplace_cdf(x):
        x = np.asarray(x)
        return np.where(x < 0, 0.5 * np.exp(x), 1 - 0.5 * np.exp(-x))

    result = stats.kstest(xs, laplace_cdf)
    assert result.pvalue > 0.001


def test_noise_params_validation():
    NoiseParams(Decimal(1), Decimal("0.5"), Decimal("0.001"))
    NoiseParams(Decimal(1), Decimal("5"))  # laplace: eps > 1 is fine
    with pytest.raises(DomainError):
        NoiseParams(Decimal(1), Decimal("1.5"), Decimal("0.001"))
    with pytest.raises(DomainError):
        NoiseParams(Decimal(1), Decimal("0.5"), Decimal("1"))
    with pytest.raises(DomainError):
        NoiseParams(Decimal(-1), Decimal("0.5"))
