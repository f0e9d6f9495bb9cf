"""Noise primitives with a seedable randomness contract.

Calibration:
  laplace scale  b     = sens / eps                (pure (eps, 0) privacy)
  gaussian sigma       = sens * sqrt(2 ln(1.25/delta)) / eps,
                         valid for 0 < eps <= 1 and 0 < delta < 1

Laplace sampling is inverse-CDF on a 64-bit uniform. No hardening
against floating-point attacks (snapping, discrete mechanisms) is
attempted.
"""

from __future__ import annotations

import math
import random
import secrets
from dataclasses import dataclass
from decimal import Decimal


class DomainError(ValueError):
    """Noise parameters outside the mechanism's validity region."""


@dataclass(frozen=True)
class NoiseParams:
    """Validated mechanism parameters (delta only for the gaussian)."""

    sens: Decimal
    eps: Decimal
    delta: Decimal | None = None

    def __post_init__(self):
        if self.sens < 0:
            raise DomainError("sensitivity must be nonnegative")
        if self.eps <= 0:
            raise DomainError("epsilon must be positive")
        if self.delta is not None:
            if not (0 < self.delta < 1):
                raise DomainError("delta must lie in (0, 1)")
            if self.eps > 1:
                raise DomainError("gaussian calibration requires epsilon <= 1")


def laplace_scale(sens, eps) -> float:
    if float(eps) <= 0:
        raise DomainError("epsilon must be positive")
    if float(sens) < 0:
        raise DomainError("sensitivity must be nonnegative")
    return float(sens) / float(eps)


def gauss_sigma(sens, eps, delta) -> float:
    sens_f, eps_f, delta_f = float(sens), float(eps), float(delta)
    if sens_f < 0:
        raise DomainError("sensitivity must be nonnegative")
    if not (0 < eps_f <= 1):
        raise DomainError("gaussian calibration requires 0 < epsilon <= 1")
    if not (0 < delta_f < 1):
        raise DomainError("delta must lie in (0, 1)")
    return sens_f * math.sqrt(2 * math.log(1.25 / delta_f)) / eps_f


def sample_laplace(rand: random.Random, b: float) -> float:
    """One zero-centered Laplace(b) draw from a 64-bit uniform."""
    if b < 0:
        raise DomainError("scale must be nonnegative")
    if b == 0:
        return 0.0
    u = (rand.getrandbits(64) + 0.5) / 2.0**64  # in (0, 1), never exactly 1/2
    p = u - 0.5
    return -b * math.copysign(1.0, p) * math.log1p(-2.0 * abs(p))


def sample_gauss(rand: random.Random, sigma: float) -> float:
    """One zero-centered gaussian draw with standard deviation sigma."""
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    if sigma == 0:
        return 0.0
    return rand.normalvariate(0.0, sigma)


class NoiseRng:
    """Seedable noise source; the enclave owns exactly one.

    Seeded from the OS entropy pool unless a test injects a seed.
    Identical seed and call sequence reproduce identical samples.
    """

    def __init__(self, seed: int | None = None):
        if seed is None:
            seed = secrets.randbits(256)
        self._rand = random.Random(seed)

    def laplace(self, b: float) -> float:
        return sample_laplace(self._rand, b)

    def gauss(self, sigma: float) -> float:
        return sample_gauss(self._rand, sigma)
