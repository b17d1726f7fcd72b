"""Jump-size families: exact raw moments and reproducible samplers.

Every family draws non-negative jump sizes and has finite raw moments of all
orders.  Samplers consume a caller-owned ``numpy.random.Generator`` so that
reproducibility is controlled entirely by stream ownership:

* gamma draws use the Marsaglia-Tsang squeeze method (with the ``u**(1/v)``
  boost for shape < 1),
* inverse Gaussian draws use the Michael-Schucany-Haas transform.

Both are exact (non-approximate) samplers with no table dependence, built on
the generator's ``standard_normal``/``random`` primitives only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import JumpMomentUndefined


def _mt_gamma(rng, shape: float) -> float:
    # Marsaglia & Tsang (2000). Exact for shape >= 1; boosted below 1.
    if shape < 1.0:
        u = 1.0 - rng.random()  # (0, 1], keeps the log/pow well defined
        return _mt_gamma(rng, shape + 1.0) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = 1.0 - rng.random()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


def _msh_invgauss(rng, mean: float, shape: float) -> float:
    # Michael, Schucany & Haas (1976) transform with the root-selection step.
    z = rng.standard_normal()
    y = z * z
    my = mean * y
    x = mean + my * mean / (2.0 * shape) \
        - (mean / (2.0 * shape)) * math.sqrt(4.0 * shape * my + my * my)
    if x <= 0.0:  # rounding guard for very large y
        x = 5e-324
    if rng.random() <= mean / (mean + x):
        return x
    return mean * mean / x


@dataclass(frozen=True)
class GammaJumps:
    """Gamma family with density u^v / Gamma(v) * x^(v-1) * exp(-u x)."""

    u: float  # inverse scale
    v: float  # shape

    intensity_dependent = False

    def validate(self) -> None:
        if not (self.u > 0.0 and self.v > 0.0):
            raise JumpMomentUndefined(
                f"gamma jumps need u > 0 and v > 0, got u={self.u}, v={self.v}"
            )

    def moment(self, j: int, lambda_pre: float = 0.0) -> float:
        """Exact jth raw moment v(v+1)...(v+j-1) / u^j."""
        self.validate()
        num = 1.0
        for i in range(j):
            num *= self.v + i
        return num / self.u ** j

    def sample(self, rng, lambda_pre: float = 0.0) -> float:
        return _mt_gamma(rng, self.v) / self.u

    def support_min(self) -> float:
        return 0.0


@dataclass(frozen=True)
class InverseGaussianJumps:
    mean: float
    shape: float

    intensity_dependent = False

    def validate(self) -> None:
        if not (self.mean > 0.0 and self.shape > 0.0):
            raise JumpMomentUndefined(
                "inverse Gaussian jumps need mean > 0 and shape > 0, got "
                f"mean={self.mean}, shape={self.shape}"
            )

    def moment(self, j: int, lambda_pre: float = 0.0) -> float:
        """E[X^j] = mean^j * sum_k (j-1+k)! / (k! (j-1-k)!) * (mean/2shape)^k."""
        self.validate()
        r = self.mean / (2.0 * self.shape)
        total = 0.0
        for k in range(j):
            total += (math.factorial(j - 1 + k)
                      / (math.factorial(k) * math.factorial(j - 1 - k))) * r ** k
        return self.mean ** j * total

    def sample(self, rng, lambda_pre: float = 0.0) -> float:
        return _msh_invgauss(rng, self.mean, self.shape)

    def support_min(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantJumps:
    c: float

    intensity_dependent = False

    def validate(self) -> None:
        if not self.c >= 0.0:
            raise JumpMomentUndefined(f"constant jump must be >= 0, got {self.c}")

    def moment(self, j: int, lambda_pre: float = 0.0) -> float:
        self.validate()
        return self.c ** j

    def sample(self, rng, lambda_pre: float = 0.0) -> float:
        return self.c

    def support_min(self) -> float:
        return self.c


@dataclass(frozen=True)
class IntensityShiftedJumps:
    """Base draw plus ``coupling * lambda_pre``.

    Exercises the interface where the pre-jump intensity parameterizes the
    jump law.  ``coupling`` must be non-negative so the shift never pushes a
    draw below zero and the raw moments stay exact binomial expansions.
    Excluded from all reference experiments.
    """

    base: GammaJumps | InverseGaussianJumps | ConstantJumps
    coupling: float

    intensity_dependent = True

    def validate(self) -> None:
        if self.coupling < 0.0:
            raise JumpMomentUndefined(
                "intensity-shifted jumps need coupling >= 0 so clipping at 0 "
                f"never binds, got {self.coupling}"
            )
        self.base.validate()

    def moment(self, j: int, lambda_pre: float = 0.0) -> float:
        """E[(B + c*lam)^j] expanded over the base family's raw moments."""
        self.validate()
        shift = self.coupling * lambda_pre
        total = shift ** j
        for i in range(1, j + 1):
            total += math.comb(j, i) * self.base.moment(i) * shift ** (j - i)
        return total

    def moment_at(self, lambda_pre: float, j: int) -> float:
        return self.moment(j, lambda_pre)

    def sample(self, rng, lambda_pre: float = 0.0) -> float:
        x = self.base.sample(rng, lambda_pre) + self.coupling * lambda_pre
        return x if x > 0.0 else 0.0

    def support_min(self) -> float:
        return self.base.support_min()


JumpFamily = GammaJumps | InverseGaussianJumps | ConstantJumps | IntensityShiftedJumps
