"""Model types: drift specifications, validation, regime classification and
the deterministic inter-jump intensity flow.

The intensity follows d(lam) = mu(lam) dt + beta dU between and across jumps,
with mu either

* linear,    mu(lam) = alpha * (lambda0 - lam), or
* nonlinear, mu(lam) = (alpha + delta * exp(-gamma * lam^2)) * (lambda0 - lam).

Both drifts flow monotonically toward the equilibrium level lambda0, which is
what makes the exact dominating bound in the thinning simulator valid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    JumpMomentUndefined,
    NegativeBeta,
    NegativeDuration,
    NonPositiveInitialIntensity,
    NotLinearDrift,
    SupportViolation,
)
from .jumps import JumpFamily

# Relative tolerance below which rho = beta*E[X] - alpha is treated as zero.
# Double-precision cancellation floor; every rho = 0 formula has a dedicated
# branch instead of dividing by a tiny rho.
CRITICAL_RTOL = 1e-12


@dataclass(frozen=True)
class LinearDrift:
    alpha: float
    lambda0: float

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.lambda0 < 0.0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")

    def rate(self, lam: float) -> float:
        return self.alpha * (self.lambda0 - lam)

    def lipschitz_bound(self) -> float:
        return self.alpha


@dataclass(frozen=True)
class NonlinearDrift:
    """Mean reversion whose speed decays from alpha+delta to alpha as the
    intensity grows; gamma controls how fast the extra pull switches off."""

    alpha: float
    delta: float
    gamma: float
    lambda0: float

    def __post_init__(self):
        for name in ("alpha", "delta", "gamma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.lambda0 < 0.0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")

    def rate(self, lam: float) -> float:
        return (self.alpha + self.delta * math.exp(-self.gamma * lam * lam)) \
            * (self.lambda0 - lam)

    def lipschitz_bound(self) -> float:
        # alpha + delta bounds the reversion speed on the mean-reverting
        # region swept by paths started at or above lambda0.
        return self.alpha + self.delta


DriftSpec = LinearDrift | NonlinearDrift


@dataclass(frozen=True)
class ModelSpec:
    drift: DriftSpec
    beta: float
    jumps: JumpFamily
    lambda_init: float


@dataclass(frozen=True)
class ValidatedModel:
    """A ModelSpec whose invariants have been checked; safe to simulate."""

    drift: DriftSpec
    beta: float
    jumps: JumpFamily
    lambda_init: float

    def spec(self) -> ModelSpec:
        return ModelSpec(self.drift, self.beta, self.jumps, self.lambda_init)


def validate_model(spec: ModelSpec | ValidatedModel,
                   strict_support: bool = False) -> ValidatedModel:
    """Check field invariants and finite jump moments up to order 4.

    Idempotent: validating an already-validated model returns an identical
    model.  ``strict_support`` additionally demands the raw jump support to
    cover [lambda0 - lambda_init, inf); all built-in families live on
    [0, inf), so this only ever rejects models started below lambda0.
    """
    if isinstance(spec, ValidatedModel) and not strict_support:
        return spec
    if not spec.lambda_init > 0.0:
        raise NonPositiveInitialIntensity(
            f"lambda_init must be > 0, got {spec.lambda_init}")
    if spec.beta < 0.0:
        raise NegativeBeta(f"beta must be >= 0, got {spec.beta}")
    spec.jumps.validate()
    for j in range(1, 5):
        mj = spec.jumps.moment(j, spec.lambda_init)
        if not math.isfinite(mj):
            raise JumpMomentUndefined(f"jump moment of order {j} is not finite")
    if strict_support:
        lower = spec.drift.lambda0 - spec.lambda_init
        if spec.jumps.support_min() < lower:
            raise SupportViolation(
                f"jump support starts at {spec.jumps.support_min()}, below the "
                f"required lambda0 - lambda_init = {lower}")
    return ValidatedModel(spec.drift, spec.beta, spec.jumps, spec.lambda_init)


@dataclass(frozen=True)
class Regime:
    """Long-run behaviour of the mean intensity for linear drift.

    rho = beta*E[X] - alpha.  Negative rho gives a bounded mean with limit
    -alpha*lambda0/rho, zero gives linear growth, positive exponential growth.
    """

    rho: float
    kind: str  # "subcritical" | "critical" | "supercritical"
    mean_limit: float | None


def classify_regime(model: ModelSpec | ValidatedModel) -> Regime:
    drift = model.drift
    if not isinstance(drift, LinearDrift):
        raise NotLinearDrift("regime classification needs linear drift")
    if model.jumps.intensity_dependent:
        raise NotLinearDrift(
            "regime classification needs an intensity-independent jump family")
    excite = model.beta * model.jumps.moment(1)
    rho = excite - drift.alpha
    tol = CRITICAL_RTOL * max(1.0, excite, drift.alpha)
    if abs(rho) <= tol:
        return Regime(rho=rho, kind="critical", mean_limit=None)
    if rho < 0.0:
        return Regime(rho=rho, kind="subcritical",
                      mean_limit=-drift.alpha * drift.lambda0 / rho)
    return Regime(rho=rho, kind="supercritical", mean_limit=None)


# deterministic flow between jumps -------------------------------------------

def _rk4_step_size(drift: NonlinearDrift, dt: float) -> float:
    rate = max(drift.alpha + drift.delta, 1e-6)
    return min(dt, 1e-2 / rate)


def interjump_flow(drift_or_model, lambda_start: float, dt: float) -> float:
    """Advance the jump-free intensity ODE by ``dt``.

    Linear drift uses the exact closed form; nonlinear drift uses fixed-step
    classical RK4 (the flow is smooth and contractive, so a fixed step gives
    deterministic, reproducible results).  The result always lies between
    ``lambda_start`` and lambda0.
    """
    lam, _ = flow_with_integral(drift_or_model, lambda_start, dt)
    return lam


def flow_with_integral(drift_or_model, lambda_start: float,
                       dt: float) -> tuple[float, float]:
    """Flow the intensity and accumulate its exact time integral over ``dt``."""
    drift = getattr(drift_or_model, "drift", drift_or_model)
    if dt < 0.0:
        raise NegativeDuration(f"dt must be >= 0, got {dt}")
    if lambda_start < 0.0:
        raise ValueError(f"lambda_start must be >= 0, got {lambda_start}")
    if dt == 0.0:
        return lambda_start, 0.0
    if isinstance(drift, LinearDrift):
        return _linear_flow(drift.alpha, drift.lambda0, lambda_start, dt)
    return _nonlinear_flow(drift, lambda_start, dt)


def _linear_flow(alpha: float, lam0: float, lam: float,
                 dt: float) -> tuple[float, float]:
    if alpha == 0.0:
        return lam, lam * dt
    decay = math.exp(-alpha * dt)
    new_lam = lam0 + (lam - lam0) * decay
    integral = lam0 * dt + (lam - lam0) * (1.0 - decay) / alpha
    return new_lam, integral


def _nonlinear_flow(drift: NonlinearDrift, lam: float,
                    dt: float) -> tuple[float, float]:
    h = _rk4_step_size(drift, dt)
    n = max(1, math.ceil(dt / h - 1e-12))
    h = dt / n
    rate = drift.rate
    integral = 0.0
    for _ in range(n):
        k1 = rate(lam)
        k2 = rate(lam + 0.5 * h * k1)
        k3 = rate(lam + 0.5 * h * k2)
        k4 = rate(lam + h * k3)
        # integral of lam over the step, Simpson-consistent with RK4 stages
        l2 = lam + 0.5 * h * k1
        l3 = lam + 0.5 * h * k2
        l4 = lam + h * k3
        integral += h * (lam + 2.0 * l2 + 2.0 * l3 + l4) / 6.0
        lam = lam + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return lam, integral
