"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and feasibility problems
exit 2, an exceeded explosion budget exits 3, failed convergence criteria
exit 4.
"""


class SelfexError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SelfexError):
    """Bad or unknown configuration key/value."""


# model validation ----------------------------------------------------------

class NonPositiveInitialIntensity(SelfexError):
    pass


class NegativeBeta(SelfexError):
    pass


class JumpMomentUndefined(SelfexError):
    """Jump-size family parameters do not yield finite raw moments."""


class SupportViolation(SelfexError):
    """Strict support mode: jump support does not cover the required ray."""


class NotLinearDrift(SelfexError):
    pass


class NegativeDuration(SelfexError):
    pass


# simulation ----------------------------------------------------------------

class ExplosionBudgetExceeded(SelfexError):
    """More jumps than the configured budget before the horizon.

    Carries ``path_index`` so ensemble callers can report the offending path.
    """

    def __init__(self, n_jumps, horizon, path_index=None):
        self.n_jumps = n_jumps
        self.horizon = horizon
        self.path_index = path_index
        where = "" if path_index is None else f" (path {path_index})"
        super().__init__(
            f"more than {n_jumps} jumps before t={horizon}{where}; "
            "the intensity is numerically explosive for this budget"
        )


class BoundViolated(SelfexError):
    """Internal thinning assertion: intensity exceeded its dominating bound."""


# moment engines ------------------------------------------------------------

class NegativeVarianceBeyondTolerance(SelfexError):
    pass


class RhoZeroClosedForm(SelfexError):
    """The polynomial-exponential closed form needs rho != 0; use quadrature."""


class OrderTooHigh(SelfexError):
    """A jump moment of the requested order is unavailable."""


class EmptySample(SelfexError):
    pass


class DegenerateBins(SelfexError):
    """Chi-square binning collapsed to fewer than two cells."""


class InconsistentWithMomentODE(SelfexError):
    """The candidate marginal law disagrees with the moment ODE system."""


class InsufficientPaths(SelfexError):
    """Monte Carlo noise too large to adjudicate a convergence comparison."""


class InfeasibleRhoTarget(SelfexError):
    """Fixed-rho rescaling would require a negative mean jump size."""
