"""Statistical utilities: empirical moments with standard errors, empirical
CDF distance, and count-distribution goodness of fit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DegenerateBins, EmptySample


@dataclass(frozen=True)
class MomentEstimate:
    order: int
    value: float
    se: float
    n: int


def _exact_sum(values: np.ndarray) -> float:
    # math.fsum is exact in double precision, hence independent of the order
    # in which the samples arrive.
    return math.fsum(values.tolist())


def mean_and_se(samples) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("no samples")
    n = x.size
    m = _exact_sum(x) / n
    if n < 2:
        return m, float("nan")
    s2 = _exact_sum((x - m) ** 2) / (n - 1)
    return m, math.sqrt(s2 / n)


def variance_and_se(samples) -> tuple[float, float]:
    """Sample variance with a delta-method standard error."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise EmptySample("variance needs at least two samples")
    n = x.size
    m = x.mean()
    d = x - m
    s2 = float(np.dot(d, d)) / (n - 1)
    m4 = float(np.mean(d ** 4))
    se = math.sqrt(max(m4 - s2 * s2, 0.0) / n)
    return s2, se


def empirical_moments(samples, j_max: int) -> list[MomentEstimate]:
    """Raw moments 1..j_max of the sample, each with its standard error.

    Sums use exact accumulation so the j = 1 estimate equals the arithmetic
    mean to full precision regardless of sample ordering.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("no samples")
    n = x.size
    out = []
    for j in range(1, j_max + 1):
        p = x ** j
        value = _exact_sum(p) / n
        if n >= 2:
            s2 = _exact_sum((p - value) ** 2) / (n - 1)
            se = math.sqrt(s2 / n)
        else:
            se = float("nan")
        out.append(MomentEstimate(order=j, value=value, se=se, n=n))
    return out


def ks_distance(samples, cdf) -> float:
    """sup_x |F_hat(x) - F(x)| against a fixed reference law.

    ``cdf`` may be vectorized (preferred) or scalar.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise EmptySample("no samples")
    n = x.size
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except TypeError:
        f = np.array([float(cdf(v)) for v in x])
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - f), np.max(f - lo)))


def poisson_gof(counts, mean: float) -> dict:
    """Chi-square goodness of fit of integer counts against Poisson(mean).

    Cells are grouped left to right until each expected frequency reaches 5
    (the upper tail forms the final cell); dof = cells - 1.
    """
    c = np.asarray(counts)
    if c.size == 0:
        raise EmptySample("no counts")
    if not mean > 0.0:
        raise ValueError(f"mean must be > 0, got {mean}")
    n = c.size
    kmax = int(c.max())
    pmf = sps.poisson.pmf(np.arange(kmax + 1), mean)
    tail = max(1.0 - pmf.sum(), 0.0)
    expected = np.append(pmf * n, tail * n)
    observed = np.append(np.bincount(c.astype(int), minlength=kmax + 1), 0)

    groups_obs, groups_exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            groups_obs.append(acc_o)
            groups_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0 or acc_o > 0.0:
        if groups_exp:
            groups_obs[-1] += acc_o
            groups_exp[-1] += acc_e
        else:
            groups_obs.append(acc_o)
            groups_exp.append(acc_e)
    if len(groups_exp) < 2:
        raise DegenerateBins("all mass in a single cell")
    obs = np.asarray(groups_obs)
    exp = np.asarray(groups_exp)
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(exp) - 1
    return {"chi2": chi2, "dof": dof,
            "pvalue": float(sps.chi2.sf(chi2, dof))}
