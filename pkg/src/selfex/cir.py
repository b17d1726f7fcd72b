"""Reference engine for the square-root diffusion

    dY = (c0 - c1*Y) dt + sqrt(c2*Y) dB,    Y(0) = y0 >= 0.

Raw moments y_n(t) = E[Y(t)^n] satisfy the triangular linear system

    y_n' = -n*c1*y_n + (n*c0 + n(n-1)*c2/2) * y_{n-1},   y_0 = 1,

which has an exact solution y_n(t) = sum_j a_{n,j} exp(-j*c1*t) obtained by a
coefficient recursion (no resonance occurs because the source of y_n only
carries decay rates j < n).  Joint moments of (integral of Y, Y) satisfy

    y_{m,n}' = -n*c1*y_{m,n} + (n*c0 + n(n-1)*c2/2)*y_{m,n-1} + m*y_{m-1,n+1}

and are integrated numerically over the closed index set {m + n <= degree}.

A full-truncation Euler sampler is included as an independent Monte Carlo
cross-check, and the y0 = 0 marginal is exposed as a gamma law that must
agree with the moment ODEs before it is returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import stats as sps

from .errors import InconsistentWithMomentODE


@dataclass(frozen=True)
class CirParams:
    c0: float  # drift level
    c1: float  # mean-reversion rate
    c2: float  # squared diffusion coefficient
    y0: float = 0.0

    def __post_init__(self):
        # c2 = 0 is allowed so the noiseless reduction stays expressible;
        # the gamma marginal itself requires c2 > 0.
        if self.c0 < 0.0 or self.y0 < 0.0 or self.c2 < 0.0:
            raise ValueError("c0, c2 and y0 must be >= 0")
        if not self.c1 > 0.0:
            raise ValueError("c1 must be > 0")


def _moment_coefficients(cir: CirParams, n_max: int) -> list[np.ndarray]:
    """Exponential-basis coefficients a[n][j] with y_n = sum_j a[n][j] e^{-j c1 t}."""
    coeffs = [np.array([1.0])]
    for n in range(1, n_max + 1):
        b = n * cir.c0 + 0.5 * n * (n - 1) * cir.c2
        prev = coeffs[n - 1]
        a = np.zeros(n + 1)
        for j in range(n):
            a[j] = b * prev[j] / ((n - j) * cir.c1)
        a[n] = cir.y0 ** n - a[:n].sum()
        coeffs.append(a)
    return coeffs


def cir_moments(cir: CirParams, n_max: int, t) -> np.ndarray:
    """y_1..y_{n_max} at time(s) t; shape (n_max,) or (n_max, len(t))."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    coeffs = _moment_coefficients(cir, n_max)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    decay = np.exp(-cir.c1 * np.multiply.outer(np.arange(n_max + 1), tt))
    out = np.stack([coeffs[n] @ decay[: n + 1] for n in range(1, n_max + 1)])
    return out if np.ndim(t) else out[:, 0]


def cir_mean_exact(cir: CirParams, t: float) -> float:
    """(c0/c1)(1 - e^{-c1 t}) + y0 e^{-c1 t}, for cross-checks."""
    decay = math.exp(-cir.c1 * t)
    return cir.c0 / cir.c1 * (1.0 - decay) + cir.y0 * decay


def _joint_indices(degree: int) -> list[tuple[int, int]]:
    return [(m, n) for d in range(1, degree + 1)
            for m, n in ((d - k, k) for k in range(d + 1))]


def cir_joint_moments(cir: CirParams, m_max: int, n_max: int, t,
                      t_eval=None) -> dict[tuple[int, int], np.ndarray | float]:
    """E[(int_0^t Y)^m * Y(t)^n] for every m <= m_max, n <= n_max.

    The dependency closure is all index pairs of total degree <= m_max + n_max
    (the m-derivative term pulls in y_{m-1,n+1}, which has the same degree).
    """
    degree = m_max + n_max
    idx = _joint_indices(degree)
    pos = {mn: i for i, mn in enumerate(idx)}
    c0, c1, c2 = cir.c0, cir.c1, cir.c2

    def rhs(_t, y):
        out = np.zeros(len(idx))
        for i, (m, n) in enumerate(idx):
            val = 0.0
            if n > 0:
                val -= n * c1 * y[i]
                src = (n * c0 + 0.5 * n * (n - 1) * c2)
                lower = y[pos[(m, n - 1)]] if (m, n - 1) in pos else 1.0
                val += src * lower
            if m > 0:
                val += m * y[pos[(m - 1, n + 1)]]
            out[i] = val
        return out

    y_init = np.array([cir.y0 ** n if m == 0 else 0.0 for m, n in idx])
    t_end = float(t)
    grid = np.asarray(t_eval, dtype=float) if t_eval is not None \
        else np.array([t_end])
    sol = integrate.solve_ivp(rhs, (0.0, max(t_end, 1e-12)), y_init,
                              method="DOP853", t_eval=grid,
                              rtol=1e-10, atol=1e-13)
    if not sol.success:
        raise RuntimeError(f"joint moment integration failed: {sol.message}")
    table = {}
    for mn, i in pos.items():
        m, n = mn
        if m <= m_max and n <= n_max + m_max:  # expose the full closure
            vals = sol.y[i]
            table[mn] = vals if t_eval is not None else float(vals[-1])
    table[(0, 0)] = np.ones_like(grid) if t_eval is not None else 1.0
    return table


@dataclass(frozen=True)
class GammaLaw:
    shape: float
    scale: float

    def mean(self) -> float:
        return self.shape * self.scale

    def var(self) -> float:
        return self.shape * self.scale * self.scale

    def cdf(self, x):
        return sps.gamma.cdf(x, a=self.shape, scale=self.scale)


def cir_marginal(cir: CirParams, t: float) -> GammaLaw:
    """Marginal law of Y(t) started from zero: a gamma distribution.

    shape = 2*c0/c2 and scale = c2*(1 - e^{-c1 t})/(2*c1).  The law is only
    returned after its mean and variance are checked against the moment ODE
    values to 1e-8 relative; a mismatch raises instead of returning.
    """
    if cir.y0 != 0.0:
        raise ValueError("marginal gamma law requires y0 = 0")
    if not t > 0.0:
        raise ValueError(f"t must be > 0, got {t}")
    if not cir.c2 > 0.0:
        raise ValueError("marginal gamma law requires c2 > 0")
    law = GammaLaw(shape=2.0 * cir.c0 / cir.c2,
                   scale=cir.c2 * (1.0 - math.exp(-cir.c1 * t)) / (2.0 * cir.c1))
    y1, y2 = cir_moments(cir, 2, t)
    var_ode = y2 - y1 * y1
    if abs(law.mean() - y1) > 1e-8 * max(1.0, abs(y1)) or \
            abs(law.var() - var_ode) > 1e-8 * max(1.0, abs(var_ode)):
        raise InconsistentWithMomentODE(
            f"gamma marginal (mean {law.mean()}, var {law.var()}) disagrees "
            f"with moment ODEs (mean {y1}, var {var_ode}) at t={t}")
    return law


def cir_sample_euler(cir: CirParams, t: float, step: float, rng) -> float:
    """One full-truncation Euler sample of Y(t).

    Negative excursions are truncated at zero inside both the drift and the
    diffusion term, and the returned value is clipped at zero.
    """
    if not 0.0 < step <= t:
        raise ValueError(f"need 0 < step <= t, got step={step}, t={t}")
    n = int(round(t / step))
    h = t / n
    sq = math.sqrt(h)
    x = cir.y0
    for _ in range(n):
        xp = x if x > 0.0 else 0.0
        x = x + (cir.c0 - cir.c1 * xp) * h \
            + math.sqrt(cir.c2 * xp) * sq * rng.standard_normal()
    return x if x > 0.0 else 0.0


def cir_euler_samples(cir: CirParams, t: float, step: float, n_samples: int,
                      rng, return_integral: bool = False):
    """Vectorized full-truncation Euler marginal (and integral) samples."""
    if not 0.0 < step <= t:
        raise ValueError(f"need 0 < step <= t, got step={step}, t={t}")
    n = int(round(t / step))
    h = t / n
    sq = math.sqrt(h)
    x = np.full(n_samples, cir.y0)
    z = np.zeros(n_samples) if return_integral else None
    for _ in range(n):
        xp = np.maximum(x, 0.0)
        if return_integral:
            z += xp * h
        x = x + (cir.c0 - cir.c1 * xp) * h \
            + np.sqrt(cir.c2 * xp) * (sq * rng.standard_normal(n_samples))
    y = np.maximum(x, 0.0)
    return (y, z) if return_integral else y
