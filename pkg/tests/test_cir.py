"""Square-root diffusion reference engine."""

import math

import numpy as np
import pytest
from scipy import integrate

from selfex import (
    CirParams,
    cir_euler_samples,
    cir_joint_moments,
    cir_marginal,
    cir_moments,
    cir_sample_euler,
    ks_distance,
)
from selfex.cir import cir_mean_exact

REF = CirParams(c0=1.0, c1=1.0, c2=0.25)


class TestMoments:
    def test_zero_start_gives_zero_moments_at_zero(self):
        assert np.allclose(cir_moments(REF, 4, 0.0), 0.0)

    def test_positive_start_initial_values(self):
        cir = CirParams(1.0, 1.0, 0.25, y0=0.5)
        for n, y in enumerate(cir_moments(cir, 4, 0.0), start=1):
            assert y == pytest.approx(0.5 ** n, rel=1e-12)

    def test_first_moment_matches_exact_formula(self):
        for cir in (REF, CirParams(2.0, 0.7, 1.3, y0=0.4)):
            for t in (0.1, 1.0, 5.0):
                assert cir_moments(cir, 1, t)[0] == pytest.approx(
                    cir_mean_exact(cir, t), rel=1e-12)

    def test_steady_state(self):
        cir = CirParams(1.0, 1.0, 0.25)
        assert cir_moments(cir, 1, 60.0)[0] == pytest.approx(1.0, rel=1e-9)

    def test_against_independent_ode_integration(self):
        # adaptive integration of the same triangular system, as a second
        # route independent of the coefficient recursion
        n_max = 4
        cir = CirParams(1.3, 0.9, 0.6, y0=0.2)

        def rhs(_t, y):
            out = np.empty(n_max)
            for n in range(1, n_max + 1):
                prev = y[n - 2] if n >= 2 else 1.0
                out[n - 1] = -n * cir.c1 * y[n - 1] \
                    + (n * cir.c0 + 0.5 * n * (n - 1) * cir.c2) * prev
            return out

        y0 = np.array([cir.y0 ** n for n in range(1, n_max + 1)])
        sol = integrate.solve_ivp(rhs, (0.0, 3.0), y0, method="DOP853",
                                  rtol=1e-11, atol=1e-13)
        ours = cir_moments(cir, n_max, 3.0)
        assert np.allclose(ours, sol.y[:, -1], rtol=1e-9)

    def test_triangularity(self):
        t = 1.7
        wide = cir_moments(REF, 4, t)
        narrow = cir_moments(REF, 2, t)
        assert abs(wide[1] - narrow[1]) <= 1e-12 * max(1.0, abs(narrow[1]))

    def test_second_moment_dominates_squared_mean(self):
        ts = np.linspace(0.01, 5.0, 40)
        y = cir_moments(REF, 2, ts)
        assert np.all(y[1] >= y[0] ** 2 * (1.0 - 1e-12))


class TestJointMoments:
    def test_pure_intensity_row_matches_moment_engine(self):
        t = 1.0
        table = cir_joint_moments(REF, 2, 2, t)
        plain = cir_moments(REF, 2, t)
        for n in (1, 2):
            assert table[(0, n)] == pytest.approx(plain[n - 1], rel=1e-9)

    def test_integrated_mean_against_quadrature(self):
        t = 1.0
        table = cir_joint_moments(REF, 1, 0, t)
        oracle, _ = integrate.quad(lambda s: cir_mean_exact(REF, s), 0.0, t,
                                   epsabs=1e-13, epsrel=1e-13)
        assert table[(1, 0)] == pytest.approx(oracle, rel=1e-8)

    def test_time_derivative_consistency(self):
        # d/dt E[int Y] = E[Y] along the dense solver output; with h = 1e-3
        # the O(h^2) differencing truncation sits well below the tolerance
        ts = np.linspace(0.0, 2.0, 2001)
        table = cir_joint_moments(REF, 1, 1, 2.0, t_eval=ts)
        y10 = table[(1, 0)]
        y01 = table[(0, 1)]
        h = ts[1] - ts[0]
        central = (y10[2:] - y10[:-2]) / (2.0 * h)
        assert np.max(np.abs(central - y01[1:-1])) <= 1e-6


class TestMarginal:
    def test_mean_identity(self):
        for t in (0.3, 1.0, 4.0):
            law = cir_marginal(REF, t)
            assert law.mean() == pytest.approx(
                cir_mean_exact(REF, t), rel=1e-12)

    def test_consistency_gate_tolerance(self):
        law = cir_marginal(REF, 1.0)
        y1, y2 = cir_moments(REF, 2, 1.0)
        assert law.mean() == pytest.approx(y1, rel=1e-8)
        assert law.var() == pytest.approx(y2 - y1 * y1, rel=1e-8)

    def test_degenerates_at_zero_time(self):
        scale_small = cir_marginal(REF, 1e-9).scale
        assert scale_small < 1e-9

    def test_requires_zero_start(self):
        with pytest.raises(ValueError):
            cir_marginal(CirParams(1.0, 1.0, 0.25, y0=0.1), 1.0)

    def test_ks_against_fine_euler_samples(self):
        rng = np.random.default_rng(314)
        samples = cir_euler_samples(REF, 1.0, 1e-3, 100_000, rng)
        law = cir_marginal(REF, 1.0)
        assert ks_distance(samples, law.cdf) <= 0.01


class TestEuler:
    def test_noiseless_reduction(self):
        cir = CirParams(1.0, 1.0, 0.0)
        rng = np.random.default_rng(0)
        step = 1e-3
        y = cir_sample_euler(cir, 1.0, step, rng)
        assert abs(y - cir_mean_exact(cir, 1.0)) <= 5.0 * step

    def test_samples_nonnegative(self):
        rng = np.random.default_rng(1)
        # small shape ratio: the boundary is visited often
        cir = CirParams(0.05, 1.0, 1.0)
        samples = cir_euler_samples(cir, 1.0, 1e-2, 20_000, rng)
        assert samples.min() >= 0.0

    def test_moments_against_ode_engine(self):
        rng = np.random.default_rng(2)
        samples = cir_euler_samples(REF, 1.0, 1e-3, 20_000, rng)
        y1, y2 = cir_moments(REF, 2, 1.0)
        for j, ref in ((1, y1), (2, y2)):
            p = samples ** j
            se = p.std(ddof=1) / math.sqrt(p.size)
            assert abs(p.mean() - ref) <= 3.0 * se

    def test_integral_samples(self):
        rng = np.random.default_rng(3)
        y, z = cir_euler_samples(REF, 1.0, 1e-3, 20_000, rng,
                                 return_integral=True)
        ref = cir_joint_moments(REF, 2, 0, 1.0)
        for j, key in ((1, (1, 0)), (2, (2, 0))):
            p = z ** j
            se = p.std(ddof=1) / math.sqrt(p.size)
            assert abs(p.mean() - ref[key]) <= 3.0 * se + 2e-3

    def test_scalar_sampler_reproducible(self):
        a = np.random.default_rng(9)
        b = np.random.default_rng(9)
        assert cir_sample_euler(REF, 0.5, 1e-2, a) == \
            cir_sample_euler(REF, 0.5, 1e-2, b)
