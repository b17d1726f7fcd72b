"""Scaled families and convergence experiments at reduced desk scale."""

import pytest

from selfex import (
    CirParams,
    ConstantJumps,
    GammaJumps,
    LinearDrift,
    ModelSpec,
    ScalingFamily,
    convergence_experiment_integrated,
    convergence_experiment_intensity,
    deterministic_limit_experiment,
    gamma_family,
    run_convergence_suite,
    validate_model,
)
from selfex.errors import InfeasibleRhoTarget

V_LIST = (0.5, 0.1, 0.02)


class TestGammaFamilyIdentities:
    def test_second_moment_identity_exact(self):
        fam = gamma_family(1.0, 1.0, 1.0, V_LIST)
        for a, model in zip(fam.scales, fam.models):
            value = a * model.beta ** 2 * model.jumps.moment(2)
            assert value == pytest.approx(1.0, rel=1e-12)

    def test_excitation_level_identity_exact(self):
        c0, u = 1.3, 2.0
        fam = gamma_family(c0, 0.7, u, V_LIST)
        for a, model in zip(fam.scales, fam.models):
            value = a * model.beta * model.jumps.moment(1) * model.drift.lambda0
            assert value == pytest.approx(c0 / u, rel=1e-12)

    def test_third_order_term_decreases_along_the_list(self):
        fam = gamma_family(1.0, 1.0, 1.0, V_LIST)
        seq = [a ** 2 * m.beta ** 3 * m.jumps.moment(3)
               for a, m in zip(fam.scales, fam.models)]
        assert all(b < a for a, b in zip(seq, seq[1:]))

    def test_scales_strictly_decreasing_enforced(self):
        with pytest.raises(ValueError):
            gamma_family(1.0, 1.0, 1.0, [0.1, 0.5])

    def test_claimed_limit_and_candidates(self):
        fam = gamma_family(1.0, 1.0, 1.0, V_LIST)
        assert fam.claimed_limit == CirParams(2.0, 1.0, 1.0)
        assert set(fam.candidates) == {"derived", "level_only",
                                       "rate_rescaled"}

    def test_initial_value_policies(self):
        small = gamma_family(1.0, 1.0, 1.0, V_LIST, init="small")
        equil = gamma_family(1.0, 1.0, 1.0, V_LIST, init="equilibrium")
        for a, ms, me in zip(small.scales, small.models, equil.models):
            assert me.lambda_init == me.drift.lambda0
            assert ms.lambda_init < me.lambda_init
        # the scaled initial value of the small policy vanishes along k
        scaled = [a * m.lambda_init
                  for a, m in zip(small.scales, small.models)]
        assert all(b < a for a, b in zip(scaled, scaled[1:]))


@pytest.fixture(scope="module")
def suite():
    return run_convergence_suite(1.0, 1.0, 1.0, V_LIST, t=1.0,
                                 n_paths=2_000, seed=1234)


class TestConvergenceExperiments:
    def test_small_policy_moments_converge(self, suite):
        rep = suite["small"]["intensity"]
        assert rep.monotone["mean"]
        assert rep.monotone["variance"]
        assert rep.final_rel_error["mean"] <= 0.08

    def test_small_policy_matches_derived_candidate(self, suite):
        rep = suite["small"]["intensity"]
        assert rep.best_candidate == "derived"
        assert rep.candidate_final_errors["derived"] \
            < rep.candidate_final_errors["level_only"]

    def test_equilibrium_policy_does_not_match_the_zero_start_limit(self, suite):
        rep = suite["equilibrium"]["intensity"]
        assert rep.final_rel_error["mean"] > 0.15

    def test_integrated_moments_converge(self, suite):
        rep = suite["small"]["integrated"]
        assert rep.monotone["int_mean"]
        assert rep.monotone["int_second"]
        assert rep.final_rel_error["int_mean"] <= 0.1

    def test_uniform_polynomial_moment_bound(self, suite):
        assert suite["small"]["intensity"].poly_bound_ok

    def test_rows_are_ordered_and_tagged(self, suite):
        rep = suite["small"]["intensity"]
        rows = rep.rows_for("mean")
        assert [r.v for r in rows] == list(V_LIST)
        assert all(r.se >= 0.0 for r in rows)

    def test_integrated_at_zero_time_trivially_converges(self):
        fam = gamma_family(1.0, 1.0, 1.0, (0.5, 0.1))
        rep = convergence_experiment_integrated(fam, 0.0, 100, 0)
        assert rep.passed
        assert all(r.empirical == 0.0 for r in rep.rows)

    def test_degenerate_family_flagged(self):
        models = tuple(validate_model(ModelSpec(
            LinearDrift(alpha=1.0, lambda0=lam0), 0.0, ConstantJumps(1.0),
            lambda_init=lam0)) for lam0 in (1.0, 1.0))
        fam = ScalingFamily(index_params=(2.0, 1.0), scales=(0.5, 0.25),
                            models=models, claimed_limit=CirParams(1.0, 1.0, 1.0),
                            candidates={}, label="flat")
        rep = convergence_experiment_intensity(fam, 1.0, 50, 3)
        assert rep.degenerate
        # deterministic intensity: every sample sits on the point mass
        assert all(r.empirical == 0.0 for r in rep.rows_for("ks"))


class TestDeterministicLimit:
    def test_no_excitation_is_exactly_poisson(self):
        rep = deterministic_limit_experiment(
            lambda_init=2.0, alpha_hat=0.0, beta_hat=0.0,
            jumps=ConstantJumps(1.0), eps_list=[1.0, 0.1, 0.01],
            horizon=3.0, n_paths=20_000, seed=10, lambda0=0.5)
        for row in rep.rows:
            assert row.pvalue >= 0.01
            assert row.mean_ref == pytest.approx(6.0)

    def test_eps_scaling_mode_converges(self):
        rep = deterministic_limit_experiment(
            lambda_init=2.0, alpha_hat=0.5, beta_hat=0.5,
            jumps=ConstantJumps(1.0), eps_list=[1.0, 0.1, 0.01],
            horizon=3.0, n_paths=20_000, seed=12, lambda0=0.1)
        assert rep.rows[0].pvalue < 0.01       # strong model error at eps = 1
        assert rep.rows[-1].pvalue >= 0.01     # vanished at eps = 0.01
        assert rep.passed

    def test_rho_eps_definition(self):
        rep = deterministic_limit_experiment(
            lambda_init=1.0, alpha_hat=0.4, beta_hat=0.5,
            jumps=ConstantJumps(1.0), eps_list=[1.0, 0.5],
            horizon=1.0, n_paths=200, seed=4, lambda0=0.1)
        for row in rep.rows:
            assert row.rho_eps == pytest.approx(row.eps * (0.5 - 0.4))

    def test_fixed_rho_feasibility(self):
        with pytest.raises(InfeasibleRhoTarget):
            deterministic_limit_experiment(
                lambda_init=1.0, alpha_hat=0.5, beta_hat=0.5,
                jumps=GammaJumps(u=1.0, v=1.0), eps_list=[1.0, 0.01],
                horizon=1.0, n_paths=100, seed=5, lambda0=0.1,
                mode="fixed_rho", rho=-0.1)

    def test_fixed_rho_retargets_the_jump_mean(self):
        rep = deterministic_limit_experiment(
            lambda_init=1.0, alpha_hat=0.5, beta_hat=0.5,
            jumps=GammaJumps(u=2.0, v=2.0), eps_list=[1.0, 0.5],
            horizon=1.0, n_paths=500, seed=6, lambda0=0.1,
            mode="fixed_rho", rho=0.2)
        for row in rep.rows:
            assert row.rho_eps == pytest.approx(0.2)

    def test_eps_list_must_decrease(self):
        with pytest.raises(ValueError):
            deterministic_limit_experiment(
                lambda_init=1.0, alpha_hat=0.1, beta_hat=0.1,
                jumps=ConstantJumps(1.0), eps_list=[0.1, 1.0],
                horizon=1.0, n_paths=10, seed=0, lambda0=0.1)
