"""Scaled model families and the convergence experiments that check them
against the square-root-diffusion reference engine.

A family is a sequence of models indexed by a shrinking shape parameter; the
scaled intensity a_k * lambda_k(t) should approach a square-root diffusion as
the scales a_k drop to zero.  The gamma-jump construction used throughout has

    a_k = 1/Gamma(v_k),
    lambda0_k = c0 * sqrt(Gamma(v_k) (1+v_k) / v_k),
    beta_k    = sqrt(Gamma(v_k) / (v_k (1+v_k))),
    drift rate alpha_k = beta_k E[X_k] + c1   (linear, level lambda0_k),

with gamma jumps of inverse scale u and shape v_k.  Exact identities:
a_k * beta_k^2 * E[X_k^2] = 1/u^2 and a_k * beta_k * E[X_k] * lambda0_k =
c0/u for every k, while a_k * alpha_k * lambda0_k tends to c0/u + c0*c1.
The limit constants are therefore

    derived:       (c0/u + c0*c1,  c1,    1/u^2)   <- default claimed limit
    level_only:    (c0/u,          c1,    1/u^2)   <- drops the c1 feed-through
    rate_rescaled: (c0,            c1/u,  1/u^2)   <- all-rates-by-u variant

All three are carried as candidates and the convergence report adjudicates
empirically which one the simulations match.

Two initial-value policies are run and reported, because they disagree in the
limit: "small" starts each model at v_k * lambda0_k (so the scaled initial
value vanishes), "equilibrium" starts at lambda0_k (scaled initial value
tends to c0).  The reference marginal always uses Y(0) = 0, so the report
shows which policy actually matches it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cir import CirParams, cir_joint_moments, cir_marginal, cir_moments
from .errors import InfeasibleRhoTarget, InsufficientPaths
from .jumps import ConstantJumps, GammaJumps, JumpFamily
from .model import LinearDrift, ModelSpec, ValidatedModel, validate_model
from .stats import ks_distance, mean_and_se, poisson_gof, variance_and_se
from .thinning import SimConfig, simulate_ensemble

INIT_POLICIES = ("small", "equilibrium")


@dataclass(frozen=True)
class ScalingFamily:
    """k-indexed models with their scales and claimed limit process."""

    index_params: tuple[float, ...]      # v_k, decreasing
    scales: tuple[float, ...]            # a_k, strictly decreasing to 0
    models: tuple[ValidatedModel, ...]
    claimed_limit: CirParams
    candidates: dict[str, CirParams] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not (len(self.index_params) == len(self.scales) == len(self.models)):
            raise ValueError("index_params, scales and models must align")
        for a, b in zip(self.scales, self.scales[1:]):
            if not b < a:
                raise ValueError("scales a_k must be strictly decreasing")

    def degenerate(self) -> bool:
        return all(m.beta == 0.0 for m in self.models)


def gamma_family(c0: float, c1: float, u: float, v_list,
                 init: str = "small") -> ScalingFamily:
    """Build the gamma-jump family described in the module docstring."""
    if not (c0 > 0.0 and c1 > 0.0 and u > 0.0):
        raise ValueError("c0, c1, u must be > 0")
    if init not in INIT_POLICIES:
        raise ValueError(f"init must be one of {INIT_POLICIES}, got {init!r}")
    v_tuple = tuple(float(v) for v in v_list)
    for a, b in zip(v_tuple, v_tuple[1:]):
        if not b < a:
            raise ValueError("v_list must be strictly decreasing")
    scales, models = [], []
    for v in v_tuple:
        gv = math.gamma(v)
        a_k = 1.0 / gv
        lam0 = c0 * math.sqrt(gv * (1.0 + v) / v)
        beta = math.sqrt(gv / (v * (1.0 + v)))
        jumps = GammaJumps(u=u, v=v)
        alpha = beta * jumps.moment(1) + c1
        lam_init = v * lam0 if init == "small" else lam0
        models.append(validate_model(ModelSpec(
            drift=LinearDrift(alpha=alpha, lambda0=lam0),
            beta=beta, jumps=jumps, lambda_init=lam_init)))
        scales.append(a_k)
    candidates = {
        "derived": CirParams(c0 / u + c0 * c1, c1, 1.0 / u ** 2),
        "level_only": CirParams(c0 / u, c1, 1.0 / u ** 2),
        "rate_rescaled": CirParams(c0, c1 / u, 1.0 / u ** 2),
    }
    return ScalingFamily(
        index_params=v_tuple, scales=tuple(scales), models=tuple(models),
        claimed_limit=candidates["derived"], candidates=dict(candidates),
        label=init)


@dataclass(frozen=True)
class ConvergenceRow:
    v: float
    a: float
    stat: str
    empirical: float
    reference: float
    se: float
    abs_error: float


@dataclass
class ConvergenceReport:
    policy: str
    t: float
    n_paths: int
    rows: list[ConvergenceRow]
    monotone: dict[str, bool]
    final_rel_error: dict[str, float]
    candidate_final_errors: dict[str, float]
    best_candidate: str
    degenerate: bool
    poly_bound_ok: bool | None
    passed: bool

    def rows_for(self, stat: str) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.stat == stat]


def _adjudicate_decrease(rows: list[ConvergenceRow]) -> bool:
    """Non-increase in k with a 3-SE slack per step.

    A step whose apparent increase cannot be resolved (combined SE is NaN or
    larger than half the observed gap while the slack check fails) raises
    InsufficientPaths instead of failing the criterion.
    """
    ok = True
    for a, b in zip(rows, rows[1:]):
        gap = b.abs_error - a.abs_error
        if gap <= 0.0:
            continue
        se_gap = math.hypot(a.se, b.se)
        if math.isnan(se_gap):
            raise InsufficientPaths(
                f"cannot adjudicate the {b.stat} step at v={b.v}")
        if gap <= 3.0 * se_gap:
            continue
        if se_gap > gap / 2.0:
            raise InsufficientPaths(
                f"{b.stat} step at v={b.v}: SE {se_gap} exceeds half the "
                f"observed gap {gap}")
        ok = False
    return ok


def _family_samples(family: ScalingFamily, t: float, n_paths: int, seed: int,
                    workers: int = 1, max_jumps: int = 1_000_000):
    """Simulate every model of the family; return per-k scaled samples.

    Yields dicts with scaled terminal intensity and compensator samples plus
    the scaled empirical moment curves of order 1..3 on a five-point grid
    (used for the uniform polynomial bound check).
    """
    cfg = SimConfig(horizon=t, grid_dt=t / 4.0, max_jumps=max_jumps)
    out = []
    for k, (a_k, model) in enumerate(zip(family.scales, family.models)):
        summary = simulate_ensemble(model, cfg, n_paths, (seed, k),
                                    workers=workers, return_samples=True)
        lam = summary.samples["lambda"]
        out.append({
            "v": family.index_params[k],
            "a": a_k,
            "lam_hat": a_k * lam[:, -1],
            "comp_hat": a_k * summary.samples["Lambda"][:, -1],
            "grid_t": summary.grid_t,
            "mhat": np.stack([np.mean((a_k * lam) ** n, axis=0)
                              for n in (1, 2, 3)]),
        })
    return out


def _poly_bound_ok(samples, margin: float = 1.5) -> bool:
    """Uniform-in-k moment bound: the (1+t)^n envelope fitted on the coarsest
    level must bound every finer level within the margin."""
    grid = samples[0]["grid_t"]
    basis = np.stack([(1.0 + grid) ** n for n in (1, 2, 3)])
    coef = np.max(samples[0]["mhat"] / basis, axis=1)  # per order n
    for entry in samples[1:]:
        if np.any(entry["mhat"] > margin * coef[:, None] * basis):
            return False
    return True


def _final_band_ok(rows: list[ConvergenceRow], rel_tol: float = 0.05) -> bool:
    last = rows[-1]
    scale = max(abs(last.reference), 1e-12)
    return last.abs_error <= rel_tol * scale + 3.0 * last.se


def _build_report(policy, t, n_paths, rows_by_stat, band_stats, family,
                  candidate_errors, degenerate, poly_ok) -> ConvergenceReport:
    rows = [r for rows in rows_by_stat.values() for r in rows]
    monotone = {stat: _adjudicate_decrease(rs)
                for stat, rs in rows_by_stat.items()}
    final_rel = {
        stat: rs[-1].abs_error / max(abs(rs[-1].reference), 1e-12)
        for stat, rs in rows_by_stat.items()}
    best = min(candidate_errors, key=candidate_errors.get) \
        if candidate_errors else ""
    passed = all(monotone.values()) and all(
        _final_band_ok(rows_by_stat[s]) for s in band_stats)
    if "ks" in rows_by_stat:
        passed = passed and rows_by_stat["ks"][-1].empirical <= 0.05
    return ConvergenceReport(
        policy=policy, t=t, n_paths=n_paths, rows=rows, monotone=monotone,
        final_rel_error=final_rel, candidate_final_errors=candidate_errors,
        best_candidate=best, degenerate=degenerate, poly_bound_ok=poly_ok,
        passed=passed)


def _ks_se(n: int) -> float:
    # nominal fluctuation scale of an empirical KS distance; drives the
    # monotonicity slack only
    return 0.5 / math.sqrt(n)


def convergence_experiment_intensity(family: ScalingFamily, t: float,
                                     n_paths: int, seed: int, *,
                                     workers: int = 1,
                                     samples=None) -> ConvergenceReport:
    """Compare scaled terminal intensities against the claimed limit law.

    Per level: empirical mean and variance against the limit moment ODE
    values, and the KS distance against the limit marginal (a point mass when
    the family carries no jumps at all, which is flagged as degenerate).
    """
    if samples is None:
        samples = _family_samples(family, t, n_paths, seed, workers)
    limit = family.claimed_limit
    y1, y2 = cir_moments(limit, 2, t)
    ref_mean, ref_var = float(y1), float(y2 - y1 * y1)
    degenerate = family.degenerate()
    if degenerate:
        point = None
    else:
        marginal = cir_marginal(limit, t)

    rows_by_stat = {"mean": [], "variance": [], "ks": []}
    for entry in samples:
        lam_hat = entry["lam_hat"]
        m, m_se = mean_and_se(lam_hat)
        s2, s2_se = variance_and_se(lam_hat)
        if degenerate:
            # no jumps anywhere: the limit is the point mass at the
            # deterministic flow value; both CDFs evaluated right-continuously
            point = float(lam_hat[0])
            ks = max(float(np.mean(lam_hat < point)),
                     1.0 - float(np.mean(lam_hat <= point)))
        else:
            ks = ks_distance(lam_hat, marginal.cdf)
        rows_by_stat["mean"].append(ConvergenceRow(
            entry["v"], entry["a"], "mean", m, ref_mean, m_se,
            abs(m - ref_mean)))
        rows_by_stat["variance"].append(ConvergenceRow(
            entry["v"], entry["a"], "variance", s2, ref_var, s2_se,
            abs(s2 - ref_var)))
        rows_by_stat["ks"].append(ConvergenceRow(
            entry["v"], entry["a"], "ks", ks, 0.0, _ks_se(len(lam_hat)), ks))

    candidate_errors = {}
    final_mean = rows_by_stat["mean"][-1].empirical
    for name, cand in family.candidates.items():
        cy1 = float(cir_moments(cand, 1, t)[0])
        candidate_errors[name] = abs(final_mean - cy1)

    return _build_report(family.label or "default", t, n_paths, rows_by_stat,
                         ("mean",), family, candidate_errors, degenerate,
                         _poly_bound_ok(samples))


def convergence_experiment_integrated(family: ScalingFamily, t: float,
                                      n_paths: int, seed: int, *,
                                      workers: int = 1,
                                      samples=None) -> ConvergenceReport:
    """Compare scaled integrated intensities against the limit's joint
    moments E[int Y] and E[(int Y)^2]."""
    if t == 0.0:
        # every integral is identically zero; trivially converged
        rows_by_stat = {
            stat: [ConvergenceRow(v, a, stat, 0.0, 0.0, 0.0, 0.0)
                   for v, a in zip(family.index_params, family.scales)]
            for stat in ("int_mean", "int_second")}
        return _build_report(family.label or "default", t, n_paths,
                             rows_by_stat, (), family, {},
                             family.degenerate(), None)
    if samples is None:
        samples = _family_samples(family, t, n_paths, seed, workers)
    limit = family.claimed_limit
    joint = cir_joint_moments(limit, 2, 0, t)
    ref_first, ref_second = joint[(1, 0)], joint[(2, 0)]

    rows_by_stat = {"int_mean": [], "int_second": []}
    for entry in samples:
        comp = entry["comp_hat"]
        m, m_se = mean_and_se(comp)
        m2, m2_se = mean_and_se(comp ** 2)
        rows_by_stat["int_mean"].append(ConvergenceRow(
            entry["v"], entry["a"], "int_mean", m, ref_first, m_se,
            abs(m - ref_first)))
        rows_by_stat["int_second"].append(ConvergenceRow(
            entry["v"], entry["a"], "int_second", m2, ref_second, m2_se,
            abs(m2 - ref_second)))

    candidate_errors = {}
    final = rows_by_stat["int_mean"][-1].empirical
    for name, cand in family.candidates.items():
        cref = cir_joint_moments(cand, 1, 0, t)[(1, 0)]
        candidate_errors[name] = abs(final - cref)

    return _build_report(family.label or "default", t, n_paths, rows_by_stat,
                         ("int_mean", "int_second"), family, candidate_errors,
                         family.degenerate(), None)


def run_convergence_suite(c0: float, c1: float, u: float, v_list, t: float,
                          n_paths: int, seed: int, *, workers: int = 1
                          ) -> dict[str, dict[str, ConvergenceReport]]:
    """Both experiments under both initial-value policies, sharing ensembles.

    Returns {policy: {"intensity": report, "integrated": report}}.
    """
    out = {}
    for pol_i, policy in enumerate(INIT_POLICIES):
        family = gamma_family(c0, c1, u, v_list, init=policy)
        samples = _family_samples(family, t, n_paths, (seed + 7919 * pol_i),
                                  workers)
        out[policy] = {
            "intensity": convergence_experiment_intensity(
                family, t, n_paths, seed, samples=samples),
            "integrated": convergence_experiment_integrated(
                family, t, n_paths, seed, samples=samples),
        }
    return out


# deterministic-intensity limit ------------------------------------------------

@dataclass(frozen=True)
class DetLimitRow:
    eps: float
    rho_eps: float
    chi2: float
    dof: int
    pvalue: float
    mean_n: float
    mean_ref: float
    # martingale diagnostic, not part of the CSV schema
    compensator_gap: float = 0.0
    compensator_gap_se: float = float("nan")


@dataclass
class DetLimitReport:
    mode: str
    rows: list[DetLimitRow]
    passed: bool  # final (smallest-eps) row not rejected at 1%


def _reference_poisson_mean(lambda_init: float, rho: float, horizon: float
                            ) -> float:
    if rho == 0.0:
        return lambda_init * horizon
    return lambda_init * math.expm1(rho * horizon) / rho


def deterministic_limit_experiment(lambda_init: float, alpha_hat: float,
                                   beta_hat: float, jumps: JumpFamily,
                                   eps_list, horizon: float, n_paths: int,
                                   seed: int, *, lambda0: float = 0.0,
                                   mode: str = "eps", rho: float | None = None,
                                   workers: int = 1,
                                   max_jumps: int = 1_000_000
                                   ) -> DetLimitReport:
    """Shrink drift and excitation together and test N(T) against the
    limiting Poisson law with mean int_0^T lambda_init * e^{rho s} ds.

    ``eps`` mode scales alpha = eps*alpha_hat and beta = eps*beta_hat with the
    jump family fixed, so rho_eps = eps*(beta_hat*E[X] - alpha_hat) shrinks to
    zero along with the model error.  ``fixed_rho`` mode instead retargets the
    gamma jump mean to E[X] = (rho + eps*alpha_hat)/(eps*beta_hat), keeping
    rho constant; this is diagnostic only and infeasible once the required
    mean turns negative.
    """
    if mode not in ("eps", "fixed_rho"):
        raise ValueError(f"mode must be 'eps' or 'fixed_rho', got {mode!r}")
    eps_tuple = tuple(float(e) for e in eps_list)
    for a, b in zip(eps_tuple, eps_tuple[1:]):
        if not b < a:
            raise ValueError("eps_list must be strictly decreasing")
    if mode == "fixed_rho" and rho is None:
        raise ValueError("fixed_rho mode needs a target rho")

    rows = []
    for i, eps in enumerate(eps_tuple):
        alpha = eps * alpha_hat
        beta = eps * beta_hat
        fam = jumps
        if mode == "eps":
            rho_eps = eps * (beta_hat * fam.moment(1) - alpha_hat)
        else:
            if beta == 0.0:
                raise InfeasibleRhoTarget(
                    "fixed-rho mode cannot retarget with beta_hat = 0")
            ex_target = (rho + alpha) / beta
            if ex_target < 0.0:
                raise InfeasibleRhoTarget(
                    f"eps={eps}: required mean jump {(rho + alpha) / beta} < 0")
            if not isinstance(jumps, GammaJumps):
                raise ValueError("fixed_rho mode retargets gamma jumps only")
            fam = GammaJumps(u=jumps.v / ex_target, v=jumps.v) \
                if ex_target > 0.0 else ConstantJumps(0.0)
            rho_eps = rho
        model = validate_model(ModelSpec(
            drift=LinearDrift(alpha=alpha, lambda0=lambda0),
            beta=beta, jumps=fam, lambda_init=lambda_init))
        cfg = SimConfig(horizon=horizon, grid_dt=horizon, max_jumps=max_jumps)
        summary = simulate_ensemble(model, cfg, n_paths, (seed, i),
                                    workers=workers, return_samples=True)
        counts = summary.samples["N"][:, -1].astype(int)
        mean_ref = _reference_poisson_mean(lambda_init, rho_eps, horizon)
        gof = poisson_gof(counts, mean_ref)
        gap, gap_se = mean_and_se(summary.samples["N"][:, -1]
                                  - summary.samples["Lambda"][:, -1])
        rows.append(DetLimitRow(
            eps=eps, rho_eps=rho_eps, chi2=gof["chi2"], dof=gof["dof"],
            pvalue=gof["pvalue"], mean_n=float(counts.mean()),
            mean_ref=mean_ref, compensator_gap=gap, compensator_gap_se=gap_se))
    return DetLimitReport(mode=mode, rows=rows,
                          passed=rows[-1].pvalue >= 0.01)
