"""Figure rendering for the CLI report paths.

All figures are written next to the delimited output.  SVG output is made
reproducible by pinning the hash salt and dropping the date metadata.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "selfex"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _save(fig, path: str) -> None:
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def render_paths(paths, out_path: str) -> None:
    """Two stacked panels: intensity trajectories and the jump process U."""
    fig, (ax_lam, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for path in paths[:4]:
        ax_lam.plot(path.grid_t, path.grid_lambda, lw=1.0)
        if len(path.jump_times):
            ax_lam.plot(path.jump_times, path.lambda_post, ".", ms=4)
        ax_u.step(np.concatenate(([0.0], path.jump_times, [path.horizon])),
                  np.concatenate(([0.0], np.cumsum(path.marks),
                                  [path.marks.sum()])),
                  where="post", lw=1.0)
    ax_lam.set_ylabel(r"$\lambda(t)$")
    ax_u.set_ylabel(r"$U(t)$")
    ax_u.set_xlabel("t")
    fig.tight_layout()
    _save(fig, out_path)


def render_moments(ts, table, out_path: str) -> None:
    """Mean with a +-1 sd band, and the integrated second moment routes."""
    fig, (ax_m, ax_l) = plt.subplots(1, 2, figsize=(10, 4))
    ts = np.asarray(ts)
    m = np.asarray(table["m1"])
    sd = np.sqrt(np.asarray(table["var"]))
    ax_m.plot(ts, m, label="mean")
    ax_m.fill_between(ts, m - sd, m + sd, alpha=0.25, label="+-1 sd")
    ax_m.set_xlabel("t")
    ax_m.set_ylabel("intensity")
    ax_m.legend()
    ax_l.plot(ts, table["E_Lambda2_quadrature"], label="quadrature")
    if "E_Lambda2_closedform" in table:
        ax_l.plot(ts, table["E_Lambda2_closedform"], "--", label="closed form")
    ax_l.set_xlabel("t")
    ax_l.set_ylabel("second moment of the integral")
    ax_l.legend()
    fig.tight_layout()
    _save(fig, out_path)


def render_convergence(reports_by_policy, out_path: str) -> None:
    """abs_error against the index parameter, one panel per policy."""
    policies = list(reports_by_policy)
    fig, axes = plt.subplots(1, len(policies), figsize=(5 * len(policies), 4),
                             squeeze=False)
    for ax, policy in zip(axes[0], policies):
        for report in reports_by_policy[policy].values():
            stats = {r.stat for r in report.rows}
            for stat in sorted(stats):
                rows = report.rows_for(stat)
                ax.loglog([r.v for r in rows], [max(r.abs_error, 1e-16)
                                                for r in rows],
                          "o-", label=stat)
        ax.invert_xaxis()
        ax.set_xlabel("shape parameter v")
        ax.set_ylabel("abs error vs limit")
        ax.set_title(policy)
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def render_detlimit(report, out_path: str) -> None:
    fig, (ax_p, ax_m) = plt.subplots(1, 2, figsize=(10, 4))
    eps = [r.eps for r in report.rows]
    ax_p.semilogx(eps, [r.pvalue for r in report.rows], "o-")
    ax_p.axhline(0.01, color="red", lw=0.8, ls="--")
    ax_p.invert_xaxis()
    ax_p.set_xlabel("eps")
    ax_p.set_ylabel("GOF p-value")
    ax_m.semilogx(eps, [r.mean_n for r in report.rows], "o-", label="mean N(T)")
    ax_m.semilogx(eps, [r.mean_ref for r in report.rows], "s--",
                  label="Poisson reference")
    ax_m.invert_xaxis()
    ax_m.set_xlabel("eps")
    ax_m.legend()
    fig.tight_layout()
    _save(fig, out_path)
