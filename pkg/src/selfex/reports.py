"""File output: schema-pinned CSV tables and JSON summaries, written
atomically (temp file in the target directory, then rename) so interrupted
runs never leave truncated files."""
from __future__ import annotations

import json
import os
import tempfile

JUMPS_COLUMNS = ("path_id", "k", "T_k", "X_k", "lambda_pre", "lambda_post")
GRID_COLUMNS = ("path_id", "t", "lambda", "N", "U", "Lambda")
MOMENTS_COLUMNS = ("t", "m1", "v", "var", "E_Lambda", "E_Lambda2_quadrature")
MOMENTS_CLOSEDFORM_COLUMN = "E_Lambda2_closedform"
CONVERGENCE_COLUMNS = ("v_k", "a_k", "stat_name", "empirical", "reference",
                       "se", "abs_error")
DETLIMIT_COLUMNS = ("eps", "rho_eps", "chi2", "dof", "pvalue", "mean_N",
                    "mean_ref")


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def jumps_rows(paths) -> list:
    rows = []
    for pid, path in enumerate(paths):
        for k in range(len(path.jump_times)):
            rows.append((pid, k + 1, float(path.jump_times[k]),
                         float(path.marks[k]), float(path.lambda_pre[k]),
                         float(path.lambda_post[k])))
    return rows


def grid_rows(paths) -> list:
    rows = []
    for pid, path in enumerate(paths):
        for i in range(len(path.grid_t)):
            rows.append((pid, float(path.grid_t[i]), float(path.grid_lambda[i]),
                         int(path.grid_n[i]), float(path.grid_u[i]),
                         float(path.grid_compensator[i])))
    return rows


def convergence_rows(reports_by_policy) -> list:
    """Flatten {policy: {experiment: report}} into pinned-column rows.

    The policy is folded into stat_name as "<policy>/<stat>" so the column
    set stays exactly as pinned.
    """
    rows = []
    for policy, reports in reports_by_policy.items():
        for report in reports.values():
            for r in report.rows:
                rows.append((float(r.v), float(r.a), f"{policy}/{r.stat}",
                             float(r.empirical), float(r.reference),
                             float(r.se), float(r.abs_error)))
    return rows


def detlimit_rows(report) -> list:
    return [(float(r.eps), float(r.rho_eps), float(r.chi2), int(r.dof),
             float(r.pvalue), float(r.mean_n), float(r.mean_ref))
            for r in report.rows]
