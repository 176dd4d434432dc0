"""Rate/bound tabulation over (N, K, D) grids."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor

from .exact import rat_decimal, rat_str
from .params import ProblemInstance, bu_baseline, compare_schemes, lower_bound, upper_bound

D_RULES = ("all", "divisors-only", "non-divisors-only")
MAX_N, MAX_K = 100, 60
JOBS_ENV = "ABPIR_JOBS"

COLUMNS = [
    "N", "K", "D", "lower", "upper", "baseline", "ratio", "comparison",
    "lower_decimal", "upper_decimal", "baseline_decimal", "ratio_decimal",
]


def _keep(K: int, D: int, rule: str) -> bool:
    if rule == "all":
        return True
    if rule == "divisors-only":
        return K % D == 0
    return K % D != 0


def instances(n_values, k_values, d_rule: str = "all"):
    if d_rule not in D_RULES:
        raise ValueError(f"d_rule must be one of {D_RULES}, got {d_rule!r}")
    n_values, k_values = list(n_values), list(k_values)
    if not n_values or not k_values:
        raise ValueError("sweep ranges must be nonempty")
    if min(n_values) < 2 or max(n_values) > MAX_N:
        raise ValueError(f"N must lie in [2, {MAX_N}]")
    if min(k_values) < 1 or max(k_values) > MAX_K:
        raise ValueError(f"K must lie in [1, {MAX_K}]")
    return [
        (N, K, D)
        for N in n_values
        for K in k_values
        for D in range(1, K + 1)
        if _keep(K, D, d_rule)
    ]


def sweep_row(nkd) -> dict:
    inst = ProblemInstance(*nkd)
    lo, hi = lower_bound(inst), upper_bound(inst)
    base = bu_baseline(inst).rate
    ratio = lo / hi
    return {
        "N": inst.N, "K": inst.K, "D": inst.D,
        "lower": lo, "upper": hi, "baseline": base, "ratio": ratio,
        "comparison": compare_schemes(inst).value,
    }


def jobs_from_env(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, default)))
    except ValueError:
        return default


def sweep(n_values, k_values, d_rule: str = "all", jobs: int | None = None) -> list[dict]:
    """Exact rows ordered by (N, K, D) whatever the degree of parallelism."""
    todo = instances(n_values, k_values, d_rule)
    jobs = jobs_from_env() if jobs is None else jobs
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(sweep_row, todo, chunksize=16))
    else:
        rows = [sweep_row(t) for t in todo]
    return sorted(rows, key=lambda r: (r["N"], r["K"], r["D"]))


def _render(row: dict) -> dict:
    out = {k: row[k] for k in ("N", "K", "D", "comparison")}
    for key in ("lower", "upper", "baseline", "ratio"):
        out[key] = rat_str(row[key])
        out[f"{key}_decimal"] = rat_decimal(row[key], 6)
    return out


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(_render(row))
    return buf.getvalue()


def to_json(rows) -> str:
    return json.dumps([_render(r) for r in rows], indent=2)
