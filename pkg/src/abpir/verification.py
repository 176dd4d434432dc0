"""Independent oracles: structural privacy, rank-based recoverability, LP optimum."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import lcm

from .compiler import build_plan, census, support_counts
from .exact import binom, rat_str
from .params import ParamSet, ProblemInstance, _as_instance


# privacy ----------------------------------------------------------------------

@dataclass
class PrivacyReport:
    instance: ProblemInstance
    censuses: dict  # W -> list of per-server Counters
    verdict: bool
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        return {
            "N": self.instance.N, "K": self.instance.K, "D": self.instance.D,
            "demand_sets": len(self.censuses),
            "verdict": "PASS" if self.verdict else "FAIL",
            "counterexample": self.counterexample,
        }


def expected_census(params: ParamSet) -> Counter:
    """Support census every server must show, whatever the demand set."""
    K = params.K
    want = Counter()
    for s in range(1, K + 1):
        count = params.L_counts[s - 1]
        if count:
            for S in combinations(range(1, K + 1), s):
                want[frozenset(S)] = count
    return want


def _first_duplicate(W, n, sums):
    seen = set()
    for idx, terms in enumerate(sums):
        msgs = [t[0] for t in terms]
        if len(set(msgs)) != len(msgs):
            return {"W": list(W), "server": n, "kind": "repeated_message", "sum_index": idx}
        dup = next((t for t in terms if tuple(t) in seen), None)
        if dup is not None:
            return {"W": list(W), "server": n, "kind": "duplicate_subpacket",
                    "subpacket": {"msg": dup[0], "sp": dup[1]}, "sum_index": idx}
        seen.update(tuple(t) for t in terms)
    return None


def check_plans_privacy(params: ParamSet, plans) -> PrivacyReport:
    """Census and duplicate check over already-built plans."""
    want = expected_census(params)
    censuses = {}
    counterexample = None
    for plan in plans:
        per_server = census(plan)
        censuses[plan.W] = per_server
        if counterexample is not None:
            continue
        for n, (got, sums) in enumerate(zip(per_server, plan.servers), start=1):
            if got != want:
                diff = {
                    ",".join(map(str, sorted(S))): {"expected": want.get(S, 0), "got": got.get(S, 0)}
                    for S in set(got) | set(want)
                    if got.get(S, 0) != want.get(S, 0)
                }
                counterexample = {"W": list(plan.W), "server": n, "kind": "census", "diff": diff}
                break
            n_terms = sum(map(len, sums))
            repeated = any(len(set(m)) != len(m) for m in support_counts(sums))
            if repeated or len({t for terms in sums for t in terms}) != n_terms:
                counterexample = _first_duplicate(plan.W, n, sums)
                break
    return PrivacyReport(params.instance, censuses, counterexample is None, counterexample)


def verify_privacy(params: ParamSet, seed: int = 0, *, check: bool = False) -> PrivacyReport:
    """Build a plan for every demand set and compare censuses.

    The symbolic self-check is skipped by default since privacy is purely
    structural; pass ``check=True`` to run it too.
    """
    K, D = params.K, params.D
    plans = (build_plan(params, W, seed, check=check) for W in combinations(range(1, K + 1), D))
    return check_plans_privacy(params, plans)


# recoverability ----------------------------------------------------------------

@dataclass
class RecoverabilityReport:
    verdict: bool
    per_field: dict  # p -> number of demand unit rows outside the span
    rank: dict  # p -> rank of the incidence matrix

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.verdict else "FAIL",
            "out_of_span": {str(p): v for p, v in self.per_field.items()},
            "rank": {str(p): v for p, v in self.rank.items()},
        }


def _column_map(plan):
    # demand columns get the low ids so echelon pivots (max column) land on
    # interference columns first
    L = plan.L
    order = list(plan.W) + [m for m in range(1, plan.K + 1) if m not in set(plan.W)]
    base = {m: k * L for k, m in enumerate(order)}
    return base, len(plan.W) * L


def support_rows(plan) -> list[tuple]:
    """Column tuple of each sum (all coefficients are 1), every server in turn."""
    base, _ = _column_map(plan)
    L = plan.L
    colmap = [0] * (plan.K * L)
    for m, b in base.items():
        colmap[(m - 1) * L: m * L] = range(b, b + L)
    get = colmap.__getitem__
    return [tuple(map(get, ids)) for sums in plan.flat_terms for ids in sums]


def incidence_rows(plan) -> list[dict]:
    """Sparse ``{column: 1}`` rows of the incidence matrix."""
    return [dict.fromkeys(t, 1) for t in support_rows(plan)]


def _insert(pivots, row, p):
    # reduce a {column: value} row against the basis; pivot = largest column
    while row:
        c = max(row)
        prow = pivots.get(c)
        if prow is None:
            lead = row[c]
            if lead != 1:
                inv = pow(lead, p - 2, p)
                row = {k: v * inv % p for k, v in row.items()}
            pivots[c] = row
            return
        coef = row[c]
        for k, v in prow.items():
            nv = (row.get(k, 0) - coef * v) % p
            if nv:
                row[k] = nv
            else:
                del row[k]


def _echelon(rows, p):
    """Insert rows into an echelon basis over F_p; pivot = largest column."""
    pivots: dict[int, dict] = {}
    for row in sorted(rows, key=len):
        _insert(pivots, {c: v % p for c, v in row.items() if v % p}, p)
    return pivots


def _echelon_support(rows, p):
    """Same as :func:`_echelon` for rows given as column tuples of ones."""
    pivots: dict[int, dict] = {}
    for t in sorted(rows, key=len):
        if not t:
            continue
        c = max(t)
        if c not in pivots:  # most rows: nothing to eliminate
            pivots[c] = dict.fromkeys(t, 1)
        else:
            _insert(pivots, dict.fromkeys(t, 1), p)
    return pivots


def _span_from_pivots(pivots, demand_cols, p):
    extras: dict[int, dict] = {}
    in_span = {}
    for c in sorted(demand_cols):
        prow = pivots.get(c)
        if prow is None:
            in_span[c] = False
            continue
        res: dict[int, int] = {}
        for k, v in prow.items():
            if k == c:
                continue
            if k in pivots:
                for k2, v2 in extras[k].items():
                    res[k2] = (res.get(k2, 0) - v * v2) % p
            else:
                res[k] = (res.get(k, 0) + v) % p
        res = {k: v for k, v in res.items() if v}
        extras[c] = res
        in_span[c] = not res
    return in_span, len(pivots)


def _sparse_in_span(rows, demand_cols, p):
    return _span_from_pivots(_echelon(rows, p), demand_cols, p)


def _in_span_f2(rows, demand_cols):
    # same elimination over F_2 with rows as column sets
    pivots: dict[int, set] = {}
    for t in sorted(rows, key=len):
        if not t:
            continue
        c = max(t)
        prow = pivots.get(c)
        if prow is None:
            pivots[c] = set(t)
            continue
        row = set(t)
        while row:
            c = max(row)
            prow = pivots.get(c)
            if prow is None:
                pivots[c] = row
                break
            row ^= prow
    extras: dict[int, set] = {}
    in_span = {}
    for c in sorted(demand_cols):
        prow = pivots.get(c)
        if prow is None:
            in_span[c] = False
            continue
        res: set = set()
        for k in prow:
            if k == c:
                continue
            if k in pivots:
                res ^= extras[k]
            else:
                res ^= {k}
        extras[c] = res
        in_span[c] = not res
    return in_span, len(pivots)


def demand_columns_in_span(rows, demand_cols, p):
    """For each column in ``demand_cols`` (all lower than every other
    column), whether its unit vector lies in the row span over F_p.

    ``rows`` are sparse ``{column: value}`` dicts.  Returns ``(in_span, rank)``.
    """
    if p == 2 and all(v % 2 == 1 for r in rows for v in r.values()):
        return _in_span_f2(rows, demand_cols)
    return _sparse_in_span(rows, demand_cols, p)


def verify_recoverability(plan, primes=(2, 3)) -> RecoverabilityReport:
    """Every demand unit row must lie in the span of the sums' incidence rows."""
    rows = support_rows(plan)
    _, n_demand = _column_map(plan)
    per_field, ranks = {}, {}
    for p in primes:
        if p == 2:
            in_span, rank = _in_span_f2(rows, range(n_demand))
        else:
            in_span, rank = _span_from_pivots(_echelon_support(rows, p), range(n_demand), p)
        per_field[p] = sum(1 for ok in in_span.values() if not ok)
        ranks[p] = rank
    return RecoverabilityReport(all(v == 0 for v in per_field.values()), per_field, ranks)


# LP oracle ---------------------------------------------------------------------

class LPInfeasibleError(RuntimeError):
    pass


@dataclass
class LPOracleResult:
    optimum: Fraction
    argmin: tuple
    bases_enumerated: int
    feasible_bases: int = 0
    mode: str = "equality"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "optimum": rat_str(self.optimum),
            "argmin": [rat_str(x) for x in self.argmin],
            "bases_enumerated": self.bases_enumerated,
            "feasible_bases": self.feasible_bases,
        }


def lp_system(inst, mode: str = "equality"):
    """Standard-form data ``(A, b, c)`` over ``x_1..x_K`` plus any slacks."""
    if mode not in ("equality", "inequality"):
        raise ValueError(f"unknown constraint mode {mode!r}")
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    E = K - D
    n_vars = K + (E if mode == "inequality" else 0)
    A, b = [], []
    for j in range(1, E + 1):
        row = [Fraction(0)] * n_vars
        row[j - 1] += 1
        for i in range(1, D + 1):
            row[i + j - 1] -= Fraction(binom(D, i), N - 1)
        if mode == "inequality":
            row[K + j - 1] = Fraction(-1)
        A.append(row)
        b.append(Fraction(0))
    scale = Fraction(N, D)
    norm = [scale * (binom(K, s) - binom(E, s)) for s in range(1, K + 1)]
    A.append(norm + [Fraction(0)] * (n_vars - K))
    b.append(Fraction(1))
    c = [scale * binom(K, s) for s in range(1, K + 1)] + [Fraction(0)] * (n_vars - K)
    return A, b, c


def _solve_square(B, rhs):
    """Exact Gauss-Jordan over the rationals; None when singular."""
    m = len(B)
    aug = [list(row) + [r] for row, r in zip(B, rhs)]
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        pivot_row = [v / pv for v in aug[col]]
        aug[col] = pivot_row
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * p for a, p in zip(aug[r], pivot_row)]
    return [aug[r][m] for r in range(m)]


def _solve_integer(B, rhs):
    """Fraction-free Gauss-Jordan on an integer system.

    Returns ``(det, y)`` with ``x = y / det`` (``det`` may be negative), or
    None when singular.  Every division is exact.
    """
    m = len(B)
    aug = [list(row) + [r] for row, r in zip(B, rhs)]
    prev = 1
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col]), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        prow = aug[col]
        pv = prow[col]
        for r in range(m):
            if r != col:
                row = aug[r]
                f = row[col]
                aug[r] = [(pv * a - f * p) // prev for a, p in zip(row, prow)]
        prev = pv
    return prev, [aug[r][m] for r in range(m)]


def _integer_rows(A, b):
    rows, rhs = [], []
    for row, r in zip(A, b):
        scale = lcm(*(v.denominator for v in row), r.denominator)
        rows.append([int(v * scale) for v in row])
        rhs.append(int(r * scale))
    return rows, rhs


def lp_oracle(inst, constraint_mode: str = "equality") -> LPOracleResult:
    """Minimum downloads per demand message by visiting every basis."""
    A, b, c = lp_system(inst, constraint_mode)
    K = _as_instance(inst).K
    m, n = len(A), len(A[0])
    Ai, bi = _integer_rows(A, b)
    best = None
    best_x = None
    tried = feasible = 0
    for basis in combinations(range(n), m):
        tried += 1
        solved = _solve_integer([[row[k] for k in basis] for row in Ai], bi)
        if solved is None:
            continue
        det, y = solved
        if any(v * det < 0 for v in y):
            continue
        feasible += 1
        xb = [Fraction(v, det) for v in y]
        value = sum(c[k] * v for k, v in zip(basis, xb))
        if best is None or value < best:
            best = value
            x = [Fraction(0)] * n
            for k, v in zip(basis, xb):
                x[k] = v
            best_x = tuple(x[:K])
    if best is None:
        raise LPInfeasibleError(f"no basic feasible solution for {inst} ({constraint_mode})")
    return LPOracleResult(best, best_x, tried, feasible, constraint_mode)
