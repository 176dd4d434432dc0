"""Exact checks of the two-demand comparison identities.

For D = 2 each round vector is a pair ``(alpha_s, beta_s)``.  Everything
is evaluated with the rational recurrence; no square roots are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .exact import binom, rat_str
from .params import compute_fg


@dataclass(frozen=True)
class AlphaBeta:
    N: int
    K: int
    alpha: tuple
    beta: tuple

    # 1-based accessors keep the identities readable
    def a(self, s: int) -> Fraction:
        return self.alpha[s - 1]

    def b(self, s: int) -> Fraction:
        return self.beta[s - 1]


def _check_nk(N: int, K: int) -> None:
    if N < 2 or K < 2:
        raise ValueError(f"need N >= 2 and K >= 2, got N={N}, K={K}")


def alpha_beta(N: int, K: int) -> AlphaBeta:
    _check_nk(N, K)
    alpha = [Fraction(0)] * K
    beta = [Fraction(0)] * K
    alpha[K - 2], alpha[K - 1] = Fraction(1), Fraction(0)
    beta[K - 2], beta[K - 1] = Fraction(0), Fraction(1)
    for s in range(K - 2, 0, -1):
        alpha[s - 1] = (2 * alpha[s] + alpha[s + 1]) / (N - 1)
        beta[s - 1] = (2 * beta[s] + beta[s + 1]) / (N - 1)
    return AlphaBeta(N, K, tuple(alpha), tuple(beta))


@dataclass
class IdentityReport:
    N: int
    K: int
    first_pair: bool
    second_pair: bool
    beta_shift: bool
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.first_pair and self.second_pair and self.beta_shift


def check_pair_identities(N: int, K: int) -> IdentityReport:
    """Check both cross-product identities for every i and the beta shift."""
    ab = alpha_beta(N, K)
    a, b = ab.a, ab.b
    r = Fraction(1, 1 - N)
    failures = []
    first = second = shift = True
    for i in range(1, K + 1):
        if a(1) * b(i) - a(i) * b(1) != r ** (K - i) * a(K - i + 1):
            first = False
            failures.append(("first_pair", i))
        if a(i) * b(2) - a(2) * b(i) != r ** (K - i - 1) * b(K - i + 1):
            second = False
            failures.append(("second_pair", i))
    for s in range(1, K):
        if b(s) != a(s + 1) / (N - 1):
            shift = False
            failures.append(("beta_shift", s))
    return IdentityReport(N, K, first, second, shift, failures)


def signed_sum(N: int, K: int) -> Fraction:
    ab = alpha_beta(N, K)
    a, b = ab.a, ab.b
    half = Fraction(1, 2)
    return sum(
        (binom(K, i) * ((a(1) * b(i) - a(i) * b(1)) - half * (a(i) * b(2) - a(2) * b(i)))
         for i in range(1, K + 1)),
        Fraction(0),
    )


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def ratio_gap_d2(N: int, K: int) -> int:
    """Sign of ``g_1/f_1 - g_2/f_2`` for D = 2: +1, 0 or -1."""
    if K < 3:
        raise ValueError(f"need K >= 3, got K={K}")
    f, g = compute_fg((N, K, 2))
    return _sign(g[0] / f[0] - g[1] / f[1])


def appendix_rows(n_values, k_values) -> list[dict]:
    """One result row per (N, K); used by the CLI report."""
    rows = []
    for N in n_values:
        for K in k_values:
            rep = check_pair_identities(N, K)
            total = signed_sum(N, K)
            expected = 0 if K % 2 == 0 else 1
            row = {
                "N": N,
                "K": K,
                "first_pair": rep.first_pair,
                "second_pair": rep.second_pair,
                "beta_shift": rep.beta_shift,
                "signed_sum": rat_str(total),
                "sign_ok": _sign(total) == expected,
            }
            if K >= 3:
                row["gap_sign"] = ratio_gap_d2(N, K)
                row["gap_agrees"] = row["gap_sign"] == _sign(total)
            row["passed"] = rep.passed and row["sign_ok"] and row.get("gap_agrees", True)
            rows.append(row)
    return rows
