"""Scheme parameters: the closed-form LP optimum and the recurrence baseline.

Indices follow the usual 1-based convention in the formulas, but every
vector here is a 0-based Python list, so ``v[s - 1]`` is the vector for
round ``s`` and ``f[t - 1]`` is ``f_t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .exact import binom, is_integral, rat_decimal, rat_str
from .validation import check_instance


class SchemeError(RuntimeError):
    """Raised when no admissible integral parameter set exists."""


class Comparison(str, enum.Enum):
    STRICTLY_BETTER = "STRICTLY_BETTER"
    EQUAL = "EQUAL"


@dataclass(frozen=True)
class ProblemInstance:
    N: int
    K: int
    D: int

    def __post_init__(self):
        check_instance(self.N, self.K, self.D)

    @property
    def E(self) -> int:
        """Number of interference messages."""
        return self.K - self.D


@dataclass(frozen=True)
class ParamSet:
    instance: ProblemInstance
    v: tuple
    f: tuple
    g: tuple
    t_star: int
    x: tuple
    S: int
    L: int
    L_counts: tuple
    R_counts: tuple
    M: int
    rate: Fraction
    scheme: str = "optimal"

    @property
    def N(self):
        return self.instance.N

    @property
    def K(self):
        return self.instance.K

    @property
    def D(self):
        return self.instance.D


def _as_instance(inst) -> ProblemInstance:
    if isinstance(inst, ProblemInstance):
        return inst
    return ProblemInstance(*inst)


def compute_v(inst) -> tuple:
    """Per-round weight vectors ``v_1..v_K`` (each of length D).

    The last D vectors are unit vectors; the rest follow the descending
    recurrence ``v_s = 1/(N-1) * sum_t C(D,t) v_{s+t}``.
    """
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    v: list = [None] * K
    for s in range(K - D + 1, K + 1):
        v[s - 1] = tuple(Fraction(int(t == s - K + D)) for t in range(1, D + 1))
    for s in range(K - D, 0, -1):
        v[s - 1] = tuple(
            sum((binom(D, t) * v[s + t - 1][c] for t in range(1, D + 1)), Fraction(0)) / (N - 1)
            for c in range(D)
        )
    return tuple(v)


def compute_fg(inst, v=None) -> tuple[tuple, tuple]:
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    if v is None:
        v = compute_v(inst)
    scale = Fraction(N, D)
    f = tuple(scale * sum(binom(K, s) * v[s - 1][c] for s in range(1, K + 1)) for c in range(D))
    g = tuple(
        f[c] - scale * sum((binom(K - D, s) * v[s - 1][c] for s in range(1, K - D + 1)), Fraction(0))
        for c in range(D)
    )
    return f, g


def recovery_counts(inst, L_counts) -> tuple:
    """New subpackets per demand message per server at each level i (R_1..R_D).

    Returned as Fractions so callers can test integrality.
    """
    inst = _as_instance(inst)
    K, D = inst.K, inst.D
    E = K - D
    return tuple(
        Fraction(binom(D - 1, i - 1), i) * sum(binom(E, j) * L_counts[i + j - 1] for j in range(E + 1))
        for i in range(1, D + 1)
    )


def downloads_per_server(inst, L_counts) -> int:
    inst = _as_instance(inst)
    return sum(binom(inst.K, s) * L_counts[s - 1] for s in range(1, inst.K + 1))


def _best_index(f, g) -> int:
    ratios = [gt / ft for ft, gt in zip(f, g)]
    best = max(ratios)
    return ratios.index(best) + 1  # smallest maximizer, 1-based


def solve_scheme(inst) -> ParamSet:
    """Optimal integral parameters for the reduced LP."""
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    v = compute_v(inst)
    f, g = compute_fg(inst, v)
    t = _best_index(f, g)
    gt = g[t - 1]
    x = tuple(v[s - 1][t - 1] / gt for s in range(1, K + 1))

    for S in range(1, D + 1):
        L = S * (N - 1) ** (K - D) * gt
        if not is_integral(L):
            continue
        Ls = [L * xs for xs in x]
        if not all(is_integral(c) for c in Ls):
            continue
        R = recovery_counts(inst, Ls)
        if not all(is_integral(r) for r in R):
            continue
        L_counts = tuple(int(c) for c in Ls)
        M = downloads_per_server(inst, L_counts)
        return ParamSet(
            instance=inst, v=v, f=f, g=g, t_star=t, x=x, S=S, L=int(L),
            L_counts=L_counts, R_counts=tuple(int(r) for r in R), M=M,
            rate=Fraction(D * int(L), N * M),
        )
    raise SchemeError(
        f"no S in [1, {D}] makes L = S*(N-1)^(K-D)*g_t* integral with integral "
        f"L_s and R_i for {inst}; an admissible S is guaranteed to exist in that range"
    )


def lower_bound(inst) -> Fraction:
    f, g = compute_fg(inst)
    return max(gt / ft for ft, gt in zip(f, g))


def upper_bound(inst) -> Fraction:
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    q = K // D
    geometric = (1 - Fraction(1, N**q)) / (1 - Fraction(1, N))
    fractional = (Fraction(K, D) - q) / N**q
    return 1 / (geometric + fractional)


def bu_baseline(inst) -> ParamSet:
    """Parameters of the backward-recurrence scheme with fixed tail.

    The tail is ``L_{K-D+t} = 0`` for ``t < D`` and ``L_K = (N-1)^(K-D)``.
    All counts are then scaled by the smallest positive integer that makes
    every R_i integral (R_i has denominator dividing i, so the multiplier
    divides lcm(1..D)).
    """
    inst = _as_instance(inst)
    N, K, D = inst.N, inst.K, inst.D
    v = compute_v(inst)
    f, g = compute_fg(inst, v)
    base = [Fraction(0)] * K
    base[K - 1] = Fraction((N - 1) ** (K - D))
    for j in range(K - D, 0, -1):
        base[j - 1] = sum(binom(D, i) * base[i + j - 1] for i in range(1, D + 1)) / (N - 1)

    scale_bound = lcm(*range(1, D + 1))
    for S in range(1, scale_bound + 1):
        Ls = [S * c for c in base]
        R = recovery_counts(inst, Ls)
        if all(is_integral(c) for c in Ls) and all(is_integral(r) for r in R):
            break
    else:  # pragma: no cover - lcm(1..D) always clears the 1/i factors
        raise SchemeError(f"baseline counts for {inst} never became integral")

    L_counts = tuple(int(c) for c in Ls)
    R_counts = tuple(int(r) for r in R)
    L = N * sum(R_counts)
    M = downloads_per_server(inst, L_counts)
    x = tuple(Fraction(c, L) for c in L_counts)
    return ParamSet(
        instance=inst, v=v, f=f, g=g, t_star=D, x=x, S=S, L=L,
        L_counts=L_counts, R_counts=R_counts, M=M,
        rate=Fraction(D * L, N * M), scheme="baseline",
    )


def compare_schemes(inst) -> Comparison:
    inst = _as_instance(inst)
    f, g = compute_fg(inst)
    D = inst.D
    tail = g[D - 1] / f[D - 1]
    if any(g[t] / f[t] > tail for t in range(D - 1)):
        return Comparison.STRICTLY_BETTER
    return Comparison.EQUAL


def paramset_to_dict(params: ParamSet) -> dict:
    """JSON-ready summary including bounds, baseline rate and comparison."""
    inst = params.instance
    return {
        "N": inst.N,
        "K": inst.K,
        "D": inst.D,
        "scheme": params.scheme,
        "t_star": params.t_star,
        "S": params.S,
        "L": params.L,
        "L_counts": list(params.L_counts),
        "R_counts": list(params.R_counts),
        "M": params.M,
        "rate": rat_str(params.rate),
        "rate_decimal": rat_decimal(params.rate),
        "lower_bound": rat_str(lower_bound(inst)),
        "upper_bound": rat_str(upper_bound(inst)),
        "baseline_rate": rat_str(bu_baseline(inst).rate),
        "comparison": compare_schemes(inst).value,
    }
