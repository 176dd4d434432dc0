from collections import Counter
from itertools import combinations

import pytest

from abpir.compiler import (
    FORMATS,
    QueryPlan,
    _allocate,
    build_plan,
    census,
    classify,
    parse,
    relabel_permutations,
    serialize,
    sort_key,
    type_counts,
)
from abpir.params import ProblemInstance, bu_baseline, solve_scheme

GRID = [(N, K, D) for N in range(2, 5) for K in range(2, 8) for D in range(1, K + 1)]
TABLE_ROWS = {
    (0, 1): 36, (1, 1): 30, (1, 0): 24, (0, 2): 15, (1, 2): 12,
    (2, 1): 6, (2, 0): 5, (2, 2): 3, (0, 3): 2, (1, 3): 2,
}


@pytest.fixture(scope="module")
def example_plan():
    return build_plan(solve_scheme((2, 5, 2)), (1, 2), seed=0)


def test_example_sizes(example_plan):
    for sums in example_plan.servers:
        sizes = Counter(len(t) for t in sums)
        assert sizes == {1: 60, 2: 50, 3: 20, 4: 5}
        assert len(sums) == 135


def test_example_type_rows(example_plan):
    for counts in type_counts(example_plan):
        assert counts == TABLE_ROWS


@pytest.mark.parametrize("W", list(combinations(range(1, 6), 2)))
def test_example_rows_for_every_demand_set(W):
    plan = build_plan(solve_scheme((2, 5, 2)), W, seed=3)
    assert all(c == TABLE_ROWS for c in type_counts(plan))


def test_classify():
    assert classify(((1, 1), (3, 2), (4, 1)), (1, 2)) == (1, 2)


def test_sums_sorted_canonically(example_plan):
    for sums in example_plan.servers:
        assert list(sums) == sorted(sums, key=sort_key)
        assert all(list(t) == sorted(t) for t in sums)


def test_every_subpacket_used_at_most_once_per_server(example_plan):
    for sums in example_plan.servers:
        flat = [t for terms in sums for t in terms]
        assert len(flat) == len(set(flat))


def test_relabel_permutations_are_permutations():
    perms = relabel_permutations(4, 9, seed=11)
    assert perms[0] == []
    assert all(sorted(p) == list(range(1, 10)) for p in perms[1:])
    assert perms == relabel_permutations(4, 9, seed=11)


def test_seeds_differ_only_by_relabeling():
    params = solve_scheme((2, 5, 2))
    a = build_plan(params, (2, 4), seed=0)
    b = build_plan(params, (2, 4), seed=7)
    assert a.servers != b.servers
    assert census(a) == census(b)
    # undo each relabeling: both come from the same allocation
    pa = relabel_permutations(5, params.L, 0)
    pb = relabel_permutations(5, params.L, 7)
    inv_a = [None] + [{v: k + 1 for k, v in enumerate(p)} for p in pa[1:]]
    inv_b = [None] + [{v: k + 1 for k, v in enumerate(p)} for p in pb[1:]]
    for sa, sb in zip(a.servers, b.servers):
        ua = sorted(tuple((m, inv_a[m][sp]) for m, sp in t) for t in sa)
        ub = sorted(tuple((m, inv_b[m][sp]) for m, sp in t) for t in sb)
        assert ua == ub


def test_canonical_allocation_matches_direct_allocation():
    # a plan for any W is the allocation for W itself, relabeled and sorted
    params = solve_scheme((3, 6, 3))
    W = (2, 5, 6)
    plan = build_plan(params, W, seed=4)
    perms = relabel_permutations(6, params.L, 4)
    for raw, sums in zip(_allocate(params, W), plan.servers):
        direct = sorted((tuple((m, perms[m][sp - 1]) for m, sp in t) for t in raw), key=sort_key)
        assert direct == list(sums)


def _interference_embedded(plan):
    W = set(plan.W)
    units = {}
    for n, sums in enumerate(plan.servers):
        for terms in sums:
            if not any(m in W for m, _ in terms):
                units.setdefault(terms, set()).add(n)
    for n, sums in enumerate(plan.servers):
        for terms in sums:
            inter = tuple(t for t in terms if t[0] not in W)
            if inter and len(inter) < len(terms):
                assert units.get(inter, set()) - {n}, (n, terms)


@pytest.mark.parametrize("N,K,D", GRID)
def test_grid_builds_and_self_checks(N, K, D):
    params = solve_scheme((N, K, D))
    censuses = []
    for W in combinations(range(1, K + 1), D):
        plan = build_plan(params, W, seed=1)  # self-check on
        assert plan.M == params.M and plan.L == params.L
        censuses.append(census(plan))
        if W == tuple(range(1, D + 1)):
            _interference_embedded(plan)
    assert all(c == censuses[0] for c in censuses)


@pytest.mark.parametrize("N,K,D", [t for t in GRID if t[2] < t[1]])
def test_baseline_plans_build(N, K, D):
    params = bu_baseline(ProblemInstance(N, K, D))
    plan = build_plan(params, tuple(range(K - D + 1, K + 1)), seed=0)
    assert plan.M == params.M


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_round_trip(example_plan, fmt):
    back = parse(serialize(example_plan, fmt), fmt)
    assert isinstance(back, QueryPlan)
    assert back.servers == example_plan.servers
    assert (back.W, back.seed, back.L) == (example_plan.W, example_plan.seed, example_plan.L)


def test_csv_has_one_row_per_sum(example_plan):
    lines = serialize(example_plan, "csv").splitlines()
    assert lines[0].startswith("# N=2 K=5 D=2 W=1,2 L=82")
    assert lines[1] == "server,i,j,terms"
    assert len(lines) - 2 == 270


def test_markdown_table(example_plan):
    text = serialize(example_plan, "markdown")
    assert text.splitlines()[0] == "| (i,j) | Server 1 | Server 2 |"
    assert "| (2,2) |" in text


def test_unknown_format(example_plan):
    assert "markdown" in FORMATS
    with pytest.raises(ValueError):
        serialize(example_plan, "xml")
    with pytest.raises(ValueError):
        parse("{}", "markdown")


def test_bad_inputs():
    params = solve_scheme((2, 5, 2))
    with pytest.raises(ValueError):
        build_plan(params, (1, 1))
    with pytest.raises(ValueError):
        build_plan(params, (1, 6))
    with pytest.raises(ValueError):
        build_plan(params, (1, 2), seed=-1)
