import json
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import pytest

from abpir.compiler import build_plan, parse
from abpir.params import solve_scheme
from abpir.protocol import (
    SYMBOLIC,
    DecodeError,
    FieldSpec,
    answer_all,
    decode,
    gen_messages,
    measure_rate,
    server_answer,
    simulate,
    symbolic_store,
)

DATA = Path(__file__).parent / "data"
SMALL_GRID = [(N, K, D) for N in range(2, 4) for K in range(2, 6) for D in range(1, K + 1)]


@pytest.fixture(scope="module")
def example_plan():
    return build_plan(solve_scheme((2, 5, 2)), (1, 2), seed=0)


@pytest.mark.parametrize("q", [2, 3, 4, 257, 256, 2**31 - 1, 2**61 - 1, 2**64])
def test_fields_accepted(q):
    assert FieldSpec(q).q == q


@pytest.mark.parametrize("q", [0, 1, 6, 15, 2**65])
def test_fields_rejected(q):
    with pytest.raises(ValueError):
        FieldSpec(q)


def test_field_addition():
    f2, f7 = FieldSpec(256), FieldSpec(7)
    assert f2.add(0b1010, 0b0110) == 0b1100 == f2.sub(0b1010, 0b0110)
    assert f7.add(5, 4) == 2 and f7.sub(2, 5) == 4
    assert f7.total([3, 4, 5]) == 5 and f2.total([1, 2, 3]) == 0


def test_messages_reproducible_and_in_range():
    for q in (2, 257, 256, 2**64):
        a = gen_messages(FieldSpec(q), 3, 10, seed=5)
        assert a.symbols == gen_messages(FieldSpec(q), 3, 10, seed=5).symbols
        assert all(0 <= x < q for row in a.symbols for x in row)


def test_answer_length_and_values(example_plan):
    field = FieldSpec(257)
    store = gen_messages(field, 5, 82, seed=1)
    ans = server_answer(example_plan, 2, store)
    assert ans.server == 2 and len(ans.values) == 135
    for terms, value in zip(example_plan.servers[1], ans.values):
        assert value == sum(store.symbol(m, sp) for m, sp in terms) % 257


def test_large_field_uses_integer_path(example_plan):
    field = FieldSpec(2**61 - 1)
    store = gen_messages(field, 5, 82, seed=1)
    ans = server_answer(example_plan, 1, store)
    terms = example_plan.servers[0][-1]
    assert ans.values[-1] == sum(store.symbol(m, sp) for m, sp in terms) % field.q


@pytest.mark.parametrize("q", [2, 3, 257, 256, 2**64])
def test_example_round_trip(example_plan, q):
    r = simulate(example_plan, FieldSpec(q), seed=2)
    assert r.ok, r.error
    assert r.symbols_downloaded == 270
    assert r.rate == Fraction(82, 135) == measure_rate(example_plan)


def test_symbolic_decode_recovers_tokens(example_plan):
    store = symbolic_store(5, 82)
    rec, trace = decode(example_plan, answer_all(example_plan, store), SYMBOLIC)
    for w in (1, 2):
        assert rec[w] == [frozenset({(w - 1) * 82 + sp}) for sp in range(82)]
    assert len(trace) == 164


def test_trace_is_topologically_valid(example_plan):
    _, trace = decode(example_plan, answer_all(example_plan, symbolic_store(5, 82)), SYMBOLIC)
    known, seen_units = set(), set()
    W = set(example_plan.W)
    for step in trace.steps:
        assert step.recovered not in known
        terms = example_plan.servers[step.server - 1][step.sum_index]
        demand = {t for t in terms if t[0] in W}
        for item in step.side_info:
            if item[0] == "unit":
                unit = example_plan.servers[item[1] - 1][item[2]]
                assert item[1] != step.server
                assert all(m not in W for m, _ in unit)
                seen_units.add(unit)
            else:
                assert tuple(item) in known
        assert demand - known == {step.recovered}
        known.add(step.recovered)
    assert len(known) == 164


def test_trace_serializes(example_plan):
    r = simulate(example_plan, FieldSpec(2))
    doc = json.loads(json.dumps(r.trace.to_list()))
    assert len(doc) == 164
    assert set(doc[0]) == {"recovered", "server", "sum_index", "side_info"}


@pytest.mark.parametrize("N,K,D", SMALL_GRID)
@pytest.mark.parametrize("q", [2, 3, 257, 256])
def test_small_grid_round_trip(N, K, D, q):
    params = solve_scheme((N, K, D))
    for W in combinations(range(1, K + 1), D):
        plan = build_plan(params, W, seed=0, check=False)
        r = simulate(plan, FieldSpec(q), seed=9)
        assert r.ok, (W, r.error)
        assert r.symbols_downloaded == N * params.M
        assert r.rate == params.rate


def test_deleted_partner_fails_to_decode():
    plan = parse((DATA / "mutant_deleted_partner.json").read_text())
    r = simulate(plan, FieldSpec(257))
    assert not r.ok and "interference" in r.error
    with pytest.raises(DecodeError) as info:
        decode(plan, answer_all(plan, symbolic_store(plan.K, plan.L)), SYMBOLIC)
    assert info.value.missing == [(2, 3)]


def test_answer_count_mismatch(example_plan):
    answers = answer_all(example_plan, gen_messages(FieldSpec(2), 5, 82))
    with pytest.raises(ValueError):
        decode(example_plan, answers[:1], FieldSpec(2))
    with pytest.raises(ValueError):
        decode(example_plan, [answers[0], answers[1].values[:-1]], FieldSpec(2))


def test_symbolic_field_rejects_non_binary_coefficients():
    a, b = frozenset({1, 2}), frozenset({2, 3})
    with pytest.raises(ArithmeticError):
        SYMBOLIC.add(a, b)
    with pytest.raises(ArithmeticError):
        SYMBOLIC.sub(a, b)
