"""End-to-end simulation: messages over F_q, addition-only answers, decoding."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from itertools import chain
from operator import xor
from typing import NamedTuple

import numpy as np

# above this size numeric answers fall back to Python integers
_NUMPY_MAX_Q = 1 << 32


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 1 << 20:
        return all(n % d for d in range(2, int(n**0.5) + 1))
    from sympy import isprime

    return bool(isprime(n))


@dataclass(frozen=True)
class FieldSpec:
    """A prime field F_p or a binary extension field F_{2^k}, k in [1, 64].

    Only addition matters here, so F_{2^k} elements are k-bit words added
    with XOR and no reduction polynomial is needed.
    """

    q: int

    def __post_init__(self):
        q = self.q
        if q >= 2 and q & (q - 1) == 0:
            if q.bit_length() - 1 > 64:
                raise ValueError(f"binary fields are limited to 2^64, got q={q}")
        elif not _is_prime(q):
            raise ValueError(f"q={q} is neither prime nor a power of two")

    @property
    def characteristic_two(self) -> bool:
        return self.q & (self.q - 1) == 0

    def add(self, a, b):
        return a ^ b if self.characteristic_two else (a + b) % self.q

    def sub(self, a, b):
        return a ^ b if self.characteristic_two else (a - b) % self.q

    def total(self, values):
        if self.characteristic_two:
            return reduce(xor, values, 0)
        return sum(values) % self.q

    def random_element(self, rng: random.Random) -> int:
        return rng.randrange(self.q)


class _SymbolicField:
    """Formal 0/1 sums of subpacket tokens, held as frozensets.

    Adding overlapping sums or subtracting a non-subset would need a
    coefficient outside {0, 1}; both raise ``ArithmeticError``.
    """

    q = None

    def add(self, a, b):
        if a & b:
            raise ArithmeticError(f"formal sum repeats terms {sorted(a & b)}")
        return a | b

    def sub(self, a, b):
        if not b <= a:
            raise ArithmeticError(f"cannot subtract {sorted(b - a)} not present in the sum")
        return a - b

    def total(self, values):
        values = list(values)
        out = frozenset().union(*values)
        if len(out) != sum(map(len, values)):
            raise ArithmeticError("formal sum repeats terms")
        return out

    def __repr__(self):
        return "SYMBOLIC"


SYMBOLIC = _SymbolicField()


@dataclass
class MessageStore:
    field: object
    K: int
    L: int
    symbols: list  # symbols[m - 1][sp - 1]

    def symbol(self, msg: int, sp: int):
        return self.symbols[msg - 1][sp - 1]

    def message(self, msg: int) -> list:
        return self.symbols[msg - 1]

    @cached_property
    def flat(self) -> list:
        return [x for row in self.symbols for x in row]

    @cached_property
    def array(self) -> np.ndarray:
        """``flat`` as int64; only for numeric fields below 2^32."""
        return np.asarray(self.flat, dtype=np.int64)


def gen_messages(field: FieldSpec, K: int, L: int, seed: int = 0) -> MessageStore:
    """Uniform random symbols, reproducible from ``seed``."""
    if field.q <= _NUMPY_MAX_Q:
        flat = np.random.default_rng(seed).integers(0, field.q, size=K * L, dtype=np.int64).tolist()
    else:
        rng = random.Random(seed)
        flat = [rng.randrange(field.q) for _ in range(K * L)]
    return MessageStore(field, K, L, [flat[m * L:(m + 1) * L] for m in range(K)])


@lru_cache(maxsize=4)
def symbolic_store(K: int, L: int) -> MessageStore:
    """Store whose symbols are singleton token sets; token ``(m-1)*L + sp-1``.

    Cached; treat the result as read-only.
    """
    symbols = [[frozenset({(m - 1) * L + sp}) for sp in range(L)] for m in range(1, K + 1)]
    return MessageStore(SYMBOLIC, K, L, symbols)


@dataclass
class Answer:
    server: int  # 1-based
    values: list


def server_answer(plan, n: int, store: MessageStore) -> Answer:
    """Answer of server ``n`` (1-based): one field sum per query, in plan order."""
    if (plan.K, plan.L) != (store.K, store.L):
        raise ValueError(f"plan is K={plan.K}, L={plan.L} but store is K={store.K}, L={store.L}")
    fld = store.field
    sums = plan.flat_terms[n - 1]
    if isinstance(fld, FieldSpec) and fld.q <= _NUMPY_MAX_Q and sums:
        index, starts, _ = _flat_layout(plan)[n - 1]
        gathered = store.array[index]
        if fld.characteristic_two:
            values = np.bitwise_xor.reduceat(gathered, starts)
        else:
            values = np.add.reduceat(gathered, starts) % fld.q
        return Answer(n, values.tolist())
    get = store.flat.__getitem__
    total = fld.total
    return Answer(n, [total(map(get, idx)) for idx in sums])


def _flat_layout(plan):
    """Per server: concatenated subpacket ids, start offset and size of each sum."""
    layout = plan.__dict__.get("_flat_layout")
    if layout is None:
        layout = []
        for sums in plan.flat_terms:
            sizes = np.fromiter(map(len, sums), dtype=np.int64, count=len(sums))
            starts = np.zeros(len(sums), dtype=np.int64)
            np.cumsum(sizes[:-1], out=starts[1:])
            index = np.fromiter(chain.from_iterable(sums), dtype=np.int64, count=int(sizes.sum()))
            layout.append((index, starts, sizes))
        plan.__dict__["_flat_layout"] = layout  # plans are immutable
    return layout


def answer_all(plan, store: MessageStore) -> list[Answer]:
    return [server_answer(plan, n, store) for n in range(1, plan.N + 1)]


class DecodeStep(NamedTuple):
    recovered: tuple  # (msg, sp)
    server: int  # 1-based
    sum_index: int  # 0-based position in that server's answer
    side_info: list  # known subpackets, and ("unit", server, index) cancellations

    def to_dict(self) -> dict:
        side = []
        for item in self.side_info:
            if item[0] == "unit":
                side.append({"unit": {"server": item[1], "index": item[2]}})
            else:
                side.append({"msg": item[0], "sp": item[1]})
        return {
            "recovered": {"msg": self.recovered[0], "sp": self.recovered[1]},
            "server": self.server,
            "sum_index": self.sum_index,
            "side_info": side,
        }


class DecodeTrace:
    """Ordered decode steps; built lazily when taken from a schedule."""

    def __init__(self, steps=None, *, schedule=None):
        self._steps = None if steps is None else list(steps)
        self._schedule = schedule

    @property
    def steps(self) -> list:
        if self._steps is None:
            self._steps = list(self._schedule.steps) if self._schedule else []
        return self._steps

    def __len__(self):
        if self._steps is None and self._schedule is not None:
            return len(self._schedule.ops)
        return len(self.steps)

    def to_list(self) -> list:
        return [s.to_dict() for s in self.steps]


class DecodeError(RuntimeError):
    def __init__(self, message: str, trace: DecodeTrace, missing=()):
        super().__init__(message)
        self.trace = trace
        self.missing = list(missing)


@dataclass
class DecodeSchedule:
    """Field-independent decoding order derived from the plan alone.

    Subpackets are flat ids ``(msg-1)*L + sp-1`` and servers are 0-based.
    Each op is ``(target, server, index, unit, knowns)``: take the answer at
    ``(server, index)``, subtract the interference unit answer at ``unit``
    (a ``(server, index)`` pair, or None), subtract the values of
    ``knowns``, and the result is subpacket ``target``.
    """

    ops: list
    L: int
    error: str | None = None
    missing: list = field(default_factory=list)

    @cached_property
    def steps(self) -> list:
        """One :class:`DecodeStep` per op, same order."""
        return [_step(op, self.L) for op in self.ops]


def _step(op, L) -> DecodeStep:
    target, n, idx, unit, knowns = op
    side = [("unit", unit[0] + 1, unit[1])] if unit else []
    side += [(r // L + 1, r % L + 1) for r in knowns]
    return DecodeStep((target // L + 1, target % L + 1), n + 1, idx, side)


def decode_schedule(plan) -> DecodeSchedule:
    """Work out which sum yields which demand subpacket, and in what order.

    Phase 1 reads demand singletons.  Phase 2 pairs every mixed sum with
    the identical interference unit downloaded from another server.  Phase
    3 peels the residual demand-only sums by ascending size, each time
    requiring exactly one unknown subpacket.  Cached on the plan.
    """
    cached = plan.__dict__.get("_decode_schedule")
    if cached is not None:
        return cached
    L = plan.L
    is_demand = bytearray(plan.K * L)
    for w in plan.W:
        is_demand[(w - 1) * L: w * L] = b"\x01" * L

    def ref(r):
        return (r // L + 1, r % L + 1)

    units = {}
    ops = []
    known = bytearray(plan.K * L)
    error = None
    residuals: dict[int, list] = {i: [] for i in range(1, plan.D + 1)}
    mixed = []
    demand_mask = np.frombuffer(bytes(is_demand), dtype=np.uint8).astype(np.int64)
    for n, (sums, (index, starts, sizes)) in enumerate(zip(plan.flat_terms, _flat_layout(plan))):
        if not sums:
            continue
        dcount = np.add.reduceat(demand_mask[index], starts)
        for idx in np.flatnonzero(dcount == 0).tolist():
            units[sums[idx]] = (n, idx)
        for idx in np.flatnonzero((sizes == 1) & (dcount == 1)).tolist():
            r = sums[idx][0]
            if known[r]:
                error = error or f"subpacket {ref(r)} delivered twice"
                continue
            known[r] = 1
            ops.append((r, n, idx, None, ()))
        for idx in np.flatnonzero((dcount == sizes) & (sizes > 1)).tolist():
            ids = sums[idx]
            residuals[len(ids)].append((n, idx, ids, None))
        for idx in np.flatnonzero((dcount > 0) & (dcount < sizes)).tolist():
            mixed.append((n, idx, sums[idx]))
    for n, idx, ids in mixed:
        demand = tuple(r for r in ids if is_demand[r])
        src = units.get(tuple(r for r in ids if not is_demand[r]))
        if src is None or src[0] == n:
            error = error or f"no foreign interference unit for server {n + 1} sum {idx}"
            continue
        residuals[len(demand)].append((n, idx, demand, src))

    pending: list = []
    for i in range(1, plan.D + 1):
        pending.extend(residuals[i])
        progress = True
        while progress and pending:
            progress = False
            waiting = []
            for item in pending:
                n, idx, demand, src = item
                unknown = [r for r in demand if not known[r]]
                if len(unknown) == 1:
                    target = unknown[0]
                    known[target] = 1
                    ops.append((target, n, idx, src, tuple(r for r in demand if r != target)))
                    progress = True
                elif unknown:
                    waiting.append(item)
                elif len(demand) == 1:
                    error = error or f"subpacket {ref(demand[0])} delivered twice"
            pending = waiting

    missing = [(w, sp) for w in plan.W for sp in range(1, L + 1) if not known[(w - 1) * L + sp - 1]]
    if missing and error is None:
        error = f"{len(missing)} demand subpackets unrecovered (first {missing[0]})"
    schedule = DecodeSchedule(ops, L, error, missing)
    plan.__dict__["_decode_schedule"] = schedule  # plans are immutable
    return schedule


def decode(plan, answers, field):
    """Recover the demand messages from all servers' answers.

    ``field`` is a :class:`FieldSpec` or :data:`SYMBOLIC`.  Returns
    ``(recovered, trace)`` where ``recovered[w]`` lists the L symbols of
    demand message ``w``.  Raises :class:`DecodeError` carrying the partial
    trace when the plan cannot be decoded.
    """
    values = [a.values if isinstance(a, Answer) else a for a in answers]
    if len(values) != plan.N:
        raise ValueError(f"expected {plan.N} answers, got {len(values)}")
    for n, (sums, vals) in enumerate(zip(plan.servers, values), start=1):
        if len(vals) != len(sums):
            raise ValueError(f"server {n} answered {len(vals)} values for {len(sums)} queries")

    schedule = decode_schedule(plan)
    L = plan.L
    known = [None] * (plan.K * L)
    if isinstance(field, FieldSpec) and field.characteristic_two:
        for target, n, idx, unit, knowns in schedule.ops:
            value = values[n][idx]
            if unit is not None:
                value ^= values[unit[0]][unit[1]]
            for r in knowns:
                value ^= known[r]
            known[target] = value
    elif isinstance(field, FieldSpec):
        q = field.q
        for target, n, idx, unit, knowns in schedule.ops:
            value = values[n][idx]
            if unit is not None:
                value -= values[unit[0]][unit[1]]
            for r in knowns:
                value -= known[r]
            known[target] = value % q
    else:
        sub = field.sub
        for target, n, idx, unit, knowns in schedule.ops:
            value = values[n][idx]
            if unit is not None:
                value = sub(value, values[unit[0]][unit[1]])
            for r in knowns:
                value = sub(value, known[r])
            known[target] = value

    trace = DecodeTrace(schedule=schedule)
    if schedule.error:
        raise DecodeError(schedule.error, trace, schedule.missing)
    recovered = {w: known[(w - 1) * L: w * L] for w in plan.W}
    return recovered, trace


def measure_rate(plan) -> Fraction:
    sizes = {len(s) for s in plan.servers}
    if len(sizes) != 1:
        raise ValueError(f"servers download different counts: {sorted(sizes)}")
    return Fraction(plan.D * plan.L, plan.N * sizes.pop())


@dataclass
class SimulationResult:
    ok: bool
    symbols_downloaded: int
    rate: Fraction
    trace: DecodeTrace
    error: str | None = None


def simulate(plan, field: FieldSpec, seed: int = 0) -> SimulationResult:
    """Generate messages, answer, decode, and compare against the originals."""
    store = gen_messages(field, plan.K, plan.L, seed)
    answers = answer_all(plan, store)
    downloaded = sum(len(a.values) for a in answers)
    rate = Fraction(plan.D * plan.L, downloaded)  # equals measure_rate when servers are balanced
    try:
        recovered, trace = decode(plan, answers, field)
    except DecodeError as exc:
        return SimulationResult(False, downloaded, rate, exc.trace, str(exc))
    ok = all(recovered[w] == store.message(w) for w in plan.W)
    return SimulationResult(ok, downloaded, rate, trace, None if ok else "recovered symbols differ")
