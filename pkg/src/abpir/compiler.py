"""Compile scheme parameters into explicit per-server query plans.

Messages and subpackets are 1-based throughout: a term ``(3, 17)`` is
subpacket 17 of message 3.  A sum is a tuple of terms sorted by message.

Construction for server ``n`` (0-based internally):

* every demand message's index space is cut into N blocks of
  ``R_1 + ... + R_D`` indices; block ``n`` holds what server ``n`` yields,
  ordered by recovery level;
* interference units (``(0, j)``-sums) take fresh interference subpackets;
* each ``(i, j)``-sum with ``j >= 1`` embeds one unit from another server,
  and server ``n`` consumes every foreign unit exactly once;
* each sum with ``i >= 1`` carries one new demand subpacket from block
  ``n`` plus ``i - 1`` known ones from lower levels of other blocks.

Subpacket indices are then permuted per message (seeded) and each server's
sums are sorted, so the transmitted order does not depend on W.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

import networkx as nx
import numpy as np

from .params import ParamSet, ProblemInstance, bu_baseline, solve_scheme
from .validation import check_demand_set


class SubpacketRef(NamedTuple):
    msg: int
    sp: int


class AllocationError(RuntimeError):
    def __init__(self, message: str, diagnostic: dict | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class SelfCheckError(RuntimeError):
    pass


@dataclass(frozen=True)
class QueryPlan:
    instance: ProblemInstance
    W: tuple
    params: ParamSet
    servers: tuple
    seed: int

    @property
    def N(self):
        return self.instance.N

    @property
    def K(self):
        return self.instance.K

    @property
    def D(self):
        return self.instance.D

    @property
    def L(self):
        return self.params.L

    @property
    def M(self):
        return len(self.servers[0])

    @cached_property
    def flat_terms(self) -> tuple:
        """Per server, each sum as a tuple of flat indices ``(msg-1)*L + sp-1``."""
        L = self.params.L
        flat_id = {(m, sp): (m - 1) * L + sp - 1 for m in range(1, self.K + 1) for sp in range(1, L + 1)}
        get = flat_id.__getitem__
        return tuple(tuple(tuple(map(get, terms)) for terms in sums) for sums in self.servers)


def classify(terms, W) -> tuple[int, int]:
    """``(i, j)``: how many terms come from demand / interference messages."""
    W = set(W)
    i = sum(1 for t in terms if t[0] in W)
    return i, len(terms) - i


def _others(n: int, N: int) -> list[int]:
    return [(n + k) % N for k in range(1, N)]


def _designate_new_terms(D: int, level: int, per_subset: int, target: int) -> list[list[int]]:
    """Pick the new-term position for every level-``level`` sum.

    Returns, for each ``level``-subset of demand positions (lexicographic),
    the position whose subpacket is new in each of its ``per_subset`` sums,
    so that every position is new exactly ``target`` times overall.  Each
    member gets ``per_subset // level`` picks per subset; the remainders are
    placed with an integral max-flow (feasible because the even fractional
    split lies within the floor/ceil bounds).
    """
    subsets = list(combinations(range(D), level))
    base, extra = divmod(per_subset, level)
    load = [0] * D
    for subset in subsets:
        for p in subset:
            load[p] += base
    counts = [dict.fromkeys(subset, base) for subset in subsets]

    if extra:
        graph = nx.DiGraph()
        for k, subset in enumerate(subsets):
            graph.add_edge("src", ("set", k), capacity=extra)
            for p in subset:
                graph.add_edge(("set", k), ("pos", p), capacity=1)
        for p in range(D):
            graph.add_edge(("pos", p), "sink", capacity=max(target - load[p], 0))
        value, flow = nx.maximum_flow(graph, "src", "sink")
        if value != extra * len(subsets):
            raise AllocationError(
                f"new-term designation infeasible at level {level}",
                {"level": level, "per_subset": per_subset, "target": target, "flow": value},
            )
        for k, subset in enumerate(subsets):
            for p in subset:
                if flow[("set", k)][("pos", p)]:
                    counts[k][p] += 1
                    load[p] += 1

    if any(c != target for c in load):
        raise AllocationError(
            f"new-term designation unbalanced at level {level}",
            {"level": level, "loads": load, "target": target},
        )
    design = []
    for subset, cnt in zip(subsets, counts):
        # round-robin over the subset in cyclic order
        left = dict(cnt)
        picks = []
        while len(picks) < per_subset:
            for p in subset:
                if left[p]:
                    left[p] -= 1
                    picks.append(p)
        design.append(picks)
    return design


def relabel_permutations(K: int, L: int, seed: int) -> list[list[int]]:
    """Seeded uniform permutation of ``1..L`` per message (index 0 unused)."""
    rng = np.random.default_rng(seed)
    return [[]] + [(rng.permutation(L) + 1).tolist() for _ in range(K)]


def sort_key(terms):
    msgs, sps = zip(*terms)
    return (len(terms), msgs, sps)


def _canonical_allocation(params: ParamSet) -> list[list[tuple]]:
    """Allocation for the demand set ``1..D``, cached on ``params``.

    ``_allocate`` treats messages only through their position in ``W`` and
    in the interference list, so any other demand set is this allocation
    with messages renamed.
    """
    raw = params.__dict__.get("_canonical_allocation")
    if raw is None:
        raw = _allocate(params, tuple(range(1, params.D + 1)))
        params.__dict__["_canonical_allocation"] = raw  # params are immutable
    return raw


def _allocate(params: ParamSet, W: tuple) -> list[list[tuple]]:
    inst = params.instance
    N, K, D = inst.N, inst.K, inst.D
    E = K - D
    Lc = (0,) + tuple(params.L_counts)  # Lc[s] = L_s
    R = (0,) + tuple(params.R_counts)
    Wset = set(W)
    interference = tuple(m for m in range(1, K + 1) if m not in Wset)
    block = sum(params.R_counts)
    offset = [0] * (D + 2)
    for lvl in range(1, D + 1):
        offset[lvl + 1] = offset[lvl] + R[lvl]

    def demand_index(n, lvl, k):
        return n * block + offset[lvl] + k + 1

    subsets_by_size = {j: list(combinations(interference, j)) for j in range(E + 1)}

    # interference units, fresh subpackets from a per-message counter
    fresh = dict.fromkeys(interference, 1)
    units = []
    for n in range(N):
        per_server = {}
        for j in range(1, E + 1):
            for J in subsets_by_size[j]:
                lst = []
                for _ in range(Lc[j]):
                    lst.append(tuple((c, fresh[c]) for c in J))
                    for c in J:
                        fresh[c] += 1
                per_server[J] = lst
        units.append(per_server)
    overflow = {c: k - 1 for c, k in fresh.items() if k - 1 > params.L}
    if overflow:
        raise AllocationError("interference subpackets exhausted", {"used": overflow, "L": params.L})

    # known-term pool: lower levels first, other servers interleaved
    def pool_for(n):
        return [
            (lvl, demand_index(m, lvl, k))
            for lvl in range(1, D + 1)
            for k in range(R[lvl])
            for m in _others(n, N)
        ]

    designs = {}
    for lvl in range(1, D + 1):
        per_subset = sum(len(subsets_by_size[j]) * Lc[lvl + j] for j in range(E + 1))
        designs[lvl] = _designate_new_terms(D, lvl, per_subset, R[lvl])

    servers = []
    for n in range(N):
        sums = []
        for J_units in units[n].values():
            sums.extend(J_units)

        queues = {}
        for j in range(1, E + 1):
            for J in subsets_by_size[j]:
                q = deque()
                for batch in zip(*(units[m][J] for m in _others(n, N))):
                    q.extend(batch)
                queues[J] = q

        pool = pool_for(n)
        pool_ptr = [0] * D
        for lvl in range(1, D + 1):
            new_ptr = [0] * D
            for subset, picks in zip(combinations(range(D), lvl), designs[lvl]):
                k = 0
                for j in range(E + 1):
                    for J in subsets_by_size[j]:
                        for _ in range(Lc[lvl + j]):
                            p_new = picks[k]
                            k += 1
                            terms = [(W[p_new], demand_index(n, lvl, new_ptr[p_new]))]
                            new_ptr[p_new] += 1
                            for p in subset:
                                if p == p_new:
                                    continue
                                ptr = pool_ptr[p]
                                if ptr >= len(pool) or pool[ptr][0] >= lvl:
                                    raise AllocationError(
                                        "side information exhausted",
                                        {
                                            "server": n + 1, "level": lvl, "message": W[p],
                                            "pool_pointer": ptr, "pool_size": len(pool),
                                            "next_level": pool[ptr][0] if ptr < len(pool) else None,
                                            "R_counts": params.R_counts,
                                        },
                                    )
                                pool_ptr[p] = ptr + 1
                                terms.append((W[p], pool[ptr][1]))
                            if j:
                                if not queues[J]:
                                    raise AllocationError(
                                        "interference units exhausted",
                                        {"server": n + 1, "subset": J, "level": lvl},
                                    )
                                terms.extend(queues[J].popleft())
                            terms.sort()
                            sums.append(tuple(terms))
            if new_ptr != [R[lvl]] * D:
                raise AllocationError(
                    "demand block not filled",
                    {"server": n + 1, "level": lvl, "filled": new_ptr, "R": R[lvl]},
                )
        leftover = {J: len(q) for J, q in queues.items() if q}
        if leftover:
            raise AllocationError("unconsumed interference units", {"server": n + 1, "left": leftover})
        servers.append(sums)
    return servers


def build_plan(params: ParamSet, W, seed: int = 0, *, check: bool = True) -> QueryPlan:
    """Explicit query plan for demand set ``W`` (1-based indices).

    Raises :class:`AllocationError` if the deterministic allocation cannot
    close, and :class:`SelfCheckError` if the symbolic decode misses any
    demand subpacket.
    """
    inst = params.instance
    W = check_demand_set(W, inst.K, inst.D)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    raw = _canonical_allocation(params)
    perms = relabel_permutations(inst.K, params.L, seed)
    # canonical message c becomes msg_of[c]; relabeling composed in
    interference = [m for m in range(1, inst.K + 1) if m not in W]
    msg_of = (0,) + W + tuple(interference)
    table = [None] + [[(msg_of[c], sp) for sp in perms[msg_of[c]]] for c in range(1, inst.K + 1)]
    monotone = msg_of == tuple(sorted(msg_of))
    servers = []
    for sums in raw:
        if monotone:
            relabeled = [tuple([table[c][sp - 1] for c, sp in terms]) for terms in sums]
        else:
            relabeled = [tuple(sorted([table[c][sp - 1] for c, sp in terms])) for terms in sums]
        relabeled.sort(key=sort_key)
        servers.append(tuple(relabeled))
    plan = QueryPlan(inst, W, params, tuple(servers), seed)
    if check:
        self_check(plan)
    return plan


def self_check(plan: QueryPlan) -> None:
    from .protocol import DecodeError, SYMBOLIC, decode, answer_all, symbolic_store

    store = symbolic_store(plan.K, plan.L)
    try:
        recovered, _ = decode(plan, answer_all(plan, store), SYMBOLIC)
    except DecodeError as exc:
        raise SelfCheckError(f"symbolic decode failed: {exc}") from exc
    L = plan.L
    for w in plan.W:
        for sp, value in enumerate(recovered[w], start=1):
            if value != frozenset({(w - 1) * L + sp - 1}):
                got = sorted((t // L + 1, t % L + 1) for t in value)
                raise SelfCheckError(f"subpacket ({w}, {sp}) decoded as {got}")


def support_counts(sums) -> Counter:
    """Message tuple of each sum (terms are message-sorted) -> number of sums."""
    return Counter(next(zip(*terms)) for terms in sums)


def census(plan: QueryPlan) -> list[Counter]:
    """Per server: support (frozenset of messages) -> number of sums."""
    out = []
    for sums in plan.servers:
        c = Counter()
        for msgs, k in support_counts(sums).items():
            c[frozenset(msgs)] += k
        out.append(c)
    return out


def type_counts(plan: QueryPlan) -> list[Counter]:
    """Per server: ``(i, j)`` -> number of sums."""
    W = set(plan.W)
    return [Counter(classify(terms, W) for terms in sums) for sums in plan.servers]


# serialization ---------------------------------------------------------------

FORMATS = ("json", "csv", "markdown")


def _params_for(N, K, D, scheme):
    inst = ProblemInstance(N, K, D)
    return bu_baseline(inst) if scheme == "baseline" else solve_scheme(inst)


def _header(plan):
    return {
        "N": plan.N, "K": plan.K, "D": plan.D, "W": list(plan.W), "L": plan.L,
        "seed": plan.seed, "scheme": plan.params.scheme,
    }


def _label(m: int, K: int) -> str:
    return chr(ord("a") + m - 1) if K <= 26 else f"m{m}_"


def serialize(plan: QueryPlan, fmt: str = "json") -> str:
    if fmt == "json":
        doc = _header(plan)
        doc["servers"] = [
            [{"terms": [{"msg": m, "sp": sp} for m, sp in terms]} for terms in sums]
            for sums in plan.servers
        ]
        return json.dumps(doc)
    if fmt == "csv":
        buf = io.StringIO()
        h = _header(plan)
        buf.write("# " + " ".join(f"{k}={','.join(map(str, v)) if isinstance(v, list) else v}"
                                  for k, v in h.items()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["server", "i", "j", "terms"])
        W = set(plan.W)
        for n, sums in enumerate(plan.servers, start=1):
            for terms in sums:
                i, j = classify(terms, W)
                writer.writerow([n, i, j, " ".join(f"{m}:{sp}" for m, sp in terms)])
        return buf.getvalue()
    if fmt == "markdown":
        return _markdown(plan)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def _markdown(plan: QueryPlan) -> str:
    W = set(plan.W)
    groups = []
    for size in range(1, plan.K + 1):
        for i in range(min(size, plan.D), -1, -1):
            j = size - i
            if j <= plan.K - plan.D:
                groups.append((i, j))
    lines = [
        "| (i,j) | " + " | ".join(f"Server {n}" for n in range(1, plan.N + 1)) + " |",
        "|---" * (plan.N + 1) + "|",
    ]
    for i, j in groups:
        cells = []
        for sums in plan.servers:
            picked = [t for t in sums if classify(t, W) == (i, j)]
            cells.append(", ".join("+".join(f"{_label(m, plan.K)}{sp}" for m, sp in t) for t in picked))
        if any(cells):
            lines.append(f"| ({i},{j}) | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse(text: str, fmt: str = "json") -> QueryPlan:
    """Inverse of :func:`serialize` for ``json`` and ``csv``."""
    if fmt == "json":
        doc = json.loads(text)
        servers = tuple(
            tuple(tuple(SubpacketRef(t["msg"], t["sp"]) for t in s["terms"]) for s in sums)
            for sums in doc["servers"]
        )
    elif fmt == "csv":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("csv plan is missing its '# key=value' header line")
        doc = {}
        for item in lines[0][1:].split():
            key, value = item.split("=", 1)
            doc[key] = value
        doc["W"] = [int(w) for w in doc["W"].split(",")]
        for key in ("N", "K", "D", "L", "seed"):
            doc[key] = int(doc[key])
        rows = list(csv.DictReader(lines[1:]))
        by_server = [[] for _ in range(doc["N"])]
        for row in rows:
            terms = tuple(
                SubpacketRef(*map(int, tok.split(":"))) for tok in row["terms"].split()
            )
            by_server[int(row["server"]) - 1].append(terms)
        servers = tuple(tuple(s) for s in by_server)
    else:
        raise ValueError(f"cannot parse format {fmt!r}; expected json or csv")
    params = _params_for(doc["N"], doc["K"], doc["D"], doc.get("scheme", "optimal"))
    if params.L != doc["L"]:
        raise ValueError(f"plan declares L={doc['L']} but the scheme gives L={params.L}")
    return QueryPlan(params.instance, tuple(doc["W"]), params, servers, doc["seed"])
