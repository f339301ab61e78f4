"""Reaching-GPUs analyses and strength reduction.

GPU reduction composes a consumer GPU against the GPUs reaching its block
until nothing simplifies further; the reaching analysis computes those
sets as a forward may-analysis seeded with boundary definitions at Start.

The analysis comes in two variants. The plain one assumes every reaching
GPU may be composed with; it is what dead-GPU elimination and
definition-free-path checks consult. The blocking variant postpones
compositions across barriers: an indirect GPU has an unknown write target,
so GPUs that might read or write the same typed cell are removed from the
flow (blocked) and the compositions they would have fed are queued for the
caller's context. Strength reduction then rewrites each block to its
blocking-variant generated set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from pointsto.ptir import Program
from pointsto.gpu import (
    ComposeStatus,
    Gpu,
    Loc,
    LocKind,
    TypeTable,
    compose,
    SS,
    TS,
)
from pointsto.gpg import Gpb, GpbKind, Gpg

_FIXPOINT_CAP = 10000


@dataclass(frozen=True)
class ReduceResult:
    red: frozenset[Gpu]
    queued: frozenset[Gpu]


def gpu_reduce(
    consumer: Gpu, reaching: frozenset[Gpu], blocked: frozenset[Gpu], k: int
) -> ReduceResult:
    """Cascaded composition of `consumer` against `reaching`.

    Each producer participates at most once per composition chain, so a
    cyclic producer (h [n]|[] h) refines a consumer a bounded number of
    times instead of looping. Producers in `blocked` are never composed
    with: a structurally valid composition is skipped and the producer
    queued so the caller's context can retry it. Undesirable compositions
    (producer target list longer than its source list) are also queued,
    except that producers of entry values (boundary definitions, or any
    GPU targeting an upwards-exposed primed location) compose anyway:
    postponing them would drag whole data-structure traversals into the
    caller, so they are folded here and bounded by k-limiting instead.
    Boundary definitions themselves are never queued.

    An item that admits no composition at all is fully reduced and lands
    in `red` unchanged.
    """
    red: set[Gpu] = set()
    queued: set[Gpu] = set()
    seen: set[tuple[Gpu, frozenset[Gpu]]] = set()
    work: list[tuple[Gpu, frozenset[Gpu]]] = [(consumer, frozenset())]
    while work:
        cur, used = work.pop()
        if (cur, used) in seen:
            continue
        seen.add((cur, used))
        progressed = False
        for producer in reaching:
            if producer in used:
                continue
            for tau in (TS, SS):
                res = compose(tau, cur, producer, k, allow_undesirable=True)
                if res.status is not ComposeStatus.REDUCED:
                    continue
                if producer in blocked:
                    if not producer.is_boundary():
                        queued.add(producer)
                    continue
                undesirable = len(producer.target_il) > len(producer.source_il)
                if undesirable and not (producer.is_boundary() or producer.target.prime):
                    queued.add(producer)
                    continue
                progressed = True
                chain = used | {producer}
                for g in res.gpus:
                    if (g, chain) not in seen:
                        work.append((g, chain))
        if not progressed:
            red.add(cur)
    return ReduceResult(frozenset(red), frozenset(queued))


# ---------------------------------------------------------------------------
# reaching analyses
# ---------------------------------------------------------------------------


@dataclass
class ReachInfo:
    """Fixed-point sets per GPB label; BR* filled by the blocking variant."""

    boundary: frozenset[Gpu]
    rin: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    rout: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    rgen: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    rkill: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    brin: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    brout: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    brgen: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    brkill: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    blocked: dict[int, frozenset[Gpu]] = field(default_factory=dict)
    queued: frozenset[Gpu] = frozenset()


def _rpo(g: Gpg) -> list[int]:
    order: list[int] = []
    seen: set[int] = set()
    roots = [g.start] + sorted(g.blocks)
    for root in roots:
        if root in seen:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        seen.add(root)
        while stack:
            node, idx = stack[-1]
            succs = g.successors(node)
            if idx < len(succs):
                stack[-1] = (node, idx + 1)
                nxt = succs[idx]
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, 0))
            else:
                stack.pop()
                order.append(node)
    return list(reversed(order))


def _match(g: Gpu, reaching: Iterable[Gpu]) -> set[Gpu]:
    """Reaching GPUs defining the same (source, source-il) cell.

    Same-statement GPUs never match: facts from earlier loop iterations
    of the very statement stay alive, only other definitions are killed.
    """
    key = g.source_key()
    return {r for r in reaching if r.source_key() == key and r.stmt != g.stmt}


def _kill(
    gen: frozenset[Gpu], reaching: frozenset[Gpu], weak_sources: frozenset[str]
) -> frozenset[Gpu]:
    out: set[Gpu] = set()
    for g in gen:
        defs = {x.source_key() for x in gen if x.stmt == g.stmt}
        if len(defs) != 1:
            continue  # several possible targets: weak update
        if g.source.kind in (LocKind.HEAP, LocKind.SYN) or g.source.name in weak_sources:
            continue  # heap/use-collector writes are fictitious or summarized
        out |= _match(g, reaching)
    return frozenset(out)


def _tdef_tref(tt: TypeTable, g: Gpu) -> frozenset:
    return tt.tdef(g) | tt.tref(g)


def _blocked_by(tt: TypeTable, gen: frozenset[Gpu], reaching: frozenset[Gpu]) -> frozenset[Gpu]:
    """Def. of the barrier effect, case split on the generated set.

    No generated GPUs: nothing blocks. A generated indirect GPU (unknown
    write target) blocks every reaching GPU it may interfere with. A
    fully resolved generated set only defers reaching GPUs that are
    themselves indirect.
    """
    if not gen:
        return frozenset()
    indirect_gen = frozenset(b for b in gen if b.is_indirect())
    out: set[Gpu] = set()
    if indirect_gen:
        for i in reaching:
            itypes = _tdef_tref(tt, i)
            if any(tt.tdef(b) & itypes for b in indirect_gen):
                out.add(i)
        return frozenset(out)
    for i in reaching:
        if not i.is_indirect():
            continue
        itypes = _tdef_tref(tt, i)
        if any(tt.tdef(b) & itypes for b in gen):
            out.add(i)
    return frozenset(out)


def reaching_analysis(
    prog: Program,
    g: Gpg,
    blocking: bool,
    k: int,
    boundary: frozenset[Gpu],
) -> ReachInfo:
    """Least fixed point of the reaching-GPUs equations over `g`.

    With `blocking` the plain variant is computed first: its RIn sets
    tell which producers upstream blocking removed, and those are exactly
    the ones reduction must skip-and-queue rather than silently miss.
    """
    info = ReachInfo(boundary=boundary)
    _fixpoint(prog, g, k, info, blocking=False)
    if blocking:
        _fixpoint(prog, g, k, info, blocking=True)
    return info


def _fixpoint(prog: Program, g: Gpg, k: int, info: ReachInfo, blocking: bool) -> None:
    tt = g.type_table(prog)
    weak_sources = frozenset(g.at_locals)
    if blocking:
        ins, outs, gens, kills = info.brin, info.brout, info.brgen, info.brkill
    else:
        ins, outs, gens, kills = info.rin, info.rout, info.rgen, info.rkill
    blocked_acc: dict[int, set[Gpu]] = {l: set() for l in g.blocks}
    queued: set[Gpu] = set(info.queued)
    order = _rpo(g)
    for l in g.blocks:
        outs[l] = frozenset()
    rounds = 0
    changed = True
    while changed:
        rounds += 1
        assert rounds <= _FIXPOINT_CAP, "reaching analysis failed to stabilize"
        changed = False
        for label in order:
            b = g.blocks[label]
            rin: frozenset[Gpu]
            if label == g.start:
                rin = info.boundary
            else:
                acc: set[Gpu] = set()
                for p in g.predecessors(label):
                    acc |= outs[p]
                rin = frozenset(acc)
            ins[label] = rin

            if b.kind in (GpbKind.START, GpbKind.END):
                gen: frozenset[Gpu] = frozenset()
                kill: frozenset[Gpu] = frozenset()
                out = rin
            elif b.kind is GpbKind.DTOP:
                gen = frozenset()
                kill = rin
                out = frozenset()
            else:
                if b.kind is GpbKind.CALL and b.fp is None:
                    raise ValueError(
                        f"direct call to {b.callee!r} not inlined before analysis"
                    )
                if blocking:
                    upstream_blocked = frozenset(info.rin.get(label, frozenset()) - rin)
                    universe = rin | upstream_blocked
                else:
                    upstream_blocked = frozenset()
                    universe = rin
                gen_set: set[Gpu] = set()
                for c in b.gpus:
                    gen_set |= gpu_reduce(c, universe, upstream_blocked, k).red
                gen = frozenset(gen_set)
                kill = _kill(gen, rin, weak_sources)
                removed = kill
                if blocking:
                    fresh = _blocked_by(tt, gen, rin)
                    if b.kind is GpbKind.CALL and b.fp is not None:
                        fresh |= frozenset(
                            x for x in rin if not x.is_boundary()
                        )
                    blocked_acc[label] |= fresh
                    removed = kill | frozenset(blocked_acc[label])
                out = (rin - removed) | gen
            gens[label] = gen
            kills[label] = kill
            if outs[label] != out:
                outs[label] = out
                changed = True
    if blocking:
        # Queue events are read off the converged state only; during the
        # iterations BRIn lags the non-blocking RIn and would queue facts
        # that are not actually blocked.
        for label in order:
            b = g.blocks[label]
            if b.kind in (GpbKind.START, GpbKind.END, GpbKind.DTOP):
                continue
            rin = ins[label]
            upstream_blocked = frozenset(info.rin.get(label, frozenset()) - rin)
            universe = rin | upstream_blocked
            for c in b.gpus:
                queued |= gpu_reduce(c, universe, upstream_blocked, k).queued
            if b.kind is GpbKind.CALL and b.fp is not None:
                queued |= frozenset(x for x in rin if not x.is_boundary())
        info.blocked = {l: frozenset(s) for l, s in blocked_acc.items()}
        info.queued = frozenset(queued)


# ---------------------------------------------------------------------------
# strength reduction
# ---------------------------------------------------------------------------


def strength_reduce(g: Gpg, info: ReachInfo) -> None:
    """Replace every Plain GPB's GPUs with the blocking-variant generated
    set; statement labels inside GPUs are untouched."""
    for label, b in g.blocks.items():
        if b.kind is GpbKind.PLAIN:
            b.gpus = info.brgen.get(label, frozenset())
    g.queued |= info.queued
