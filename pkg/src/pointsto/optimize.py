"""Summary compaction passes.

A freshly strength-reduced GPG carries every statement's reduced GPUs in
statement-sized blocks. Four passes shrink it without changing what a
caller can observe: dropping GPUs that neither reach the exit nor wait on
queued compositions, splicing out empty blocks, coalescing adjacent blocks
whose updates cannot interfere, and finally adding an explicit bypass path
holding only the must-defined GPUs so that callers keep weak semantics for
everything else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from pointsto.gpu import Gpu, TypeTable
from pointsto.gpg import Gpb, GpbKind, Gpg
from pointsto.ptir import Program

_SWEEP_CAP = 512


# ---------------------------------------------------------------------------
# dead GPU and empty GPB elimination
# ---------------------------------------------------------------------------


def dead_gpu_elim(g: Gpg, rout_end: frozenset[Gpu], queued: frozenset[Gpu]) -> int:
    """Drop GPUs that neither reach End nor await a postponed composition.

    `rout_end` must cover both reaching variants: a blocked consumer
    survives only in the blocking solution, and deleting it would lose
    the composition the caller is supposed to finish.
    """
    if g.is_top:
        return 0
    keep = rout_end | queued
    removed = 0
    for b in g.blocks.values():
        if b.kind is not GpbKind.PLAIN:
            continue
        live = b.gpus & keep
        removed += len(b.gpus) - len(live)
        b.gpus = live
    return removed


def empty_gpb_elim(g: Gpg) -> int:
    """Splice out empty plain blocks, rewiring predecessors to successors.

    A splice that makes some remaining block its own neighbour keeps the
    self-loop only when that block still carries GPUs; an empty self-loop
    would only be deleted by the next sweep anyway.
    """
    if g.is_top:
        return 0
    removed = 0
    while True:
        victim = next(
            (
                l
                for l in sorted(g.blocks)
                if g.blocks[l].kind is GpbKind.PLAIN and not g.blocks[l].gpus
            ),
            None,
        )
        if victim is None:
            return removed
        preds = [p for p in g.predecessors(victim) if p != victim]
        succs = [s for s in g.successors(victim) if s != victim]
        del g.blocks[victim]
        g.edges = {(s, t) for s, t in g.edges if victim not in (s, t)}
        for p in preds:
            for s in succs:
                if p == s and g.blocks[p].kind is GpbKind.PLAIN and not g.blocks[p].gpus:
                    continue
                g.edges.add((p, s))
        removed += 1


# ---------------------------------------------------------------------------
# coalescing analysis
# ---------------------------------------------------------------------------


@dataclass
class CoalesceInfo:
    """Bidirectional coalescing solution.

    `in_b[n]` says every predecessor of n may share a part with n;
    `out_b[n]` says n's successors all accepted their predecessors. The
    GPU sets track which updates flow across uncut edges and exist only
    to feed the interference test.
    """

    in_t: dict[int, frozenset[Gpu]]
    out_t: dict[int, frozenset[Gpu]]
    in_b: dict[int, bool]
    out_b: dict[int, bool]


def _deref(gpus: frozenset[Gpu]) -> bool:
    return any(x.source_il.has_deref() or x.target_il.has_deref() for x in gpus)


def _ddep(tt: TypeTable, flowing: frozenset[Gpu], gen: frozenset[Gpu]) -> bool:
    """Could executing `gen` read or write a cell some flowing GPU defines?

    Purely type-based, so it is symmetric enough for may semantics: no
    dereference on either side means both write frozen single cells and
    order cannot matter.
    """
    if not (_deref(flowing) or _deref(gen)):
        return False
    touched: set = set()
    for x in gen:
        touched |= tt.tdef(x) | tt.tref(x)
    for x in flowing - gen:
        if tt.tdef(x) & touched:
            return True
    return False


def coalescing_analysis(prog: Program, g: Gpg) -> CoalesceInfo:
    """Greatest fixed point of the coalescing equations, all-true start.

    Start, End, call placeholders and kill-all blocks never coalesce with
    a neighbour. An edge stops carrying GPUs once its target refuses to
    merge and the flowing set interferes with the target's own updates.
    """
    tt = g.type_table(prog)
    labels = sorted(g.blocks)
    info = CoalesceInfo(
        in_t={l: frozenset() for l in labels},
        out_t={l: frozenset() for l in labels},
        in_b={l: True for l in labels},
        out_b={l: True for l in labels},
    )
    if g.is_top:
        for l in labels:
            info.in_b[l] = info.out_b[l] = False
        return info

    def singleton(b: Gpb) -> bool:
        return b.kind is not GpbKind.PLAIN

    def flow(p: int, n: int) -> frozenset[Gpu]:
        if not info.in_b[n] and _ddep(tt, info.out_t[p], g.blocks[n].gpus):
            return frozenset()
        return info.out_t[p]

    def pair(p: int, n: int) -> bool:
        if singleton(g.blocks[p]) or singleton(g.blocks[n]):
            return False
        if not info.out_b[p]:
            return False
        return not info.out_t[p] or bool(flow(p, n))

    order = [l for l in labels]
    for _ in range(_SWEEP_CAP):
        changed = False
        for n in order:
            b = g.blocks[n]
            if n == g.start:
                new_in_t: frozenset[Gpu] = frozenset()
                new_in_b = False
            else:
                preds = g.predecessors(n)
                acc: set[Gpu] = set()
                for p in preds:
                    acc |= flow(p, n)
                new_in_t = frozenset(acc)
                new_in_b = bool(preds) and all(pair(p, n) for p in preds)
            new_out_t = (new_in_t | b.gpus) if new_in_b else b.gpus
            if n == g.end:
                new_out_b = False
            else:
                succs = g.successors(n)
                new_out_b = bool(succs) and all(info.in_b[s] for s in succs)
            for slot, new in (
                (info.in_t, new_in_t),
                (info.out_t, new_out_t),
            ):
                if slot[n] != new:
                    slot[n] = new
                    changed = True
            for bslot, bnew in ((info.in_b, new_in_b), (info.out_b, new_out_b)):
                if bslot[n] != bnew:
                    bslot[n] = bnew
                    changed = True
        if not changed:
            return info
    raise RuntimeError(f"coalescing analysis of {g.name} did not stabilize")


# ---------------------------------------------------------------------------
# the coalescing transformation
# ---------------------------------------------------------------------------


def back_edges(g: Gpg) -> set[tuple[int, int]]:
    """DFS back edges from Start; deterministic via sorted successors."""
    state: dict[int, int] = {g.start: 1}  # 1 on stack, 2 done
    out: set[tuple[int, int]] = set()
    stack: list[tuple[int, Iterator[int]]] = [(g.start, iter(g.successors(g.start)))]
    while stack:
        node, it = stack[-1]
        pushed = False
        for s in it:
            mark = state.get(s, 0)
            if mark == 1:
                out.add((node, s))
            elif mark == 0:
                state[s] = 1
                stack.append((s, iter(g.successors(s))))
                pushed = True
                break
        if not pushed:
            state[node] = 2
            stack.pop()
    return out


def _loop_body(g: Gpg, tail: int, head: int) -> set[int]:
    """Natural loop of back edge tail->head: head plus reverse reach of tail.

    The head is seeded first so the walk never climbs past it; a self-loop
    is its own natural loop.
    """
    body = {head, tail}
    work = [tail] if tail != head else []
    while work:
        n = work.pop()
        for p in g.predecessors(n):
            if p not in body:
                body.add(p)
                work.append(p)
    return body


def coalesce(g: Gpg, info: CoalesceInfo) -> int:
    """Merge parts of adjacent blocks along accepting non-back edges.

    Merged parts get a fresh label holding the union of their GPUs; the
    may-execution reading of a GPB makes the union safe exactly because
    the analysis certified no interference. A back edge internal to one
    part disappears only when the whole natural loop was merged,
    otherwise the residual self-loop preserves iteration effects.
    """
    if g.is_top:
        return 0
    backs = back_edges(g)
    parent = {l: l for l in g.blocks}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p, n in sorted(g.edges - backs):
        if info.in_b.get(n, False):
            if g.blocks[p].kind is GpbKind.PLAIN and g.blocks[n].kind is GpbKind.PLAIN:
                parent[find(p)] = find(n)

    parts: dict[int, list[int]] = {}
    for l in g.blocks:
        parts.setdefault(find(l), []).append(l)

    remap: dict[int, int] = {}
    merged = 0
    for root in sorted(parts):
        members = parts[root]
        if len(members) == 1:
            remap[members[0]] = members[0]
            continue
        gpus: frozenset[Gpu] = frozenset().union(*(g.blocks[m].gpus for m in members))
        fresh = g.add_block(GpbKind.PLAIN, gpus).label
        for m in members:
            remap[m] = fresh
        merged += len(members) - 1

    new_edges: set[tuple[int, int]] = set()
    for s, t in g.edges:
        ms, mt = remap[s], remap[t]
        if ms != mt:
            new_edges.add((ms, mt))
            continue
        if (s, t) in backs:
            body = _loop_body(g, s, t)
            if not all(remap.get(x) == ms for x in body):
                new_edges.add((ms, mt))
        # a forward edge inside one part just disappears
    for root, members in parts.items():
        if len(members) > 1:
            for m in members:
                del g.blocks[m]
    g.edges = new_edges
    g.gc()
    return merged


# ---------------------------------------------------------------------------
# definition-free paths
# ---------------------------------------------------------------------------


def add_deffree_paths(g: Gpg, boundary: frozenset[Gpu], rout_end: frozenset[Gpu]) -> bool:
    """Give may-defined sources a path that skips their definitions.

    A summary GPU is must-defined when the boundary GPU for its source
    cell dies on every path (it is gone from `rout_end`). If any GPU is
    only may-defined, a caller must be able to retain its prior facts
    for that cell, so a bypass block carrying just the must-defined GPUs
    is wired from Start to End. With nothing may-defined the ordinary
    paths already kill everything they redefine and no bypass is needed;
    with nothing must-defined no strong update can fire in a caller
    anyway, so the bypass is skipped there too.
    """
    if g.is_top:
        return False
    by_key = {(b.source, b.source_il): b for b in boundary}
    must: set[Gpu] = set()
    may = False
    for b in g.blocks.values():
        if b.kind is not GpbKind.PLAIN:
            continue
        for x in b.gpus:
            bd = by_key.get((x.source.unprimed(), x.source_il))
            if bd is not None and bd not in rout_end:
                must.add(x)
            else:
                may = True
    if not may or not must:
        return False
    bypass = g.add_block(GpbKind.PLAIN, frozenset(must)).label
    g.add_edge(g.start, bypass)
    g.add_edge(bypass, g.end)
    return True
