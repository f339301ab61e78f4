"""Generalized points-to blocks and graphs.

A GPB is an unordered set of GPUs with may semantics; a GPG is a control
flow graph over GPBs with unique Start and End blocks, built per procedure
and transformed in place by the optimization pipeline. Call sites start
out as placeholder blocks and are replaced by callee bodies, so a GPG is
`complete` once no placeholders remain.

Δ⊤ is the summary of a procedure we know nothing about (or one that never
returns): a single block that kills every GPU and generates none.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from pointsto.ptir import (
    END,
    STAR,
    Procedure,
    Program,
    RhsKind,
    Statement,
    StmtKind,
    TypeExpr,
    typeof_along,
)
from pointsto.gpu import (
    IL1,
    Gpu,
    IndList,
    Loc,
    LocKind,
    NULL,
    TypeTable,
    compose,
    heap_loc,
    il,
    proc_loc,
    render_gpus,
    SS,
    TS,
    ComposeStatus,
)


class GpbKind(Enum):
    START = "start"
    END = "end"
    PLAIN = "plain"
    CALL = "call"  # unexpanded call site, direct or through a pointer
    DTOP = "dtop"  # kill-all block of a Δ⊤ summary


@dataclass
class Gpb:
    label: int
    kind: GpbKind
    gpus: frozenset[Gpu] = frozenset()
    callee: Optional[str] = None  # CALL, direct
    fp: Optional[str] = None  # CALL through a pointer
    site: Optional[int] = None  # call-site statement label
    receiver: Optional[str] = None
    args: tuple[str, ...] = ()
    path: tuple[int, ...] = ()  # inlining chain of call sites, outermost first
    sink: bool = False  # DTOP block created by inlining a Δ⊤ summary

    def is_call(self) -> bool:
        return self.kind is GpbKind.CALL


class Gpg:
    """Mutable per-procedure graph; frozen by convention once optimized."""

    def __init__(self, name: str, types: dict[str, TypeExpr] | None = None):
        self.name = name
        self.blocks: dict[int, Gpb] = {}
        self.edges: set[tuple[int, int]] = set()
        self.types: dict[str, TypeExpr] = dict(types or {})
        self.at_locals: set[str] = set()  # only ever weakly updated
        self.queued: set[Gpu] = set()
        self.is_top = False
        self._next = 1
        self.start = self.add_block(GpbKind.START).label
        self.end = self.add_block(GpbKind.END).label

    # -- structure ---------------------------------------------------------

    def new_label(self) -> int:
        lbl = self._next
        self._next += 1
        return lbl

    def add_block(self, kind: GpbKind, gpus: Iterable[Gpu] = (), label: int | None = None, **kw) -> Gpb:
        if label is None:
            label = self.new_label()
        else:
            self._next = max(self._next, label + 1)
        if label in self.blocks:
            raise ValueError(f"duplicate GPB label {label}")
        b = Gpb(label, kind, frozenset(gpus), **kw)
        self.blocks[label] = b
        return b

    def add_edge(self, src: int, dst: int) -> None:
        assert src in self.blocks and dst in self.blocks
        self.edges.add((src, dst))

    def successors(self, label: int) -> list[int]:
        return sorted(t for s, t in self.edges if s == label)

    def predecessors(self, label: int) -> list[int]:
        return sorted(s for s, t in self.edges if t == label)

    @property
    def complete(self) -> bool:
        return not any(b.is_call() for b in self.blocks.values())

    def call_blocks(self) -> list[Gpb]:
        return [self.blocks[l] for l in sorted(self.blocks) if self.blocks[l].is_call()]

    def block_of_stmt(self, stmt: int) -> Gpb:
        """The unique block holding GPUs of `stmt` (or its call placeholder)."""
        hits = [
            b
            for b in self.blocks.values()
            if any(g.stmt == stmt for g in b.gpus) or b.site == stmt
        ]
        if len(hits) != 1:
            raise KeyError(f"statement {stmt} is in {len(hits)} blocks of {self.name}")
        return hits[0]

    def all_gpus(self) -> frozenset[Gpu]:
        out: set[Gpu] = set()
        for b in self.blocks.values():
            out |= b.gpus
        return frozenset(out)

    def type_table(self, prog: Program) -> TypeTable:
        return TypeTable(prog, self.types)

    # -- garbage collection ------------------------------------------------

    def gc(self) -> None:
        """Keep only blocks on some Start→End path.

        Sink blocks never pass control, so paths through them do not
        count; when no path remains at all the procedure never returns
        and the whole graph collapses to Δ⊤.
        """
        if self.is_top:
            return
        fwd = self._reach(self.start, forward=True)
        if self.end not in fwd:
            self._become_top()
            return
        bwd = self._reach(self.end, forward=False)
        keep = (fwd & bwd) | {self.start, self.end}
        self.blocks = {l: b for l, b in self.blocks.items() if l in keep}
        self.edges = {(s, t) for s, t in self.edges if s in keep and t in keep}

    def _reach(self, root: int, forward: bool) -> set[int]:
        seen = {root}
        work = [root]
        while work:
            cur = work.pop()
            if forward and self.blocks[cur].sink:
                continue
            nxt = self.successors(cur) if forward else self.predecessors(cur)
            for n in nxt:
                if not forward and self.blocks[n].sink:
                    continue
                if n not in seen:
                    seen.add(n)
                    work.append(n)
        return seen

    def _become_top(self) -> None:
        self.blocks = {l: b for l, b in self.blocks.items() if l in (self.start, self.end)}
        sink = self.add_block(GpbKind.DTOP, sink=True)
        self.edges = {(self.start, sink.label), (sink.label, self.end)}
        self.queued = set()
        self.is_top = True

    # -- dumps ---------------------------------------------------------------

    def _block_title(self, b: Gpb) -> str:
        if b.kind is GpbKind.START:
            return "Start"
        if b.kind is GpbKind.END:
            return "End"
        if b.kind is GpbKind.CALL:
            target = b.callee if b.callee else f"(*{b.fp})"
            return f"d{b.label}: call {target} @{b.site:02d}"
        if b.kind is GpbKind.DTOP:
            return f"d{b.label}: top"
        return f"d{b.label}"

    def to_json_obj(self) -> dict:
        blocks = []
        for l in sorted(self.blocks):
            b = self.blocks[l]
            blocks.append(
                {
                    "label": b.label,
                    "kind": b.kind.value,
                    "title": self._block_title(b),
                    "gpus": render_gpus(b.gpus),
                }
            )
        return {
            "procedure": self.name,
            "blocks": blocks,
            "edges": sorted([s, t] for s, t in self.edges),
            "queued": render_gpus(self.queued),
            "top": self.is_top,
        }

    def to_dot(self) -> str:
        lines = [f'digraph "{self.name}" {{', "  node [shape=box];"]
        for l in sorted(self.blocks):
            b = self.blocks[l]
            rows = [self._block_title(b)] + render_gpus(b.gpus)
            text = "\\n".join(rows).replace('"', '\\"')
            lines.append(f'  n{l} [label="{text}"];')
        for s, t in sorted(self.edges):
            lines.append(f"  n{s} -> n{t};")
        lines.append("}")
        return "\n".join(lines)


def delta_top(name: str = "") -> Gpg:
    g = Gpg(name)
    g._become_top()
    return g


# ---------------------------------------------------------------------------
# boundary definitions
# ---------------------------------------------------------------------------


def _pointer_chains(prog: Program, base_type: TypeExpr, k: int) -> list[IndList]:
    """Access chains from a cell of `base_type` whose cells hold pointers.

    Chains follow the same alphabet as GPU indlists: Star strips pointer
    levels, a field step walks a record pointer (one implicit deref) or a
    record value. Capped at k steps.
    """
    if base_type.depth >= 1:
        seeds = [il(STAR)]
    elif base_type.base in prog.records:
        seeds = [il(f) for f in prog.records[base_type.base].field_names()]
    else:
        return []
    out: list[IndList] = []
    work = list(seeds)
    seen: set[IndList] = set(work)
    while work:
        chain = work.pop(0)
        cell = typeof_along(prog, base_type, chain.steps)
        if not cell:
            continue
        if any(t.depth >= 1 for t in cell):
            out.append(chain)
        if len(chain) >= k:
            continue
        steps: set[str] = set()
        for t in cell:
            if t.depth >= 2:
                steps.add(STAR)
            elif t.base in prog.records and t.depth <= 1:
                steps.update(prog.records[t.base].field_names())
        for s in sorted(steps):
            ext = IndList(chain.steps + (s,))
            if ext not in seen:
                seen.add(ext)
                work.append(ext)
    return out


def boundary_definitions(prog: Program, proc: str, k: int) -> frozenset[Gpu]:
    """Entry-value GPUs x C|C x' @00 for every caller-visible pointer cell.

    Emitted for globals, parameters, and address-taken locals: exactly the
    variables whose cells a caller (or code holding their address) can
    populate before this procedure runs. Plain locals get none, so their
    uninitialized reads reduce to nothing.
    """
    p = prog.procedures[proc]
    vars_: list = [v for v in prog.globals.values()]
    vars_ += p.params
    vars_ += [v for v in p.locals if v.address_taken]
    out: set[Gpu] = set()
    for v in vars_:
        for chain in _pointer_chains(prog, v.type, k):
            base = Loc(v.name)
            out.add(Gpu(base, chain, base.primed(), chain, 0))
    return frozenset(out)


def main_boundary_definitions(prog: Program, proc: str, k: int) -> frozenset[Gpu]:
    """Boundary set for the program entry: globals only, no callers exist."""
    out: set[Gpu] = set()
    for v in prog.globals.values():
        for chain in _pointer_chains(prog, v.type, k):
            base = Loc(v.name)
            out.add(Gpu(base, chain, base.primed(), chain, 0))
    return frozenset(out)


# ---------------------------------------------------------------------------
# initial GPG construction
# ---------------------------------------------------------------------------


def _heap_value_type(prog: Program, proc: Procedure, s: Statement) -> Optional[TypeExpr]:
    cell = typeof_along(
        prog, prog.lookup(proc.name, s.lhs.base).type, s.lhs.steps
    )
    if len(cell) != 1:
        return None
    return next(iter(cell)).deref()


def _statement_gpus(prog: Program, proc: Procedure, s: Statement) -> frozenset[Gpu]:
    if s.kind is StmtKind.ASSIGN:
        lhs = Loc(s.lhs.base)
        lil = IndList(s.lhs.steps)
        r = s.rhs
        if r.kind is RhsKind.ADDR:
            return frozenset({Gpu(lhs, lil, Loc(r.var), IndList(), s.label)})
        if r.kind is RhsKind.NULL:
            return frozenset({Gpu(lhs, lil, NULL, IndList(), s.label)})
        if r.kind is RhsKind.MALLOC:
            return frozenset({Gpu(lhs, lil, heap_loc(s.label), IndList(), s.label)})
        if r.kind is RhsKind.PROC:
            return frozenset({Gpu(lhs, lil, proc_loc(r.var), IndList(), s.label)})
        return frozenset(
            {Gpu(lhs, lil, Loc(r.path.base), IndList(r.path.steps), s.label)}
        )
    if s.kind is StmtKind.USE:
        return frozenset(
            {
                Gpu(Loc(f"u{i}", LocKind.SYN), IL1, Loc(op.base), IndList(op.steps), s.label)
                for i, op in enumerate(s.operands)
            }
        )
    return frozenset()


def initial_gpg(prog: Program, proc: Procedure) -> Gpg:
    """One singleton GPB per pointer statement, placeholders per call site."""
    types: dict[str, TypeExpr] = {v.name: v.type for v in prog.globals.values()}
    for v in proc.params + proc.locals:
        types[v.name] = v.type
    g = Gpg(proc.name, types)
    g.at_locals = {v.name for v in proc.locals if v.address_taken}

    heads: dict[str, int] = {}
    tails: dict[str, int] = {}
    for bname in proc.cfg.order:
        prev: Optional[int] = None
        for s in proc.cfg.blocks[bname].statements:
            if s.kind is StmtKind.CALL:
                b = g.add_block(
                    GpbKind.CALL, callee=s.callee, site=s.label,
                    receiver=s.receiver, args=s.args, path=(s.label,),
                )
            elif s.kind is StmtKind.FPCALL:
                barrier = Gpu(Loc("u", LocKind.SYN), IL1, Loc(s.fp), IL1, s.label)
                b = g.add_block(
                    GpbKind.CALL, gpus={barrier}, fp=s.fp, site=s.label,
                    receiver=s.receiver, args=s.args, path=(s.label,),
                )
            elif s.kind is StmtKind.RETURN:
                continue
            else:
                gpus = _statement_gpus(prog, proc, s)
                if s.kind is StmtKind.ASSIGN and s.rhs.kind is RhsKind.MALLOC:
                    hv = _heap_value_type(prog, proc, s)
                    if hv is not None:
                        g.types[f"h{s.label}"] = hv
                b = g.add_block(GpbKind.PLAIN, gpus=gpus)
            if prev is not None:
                g.add_edge(prev, b.label)
            else:
                heads[bname] = b.label
            prev = b.label
        if prev is None:
            b = g.add_block(GpbKind.PLAIN)  # empty block keeps CFG shape
            heads[bname] = b.label
            prev = b.label
        tails[bname] = prev

    for src, dst in proc.cfg.edges:
        if src == "start":
            g.add_edge(g.start, g.end if dst == END else heads[dst])
        elif dst == END:
            g.add_edge(tails[src], g.end)
        else:
            g.add_edge(tails[src], heads[dst])
    g.gc()
    return g


# ---------------------------------------------------------------------------
# flow-insensitive stores
# ---------------------------------------------------------------------------


class GpuStore:
    """GPU set closed under composition, for the flow-insensitive modes.

    Unlike a GPB, members may compose with each other: inserting a GPU
    also inserts everything derivable from it, transitively. Closure is
    confluent, so insertion order never matters.
    """

    def __init__(self, k: int):
        self.k = k
        self.gpus: set[Gpu] = set()

    def insert(self, g: Gpu) -> None:
        if g in self.gpus:
            return
        work = [g]
        while work:
            cur = work.pop()
            if cur in self.gpus:
                continue
            self.gpus.add(cur)
            fresh: set[Gpu] = set()
            for other in list(self.gpus):
                for consumer, producer in ((cur, other), (other, cur)):
                    for tau in (TS, SS):
                        r = compose(tau, consumer, producer, self.k)
                        if r.status is ComposeStatus.REDUCED:
                            fresh |= r.gpus
            work.extend(x for x in fresh if x not in self.gpus)

    def insert_all(self, gpus: Iterable[Gpu]) -> None:
        for g in sorted(gpus, key=str):
            self.insert(g)

    def classical(self) -> frozenset[Gpu]:
        return frozenset(g for g in self.gpus if g.is_classical())
