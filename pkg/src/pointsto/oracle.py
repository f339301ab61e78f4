"""Reference points-to results by brute force, for small programs.

Inlines every call into one supergraph (fresh local names per call path,
statement labels shared with the original program), then runs the textbook
flow-sensitive points-to iteration over abstract memory to a fixed point.
No summaries, no compositions: this is the semantics the summary pipeline
is supposed to reproduce, so the two must agree wherever both apply.

Refuses recursion and calls through pointers; those paths are exercised
against hand-derived expectations instead.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from pointsto.ptir import (
    END,
    STAR,
    Path,
    Procedure,
    Program,
    Rhs,
    RhsKind,
    Statement,
    StmtKind,
    build_callgraph,
)

BOTTOM = "⊥"  # the may-be-uninitialized pseudo location

Cell = tuple[str, Optional[str]]  # (location, field or None)
Memory = dict[Cell, frozenset[str]]


class OracleError(Exception):
    pass


@dataclass(frozen=True)
class _SStmt:
    """A supergraph statement: renamed operands, original label kept.

    Parameter and return-value bindings synthesized at a call site carry
    the site's label and the callee's unrenamed variable in `report_as`,
    so their points-to pairs land where the summary pipeline puts them.
    """

    label: Optional[int]
    stmt: Statement
    report_as: Optional[str] = None


@dataclass
class _SBlock:
    name: str
    stmts: list[_SStmt]


class _SuperGraph:
    def __init__(self) -> None:
        self.blocks: dict[str, _SBlock] = {}
        self.edges: set[tuple[str, str]] = set()
        self.entry = ""
        self.exit = ""
        self.at_locals: set[str] = set()
        self.heap: set[str] = set()
        self.stmt_count = 0


def _rename(name: str, path: tuple[int, ...], scope: set[str]) -> str:
    if name in scope and path:
        return name + "".join(f"#{s}" for s in path)
    return name


def _rename_path(p: Path, path: tuple[int, ...], scope: set[str]) -> Path:
    return Path(_rename(p.base, path, scope), p.steps)


def _rename_stmt(s: Statement, path: tuple[int, ...], scope: set[str]) -> Statement:
    out = replace(s)
    if s.lhs is not None:
        out.lhs = _rename_path(s.lhs, path, scope)
    if s.rhs is not None and s.rhs.kind is RhsKind.PATH:
        out.rhs = Rhs(RhsKind.PATH, path=_rename_path(s.rhs.path, path, scope))
    if s.rhs is not None and s.rhs.kind is RhsKind.ADDR:
        out.rhs = Rhs(RhsKind.ADDR, var=_rename(s.rhs.var, path, scope))
    if s.operands:
        out.operands = tuple(_rename_path(op, path, scope) for op in s.operands)
    return out


def _copy_assign(lhs: str, rhs: str, label: int, report_as: str | None) -> _SStmt:
    s = Statement(
        label if label is not None else 0,
        StmtKind.ASSIGN,
        lhs=Path(lhs, (STAR,)),
        rhs=Rhs(RhsKind.PATH, path=Path(rhs, (STAR,))),
    )
    return _SStmt(label, s, report_as)


def _build_supergraph(prog: Program, max_stmts: int) -> _SuperGraph:
    cg = build_callgraph(prog)
    for p in prog.procedures:
        if cg.is_recursive(p):
            raise OracleError(f"recursive procedure {p!r}: oracle refuses recursion")
    for p in prog.procedures.values():
        for s in p.statements():
            if s.kind is StmtKind.FPCALL:
                raise OracleError("call through a pointer: oracle refuses")

    sg = _SuperGraph()
    sg.heap = {f"h{l}" for l in prog.malloc_labels()}

    def instantiate(proc: Procedure, path: tuple[int, ...]) -> tuple[str, str]:
        """Clone `proc`'s CFG into the supergraph; returns (entry, exit)."""
        sg.stmt_count += sum(1 for _ in proc.statements())
        if sg.stmt_count > max_stmts:
            raise OracleError(f"supergraph exceeds {max_stmts} statements")
        scope = set(proc.scope())
        for v in proc.locals:
            if v.address_taken:
                sg.at_locals.add(_rename(v.name, path, scope))
        tag = "/".join(map(str, path)) or "root"
        prefix = f"{proc.name}@{tag}"

        bmap = {b: f"{prefix}:{b}" for b in list(proc.cfg.order) + ["start", "end"]}
        for bname in ["start"] + proc.cfg.order + ["end"]:
            out = _SBlock(bmap[bname], [])
            sg.blocks[out.name] = out
            cur = out
            for s in proc.cfg.blocks.get(bname, _EMPTY).statements:
                if s.kind is StmtKind.CALL:
                    callee = prog.procedures[s.callee]
                    cpath = path + (s.label,)
                    cscope = set(callee.scope())
                    for param, actual in zip(callee.params, s.args):
                        cur.stmts.append(
                            _copy_assign(
                                _rename(param.name, cpath, cscope),
                                _rename(actual, path, scope),
                                s.label,
                                param.name,
                            )
                        )
                    centry, cexit = instantiate(callee, cpath)
                    sg.edges.add((cur.name, centry))
                    after = _SBlock(f"{cur.name}+{s.label}", [])
                    sg.blocks[after.name] = after
                    sg.edges.add((cexit, after.name))
                    if s.receiver is not None and callee.return_var is not None:
                        after.stmts.append(
                            _copy_assign(
                                _rename(s.receiver, path, scope),
                                _rename(callee.return_var, cpath, cscope),
                                s.label,
                                None,
                            )
                        )
                    cur = after
                elif s.kind is StmtKind.RETURN:
                    continue
                else:
                    cur.stmts.append(_SStmt(s.label, _rename_stmt(s, path, scope)))
            bmap[bname] = cur.name  # edges leave the last split piece
        for src, dst in proc.cfg.edges:
            head = f"{prefix}:{dst}" if dst != END else bmap["end"]
            sg.edges.add((bmap[src] if src != "start" else bmap["start"], head))
        return bmap["start"], bmap["end"]

    entry_proc = prog.procedures[prog.entry]
    sg.entry, sg.exit = instantiate(entry_proc, ())
    return sg


_EMPTY = type("E", (), {"statements": []})()


# ---------------------------------------------------------------------------
# abstract memory and transfer functions
# ---------------------------------------------------------------------------


def _initial_memory(prog: Program, sg: _SuperGraph) -> Memory:
    """Every variable cell starts may-uninitialized; heap cells do not
    exist until allocated."""
    mem: Memory = {}
    seen: set[str] = set()

    def seed(name: str, ty) -> None:
        if name in seen:
            return
        seen.add(name)
        if ty.depth >= 1:
            mem[(name, None)] = frozenset({BOTTOM})
        elif ty.base in prog.records:
            for f, ft in prog.records[ty.base].fields:
                if ft.depth >= 1:
                    mem[(name, f)] = frozenset({BOTTOM})

    for v in prog.globals.values():
        seed(v.name, v.type)
    # renamed locals and params are found by walking supergraph statements
    for blk in sg.blocks.values():
        for ss in blk.stmts:
            for nm in _stmt_names(ss.stmt):
                base = nm.split("#", 1)[0]
                for p in prog.procedures.values():
                    v = p.scope().get(base)
                    if v is not None:
                        seed(nm, v.type)
                        break
    return mem


def _stmt_names(s: Statement) -> list[str]:
    out = []
    if s.lhs is not None:
        out.append(s.lhs.base)
    if s.rhs is not None:
        if s.rhs.kind is RhsKind.PATH:
            out.append(s.rhs.path.base)
        elif s.rhs.kind is RhsKind.ADDR:
            out.append(s.rhs.var)
    for op in s.operands:
        out.append(op.base)
    return out


def _is_real(loc: str, prog: Program) -> bool:
    return loc != BOTTOM and loc != "null" and loc not in prog.procedures


def _read_cells(mem: Memory, cells: list[Cell]) -> frozenset[str]:
    out: set[str] = set()
    for c in cells:
        out |= mem.get(c, frozenset())
    return frozenset(out)


def _path_cells(prog: Program, mem: Memory, p: Path) -> list[Cell]:
    """Cells designated by an access path, resolving one deref if present."""
    if p.steps == (STAR,):
        return [(p.base, None)]
    if len(p.steps) == 1:  # y.f on a record value
        return [(p.base, p.steps[0])]
    field = None if p.steps[1] == STAR else p.steps[1]
    bases = mem.get((p.base, None), frozenset())
    return [(t, field) for t in sorted(bases) if _is_real(t, prog)]


def _eval_rhs(prog: Program, mem: Memory, s: Statement) -> frozenset[str]:
    r = s.rhs
    if r.kind is RhsKind.ADDR:
        return frozenset({r.var})
    if r.kind is RhsKind.NULL:
        return frozenset({"null"})
    if r.kind is RhsKind.MALLOC:
        return frozenset({f"h{s.label}"})
    if r.kind is RhsKind.PROC:
        return frozenset({r.var})
    return _read_cells(mem, _path_cells(prog, mem, r.path))


def _transfer(
    prog: Program,
    sg: _SuperGraph,
    mem: Memory,
    ss: _SStmt,
    sink: Optional[dict] = None,
) -> Memory:
    s = ss.stmt
    if s.kind is StmtKind.USE:
        if sink is not None:
            for i, op in enumerate(s.operands):
                vals = _read_cells(mem, _path_cells(prog, mem, op))
                for v in sorted(vals):
                    if v != BOTTOM:
                        sink.setdefault(ss.label, set()).add((f"u{i}", _pointee(v)))
        return mem
    if s.kind is not StmtKind.ASSIGN:
        return mem

    vals = _eval_rhs(prog, mem, s)
    cells = _path_cells(prog, mem, s.lhs)
    strong = False
    if s.lhs.steps == (STAR,):
        strong = s.lhs.base not in sg.at_locals
    elif len(s.lhs.steps) == 2:
        bases = mem.get((s.lhs.base, None), frozenset())
        real = [t for t in bases if _is_real(t, prog)]
        strong = (
            len(real) == 1
            and BOTTOM not in bases
            and real[0] not in sg.heap
            and real[0] not in sg.at_locals
        )
    out = dict(mem)
    for c in cells:
        if strong:
            out[c] = vals
        else:
            out[c] = out.get(c, frozenset()) | vals
    if sink is not None and ss.label is not None:
        key_base = ss.report_as or None
        for c in cells:
            key = _cell_key(c, key_base)
            for v in sorted(vals):
                if v != BOTTOM:
                    sink.setdefault(ss.label, set()).add((key, _pointee(v)))
    return out


def _cell_key(c: Cell, report_as: Optional[str]) -> str:
    name = report_as or c[0].split("#", 1)[0]
    return name if c[1] is None else f"{name}[{c[1]}]"


def _pointee(v: str) -> str:
    return v.split("#", 1)[0]


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def oracle_points_to(
    prog: Program, k: int = 3, max_stmts: int = 20000
) -> dict[int, set[tuple[str, str]]]:
    """Per-statement points-to pairs of the fully inlined program.

    k is accepted for interface parity with the summary pipeline; field
    chains in the oracle's memory are single-step, so no limiting is ever
    needed for the programs the oracle accepts.
    """
    sg = _build_supergraph(prog, max_stmts)
    mem_in: dict[str, Memory] = {sg.entry: _initial_memory(prog, sg)}
    order = sorted(sg.blocks)
    work = list(order)
    out_cache: dict[str, Memory] = {}
    iterations = 0
    while work:
        iterations += 1
        if iterations > 200000:
            raise OracleError("fixpoint iteration bound exceeded")
        name = work.pop(0)
        mem = dict(mem_in.get(name, {}))
        for pred in sorted(s for s, t in sg.edges if t == name):
            for cell, vals in out_cache.get(pred, {}).items():
                mem[cell] = mem.get(cell, frozenset()) | vals
        if name == sg.entry:
            base = _initial_memory(prog, sg)
            for cell, vals in base.items():
                mem[cell] = mem.get(cell, frozenset()) | vals
        mem_in[name] = mem
        for ss in sg.blocks[name].stmts:
            mem = _transfer(prog, sg, mem, ss)
        if out_cache.get(name) != mem:
            out_cache[name] = mem
            succs = {t for s, t in sg.edges if s == name}
            for nxt in sorted(succs):
                if nxt not in work:
                    work.append(nxt)

    pts: dict[int, set[tuple[str, str]]] = {}
    for name in order:
        mem = dict(mem_in.get(name, {}))
        for ss in sg.blocks[name].stmts:
            mem = _transfer(prog, sg, mem, ss, sink=pts)
    return pts
