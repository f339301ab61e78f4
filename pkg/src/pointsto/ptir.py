"""Pointer IR: typed variables, pointer statements, per-procedure CFGs.

The analyzed language is a small C-like subset: scalar and record types,
pointers of arbitrary depth, address-of, loads/stores through one
dereference, field accesses, malloc, null, direct and function-pointer
calls, and `use` statements that mark where pointer values are consumed.
Arrays, unions, pointer arithmetic, casts, and varargs are rejected at
parse time so that every access path has a statically known type.

Statement labels are assigned by the parser as a global 1..N sequence in
source order and are never renumbered afterwards; all later phases key
their results by these labels.

Access paths are normalized at parse time into (base, steps) pairs where
steps use the same alphabet as indirection lists downstream:

    lhs  x -> [*]      *x -> [*,*]     x->n -> [*,n]
    rhs  y -> [*]      *y -> [*,*]     y->n -> [*,n]    y.n -> [n]
    rhs  &y, malloc, null -> []
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import networkx as nx

STAR = "*"
WILD = "†"  # dagger, the "any field" step


class PtirError(Exception):
    """Parse or validation failure, with source position when known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


# ---------------------------------------------------------------------------
# types and declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeExpr:
    """A type of the form ``*...*base``: `depth` pointer levels over a base.

    The base is either a scalar name (`int`, `float`, ...), a record name,
    or the reserved base `fn` used for function-pointer targets.
    """

    base: str
    depth: int

    def deref(self) -> Optional["TypeExpr"]:
        if self.depth < 1:
            return None
        return TypeExpr(self.base, self.depth - 1)

    def __str__(self) -> str:
        return STAR * self.depth + self.base


@dataclass(frozen=True)
class RecordDecl:
    name: str
    fields: tuple[tuple[str, TypeExpr], ...]

    def field_type(self, fname: str) -> Optional[TypeExpr]:
        for n, t in self.fields:
            if n == fname:
                return t
        return None

    def field_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.fields)


@dataclass
class VarDecl:
    name: str
    type: TypeExpr
    kind: str  # "global" | "param" | "local"
    address_taken: bool = False


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------


class StmtKind(Enum):
    ASSIGN = "assign"
    CALL = "call"
    FPCALL = "fpcall"
    USE = "use"
    RETURN = "return"


@dataclass(frozen=True)
class Path:
    """A normalized access path; `steps` is ready to serve as an indlist."""

    base: str
    steps: tuple[str, ...]


class RhsKind(Enum):
    PATH = "path"
    ADDR = "addr"
    MALLOC = "malloc"
    NULL = "null"
    PROC = "proc"  # a procedure constant, for function-pointer assignment


@dataclass(frozen=True)
class Rhs:
    kind: RhsKind
    path: Optional[Path] = None  # PATH
    var: Optional[str] = None  # ADDR / PROC


@dataclass
class Statement:
    label: int
    kind: StmtKind
    lhs: Optional[Path] = None  # ASSIGN target; receiver handled separately
    rhs: Optional[Rhs] = None
    callee: Optional[str] = None  # CALL
    fp: Optional[str] = None  # FPCALL: the pointer variable
    args: tuple[str, ...] = ()
    receiver: Optional[str] = None  # CALL/FPCALL `r = ...`
    operands: tuple[Path, ...] = ()  # USE
    ret_var: Optional[str] = None  # RETURN

    def is_call(self) -> bool:
        return self.kind in (StmtKind.CALL, StmtKind.FPCALL)


# ---------------------------------------------------------------------------
# CFG and procedures
# ---------------------------------------------------------------------------

START = "start"
END = "end"


@dataclass
class BasicBlock:
    name: str
    statements: list[Statement] = field(default_factory=list)


@dataclass
class Cfg:
    blocks: dict[str, BasicBlock]
    edges: set[tuple[str, str]]
    order: list[str]  # source order of real blocks, for deterministic walks

    def successors(self, b: str) -> list[str]:
        return sorted(t for s, t in self.edges if s == b)

    def predecessors(self, b: str) -> list[str]:
        return sorted(s for s, t in self.edges if t == b)


@dataclass
class Procedure:
    name: str
    params: list[VarDecl]
    locals: list[VarDecl]
    return_var: Optional[str]
    return_type: Optional[TypeExpr]
    cfg: Cfg

    def statements(self) -> Iterator[Statement]:
        for bname in self.cfg.order:
            yield from self.cfg.blocks[bname].statements

    def scope(self) -> dict[str, VarDecl]:
        return {v.name: v for v in self.params + self.locals}


@dataclass
class Program:
    records: dict[str, RecordDecl]
    globals: dict[str, VarDecl]
    procedures: dict[str, Procedure]
    entry: str

    def lookup(self, proc: str, name: str) -> Optional[VarDecl]:
        p = self.procedures.get(proc)
        if p is not None:
            v = p.scope().get(name)
            if v is not None:
                return v
        return self.globals.get(name)

    def statement(self, label: int) -> Optional[Statement]:
        for p in self.procedures.values():
            for s in p.statements():
                if s.label == label:
                    return s
        return None

    def malloc_labels(self) -> dict[int, str]:
        """Allocation-site label -> owning procedure, for heap node typing."""
        out: dict[int, str] = {}
        for p in self.procedures.values():
            for s in p.statements():
                if s.kind is StmtKind.ASSIGN and s.rhs and s.rhs.kind is RhsKind.MALLOC:
                    out[s.label] = p.name
        return out


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_RE_RECORD = re.compile(rf"^record\s+({_IDENT})\s*\{{$")
_RE_FIELD = re.compile(rf"^({_IDENT})\s*:\s*([*]*{_IDENT})\s*;?$")
_RE_GLOBAL = re.compile(rf"^global\s+({_IDENT})\s*:\s*([*]*{_IDENT})$")
_RE_PROC = re.compile(
    rf"^proc\s+({_IDENT})\s*\(([^)]*)\)\s*(?:->\s*([*]*{_IDENT})\s*)?\{{$"
)
_RE_LOCAL = re.compile(rf"^local\s+({_IDENT})\s*:\s*([*]*{_IDENT})$")
_RE_LABEL = re.compile(rf"^({_IDENT})\s*:$")

_BANNED = re.compile(r"\[|\]|\bunion\b|\+\+|--|[-+]\s*\d|\(\s*[*]*\s*(int|float|char)\b")

# synthetic locations and block names the analysis creates for itself
_RESERVED = re.compile(r"^(u\d*|null|start|end)$")


def _parse_type(text: str, line: int) -> TypeExpr:
    text = text.strip()
    m = re.fullmatch(rf"([*]*)({_IDENT})", text)
    if not m:
        raise PtirError(f"bad type {text!r}", line)
    return TypeExpr(m.group(2), len(m.group(1)))


def _parse_path(text: str, line: int, lhs: bool) -> Path:
    """Normalize an access expression into indlist form (see module doc)."""
    text = text.strip()
    m = re.fullmatch(rf"\*\s*({_IDENT})", text)
    if m:
        return Path(m.group(1), (STAR, STAR))
    m = re.fullmatch(rf"({_IDENT})\s*->\s*({_IDENT})", text)
    if m:
        return Path(m.group(1), (STAR, m.group(2)))
    m = re.fullmatch(rf"({_IDENT})\s*\.\s*({_IDENT})", text)
    if m:
        if lhs:
            raise PtirError("unsupported construct: dot-field store", line)
        return Path(m.group(1), (m.group(2),))
    m = re.fullmatch(_IDENT, text)
    if m:
        return Path(text, (STAR,))
    raise PtirError(f"unsupported construct: {text!r}", line)


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.next_label = 1
        self.records: dict[str, RecordDecl] = {}
        self.globals: dict[str, VarDecl] = {}
        self.procedures: dict[str, Procedure] = {}
        self.proc_order: list[str] = []
        self.addr_taken: set[str] = set()

    def error(self, msg: str) -> PtirError:
        return PtirError(msg, self.pos)

    def fresh_name(self, name: str) -> str:
        if _RESERVED.match(name):
            raise self.error(f"reserved name {name!r}")
        return name

    def take(self) -> Optional[str]:
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            self.pos += 1
            line = raw.split("#", 1)[0].strip()
            if line:
                if _BANNED.search(line):
                    raise self.error("unsupported construct")
                return line
        return None

    def parse(self) -> Program:
        while True:
            line = self.take()
            if line is None:
                break
            if m := _RE_RECORD.match(line):
                self._record(m.group(1))
            elif m := _RE_GLOBAL.match(line):
                name, ty = self.fresh_name(m.group(1)), _parse_type(m.group(2), self.pos)
                if name in self.globals:
                    raise self.error(f"duplicate name {name!r}")
                self.globals[name] = VarDecl(name, ty, "global")
            elif m := _RE_PROC.match(line):
                self._procedure(m)
            else:
                raise self.error(f"expected declaration, got {line!r}")
        if not self.procedures:
            raise PtirError("no procedures")
        entry = "main" if "main" in self.procedures else self.proc_order[0]
        prog = Program(self.records, self.globals, self.procedures, entry)
        for name in self.addr_taken:
            for p in self.procedures.values():
                v = p.scope().get(name)
                if v is not None:
                    v.address_taken = True
            if name in self.globals:
                self.globals[name].address_taken = True
        _validate(prog)
        return prog

    def _record(self, name: str) -> None:
        if name in self.records:
            raise self.error(f"duplicate name {name!r}")
        fields: list[tuple[str, TypeExpr]] = []
        while True:
            line = self.take()
            if line is None:
                raise self.error("unterminated record")
            if line == "}":
                break
            m = _RE_FIELD.match(line)
            if not m:
                raise self.error(f"bad field {line!r}")
            fname = m.group(1)
            if any(fname == n for n, _ in fields):
                raise self.error(f"duplicate field {fname!r}")
            fields.append((fname, _parse_type(m.group(2), self.pos)))
        self.records[name] = RecordDecl(name, tuple(fields))

    def _procedure(self, m: re.Match) -> None:
        name = m.group(1)
        if name in self.procedures:
            raise self.error(f"duplicate name {name!r}")
        params: list[VarDecl] = []
        if m.group(2).strip():
            for piece in m.group(2).split(","):
                pm = re.fullmatch(rf"\s*({_IDENT})\s*:\s*([*]*{_IDENT})\s*", piece)
                if not pm:
                    raise self.error(f"bad parameter {piece!r}")
                params.append(
                    VarDecl(self.fresh_name(pm.group(1)), _parse_type(pm.group(2), self.pos), "param")
                )
        ret_type = _parse_type(m.group(3), self.pos) if m.group(3) else None

        locals_: list[VarDecl] = []
        blocks: dict[str, BasicBlock] = {}
        order: list[str] = []
        edges: set[tuple[str, str]] = set()
        pending: list[tuple[str, str]] = []  # (from block, goto target) to resolve
        current: Optional[BasicBlock] = None
        terminated = False
        return_var: Optional[str] = None

        def open_block(bname: str) -> None:
            nonlocal current, terminated
            if bname in blocks:
                raise self.error(f"duplicate block {bname!r}")
            nb = BasicBlock(bname)
            if current is not None and not terminated:
                edges.add((current.name, bname))
            blocks[bname] = nb
            order.append(bname)
            current = nb
            terminated = False

        while True:
            line = self.take()
            if line is None:
                raise self.error("unterminated procedure")
            if line == "}":
                break
            if lm := _RE_LOCAL.match(line):
                if any(v.name == lm.group(1) for v in params + locals_):
                    raise self.error(f"duplicate name {lm.group(1)!r}")
                locals_.append(
                    VarDecl(self.fresh_name(lm.group(1)), _parse_type(lm.group(2), self.pos), "local")
                )
                continue
            if bm := _RE_LABEL.match(line):
                open_block(self.fresh_name(bm.group(1)))
                continue
            if current is None:
                open_block("entry")
            if terminated:
                raise self.error("statement after terminator")
            if line.startswith("goto "):
                pending.append((current.name, line[5:].strip()))
                terminated = True
                continue
            if line.startswith("br "):
                for target in line[3:].split(","):
                    pending.append((current.name, target.strip()))
                terminated = True
                continue
            stmt = self._statement(line)
            if stmt.kind is StmtKind.RETURN:
                if return_var is not None and return_var != stmt.ret_var:
                    raise self.error("all returns must name the same variable")
                return_var = stmt.ret_var
                edges.add((current.name, END))
                terminated = True
            current.statements.append(stmt)

        if current is None:
            open_block("entry")
        for src, dst in pending:
            if dst not in blocks:
                raise self.error(f"unknown block {dst!r} in {name}")
            edges.add((src, dst))
        blocks[START] = BasicBlock(START)
        blocks[END] = BasicBlock(END)
        edges.add((START, order[0] if order else END))
        # a real block with no outgoing edges falls through to End
        for bname in order:
            if not any(s == bname for s, _ in edges):
                edges.add((bname, END))
        cfg = Cfg(blocks, edges, order)
        self.procedures[name] = Procedure(name, params, locals_, return_var, ret_type, cfg)
        self.proc_order.append(name)

    def _statement(self, line: str) -> Statement:
        label = self.next_label
        self.next_label += 1

        if line.startswith("use "):
            ops = tuple(
                _parse_path(op, self.pos, lhs=False) for op in line[4:].split(",")
            )
            return Statement(label, StmtKind.USE, operands=ops)
        if rm := re.fullmatch(rf"return\s+({_IDENT})", line):
            return Statement(label, StmtKind.RETURN, ret_var=rm.group(1))

        receiver = None
        m = re.fullmatch(rf"({_IDENT})\s*=\s*(call\b.*|\(\s*\*.*)", line)
        if m:
            receiver, line = m.group(1), m.group(2).strip()
        cm = re.fullmatch(rf"(?:call\s+)?\(\s*\*\s*({_IDENT})\s*\)\s*\(([^)]*)\)", line)
        if cm:
            args = tuple(a.strip() for a in cm.group(2).split(",") if a.strip())
            return Statement(label, StmtKind.FPCALL, fp=cm.group(1), args=args, receiver=receiver)
        cm = re.fullmatch(rf"call\s+({_IDENT})\s*\(([^)]*)\)", line)
        if cm:
            args = tuple(a.strip() for a in cm.group(2).split(",") if a.strip())
            return Statement(label, StmtKind.CALL, callee=cm.group(1), args=args, receiver=receiver)
        if receiver is not None:
            raise self.error(f"bad call {line!r}")

        if "=" not in line:
            raise self.error(f"bad statement {line!r}")
        lhs_text, rhs_text = (s.strip() for s in line.split("=", 1))
        lhs = _parse_path(lhs_text, self.pos, lhs=True)
        rhs = self._rhs(rhs_text)
        return Statement(label, StmtKind.ASSIGN, lhs=lhs, rhs=rhs)

    def _rhs(self, text: str) -> Rhs:
        if text == "malloc":
            return Rhs(RhsKind.MALLOC)
        if text == "null":
            return Rhs(RhsKind.NULL)
        if text.startswith("&"):
            var = text[1:].strip()
            if not re.fullmatch(_IDENT, var):
                raise self.error(f"bad address-of {text!r}")
            self.addr_taken.add(var)
            return Rhs(RhsKind.ADDR, var=var)
        return Rhs(RhsKind.PATH, path=_parse_path(text, self.pos, lhs=False))


def parse_program(text: str) -> Program:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# validation and typeof
# ---------------------------------------------------------------------------


def _validate(prog: Program) -> None:
    labels: list[int] = []
    for p in prog.procedures.values():
        seen_locals = {v.name for v in p.params}
        for v in p.locals:
            if v.name in seen_locals:
                raise PtirError(f"duplicate name {v.name!r} in {p.name}")
            seen_locals.add(v.name)
        for s in p.statements():
            labels.append(s.label)
            _check_statement(prog, p, s)
    labels.sort()
    if labels != list(range(1, len(labels) + 1)):
        raise PtirError("statement labels are not contiguous")
    for rec in prog.records.values():
        for _, t in rec.fields:
            if t.depth == 0 and t.base in prog.records:
                raise PtirError(f"record {rec.name!r} embeds a record by value")


def _check_statement(prog: Program, proc: Procedure, s: Statement) -> None:
    def need_var(name: str) -> VarDecl:
        v = prog.lookup(proc.name, name)
        if v is None:
            raise PtirError(f"undeclared variable {name!r} at statement {s.label}")
        return v

    def check_path(path: Path, write: bool) -> None:
        need_var(path.base)
        base_type = loc_type(prog, proc.name, path.base)
        ok = (
            typeof_along(prog, base_type, path.steps)
            if write
            else path_reads_ok(prog, base_type, path.steps)
        )
        if not ok:
            raise PtirError(
                f"type-depth violation at statement {s.label}: "
                f"{path.base} cannot be accessed via {list(path.steps)}"
            )

    if s.kind is StmtKind.ASSIGN:
        assert s.lhs is not None and s.rhs is not None
        # a bare procedure name on the rhs of a copy is a procedure constant
        if (
            s.rhs.kind is RhsKind.PATH
            and s.rhs.path.steps == (STAR,)
            and s.rhs.path.base in prog.procedures
        ):
            s.rhs = Rhs(RhsKind.PROC, var=s.rhs.path.base)
        check_path(s.lhs, write=True)
        if s.rhs.kind is RhsKind.PATH:
            check_path(s.rhs.path, write=False)
            if len(s.lhs.steps) > 1 and len(s.rhs.path.steps) > 1:
                raise PtirError(
                    f"unsupported construct: statement {s.label} dereferences "
                    "on both sides"
                )
        elif s.rhs.kind is RhsKind.ADDR:
            assert s.rhs.var is not None
            if s.rhs.var not in prog.procedures:
                need_var(s.rhs.var)
        elif s.rhs.kind is RhsKind.PROC:
            if s.rhs.var not in prog.procedures:
                raise PtirError(f"unknown procedure {s.rhs.var!r} at statement {s.label}")
    elif s.kind is StmtKind.CALL:
        if s.callee not in prog.procedures:
            raise PtirError(f"unknown procedure {s.callee!r} at statement {s.label}")
        callee = prog.procedures[s.callee]
        if len(s.args) != len(callee.params):
            raise PtirError(f"arity mismatch calling {s.callee!r} at statement {s.label}")
        for a in s.args:
            if a not in prog.procedures:
                need_var(a)
        if s.receiver is not None:
            need_var(s.receiver)
    elif s.kind is StmtKind.FPCALL:
        need_var(s.fp)
        for a in s.args:
            if a not in prog.procedures:
                need_var(a)
        if s.receiver is not None:
            need_var(s.receiver)
    elif s.kind is StmtKind.USE:
        for op in s.operands:
            check_path(op, write=False)
    elif s.kind is StmtKind.RETURN:
        need_var(s.ret_var)


def loc_type(prog: Program, proc: str | None, name: str) -> Optional[TypeExpr]:
    """Declared type of a named variable, seen from `proc` (None = globals only)."""
    if proc is not None:
        v = prog.lookup(proc, name)
    else:
        v = prog.globals.get(name)
    return v.type if v is not None else None


def typeof_along(
    prog: Program, base_type: Optional[TypeExpr], steps: tuple[str, ...]
) -> frozenset[TypeExpr]:
    """Types of the location reached from a `base_type`-typed cell via `steps`.

    The first Star denotes the cell itself; each later Star strips one
    pointer level; a Field step walks into a record (through one pointer
    level when the current type is a record pointer); Wild fans out to all
    fields. A Star may not land on a bare scalar: types track pointer
    locations, so for `x: int**` depth 3 is already undefined. Branches
    that fall off the type are dropped; an empty result means the whole
    access is undefined.
    """
    if base_type is None or not steps:
        return frozenset()

    def star_ok(t: TypeExpr) -> bool:
        return t.depth >= 1 or t.base in prog.records

    if steps[0] == STAR:
        cur: set[TypeExpr] = {base_type} if star_ok(base_type) else set()
    else:
        # leading field step: base must be a record value (heap cells)
        if base_type.depth != 0 or base_type.base not in prog.records:
            return frozenset()
        cur = set(_field_types(prog, base_type, steps[0]))
    for step in steps[1:]:
        nxt: set[TypeExpr] = set()
        for t in cur:
            if step == STAR:
                d = t.deref()
                if d is not None and star_ok(d):
                    nxt.add(d)
            else:
                for ft in _walk_field(prog, t, step):
                    nxt.add(ft)
        cur = nxt
        if not cur:
            break
    return frozenset(cur)


def path_reads_ok(
    prog: Program, base_type: Optional[TypeExpr], steps: tuple[str, ...]
) -> bool:
    """Whether every cell read along the path exists.

    Unlike `typeof_along` the final cell may hold a scalar: reading `*a`
    for `a: *int` is fine, only the cells navigated through must be
    pointers (or records).
    """
    if base_type is None or not steps:
        return False
    if steps[0] == STAR:
        cur: set[TypeExpr] = {base_type}
    else:
        if base_type.depth != 0 or base_type.base not in prog.records:
            return False
        cur = set(_field_types(prog, base_type, steps[0]))
    for step in steps[1:]:
        nxt: set[TypeExpr] = set()
        for t in cur:
            if step == STAR:
                d = t.deref()
                if d is not None:
                    nxt.add(d)
            else:
                nxt.update(_walk_field(prog, t, step))
        cur = nxt
        if not cur:
            return False
    return bool(cur)


def _walk_field(prog: Program, t: TypeExpr, step: str) -> Iterator[TypeExpr]:
    """Field access on `t`: allowed on a record pointer (one implicit deref)."""
    if t.depth == 1 and t.base in prog.records:
        target = TypeExpr(t.base, 0)
    elif t.depth == 0 and t.base in prog.records:
        target = t
    else:
        return
    yield from _field_types(prog, target, step)


def _field_types(prog: Program, rec_value: TypeExpr, step: str) -> Iterator[TypeExpr]:
    rec = prog.records[rec_value.base]
    if step == WILD:
        for _, ft in rec.fields:
            yield ft
    else:
        ft = rec.field_type(step)
        if ft is not None:
            yield ft


# ---------------------------------------------------------------------------
# call graph
# ---------------------------------------------------------------------------


@dataclass
class CallGraph:
    nodes: list[str]
    edges: set[tuple[str, int, str]]  # (caller, site label, callee)
    sccs: list[tuple[str, ...]]  # bottom-up (reverse topological) order

    def scc_of(self, proc: str) -> tuple[str, ...]:
        for scc in self.sccs:
            if proc in scc:
                return scc
        raise KeyError(proc)

    def is_recursive(self, proc: str) -> bool:
        scc = self.scc_of(proc)
        return len(scc) > 1 or (proc, proc) in {(a, c) for a, _, c in self.edges}


def build_callgraph(prog: Program) -> CallGraph:
    g = nx.DiGraph()
    g.add_nodes_from(prog.procedures)
    edges: set[tuple[str, int, str]] = set()
    for p in prog.procedures.values():
        for s in p.statements():
            if s.kind is StmtKind.CALL:
                edges.add((p.name, s.label, s.callee))
                g.add_edge(p.name, s.callee)
    condensed = nx.condensation(g)
    order = list(nx.topological_sort(condensed))
    sccs: list[tuple[str, ...]] = []
    src_order = list(prog.procedures)
    for comp in reversed(order):  # callees before callers
        members = sorted(condensed.nodes[comp]["members"], key=src_order.index)
        sccs.append(tuple(members))
    return CallGraph(src_order, edges, sccs)


# ---------------------------------------------------------------------------
# pretty printer (round-trip support)
# ---------------------------------------------------------------------------


def render_path(p: Path) -> str:
    if p.steps == (STAR,):
        return p.base
    if p.steps == (STAR, STAR):
        return f"*{p.base}"
    if len(p.steps) == 2 and p.steps[0] == STAR:
        return f"{p.base}->{p.steps[1]}"
    if len(p.steps) == 1:
        return f"{p.base}.{p.steps[0]}"
    raise ValueError(f"unrenderable path {p}")


def render_statement(s: Statement) -> str:
    if s.kind is StmtKind.ASSIGN:
        r = s.rhs
        if r.kind is RhsKind.MALLOC:
            rhs = "malloc"
        elif r.kind is RhsKind.NULL:
            rhs = "null"
        elif r.kind is RhsKind.ADDR:
            rhs = f"&{r.var}"
        elif r.kind is RhsKind.PROC:
            rhs = r.var
        else:
            rhs = render_path(r.path)
        return f"{render_path(s.lhs)} = {rhs}"
    if s.kind is StmtKind.CALL:
        prefix = f"{s.receiver} = " if s.receiver else ""
        return f"{prefix}call {s.callee}({', '.join(s.args)})"
    if s.kind is StmtKind.FPCALL:
        prefix = f"{s.receiver} = " if s.receiver else ""
        return f"{prefix}call (*{s.fp})({', '.join(s.args)})"
    if s.kind is StmtKind.USE:
        return "use " + ", ".join(render_path(op) for op in s.operands)
    if s.kind is StmtKind.RETURN:
        return f"return {s.ret_var}"
    raise ValueError(s.kind)


def render_program(prog: Program) -> str:
    out: list[str] = []
    for rec in prog.records.values():
        out.append(f"record {rec.name} {{")
        for n, t in rec.fields:
            out.append(f"  {n}: {t};")
        out.append("}")
    for v in prog.globals.values():
        out.append(f"global {v.name}: {v.type}")
    for p in prog.procedures.values():
        params = ", ".join(f"{v.name}: {v.type}" for v in p.params)
        ret = f" -> {p.return_type}" if p.return_type else ""
        out.append(f"proc {p.name}({params}){ret} {{")
        for v in p.locals:
            out.append(f"  local {v.name}: {v.type}")
        for bname in p.cfg.order:
            out.append(f"  {bname}:")
            for s in p.cfg.blocks[bname].statements:
                out.append(f"    {render_statement(s)}")
            real_succs = [t for t in p.cfg.successors(bname) if t != END]
            if real_succs:
                if len(real_succs) == 1:
                    out.append(f"    goto {real_succs[0]}")
                else:
                    out.append(f"    br {', '.join(real_succs)}")
        out.append("}")
    return "\n".join(out) + "\n"
