"""Generalized points-to updates and their composition algebra.

A GPU `x i|j y` records that the location reached from x through i
indirections is assigned the address reached from y through j. Indirection
lists generalize the counts i, j with field steps for records and a Wild
step standing for "any field" after k-limiting. Composition substitutes a
producer GPU into a consumer GPU through a common pivot, either reducing
the consumer's read side (target substitution) or its write side (source
substitution).

Endpoints are `Loc` values: named variables (optionally primed, denoting
the value a variable held at procedure entry), heap nodes named by their
allocation site, procedure constants, null, and the synthetic use-collector
nodes u, u0, u1, ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from pointsto.ptir import (
    STAR,
    WILD,
    Program,
    TypeExpr,
    typeof_along,
)


class LocKind(Enum):
    VAR = "var"
    HEAP = "heap"
    SYN = "syn"  # use-collector / fp-placeholder nodes
    NULL = "null"
    PROC = "proc"  # procedure constant


@dataclass(frozen=True)
class Loc:
    name: str
    kind: LocKind = LocKind.VAR
    prime: bool = False

    def unprimed(self) -> "Loc":
        return Loc(self.name, self.kind, False) if self.prime else self

    def primed(self) -> "Loc":
        return Loc(self.name, self.kind, True)

    def __str__(self) -> str:
        return self.name + ("'" if self.prime else "")


NULL = Loc("null", LocKind.NULL)


def heap_loc(site: int) -> Loc:
    return Loc(f"h{site}", LocKind.HEAP)


def proc_loc(name: str) -> Loc:
    return Loc(name, LocKind.PROC)


# ---------------------------------------------------------------------------
# indirection lists
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndList:
    """Sequence of Star / field / Wild steps.

    `k_limited` marks lists truncated by k-limiting; it is bookkeeping
    only and deliberately excluded from equality and hashing, since two
    GPUs that differ only in how their lists were obtained denote the
    same update.
    """

    steps: tuple[str, ...] = ()
    k_limited: bool = field(default=False, compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[str]:
        return iter(self.steps)

    def star_only(self) -> bool:
        return all(s == STAR for s in self.steps)

    def has_deref(self) -> bool:
        return len(self.steps) > 1

    def __str__(self) -> str:
        return "[" + ",".join(self.steps) + "]"


IL0 = IndList(())
IL1 = IndList((STAR,))
IL2 = IndList((STAR, STAR))


def il(*steps: str) -> IndList:
    return IndList(tuple(steps))


def _step_match(a: str, b: str) -> bool:
    """Wild matches any step; Star and a field match only themselves."""
    return a == b or a == WILD or b == WILD


def il_prefix(short: IndList, long: IndList) -> bool:
    if len(short) > len(long):
        return False
    return all(_step_match(a, b) for a, b in zip(short.steps, long.steps))


def s_remainder(il1: IndList, il2: IndList, k: int) -> frozenset[IndList]:
    """Remainders of stripping prefix `il1` from `il2`.

    Exact when il2 is shorter than the k-limit. At the limit the stripped
    list may stand for longer truncated paths, so the remainder is padded
    with up to |il1| Wild steps to cover them.
    """
    assert il_prefix(il1, il2)
    base = il2.steps[len(il1):]
    if len(il2) < k:
        return frozenset({IndList(base, il2.k_limited)})
    out = set()
    for pad in range(len(il1) + 1):
        out.add(IndList(base + (WILD,) * pad, il2.k_limited))
    return frozenset(out)


def append_klim(head: IndList, tail: IndList, k: int) -> IndList:
    steps = head.steps + tail.steps
    limited = head.k_limited or tail.k_limited
    if len(steps) > k:
        return IndList(steps[:k], True)
    return IndList(steps, limited)


# ---------------------------------------------------------------------------
# GPUs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gpu:
    source: Loc
    source_il: IndList
    target: Loc
    target_il: IndList
    stmt: int

    def is_boundary(self) -> bool:
        return self.stmt == 0

    def is_indirect(self) -> bool:
        """Writes through a pointer: the defined location is not known."""
        return len(self.source_il) > 1

    def has_deref(self) -> bool:
        return self.source_il.has_deref() or self.target_il.has_deref()

    def is_classical(self) -> bool:
        """A plain points-to edge: target fully resolved, source a cell."""
        if len(self.target_il) != 0:
            return False
        return self.source_il == IL1 or STAR not in self.source_il.steps

    def unprimed(self) -> "Gpu":
        if not (self.source.prime or self.target.prime):
            return self
        return Gpu(
            self.source.unprimed(),
            self.source_il,
            self.target.unprimed(),
            self.target_il,
            self.stmt,
        )

    def source_key(self) -> tuple[Loc, IndList]:
        return (self.source, self.source_il)

    def __str__(self) -> str:
        if self.source_il.star_only() and self.target_il.star_only():
            ils = f"{len(self.source_il)}|{len(self.target_il)}"
        else:
            ils = f"{self.source_il}|{self.target_il}"
        return f"{self.source} {ils} {self.target} @{self.stmt:02d}"


def render_gpus(gpus: Iterable[Gpu]) -> list[str]:
    return sorted(str(g) for g in gpus)


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------


class ComposeStatus(Enum):
    REDUCED = "reduced"
    FAIL = "fail"
    UNDESIRABLE = "undesirable"


@dataclass(frozen=True)
class ComposeResult:
    status: ComposeStatus
    gpus: frozenset[Gpu] = frozenset()


FAIL = ComposeResult(ComposeStatus.FAIL)
UNDESIRABLE = ComposeResult(ComposeStatus.UNDESIRABLE)

TS = "ts"
SS = "ss"


def compose(
    tau: str,
    consumer: Gpu,
    producer: Gpu,
    k: int,
    allow_undesirable: bool = False,
) -> ComposeResult:
    """Substitute `producer` into `consumer` through a shared pivot.

    Target substitution (TS) rewrites the consumer's read side; the
    producer's source must prefix the consumer's target list, an exhausted
    (empty) remainder being fine. Source substitution (SS) rewrites the
    write side and requires a proper, nonempty remainder: with nothing
    left over the consumer would kill the pivot rather than write through
    it. A composition whose result says less about the defined location
    than the producer did (target list longer than source list) is
    undesirable; callers opt in to it only for entry-value producers,
    accepting k-limiting.
    """
    if tau == TS:
        if producer.source != consumer.target:
            return FAIL
        if not il_prefix(producer.source_il, consumer.target_il):
            return FAIL
        pivot_il = consumer.target_il
    elif tau == SS:
        if producer.source != consumer.source:
            return FAIL
        if not il_prefix(producer.source_il, consumer.source_il):
            return FAIL
        if len(producer.source_il) == len(consumer.source_il):
            return FAIL
        pivot_il = consumer.source_il
    else:
        raise ValueError(f"unknown composition kind {tau!r}")

    if len(producer.target_il) > len(producer.source_il) and not allow_undesirable:
        return UNDESIRABLE

    out = set()
    for rem in s_remainder(producer.source_il, pivot_il, k):
        new_il = append_klim(producer.target_il, rem, k)
        if tau == TS:
            out.add(
                Gpu(consumer.source, consumer.source_il, producer.target, new_il, consumer.stmt)
            )
        else:
            out.add(
                Gpu(producer.target, new_il, consumer.target, consumer.target_il, consumer.stmt)
            )
    return ComposeResult(ComposeStatus.REDUCED, frozenset(out))


# ---------------------------------------------------------------------------
# type predicates over GPUs
# ---------------------------------------------------------------------------


class TypeTable:
    """Value types of GPU endpoints within one procedure's summary.

    Maps plain names to the type of the cell they denote: declared types
    for variables, the allocated value type for heap nodes. Primed
    locations inherit the base variable's type; synthetic, null, and
    procedure-constant locations have none, so every typeof along them is
    undefined and their GPUs never participate in type overlap.
    """

    def __init__(self, prog: Program, types: dict[str, TypeExpr]):
        self.prog = prog
        self.types = dict(types)

    def merge_renamed(self, other: "TypeTable", rename: dict[str, str]) -> None:
        for name, ty in other.types.items():
            self.types.setdefault(rename.get(name, name), ty)

    def value_type(self, loc: Loc) -> Optional[TypeExpr]:
        if loc.kind in (LocKind.SYN, LocKind.NULL, LocKind.PROC):
            return None
        return self.types.get(loc.name)

    def along(self, loc: Loc, ind: IndList) -> frozenset[TypeExpr]:
        return typeof_along(self.prog, self.value_type(loc), ind.steps)

    def tdef(self, g: Gpu) -> frozenset[TypeExpr]:
        """Types the GPU may write: typeof along its full source list."""
        return self.along(g.source, g.source_il)

    def tref(self, g: Gpu) -> frozenset[TypeExpr]:
        """Types the GPU reads while navigating.

        Proper prefixes of the source list and all prefixes of the target
        list. A one-step prefix of a primed location is skipped: the entry
        value is a snapshot, reading it dereferences nothing current.
        """
        out: set[TypeExpr] = set()
        for m in range(1, len(g.source_il)):
            if m == 1 and g.source.prime:
                continue
            out |= self.along(g.source, IndList(g.source_il.steps[:m]))
        for m in range(1, len(g.target_il) + 1):
            if m == 1 and g.target.prime:
                continue
            out |= self.along(g.target, IndList(g.target_il.steps[:m]))
        return frozenset(out)
