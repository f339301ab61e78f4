"""Whole-program drivers: bottom-up summaries and points-to extraction.

Procedures are summarized in reverse topological order of the call graph.
Non-recursive procedures get one build; recursive components are refined
from a top seed until the data flow at their End blocks stops changing.
Calls through pointers resolve gradually: whenever a caller's analysis
reduces a placeholder's pointer to procedure constants, the site turns
into direct calls and every summary downstream of the discovery is
rebuilt. Points-to facts are read off a final flow-sensitive pass per
procedure; two cheaper variants recompute them flow-insensitively from
saturating GPU stores.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import networkx as nx

from pointsto.ptir import (
    STAR,
    Procedure,
    Program,
    StmtKind,
    build_callgraph,
)
from pointsto.gpu import Gpu, IL1, Loc, LocKind
from pointsto.gpg import (
    Gpb,
    GpbKind,
    Gpg,
    GpuStore,
    _statement_gpus,
    boundary_definitions,
    delta_top,
    initial_gpg,
    main_boundary_definitions,
)
from pointsto.dataflow import ReachInfo, reaching_analysis, strength_reduce
from pointsto import optimize

PointsToMap = dict[int, set[tuple[str, str]]]


class AnalysisError(Exception):
    pass


@dataclass(frozen=True)
class AnalysisOptions:
    k: int = 3
    coalesce: bool = True
    dce: bool = True
    hybrid_threshold: Optional[float] = None
    strict: bool = False
    jobs: int = 1


@dataclass
class ProcStats:
    gpbs_initial: int = 0
    gpbs_inlined: int = 0
    gpbs_final: int = 0
    gpus_initial: int = 0
    gpus_final: int = 0
    edges_initial: int = 0
    edges_inlined: int = 0
    edges_final: int = 0
    back_edges_initial: int = 0
    back_edges_final: int = 0
    dead_gpus_removed: int = 0
    empty_gpbs_removed: int = 0
    gpbs_coalesced: int = 0
    queued_gpus: int = 0
    soundness_alerts: int = 0


@dataclass
class AnalysisStats:
    per_proc: dict[str, ProcStats] = field(default_factory=dict)
    refinement_builds: int = 0
    refinement_trace: list[str] = field(default_factory=list)
    fp_rounds: int = 0

    def proc(self, name: str) -> ProcStats:
        return self.per_proc.setdefault(name, ProcStats())

    def to_json_obj(self) -> dict:
        return {
            "per_procedure": {
                name: dict(sorted(vars(ps).items()))
                for name, ps in sorted(self.per_proc.items())
            },
            "refinement_builds": self.refinement_builds,
            "fp_rounds": self.fp_rounds,
            "soundness_alerts": sum(p.soundness_alerts for p in self.per_proc.values()),
        }


@dataclass
class SummaryTable:
    """Finished procedure summaries; entries are replaced only by the
    recursion refinement loop and are treated as frozen by every reader."""

    summaries: dict[str, Gpg] = field(default_factory=dict)

    def get(self, name: str) -> Optional[Gpg]:
        return self.summaries.get(name)

    def publish(self, name: str, g: Gpg) -> None:
        self.summaries[name] = g


@dataclass
class AnalysisResult:
    points_to: PointsToMap
    table: SummaryTable
    fp_resolution: dict[int, frozenset[str]]
    diagnostics: list[str]
    stats: AnalysisStats


# ---------------------------------------------------------------------------
# call inlining
# ---------------------------------------------------------------------------


def inline_call(
    prog: Program,
    caller: Gpg,
    site: Gpb,
    callee: Gpg,
    record: Optional[list] = None,
) -> Gpg:
    """Splice a frozen callee summary over a call placeholder.

    The placeholder's predecessors feed a parameter-binding GPB, then the
    callee body under fresh labels, then a return-binding GPB. Callee
    scope names get a #site suffix; primed locations become the caller's
    current ones, since the callee's entry state is exactly the caller's
    state at the site. Statement labels inside GPUs are never touched.
    `record`, when given, collects (callee, renamed queued GPUs, body
    labels) for the post-inlining soundness check.
    """
    label = site.label
    if caller.blocks.get(label) is not site:
        raise AnalysisError(f"stale call site {label} in {caller.name}")
    preds = [p for p in caller.predecessors(label) if p != label]
    succs = [s for s in caller.successors(label) if s != label]
    del caller.blocks[label]
    caller.edges = {(s, t) for s, t in caller.edges if label not in (s, t)}

    if callee.is_top:
        sink = caller.add_block(GpbKind.DTOP, sink=True)
        for p in preds:
            caller.add_edge(p, sink.label)
        for s in succs:
            caller.add_edge(sink.label, s)
        return caller

    cp = prog.procedures[callee.name]
    if len(cp.params) != len(site.args):
        raise AnalysisError(
            f"call to {callee.name} at statement {site.site}: "
            f"{len(site.args)} arguments for {len(cp.params)} parameters"
        )
    tag = ".".join(str(x) for x in (site.path or (site.site,)))
    rename = {v.name: f"{v.name}#{tag}" for v in cp.params + cp.locals}
    for name, ty in callee.types.items():
        caller.types.setdefault(rename.get(name, name), ty)
    caller.at_locals |= {rename.get(n, n) for n in callee.at_locals}

    def conv_loc(l: Loc) -> Loc:
        if l.kind is not LocKind.VAR:
            return l
        return Loc(rename.get(l.name, l.name), l.kind, False)

    def conv(x: Gpu) -> Gpu:
        return Gpu(conv_loc(x.source), x.source_il, conv_loc(x.target), x.target_il, x.stmt)

    lmap: dict[int, int] = {}
    for l in sorted(callee.blocks):
        b = callee.blocks[l]
        kind = GpbKind.PLAIN if b.kind in (GpbKind.START, GpbKind.END) else b.kind
        nb = caller.add_block(
            kind,
            frozenset(conv(x) for x in b.gpus),
            callee=b.callee,
            fp=rename.get(b.fp, b.fp) if b.fp else None,
            site=b.site,
            receiver=rename.get(b.receiver, b.receiver) if b.receiver else None,
            args=tuple(rename.get(a, a) for a in b.args),
            path=site.path + b.path if b.is_call() else (),
            sink=b.sink,
        )
        lmap[l] = nb.label
    for s, t in callee.edges:
        caller.add_edge(lmap[s], lmap[t])

    pre = caller.add_block(
        GpbKind.PLAIN,
        frozenset(
            Gpu(Loc(rename[p.name]), IL1, Loc(a), IL1, site.site)
            for p, a in zip(cp.params, site.args)
        ),
    )
    post_gpus: set[Gpu] = set()
    if site.receiver is not None:
        if cp.return_var is None:
            raise AnalysisError(
                f"{callee.name} returns no value but statement {site.site} expects one"
            )
        ret = rename.get(cp.return_var, cp.return_var)
        post_gpus.add(Gpu(Loc(site.receiver), IL1, Loc(ret), IL1, site.site))
    post = caller.add_block(GpbKind.PLAIN, frozenset(post_gpus))

    for p in preds:
        caller.add_edge(p, pre.label)
    caller.add_edge(pre.label, lmap[callee.start])
    caller.add_edge(lmap[callee.end], post.label)
    for s in succs:
        caller.add_edge(post.label, s)
    if record is not None:
        record.append(
            (
                callee.name,
                frozenset(conv(x) for x in callee.queued),
                frozenset(lmap.values()),
                pre.label,
                post.label,
            )
        )
    return caller


def _expand_calls(
    prog: Program,
    g: Gpg,
    table: SummaryTable,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
    record: Optional[list] = None,
) -> None:
    """Inline every direct call; expand fp sites with known resolutions.

    Resolutions are keyed by the placeholder's inlining path, so the same
    fp statement resolves independently per calling context. A path
    resolved to several procedures becomes parallel direct calls between
    the placeholder's neighbours. Loops until nothing expandable remains,
    since inlined bodies may carry further placeholders.
    """
    while True:
        site = next(
            (
                b
                for l in sorted(g.blocks)
                if (b := g.blocks[l]).is_call()
                and (b.callee is not None or fp_paths.get(b.path))
            ),
            None,
        )
        if site is None:
            return
        if site.callee is not None:
            summary = table.get(site.callee)
            if summary is None:
                summary = delta_top(site.callee)
            inline_call(prog, g, site, summary, record)
            continue
        callees = sorted(fp_paths[site.path])
        preds = [p for p in g.predecessors(site.label) if p != site.label]
        succs = [s for s in g.successors(site.label) if s != site.label]
        del g.blocks[site.label]
        g.edges = {(s, t) for s, t in g.edges if site.label not in (s, t)}
        for name in callees:
            stub = g.add_block(
                GpbKind.CALL,
                callee=name,
                site=site.site,
                receiver=site.receiver,
                args=site.args,
                path=site.path,
            )
            for p in preds:
                g.add_edge(p, stub.label)
            for s in succs:
                g.add_edge(stub.label, s)


# ---------------------------------------------------------------------------
# one procedure, one summary
# ---------------------------------------------------------------------------


def _classicalish(x: Gpu) -> bool:
    return (
        not x.source.prime
        and not x.target.prime
        and len(x.target_il) == 0
        and len(x.source_il) <= 1
    )


def _finalize(prog: Program, proc: Procedure, g: Gpg, diagnostics: list[str]) -> None:
    """Strip GPUs meaningless outside the procedure and drop entry primes.

    Sources rooted at plain locals, inlined callee scopes, or resolved
    use collectors are internal. A primed endpoint stays primed only
    when both ends share a base (the update is relative to the cell's
    own entry value); otherwise the prime is dropped, because at any
    call site the entry value is just the caller's current one.
    """
    if g.is_top:
        return
    scope = {v.name: v for v in proc.params + proc.locals}

    def internal(name: str) -> bool:
        if "#" in name:
            return name not in g.at_locals
        v = scope.get(name)
        return (
            v is not None
            and v.kind == "local"
            and not v.address_taken
            and name != proc.return_var
        )

    for b in g.blocks.values():
        if b.kind is not GpbKind.PLAIN:
            continue
        kept: set[Gpu] = set()
        for x in b.gpus:
            if x.source.kind is LocKind.SYN and _classicalish(x):
                continue  # already harvested as points-to facts
            if x.source.kind is LocKind.VAR and internal(x.source.name):
                continue
            if x.target.kind is LocKind.VAR and internal(x.target.name):
                diagnostics.append(
                    f"{proc.name}: value of {x.target.name} read at statement "
                    f"{x.stmt:02d} is never defined"
                )
                continue
            src, tgt = x.source, x.target
            if src.prime and src.name != tgt.name:
                src = src.unprimed()
            if tgt.prime and tgt.name != src.name:
                tgt = tgt.unprimed()
            kept.add(Gpu(src, x.source_il, tgt, x.target_il, x.stmt))
        b.gpus = frozenset(kept)


def _hybrid_top(proc: Procedure, g: Gpg, threshold: float) -> Gpg:
    """Degrade a summary too dependent on its callers to top plus one GPB."""
    gpus = [x for b in g.blocks.values() if b.kind is GpbKind.PLAIN for x in b.gpus]
    if not gpus:
        return g
    dependent = [x for x in gpus if not _classicalish(x)]
    if len(dependent) / len(gpus) <= threshold:
        return g
    h = Gpg(proc.name, dict(g.types))
    h.at_locals = set(g.at_locals)
    kill = h.add_block(GpbKind.DTOP)
    carry = h.add_block(GpbKind.PLAIN, frozenset(gpus))
    h.add_edge(h.start, kill.label)
    h.add_edge(kill.label, carry.label)
    h.add_edge(carry.label, h.end)
    return h


def build_summary(
    prog: Program,
    proc: Procedure,
    table: SummaryTable,
    opts: AnalysisOptions,
    stats: AnalysisStats,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
    diagnostics: list[str],
) -> tuple[Gpg, object]:
    """Run the whole per-procedure pipeline; returns (summary, end state).

    The end state (ROut and BROut at End, or a marker for top) is what
    recursion refinement compares across rounds.
    """
    ps = stats.proc(proc.name)
    g = initial_gpg(prog, proc)
    ps.gpbs_initial = len(g.blocks)
    ps.edges_initial = len(g.edges)
    ps.gpus_initial = len(g.all_gpus())
    ps.back_edges_initial = len(optimize.back_edges(g)) if not g.is_top else 0

    inlined: list = []
    _expand_calls(prog, g, table, fp_paths, inlined)
    g.gc()  # a non-returning callee may have cut every Start-End path
    ps.gpbs_inlined = len(g.blocks)
    ps.edges_inlined = len(g.edges)

    if g.is_top:
        ps.gpbs_final = len(g.blocks)
        ps.edges_final = len(g.edges)
        return _published(proc, g, opts), "top"

    bd = boundary_definitions(prog, proc.name, opts.k)
    info = reaching_analysis(prog, g, True, opts.k, bd)
    strength_reduce(g, info)
    _alert_clobbered_queues(info, inlined, proc, stats, diagnostics)
    rout = info.rout[g.end] | info.brout[g.end]
    if opts.dce:
        ps.dead_gpus_removed += optimize.dead_gpu_elim(g, rout, frozenset(g.queued))
        ps.empty_gpbs_removed += optimize.empty_gpb_elim(g)
    if opts.coalesce:
        ci = optimize.coalescing_analysis(prog, g)
        ps.gpbs_coalesced += optimize.coalesce(g, ci)
        if opts.dce:
            ps.empty_gpbs_removed += optimize.empty_gpb_elim(g)
    optimize.add_deffree_paths(g, bd, rout)
    _finalize(prog, proc, g, diagnostics)
    g.gc()
    ps.queued_gpus = len(g.queued)
    ps.gpbs_final = len(g.blocks)
    ps.edges_final = len(g.edges)
    ps.gpus_final = len(g.all_gpus())
    ps.back_edges_final = len(optimize.back_edges(g)) if not g.is_top else 0
    end_state = "top" if g.is_top else (info.rout[g.end], info.brout[g.end])
    return _published(proc, g, opts), end_state


def _published(proc: Procedure, g: Gpg, opts: AnalysisOptions) -> Gpg:
    if opts.hybrid_threshold is not None and not g.is_top:
        return _hybrid_top(proc, g, opts.hybrid_threshold)
    return g


def _alert_clobbered_queues(
    info: ReachInfo,
    inlined: list,
    proc: Procedure,
    stats: AnalysisStats,
    diagnostics: list[str],
) -> None:
    """A queued GPU killed inside the very summary that queued it means a
    postponed composition was lost: count and report, do not fix."""
    for callee, queued, body, _pre, _post in inlined:
        if not queued:
            continue
        for label in body:
            killed = info.rkill.get(label, frozenset()) | info.brkill.get(
                label, frozenset()
            )
            for x in sorted(queued & killed, key=str):
                stats.proc(proc.name).soundness_alerts += 1
                diagnostics.append(
                    f"{proc.name}: postponed update {x} from {callee} was "
                    f"overwritten before it could be composed"
                )


# ---------------------------------------------------------------------------
# recursion refinement
# ---------------------------------------------------------------------------


def refine_recursive(
    prog: Program,
    scc: tuple[str, ...],
    graph: nx.DiGraph,
    table: SummaryTable,
    opts: AnalysisOptions,
    stats: AnalysisStats,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
    diagnostics: list[str],
) -> None:
    """Refine a recursive component until End data flow stabilizes.

    Members start from a top summary. Each build inlines the newest
    available summaries of the component; whenever a member's End state
    changes, its in-component callers are requeued. Termination follows
    from the finite GPU universe under k-limiting.
    """
    callers: dict[str, set[str]] = {
        name: {p for p in graph.predecessors(name) if p in scc} for name in scc
    }
    post = list(nx.dfs_postorder_nodes(graph, source=prog.entry))
    rank = {name: i for i, name in enumerate(post)}
    work = deque(sorted(scc, key=lambda n: (rank.get(n, len(rank)), n)))
    pending = set(work)
    prev_state: dict[str, object] = {}

    rounds = 0
    while work:
        rounds += 1
        if rounds > 50 * len(scc) + 100:
            raise AnalysisError(f"recursion refinement diverged on {sorted(scc)}")
        name = work.popleft()
        pending.discard(name)
        summary, state = build_summary(
            prog, prog.procedures[name], table, opts, stats, fp_paths, diagnostics
        )
        table.publish(name, summary)
        stats.refinement_builds += 1
        stats.refinement_trace.append(f"{name}:{'top' if summary.is_top else 'gpg'}")
        if prev_state.get(name) != state:
            prev_state[name] = state
            for caller in sorted(callers[name]):
                if caller not in pending:
                    work.append(caller)
                    pending.add(caller)


# ---------------------------------------------------------------------------
# whole-program summarization with fp discovery
# ---------------------------------------------------------------------------


def _fp_sites(prog: Program) -> dict[int, str]:
    out: dict[int, str] = {}
    for p in prog.procedures.values():
        for s in p.statements():
            if s.kind is StmtKind.FPCALL:
                out[s.label] = p.name
    return out


def _stmt_owner(prog: Program) -> dict[int, str]:
    return {
        s.label: p.name for p in prog.procedures.values() for s in p.statements()
    }


def _call_digraph(
    prog: Program, fp_paths: dict[tuple[int, ...], frozenset[str]]
) -> nx.DiGraph:
    """Direct call edges plus an edge per resolved fp path, attributed to
    the procedure whose build performs that inlining (the path's root)."""
    g = nx.DiGraph()
    g.add_nodes_from(prog.procedures)
    for p in prog.procedures.values():
        for s in p.statements():
            if s.kind is StmtKind.CALL:
                g.add_edge(p.name, s.callee)
    owner = _stmt_owner(prog)
    for path, callees in fp_paths.items():
        for callee in callees:
            g.add_edge(owner[path[0]], callee)
    return g


def _components(prog: Program, graph: nx.DiGraph) -> list[tuple[str, ...]]:
    """SCCs bottom-up (callees first), members in program order."""
    order = {name: i for i, name in enumerate(prog.procedures)}
    condensed = nx.condensation(graph)
    out: list[tuple[str, ...]] = []
    for comp in reversed(list(nx.topological_sort(condensed))):
        members = sorted(condensed.nodes[comp]["members"], key=order.__getitem__)
        out.append(tuple(members))
    return out


def _discover_resolutions(
    prog: Program,
    g: Gpg,
    info: ReachInfo,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
) -> bool:
    """Read proc-constant pointees off the reduced fp barrier GPUs."""
    grew = False
    for label, b in g.blocks.items():
        if not (b.is_call() and b.fp is not None and b.path):
            continue
        found = {
            x.target.name
            for x in info.brgen.get(label, frozenset())
            if x.source.kind is LocKind.SYN
            and x.target.kind is LocKind.PROC
            and len(x.target_il) == 0
        }
        found &= set(prog.procedures)
        if found - fp_paths.get(b.path, frozenset()):
            fp_paths[b.path] = fp_paths.get(b.path, frozenset()) | frozenset(found)
            grew = True
    return grew


def fp_site_resolution(
    fp_paths: dict[tuple[int, ...], frozenset[str]]
) -> dict[int, frozenset[str]]:
    """Project path-keyed resolutions onto statement labels: every call
    site along a path observes the procedures the path resolved to."""
    out: dict[int, frozenset[str]] = {}
    for path, callees in fp_paths.items():
        for label in path:
            out[label] = out.get(label, frozenset()) | callees
    return out


def summarize(
    prog: Program, opts: AnalysisOptions
) -> tuple[SummaryTable, dict[tuple[int, ...], frozenset[str]], AnalysisStats, list[str]]:
    """Bottom-up pass over call-graph components, rerun as fp paths resolve."""
    fp_paths: dict[tuple[int, ...], frozenset[str]] = {}
    fp_sites = _fp_sites(prog)
    for _round in range(len(fp_sites) * len(prog.procedures) + 2):
        stats = AnalysisStats()
        diagnostics: list[str] = []
        table = SummaryTable()
        graph = _call_digraph(prog, fp_paths)
        for scc in _components(prog, graph):
            if len(scc) > 1 or graph.has_edge(scc[0], scc[0]):
                refine_recursive(
                    prog, scc, graph, table, opts, stats, fp_paths, diagnostics
                )
            else:
                summary, _ = build_summary(
                    prog, prog.procedures[scc[0]], table, opts, stats, fp_paths, diagnostics
                )
                table.publish(scc[0], summary)
        stats.fp_rounds = _round + 1
        if not _resolve_more(prog, table, opts, fp_paths):
            resolved = fp_site_resolution(fp_paths)
            for site, owner in sorted(fp_sites.items()):
                if not resolved.get(site):
                    diagnostics.append(
                        f"{owner}: call through pointer at statement {site:02d} "
                        f"never resolved to a procedure"
                    )
            return table, fp_paths, stats, diagnostics
    raise AnalysisError("function-pointer resolution failed to stabilize")


def _resolve_more(
    prog: Program,
    table: SummaryTable,
    opts: AnalysisOptions,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
) -> bool:
    """Re-analyze each procedure against frozen summaries, watching the
    barrier GPUs of still-open fp sites for freshly grounded callees."""
    if not any(
        b.fp is not None
        for g in table.summaries.values()
        for b in g.blocks.values()
        if b.is_call()
    ):
        return False
    grew = False
    for name in sorted(prog.procedures):
        proc = prog.procedures[name]
        g = initial_gpg(prog, proc)
        _expand_calls(prog, g, table, fp_paths)
        if g.is_top or not any(b.is_call() and b.fp for b in g.blocks.values()):
            continue
        bd = (
            main_boundary_definitions(prog, name, opts.k)
            if name == prog.entry
            else boundary_definitions(prog, name, opts.k)
        )
        info = reaching_analysis(prog, g, True, opts.k, bd)
        grew |= _discover_resolutions(prog, g, info, fp_paths)
    return grew


# ---------------------------------------------------------------------------
# points-to extraction
# ---------------------------------------------------------------------------


def _pt_pair(x: Gpu) -> Optional[tuple[str, str]]:
    if x.is_boundary() or len(x.target_il) != 0 or len(x.source_il) != 1:
        return None
    if x.source.prime or x.target.prime:
        return None
    if x.source.kind in (LocKind.NULL, LocKind.PROC) or x.target.kind is LocKind.SYN:
        return None
    step = x.source_il.steps[0]
    base = x.source.name.split("#", 1)[0]
    key = base if step == STAR else f"{base}[{step}]"
    return key, x.target.name.split("#", 1)[0]


def collect_points_to(
    prog: Program,
    table: SummaryTable,
    opts: AnalysisOptions,
    fp_paths: dict[tuple[int, ...], frozenset[str]],
    diagnostics: Optional[list[str]] = None,
) -> PointsToMap:
    """Per-statement classical edges from a final pass over every procedure.

    Each procedure is re-analyzed once against the frozen summaries, so a
    statement inlined at many sites accumulates pointees from all of its
    contexts under its one label. The entry procedure runs with globals
    only; any surviving primed or queued fact there has no caller left to
    resolve it and is reported.
    """
    pts: PointsToMap = {}
    for name in sorted(prog.procedures):
        proc = prog.procedures[name]
        g = initial_gpg(prog, proc)
        _expand_calls(prog, g, table, fp_paths)
        if g.is_top:
            continue
        is_entry = name == prog.entry
        bd = (
            main_boundary_definitions(prog, name, opts.k)
            if is_entry
            else boundary_definitions(prog, name, opts.k)
        )
        info = reaching_analysis(prog, g, True, opts.k, bd)
        for label in sorted(info.brgen):
            for x in info.brgen[label]:
                pair = _pt_pair(x)
                if pair is not None:
                    pts.setdefault(x.stmt, set()).add(pair)
        if is_entry and diagnostics is not None:
            for x in sorted(info.queued, key=str):
                diagnostics.append(
                    f"{name}: update {x} stayed blocked at the program entry"
                )
    return pts


def fscs_analyze(prog: Program, opts: AnalysisOptions) -> AnalysisResult:
    table, fp_paths, stats, diagnostics = summarize(prog, opts)
    pts = collect_points_to(prog, table, opts, fp_paths, diagnostics)
    return AnalysisResult(pts, table, fp_site_resolution(fp_paths), diagnostics, stats)


# ---------------------------------------------------------------------------
# flow-insensitive variants
# ---------------------------------------------------------------------------


def _own_gpus(prog: Program, proc: Procedure) -> frozenset[Gpu]:
    out: set[Gpu] = set()
    for s in proc.statements():
        out |= _statement_gpus(prog, proc, s)
    return frozenset(out)


def _store_callees(prog: Program, store: GpuStore, fp: str) -> frozenset[str]:
    return frozenset(
        x.target.name
        for x in store.classical()
        if x.source == Loc(fp) and x.target.kind is LocKind.PROC
    )


def _bind_gpus(prog: Program, s, callee: str) -> frozenset[Gpu]:
    cp = prog.procedures[callee]
    if len(cp.params) != len(s.args):
        raise AnalysisError(
            f"call to {callee} at statement {s.label}: "
            f"{len(s.args)} arguments for {len(cp.params)} parameters"
        )
    out = {
        Gpu(Loc(p.name), IL1, Loc(a), IL1, s.label)
        for p, a in zip(cp.params, s.args)
    }
    if s.receiver is not None and cp.return_var is not None:
        out.add(Gpu(Loc(s.receiver), IL1, Loc(cp.return_var), IL1, s.label))
    return frozenset(out)


def fici_analyze(prog: Program, opts: AnalysisOptions) -> PointsToMap:
    """Single saturating store over the whole program."""
    store = GpuStore(opts.k)
    for proc in prog.procedures.values():
        store.insert_all(_own_gpus(prog, proc))
    for _ in range(len(prog.procedures) * 4 + 4):
        before = frozenset(store.gpus)
        for proc in prog.procedures.values():
            for s in proc.statements():
                if s.kind is StmtKind.CALL:
                    store.insert_all(_bind_gpus(prog, s, s.callee))
                elif s.kind is StmtKind.FPCALL:
                    for callee in sorted(_store_callees(prog, store, s.fp)):
                        store.insert_all(_bind_gpus(prog, s, callee))
        if frozenset(store.gpus) == before:
            break
    pts: PointsToMap = {}
    for x in store.classical():
        pair = _pt_pair(x)
        if pair is not None:
            pts.setdefault(x.stmt, set()).add(pair)
    return pts


def _store_export(prog: Program, proc: Procedure, store: GpuStore) -> frozenset[Gpu]:
    """What a caller may see: everything not rooted in a plain local."""
    plain = {
        v.name
        for v in proc.locals
        if not v.address_taken and v.name != proc.return_var
    }
    out: set[Gpu] = set()
    for x in store.gpus:
        if x.source.kind is LocKind.VAR and x.source.name in plain:
            continue
        if x.target.kind is LocKind.VAR and x.target.name in plain:
            continue
        out.add(x)
    return frozenset(out)


def fics_analyze(prog: Program, opts: AnalysisOptions) -> PointsToMap:
    """Per-procedure stores, callee exports replayed at every call site."""
    cg = build_callgraph(prog)
    stores: dict[str, GpuStore] = {}
    exports: dict[str, frozenset[Gpu]] = {}
    fp_res: dict[int, frozenset[str]] = {}

    def rebuild(name: str) -> bool:
        proc = prog.procedures[name]
        store = GpuStore(opts.k)
        store.insert_all(_own_gpus(prog, proc))
        for s in proc.statements():
            callees: Iterable[str] = ()
            if s.kind is StmtKind.CALL:
                callees = (s.callee,)
            elif s.kind is StmtKind.FPCALL:
                callees = sorted(fp_res.get(s.label, frozenset()))
            for callee in callees:
                store.insert_all(_bind_gpus(prog, s, callee))
                store.insert_all(exports.get(callee, frozenset()))
        stores[name] = store
        exp = _store_export(prog, proc, store)
        changed = exports.get(name) != exp
        exports[name] = exp
        return changed

    for _ in range(len(prog.procedures) * 8 + 8):
        changed = False
        for scc in cg.sccs:
            for _ in range(len(scc) * len(prog.procedures) * 8 + 8):
                if not any([rebuild(name) for name in scc]):
                    break
        for name, store in sorted(stores.items()):
            for s in prog.procedures[name].statements():
                if s.kind is StmtKind.FPCALL:
                    found = _store_callees(prog, store, s.fp)
                    if found - fp_res.get(s.label, frozenset()):
                        fp_res[s.label] = fp_res.get(s.label, frozenset()) | found
                        changed = True
        if not changed:
            break
    pts: PointsToMap = {}
    for store in stores.values():
        for x in store.classical():
            pair = _pt_pair(x)
            if pair is not None:
                pts.setdefault(x.stmt, set()).add(pair)
    return pts
