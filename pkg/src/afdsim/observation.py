"""Observation DAGs: partially ordered records of detector outputs.

An observation keeps at most one vertex per (location, index), is downward
closed in indices per location, chains consecutive indices, and keeps its
edge set transitively closed and acyclic.  All operations are pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import CapacityError, ObservationConflict, TraceFormatError
from .afd import AfdTrace, Verdict, is_crash, is_valid_sequence
from .ioa import Action
from .system import Locations


@dataclass(frozen=True, slots=True)
class Vertex:
    loc: int
    index: int
    action: Action

    def __str__(self) -> str:
        return f"({self.loc},{self.index},{self.action})"


@dataclass(frozen=True)
class Violation:
    prop: str
    witness: tuple

    def __str__(self) -> str:
        return f"violation({self.prop}: {', '.join(map(str, self.witness))})"


class Observation:
    """Immutable DAG of vertices with eagerly maintained transitive closure."""

    __slots__ = ("vertices", "edges", "_at", "_by_loc", "_succ", "_pred", "_hash")

    def __init__(self, vertices: Iterable[Vertex] = (), edges: Iterable[tuple] = ()):
        self.vertices = frozenset(vertices)
        self.edges = frozenset(edges)
        at: Dict[tuple, Vertex] = {}
        by_loc: Dict[int, List[Vertex]] = {}
        for v in self.vertices:
            at[(v.loc, v.index)] = v
            by_loc.setdefault(v.loc, []).append(v)
        for vs in by_loc.values():
            vs.sort(key=lambda v: v.index)
        succ: Dict[Vertex, set] = {v: set() for v in self.vertices}
        pred: Dict[Vertex, set] = {v: set() for v in self.vertices}
        for (a, b) in self.edges:
            succ[a].add(b)
            pred[b].add(a)
        self._at = at
        self._by_loc = by_loc
        self._succ = {v: frozenset(s) for v, s in succ.items()}
        self._pred = {v: frozenset(s) for v, s in pred.items()}
        self._hash = hash((self.vertices, self.edges))

    def __eq__(self, other) -> bool:
        return (isinstance(other, Observation)
                and self.vertices == other.vertices and self.edges == other.edges)

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self.vertices)

    def at(self, loc: int, index: int) -> Optional[Vertex]:
        return self._at.get((loc, index))

    def at_location(self, loc: int) -> tuple:
        return tuple(self._by_loc.get(loc, ()))

    def max_index(self, loc: int) -> int:
        vs = self._by_loc.get(loc)
        return vs[-1].index if vs else 0

    def successors(self, v: Vertex) -> frozenset:
        return self._succ.get(v, frozenset())

    def predecessors(self, v: Vertex) -> frozenset:
        return self._pred.get(v, frozenset())

    def successors_at(self, v: Vertex, loc: int) -> tuple:
        return tuple(sorted((w for w in self.successors(v) if w.loc == loc),
                            key=lambda w: w.index))

    def locations_present(self) -> frozenset:
        return frozenset(self._by_loc)


EMPTY_OBSERVATION = Observation()


def validate(g: Observation) -> Optional[Violation]:
    """First violated structural property, or None when the DAG is an
    observation (dangling edges, duplicates, gaps, missing chain edges,
    closure, cycles)."""
    for (a, b) in g.edges:
        if a not in g.vertices or b not in g.vertices:
            return Violation("edge-endpoints", (a, b))
        if a == b:
            return Violation("self-loop", (a,))
    seen: Dict[tuple, Vertex] = {}
    for v in g.vertices:
        if v.index < 1:
            return Violation("property-1", (v,))
        prev = seen.get((v.loc, v.index))
        if prev is not None:
            return Violation("property-1", (prev, v))
        seen[(v.loc, v.index)] = v
    for v in g.vertices:
        for k in range(1, v.index):
            if g.at(v.loc, k) is None:
                return Violation("property-2", (v, (v.loc, k)))
    for v in g.vertices:
        nxt = g.at(v.loc, v.index + 1)
        if nxt is not None and (v, nxt) not in g.edges:
            return Violation("property-3", (v, nxt))
    # Acyclicity via iterative removal of in-degree-0 vertices; checked
    # before closure so a cycle is reported as such.
    indeg = {v: len(g.predecessors(v)) for v in g.vertices}
    queue = [v for v, d in indeg.items() if d == 0]
    removed = 0
    while queue:
        v = queue.pop()
        removed += 1
        for w in g.successors(v):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if removed != len(g.vertices):
        cyc = tuple(sorted((v for v, d in indeg.items() if d > 0),
                           key=lambda v: (v.index, v.loc)))
        return Violation("acyclic", cyc[:3])
    for (a, b) in g.edges:
        for c in g.successors(b):
            if (a, c) not in g.edges:
                return Violation("property-5", (a, b, c))
    return None


def insert(g: Observation, v: Vertex) -> Observation:
    """Add v with edges from every existing vertex; v's index must be the
    next one at its location."""
    expected = g.max_index(v.loc) + 1
    if v.index != expected:
        raise ValueError(
            f"insert index {v.index} at location {v.loc}, expected {expected}")
    new_edges = set(g.edges)
    new_edges.update((u, v) for u in g.vertices)
    return Observation(g.vertices | {v}, new_edges)


def union(g: Observation, h: Observation) -> Observation:
    """Union of two consistent observations; raises ObservationConflict when
    (i) the same (location, index) carries different actions, or (ii) a
    shared vertex has different incoming-edge sets."""
    for v in h.vertices:
        mine = g.at(v.loc, v.index)
        if mine is not None and mine.action != v.action:
            raise ObservationConflict("vertex-action", (mine, v))
    for v in g.vertices & h.vertices:
        if g.predecessors(v) != h.predecessors(v):
            raise ObservationConflict("incoming-edges", (v,))
    merged = Observation(g.vertices | h.vertices, g.edges | h.edges)
    return merged


def is_prefix(h: Observation, g: Observation) -> bool:
    """h is a subgraph of g and every h-vertex keeps its incoming edges."""
    if not (h.vertices <= g.vertices and h.edges <= g.edges):
        return False
    return all(h.predecessors(v) == g.predecessors(v) for v in h.vertices)


def observation_from_trace(t: AfdTrace, locs: Locations) -> Observation:
    """Chain-like observation built by inserting the trace's outputs in order;
    the x-th output at location i becomes vertex (i, x, e)."""
    if is_valid_sequence(AfdTrace(t.events, complete=False), locs).is_violated:
        raise ValueError("trace fails the validity safety clause")
    g = EMPTY_OBSERVATION
    counts: Dict[int, int] = {}
    for e in t.events:
        if is_crash(e):
            continue
        k = counts.get(e.loc, 0) + 1
        counts[e.loc] = k
        g = insert(g, Vertex(e.loc, k, e))
    return g


def _topological_sorts(g: Observation, bound: int):
    if len(g) > bound:
        raise CapacityError(
            f"exhaustive topological enumeration needs |V| <= {bound}, got {len(g)}")
    indeg = {v: len(g.predecessors(v)) for v in g.vertices}
    order: List[Vertex] = []

    def rec():
        if len(order) == len(g.vertices):
            yield tuple(order)
            return
        ready = sorted((v for v, d in indeg.items() if d == 0 and v not in order),
                       key=lambda v: (v.index, v.loc))
        for v in ready:
            order.append(v)
            for w in g.successors(v):
                indeg[w] -= 1
            yield from rec()
            order.pop()
            for w in g.successors(v):
                indeg[w] += 1

    yield from rec()


def is_compatible(events: Sequence[Action], g: Observation, bound: int = 8) -> bool:
    """True when the output projection of the events equals the event
    sequence of some topological sort of g (exhaustive; capacity-bounded)."""
    if len(g) > bound:
        raise CapacityError(
            f"compatibility check needs |V| <= {bound}, got {len(g)}")
    outs = tuple(e for e in events if not is_crash(e))
    if len(outs) != len(g.vertices):
        return False
    indeg = {v: len(g.predecessors(v)) for v in g.vertices}
    placed: set = set()

    def rec(x: int) -> bool:
        if x == len(outs):
            return True
        for v in g.vertices:
            if v in placed or indeg[v] != 0 or v.action != outs[x]:
                continue
            placed.add(v)
            for w in g.successors(v):
                indeg[w] -= 1
            if rec(x + 1):
                placed.discard(v)
                for w in g.successors(v):
                    indeg[w] += 1
                return True
            placed.discard(v)
            for w in g.successors(v):
                indeg[w] += 1
        return False

    return rec(0)


def viable_for_omega_f(g: Observation, f: int, locs: Locations,
                       complete: bool = True, bound: int = 8) -> Verdict:
    """Existence of a compatible trace accepted by the f-bounded leader
    detector.  Locations with vertices are treated as live (they must not
    crash); absent locations must crash, mirroring the live-set equality
    between a viable observation and its compatible traces."""
    if len(g) > bound:
        raise CapacityError(f"viability search needs |V| <= {bound}, got {len(g)}")
    if not complete:
        return Verdict.undetermined("liveness-pending")
    present = g.locations_present()
    absent = [i for i in locs.pi if i not in present]
    if len(absent) > f:
        return Verdict.holds()
    live = sorted(present)
    for sort in _topological_sorts(g, bound):
        seq = [v.action for v in sort]
        if not seq:
            continue
        leader = seq[-1].payload[0] if seq[-1].payload else None
        if leader not in live:
            continue
        block_start = len(seq)
        for k in range(len(seq) - 1, -1, -1):
            if (seq[k].payload[0] if seq[k].payload else None) != leader:
                break
            block_start = k
        covered = {e.loc for e in seq[block_start:]}
        if covered == set(live):
            return Verdict.holds()
    return Verdict.violated("no-stabilizing-compatible-trace")


def branches(g: Observation, bound: int = 8) -> list:
    """All maximal paths: paths not embeddable as a subsequence of another
    path.  Transitive edges create shortcut paths; maximality keeps only the
    longest chains."""
    if len(g) > bound:
        raise CapacityError(f"branch enumeration needs |V| <= {bound}, got {len(g)}")
    paths: List[tuple] = []

    def extend(path: tuple):
        last = path[-1]
        succs = sorted(g.successors(last), key=lambda v: (v.index, v.loc))
        if not succs:
            paths.append(path)
            return
        for s in succs:
            extend(path + (s,))

    starts = sorted((v for v in g.vertices if not g.predecessors(v)),
                    key=lambda v: (v.index, v.loc))
    for v in starts:
        extend((v,))

    def subseq(a: tuple, b: tuple) -> bool:
        it = iter(b)
        return all(any(x == y for y in it) for x in a)

    maximal = [p for p in paths
               if not any(p is not q and len(q) >= len(p) and subseq(p, q)
                          for q in paths)]
    # Deduplicate while preserving deterministic order.
    out = []
    seen = set()
    for p in maximal:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


# --- serialization ------------------------------------------------------------

def _action_token(a: Action) -> str:
    args = ",".join(str(p) for p in a.payload)
    core = f"{a.name}({args})" if args else a.name
    return f"{core}@{a.loc}"


def _parse_action_token(token: str) -> Action:
    try:
        core, loc = token.rsplit("@", 1)
        if "(" in core:
            name, args = core[:-1].split("(", 1)
            payload = tuple(int(p) if p.lstrip("-").isdigit() else p
                            for p in args.split(",") if p != "")
        else:
            name, payload = core, ()
        return Action(name, int(loc), payload)
    except (ValueError, IndexError) as exc:
        raise TraceFormatError(f"bad action token {token!r}") from exc


def format_observation(g: Observation, n: int) -> str:
    lines = [f"obs n={n}"]
    for v in sorted(g.vertices, key=lambda v: (v.index, v.loc)):
        lines.append(f"v {v.loc} {v.index} {_action_token(v.action)}")
    for (a, b) in sorted(g.edges, key=lambda e: (e[0].index, e[0].loc,
                                                 e[1].index, e[1].loc)):
        lines.append(f"e {a.loc},{a.index} {b.loc},{b.index}")
    return "\n".join(lines) + "\n"


def parse_observation(text: str) -> Tuple[Observation, int]:
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].startswith("obs n="):
        raise TraceFormatError("missing 'obs n=<n>' header")
    try:
        n = int(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise TraceFormatError("bad observation header") from exc
    verts: Dict[tuple, Vertex] = {}
    edges = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split()
        try:
            if parts[0] == "v" and len(parts) == 4:
                v = Vertex(int(parts[1]), int(parts[2]), _parse_action_token(parts[3]))
                verts[(v.loc, v.index)] = v
            elif parts[0] == "e" and len(parts) == 3:
                a = tuple(int(x) for x in parts[1].split(","))
                b = tuple(int(x) for x in parts[2].split(","))
                edges.append((a, b))
            else:
                raise ValueError(line)
        except (ValueError, KeyError) as exc:
            raise TraceFormatError(f"line {ln}: cannot parse {line!r}") from exc
    try:
        edge_set = [(verts[a], verts[b]) for a, b in edges]
    except KeyError as exc:
        raise TraceFormatError(f"edge references unknown vertex {exc}") from exc
    return Observation(verts.values(), edge_set), n
