"""Distributed leader extraction: every location folds its detector inputs
into a growing observation, exchanges snapshots, analyzes the execution tree
of a fixed consensus system against its current knowledge, and emits the
critical location of the first decision gadget as its leader output.

Tree depth equals the observation size, so the per-event analysis runs on a
bounded window: the most recent `analysis_bound` vertices in (index,
location) order, reindexed per location into a fresh observation.  Once a
location crashes it stops contributing vertices, the window slides past it,
and gadget criticality can only name locations still producing outputs.
Analyses are cached on the window shape, which recurs under fair schedules.
"""

from __future__ import annotations

from dataclasses import dataclass, replace, field
from typing import Dict, List, Optional, Tuple

from .afd import AfdTrace, Verdict, check_T_omega_f, is_crash, omega_automaton
from .consensus import ct_algorithm, env_automaton_parts
from .errors import InternalInvariantError, ObservationConflict
from .gadgets import TreeAnalysis, rank_and_first
from .ioa import (Action, Automaton, INPUT, OUTPUT, RunLog, SchedulerPolicy,
                  System, Task, run_fair)
from .observation import EMPTY_OBSERVATION, Observation, Vertex, insert, is_prefix, union, validate
from .system import Locations, ProcessContract, build_system, crash_externals, send_action
from .tree import TreeContext


def extraction_output(i: int, leader: int) -> Action:
    """The emulated leader-election output of the extraction layer."""
    return Action("fdo", i, (leader,))


def window_observation(g: Observation, bound: int) -> Observation:
    """The observation induced by the last `bound` vertices in (index,
    location) order, reindexed per location to start at 1."""
    ordered = sorted(g.vertices, key=lambda v: (v.index, v.loc))
    kept = ordered[-bound:] if bound else []
    if len(kept) == len(g.vertices):
        return g
    kept_set = set(kept)
    offset: Dict[int, int] = {}
    for v in kept:
        cur = offset.get(v.loc)
        if cur is None or v.index < cur:
            offset[v.loc] = v.index
    remap = {v: Vertex(v.loc, v.index - offset[v.loc] + 1, v.action) for v in kept}
    edges = [(remap[a], remap[b]) for (a, b) in g.edges
             if a in kept_set and b in kept_set]
    return Observation(remap.values(), edges)


def analysis_window(g: Observation, bound: int, locs: Locations) -> Observation:
    """The bounded window the extractor analyzes.  When locations have
    stopped producing outputs, the survivors need extra steps per decision
    (round advancing, sends wasted on the silent peer), so the window widens
    by one vertex per absent location, provided the widening does not pull
    the absent locations back in."""
    w = window_observation(g, bound)
    missing = locs.n - len(w.locations_present())
    if missing <= 0:
        return w
    wider = window_observation(g, bound + missing)
    if len(wider.locations_present()) > len(w.locations_present()):
        return w
    return wider


# Window shapes recur heavily under fair schedules, and distinct runs of the
# same system revisit them; the analysis cache is process-wide.
_GLOBAL_ANALYSIS_CACHE: Dict[tuple, Optional[int]] = {}
_GLOBAL_SYSTEMS: Dict[int, System] = {}


def reference_system(locs: Locations) -> System:
    """The consensus system whose execution tree the extractor analyzes."""
    system = _GLOBAL_SYSTEMS.get(locs.n)
    if system is None:
        system = build_system(ct_algorithm(locs), env_automaton_parts(locs),
                              locs, with_crash=False, name=("reference",))
        _GLOBAL_SYSTEMS[locs.n] = system
    return system


class _AnalysisOracle:
    """Cached first-gadget analysis of the reference consensus system."""

    def __init__(self, locs: Locations, node_budget: int):
        self.locs = locs
        self.node_budget = node_budget
        self.analyses = 0
        self.cache_hits = 0
        self.nodes_enumerated = 0

    def first_critical(self, window: Observation) -> Optional[int]:
        key = (window, self.locs.n)
        if key in _GLOBAL_ANALYSIS_CACHE:
            self.cache_hits += 1
            return _GLOBAL_ANALYSIS_CACHE[key]
        self.analyses += 1
        ctx = TreeContext(reference_system(self.locs), window, self.locs)
        analysis = TreeAnalysis(ctx, node_budget=self.node_budget)
        _, _, first = rank_and_first(analysis)
        self.nodes_enumerated += analysis.nodes_enumerated
        result = first.gadget.critical if first is not None else None
        _GLOBAL_ANALYSIS_CACHE[key] = result
        return result


@dataclass(frozen=True)
class ExtractionState:
    g: Observation = EMPTY_OBSERVATION
    k: int = 0
    sendq: tuple = ()
    fdout: int = 0
    faulty: bool = False
    drain_obs: bool = True


def _queue_snapshot(sendq: tuple, g: Observation, j: int) -> tuple:
    """Queue a snapshot for j, superseding a still-pending one in place: the
    old snapshot is a prefix of the new, so nothing is lost and peer
    knowledge lags by at most one delivery."""
    for pos, entry in enumerate(sendq):
        if entry[0] == "obs" and entry[2] == j:
            return sendq[:pos] + (("obs", g, j),) + sendq[pos + 1:]
    return sendq + (("obs", g, j),)


def _pick_entry(s: ExtractionState) -> Optional[int]:
    """Index of the sendq entry to emit next: snapshot and leader-output
    entries alternate so neither class starves the other."""
    if not s.sendq:
        return None
    first = {"obs": None, "fdo": None}
    for pos, entry in enumerate(s.sendq):
        if first[entry[0]] is None:
            first[entry[0]] = pos
        if None not in first.values():
            break
    preferred = "obs" if s.drain_obs else "fdo"
    if first[preferred] is not None:
        return first[preferred]
    return first["fdo" if preferred == "obs" else "obs"]


def extraction_automaton(i: int, locs: Locations, oracle: _AnalysisOracle,
                         analysis_bound: int) -> ProcessContract:
    """The extraction process at location i.

    On each detector input: count it, insert the vertex, queue a snapshot of
    the observation to every peer, re-run the gadget analysis, and queue the
    current leader estimate for output.  Snapshot receipt merges by union,
    which never conflicts when all parties follow the same protocol."""
    others = locs.cyclic_others(i)

    def classify(action: Action):
        if action.name == "crash" and action.loc == i:
            return INPUT
        if action.name == "fd" and action.loc == i:
            return INPUT
        if action.name == "recv" and action.loc == i:
            return INPUT
        if action.name == "send" and action.loc == i:
            return OUTPUT
        if action.name == "fdo" and action.loc == i:
            return OUTPUT
        return None

    def step(s: ExtractionState, action: Action) -> ExtractionState:
        if action.name == "crash":
            return replace(s, faulty=True)
        if action.name == "fd":
            if s.faulty:
                return s
            k = s.k + 1
            g = insert(s.g, Vertex(i, k, action))
            queue = s.sendq
            for j in others:
                queue = _queue_snapshot(queue, g, j)
            fdout = s.fdout
            crit = oracle.first_critical(analysis_window(g, analysis_bound, locs))
            if crit is not None:
                fdout = crit
            queue = queue + (("fdo", fdout),)
            return replace(s, g=g, k=k, sendq=queue, fdout=fdout)
        if action.name == "recv":
            if s.faulty:
                return s
            msg, _sender = action.payload
            if msg[0] != "obs":
                return s
            return replace(s, g=union(s.g, msg[1]))
        if action.name in ("send", "fdo"):
            pos = _pick_entry(s)
            return replace(s, sendq=s.sendq[:pos] + s.sendq[pos + 1:],
                           drain_obs=not s.drain_obs)
        return s

    def enabled(s: ExtractionState) -> Optional[Action]:
        if s.faulty:
            return None
        pos = _pick_entry(s)
        if pos is None:
            return None
        entry = s.sendq[pos]
        if entry[0] == "obs":
            return send_action(i, ("obs", entry[1]), entry[2])
        return extraction_output(i, entry[1])

    initial = ExtractionState(fdout=i)
    return ProcessContract(
        Automaton(("proc", i), initial, classify, step,
                  (Task(("proc", i), enabled),)), i)


@dataclass
class ExtractionResult:
    execution: object
    fdout_timelines: Dict[int, tuple]
    omega_events: tuple
    omega_verdict: Verdict
    stabilization: Verdict
    stable_value: Optional[int]
    crashed: frozenset
    counters: Dict[int, int] = field(default_factory=dict)
    final_g_sizes: Dict[int, int] = field(default_factory=dict)


def run_extraction(locs: Locations, horizon: int, seed: int = 0,
                   scheduler: str = "round-robin",
                   crash_schedule: Tuple[tuple, ...] = (),
                   analysis_bound: int = 8,
                   stability_window: int = 10,
                   node_budget: int = 6_000_000,
                   check_invariants: bool = True) -> ExtractionResult:
    """Compose extraction processes with channels, the crash automaton, and
    the leader-election detector; run fairly; report the per-turn leader
    timelines, the projected emulated-detector trace and its verdict, and
    the trailing-window stabilization verdict."""
    oracle = _AnalysisOracle(locs, node_budget)
    algorithm = {i: extraction_automaton(i, locs, oracle, analysis_bound)
                 for i in locs.pi}
    system = build_system(algorithm, (), locs,
                          extras=(omega_automaton(locs),), name=("extraction",))
    policy = SchedulerPolicy(mode=scheduler, seed=seed, horizon=horizon)
    log = RunLog()
    execution = run_fair(system, policy, crash_externals(crash_schedule), log)

    if check_invariants:
        _assert_run_invariants(system, execution, locs)

    timelines: Dict[int, List[int]] = {i: [] for i in locs.pi}
    for idx in log.state_index_after_turn:
        state = execution.states[idx]
        for i in locs.pi:
            timelines[i].append(system.component_state(state, ("proc", i)).fdout)

    crashed = frozenset(e.loc for e in execution.events if is_crash(e))
    omega_events = tuple(e for e in execution.events
                         if is_crash(e) or e.name == "fdo")
    verdict = check_T_omega_f(AfdTrace(omega_events, complete=True),
                              locs.f, locs)
    stabilization, stable_value = _stabilization(timelines, crashed, locs,
                                                 stability_window)
    final_sizes = {
        i: len(system.component_state(execution.final_state, ("proc", i)).g)
        for i in locs.pi}
    counters = {
        "analyses": oracle.analyses,
        "analysis_cache_hits": oracle.cache_hits,
        "nodes_enumerated": oracle.nodes_enumerated,
    }
    return ExtractionResult(execution, {i: tuple(t) for i, t in timelines.items()},
                            omega_events, verdict, stabilization, stable_value,
                            crashed, counters, final_sizes)


def _stabilization(timelines: Dict[int, list], crashed: frozenset,
                   locs: Locations, window: int):
    """Holds when every crash-free location's last `window` per-turn leader
    values are one common crash-free location."""
    live = [i for i in locs.pi if i not in crashed]
    values = set()
    for i in live:
        tl = timelines[i]
        if len(tl) < window:
            return Verdict.undetermined("horizon-shorter-than-window"), None
        tail = set(tl[-window:])
        if len(tail) != 1:
            return Verdict.violated(f"fdout-unstable-at-{i}"), None
        values |= tail
    if len(values) != 1:
        return Verdict.violated("fdout-disagreement"), None
    value = values.pop()
    if value in crashed:
        return Verdict.violated("fdout-names-crashed-location"), value
    return Verdict.holds(), value


def _assert_run_invariants(system: System, execution, locs: Locations) -> None:
    """Run-time checks: per-location observations grow as a prefix chain and
    always validate; a vertex first appears at its home location right after
    its event; incoming edges never change once a vertex exists anywhere;
    edge order matches event order of the underlying detector trace."""
    fd_positions: Dict[Vertex, int] = {}
    counts: Dict[int, int] = {i: 0 for i in locs.pi}
    for pos, e in enumerate(execution.events):
        if e.name == "fd":
            counts[e.loc] += 1
            fd_positions[Vertex(e.loc, counts[e.loc], e)] = pos

    frozen_preds: Dict[Vertex, frozenset] = {}
    prev = {i: EMPTY_OBSERVATION for i in locs.pi}
    for idx, state in enumerate(execution.states):
        event = execution.events[idx - 1] if idx else None
        for i in locs.pi:
            g = system.component_state(state, ("proc", i)).g
            if g is prev[i] or g == prev[i]:
                continue
            if not is_prefix(prev[i], g):
                raise InternalInvariantError(
                    f"observation at {i} not monotone at step {idx}")
            bad = validate(g)
            if bad is not None:
                raise InternalInvariantError(f"observation at {i} invalid: {bad}")
            new_vertices = g.vertices - prev[i].vertices
            for v in new_vertices:
                if v not in frozen_preds:
                    # First global appearance: home location, right after event.
                    if v.loc != i:
                        raise InternalInvariantError(
                            f"vertex {v} first appeared away from home ({i})")
                    if event is None or event != v.action:
                        raise InternalInvariantError(
                            f"vertex {v} not created by its own event")
                    frozen_preds[v] = g.predecessors(v)
                elif g.predecessors(v) != frozen_preds[v]:
                    raise InternalInvariantError(
                        f"incoming edges of {v} changed at {i}")
            for v in g.vertices & prev[i].vertices:
                if g.predecessors(v) != frozen_preds[v]:
                    raise InternalInvariantError(
                        f"incoming edges of {v} changed at {i}")
            prev[i] = g
    # Edge order soundness against the underlying detector trace.
    for i in locs.pi:
        for (a, b) in prev[i].edges:
            if fd_positions[a] >= fd_positions[b]:
                raise InternalInvariantError(
                    f"edge ({a},{b}) contradicts event order")
