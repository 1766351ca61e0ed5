"""Asynchronous failure detectors as trace predicates, plus the leader
election automaton.

Traces are finite sequences of crash events and per-location detector
outputs.  Infinite-trace clauses get a three-valued finite-horizon reading:
a Verdict is `holds`, `violated` (with the earliest witness), or
`undetermined` when only liveness is unresolved on a prefix.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import TraceFormatError
from .ioa import Action, Automaton, Task, INPUT, OUTPUT
from .system import Locations

HOLDS = "holds"
VIOLATED = "violated"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: Optional[str] = None
    index: Optional[int] = None

    @classmethod
    def holds(cls) -> "Verdict":
        return cls(HOLDS)

    @classmethod
    def violated(cls, reason: str, index: Optional[int] = None) -> "Verdict":
        return cls(VIOLATED, reason, index)

    @classmethod
    def undetermined(cls, reason: str) -> "Verdict":
        return cls(UNDETERMINED, reason)

    @property
    def is_violated(self) -> bool:
        return self.status == VIOLATED

    def __str__(self) -> str:
        if self.status == HOLDS:
            return "holds"
        at = f" at {self.index}" if self.index is not None else ""
        return f"{self.status}({self.reason}{at})"


@dataclass(frozen=True)
class AfdTrace:
    """A finite sequence over crash events and detector outputs.

    `complete` marks the sequence as a whole (horizon-terminated) run rather
    than a prefix; liveness clauses are only judged on complete traces.
    """

    events: tuple
    complete: bool = False

    def __len__(self) -> int:
        return len(self.events)


def is_crash(e: Action) -> bool:
    return e.name == "crash"


def faulty_set(events: Sequence[Action]) -> frozenset:
    return frozenset(e.loc for e in events if is_crash(e))


def live_set(events: Sequence[Action], locs: Locations) -> frozenset:
    return frozenset(locs.pi) - faulty_set(events)


def outputs_at(events: Sequence[Action], i: int) -> tuple:
    return tuple(e for e in events if not is_crash(e) and e.loc == i)


def is_valid_sequence(t: AfdTrace, locs: Locations) -> Verdict:
    """Safety: no output at i after crash_i (witness index is 1-based).
    Liveness at finite horizon: on complete traces every crash-free location
    must have at least one output; on prefixes liveness is undetermined."""
    crashed = set()
    for idx, e in enumerate(t.events):
        if is_crash(e):
            crashed.add(e.loc)
        elif e.loc in crashed:
            return Verdict.violated("output-after-crash", index=idx + 1)
    if not t.complete:
        return Verdict.undetermined("liveness-pending")
    for i in locs.pi:
        if i not in crashed and not outputs_at(t.events, i):
            return Verdict.violated(f"no-output-at-live-location-{i}")
    return Verdict.holds()


def mincrash(t: AfdTrace) -> AfdTrace:
    """Drop every crash_i that has a preceding crash_i."""
    seen = set()
    kept = []
    for e in t.events:
        if is_crash(e):
            if e.loc in seen:
                continue
            seen.add(e.loc)
        kept.append(e)
    return AfdTrace(tuple(kept), t.complete)


def is_subsequence(sub: Sequence[Action], full: Sequence[Action]) -> bool:
    it = iter(full)
    return all(any(e == x for x in it) for e in sub)


def _first_crash_pos(events: Sequence[Action], i: int) -> Optional[int]:
    for k, e in enumerate(events):
        if is_crash(e) and e.loc == i:
            return k
    return None


def is_sampling(t_sub: AfdTrace, t: AfdTrace, locs: Locations) -> bool:
    """t_sub keeps all outputs at live-in-t locations, a prefix of outputs at
    each faulty location, and retains the first crash of every faulty one."""
    if not is_subsequence(t_sub.events, t.events):
        return False
    faulty = faulty_set(t.events)
    for i in locs.pi:
        sub_out = outputs_at(t_sub.events, i)
        full_out = outputs_at(t.events, i)
        if i not in faulty:
            if sub_out != full_out:
                return False
        else:
            if sub_out != full_out[:len(sub_out)]:
                return False
            pos = _first_crash_pos(t_sub.events, i)
            if pos is None:
                return False
            before_sub = sum(1 for e in t_sub.events[:pos]
                             if not is_crash(e) and e.loc == i)
            full_pos = _first_crash_pos(t.events, i)
            before_full = sum(1 for e in t.events[:full_pos]
                              if not is_crash(e) and e.loc == i)
            if before_sub > before_full:
                return False
    return True


def is_strong_sampling(t_sub: AfdTrace, t: AfdTrace, locs: Locations) -> bool:
    """t_sub is a subsequence of t and is itself a valid sequence (safety on
    prefixes; liveness too when t_sub is complete)."""
    if not is_subsequence(t_sub.events, t.events):
        return False
    return not is_valid_sequence(t_sub, locs).is_violated


def constrained_reordering_verdict(t2: AfdTrace, t: AfdTrace, locs: Locations) -> Verdict:
    """t2 must be a permutation of t preserving same-location output order and
    every (crash, later output) pair, and must pass the validity safety clause."""
    if Counter(t2.events) != Counter(t.events):
        return Verdict.violated("not-a-permutation")
    for i in locs.pi:
        if outputs_at(t.events, i) != outputs_at(t2.events, i):
            return Verdict.violated(f"same-location-output-order-{i}")
    # Canonical bijection: k-th occurrence of a value maps to k-th occurrence.
    pos2: dict = {}
    seen: Counter = Counter()
    occ2: dict = {}
    for p, e in enumerate(t2.events):
        occ2.setdefault(e, []).append(p)
    for p, e in enumerate(t.events):
        pos2[p] = occ2[e][seen[e]]
        seen[e] += 1
    crash_positions = [p for p, e in enumerate(t.events) if is_crash(e)]
    out_positions = [p for p, e in enumerate(t.events) if not is_crash(e)]
    for cp in crash_positions:
        for op in out_positions:
            if cp < op and pos2[cp] > pos2[op]:
                return Verdict.violated("crash-output-order", index=op + 1)
    safety = is_valid_sequence(AfdTrace(t2.events, complete=False), locs)
    if safety.is_violated:
        return safety
    return Verdict.holds()


def is_constrained_reordering(t2: AfdTrace, t: AfdTrace, locs: Locations) -> bool:
    return constrained_reordering_verdict(t2, t, locs).status == HOLDS


def fd_output(i: int, leader: int) -> Action:
    """The leader-election output naming `leader`, occurring at i."""
    return Action("fd", i, (leader,))


def omega_automaton(locs: Locations) -> Automaton:
    """Leader election: while i is uncrashed, its task outputs the minimum
    uncrashed location; crash inputs grow the crashset monotonically."""
    pi = locs.pi
    pi_set = set(pi)

    def classify(action: Action):
        if action.name == "crash" and action.loc in pi_set:
            return INPUT
        if action.name == "fd" and action.loc in pi_set:
            return OUTPUT
        return None

    def step(crashset: frozenset, action: Action):
        if action.name == "crash":
            return crashset | {action.loc}
        return crashset

    def leader_task(i: int):
        def enabled(crashset: frozenset):
            if i in crashset:
                return None
            alive = [j for j in pi if j not in crashset]
            return fd_output(i, min(alive))
        return enabled

    tasks = tuple(Task(("fdtask", i), leader_task(i)) for i in pi)
    return Automaton(("fd",), frozenset(), classify, step, tasks)


def _named_leader(e: Action) -> Optional[int]:
    return e.payload[0] if e.payload else None


def check_T_omega_f(t: AfdTrace, f: int, locs: Locations) -> Verdict:
    """Membership verdict for the f-bounded leader election detector.

    Validity is required on every trace.  With more than f faulty locations
    the trace is otherwise unconstrained.  With at most f, a complete trace
    must end in a stable block: from the last output (at a live location)
    naming a different leader to the end, outputs at live locations all name
    one crash-free l and every live location appears in the block."""
    validity = is_valid_sequence(t, locs)
    if validity.is_violated:
        return validity
    faulty = faulty_set(t.events)
    if len(faulty) > f:
        return validity
    if not t.complete:
        return Verdict.undetermined("stabilization-pending")
    live = [i for i in locs.pi if i not in faulty]
    seq = [e for e in t.events if not is_crash(e) and e.loc in live]
    if not live:
        return Verdict.holds()
    if not seq:
        return Verdict.violated("no-live-outputs")
    leader = _named_leader(seq[-1])
    if leader not in live:
        return Verdict.violated("final-leader-not-live")
    block_start = len(seq)
    for k in range(len(seq) - 1, -1, -1):
        if _named_leader(seq[k]) != leader:
            break
        block_start = k
    block = seq[block_start:]
    covered = {e.loc for e in block}
    if covered != set(live):
        return Verdict.violated("stable-suffix-missing-live-location")
    return Verdict.holds()


# --- trace serialization: one event per line ---------------------------------

def format_trace(events: Iterable[Action]) -> str:
    lines = []
    for e in events:
        if is_crash(e):
            lines.append(f"crash {e.loc}")
        else:
            k = e.payload[0] if e.payload else "-"
            lines.append(f"out {e.loc} {k} {e.name}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_trace(text: str) -> tuple:
    events = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "crash" and len(parts) == 2:
                events.append(Action("crash", int(parts[1])))
            elif parts[0] == "out" and len(parts) == 4:
                payload = () if parts[2] == "-" else (int(parts[2]),)
                events.append(Action(parts[3], int(parts[1]), payload))
            else:
                raise ValueError(line)
        except ValueError as exc:
            raise TraceFormatError(f"line {ln}: cannot parse {raw!r}") from exc
    return tuple(events)
