"""Crash-tolerant binary consensus: the trace checker, the proposing
environment, and a rotating-coordinator solver driven by leader outputs.

Each round's coordinator gathers timestamped estimates from a majority,
picks the freshest (ties broken by arrival order, so the chosen value
genuinely races between the coordinator's own proposal and estimates in
flight), adopts it, and broadcasts it.  A receiver adopting the round value
knows the coordinator adopted it first, so with a majority of two (n <= 3)
it decides on the spot; coordinators decide on a majority of adoption acks.
Majority intersection across rounds preserves agreement under coordinator
crashes.  Rounds advance when the latest leader output names someone other
than the current coordinator, so detector values enter only through leader
comparisons.  End-to-end runs assume f < n/2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

from .afd import UNDETERMINED, HOLDS, VIOLATED, Verdict, faulty_set, is_crash
from .ioa import Action, Automaton, Task, INPUT, OUTPUT
from .system import Locations, ProcessContract, send_action


def propose_action(i: int, v: int) -> Action:
    return Action("propose", i, (v,))


def decide_action(i: int, v: int) -> Action:
    return Action("decide", i, (v,))


# --- trace checker ------------------------------------------------------------

@dataclass(frozen=True)
class ConsensusVerdict:
    env_well_formed: Verdict
    f_crash_limited: Verdict
    crash_validity: Verdict
    agreement: Verdict
    validity: Verdict
    termination: Verdict
    overall: Verdict

    def lines(self) -> list:
        return [
            ("env-well-formedness", self.env_well_formed),
            ("f-crash-limitation", self.f_crash_limited),
            ("crash-validity", self.crash_validity),
            ("agreement", self.agreement),
            ("validity", self.validity),
            ("termination", self.termination),
            ("overall", self.overall),
        ]


def check_consensus_trace(events: Sequence[Action], f: int, locs: Locations,
                          complete: bool = False) -> ConsensusVerdict:
    """Per-property verdicts plus overall membership.

    The overall verdict holds whenever a hypothesis property (environment
    well-formedness, f-crash limitation) fails, or all four conclusion
    properties hold.  Safety clauses decide on prefixes; the one-propose-
    per-live-location clause and termination wait for complete traces."""
    faulty = faulty_set(events)
    live = [i for i in locs.pi if i not in faulty]

    env = Verdict.holds()
    crashed: set = set()
    proposed: Dict[int, int] = {}
    for idx, e in enumerate(events):
        if is_crash(e):
            crashed.add(e.loc)
        elif e.name == "propose":
            if e.loc in proposed:
                env = Verdict.violated("second-propose", index=idx + 1)
                break
            if e.loc in crashed:
                env = Verdict.violated("propose-after-crash", index=idx + 1)
                break
            proposed[e.loc] = e.payload[0]
    if env.status == HOLDS:
        missing = [i for i in live if i not in proposed]
        if missing:
            env = (Verdict.violated(f"live-location-never-proposes-{missing[0]}")
                   if complete else Verdict.undetermined("proposals-pending"))

    f_crash = (Verdict.holds() if len(faulty) <= f
               else Verdict.violated(f"crashes-{len(faulty)}-exceed-f-{f}"))

    crash_validity = Verdict.holds()
    crashed = set()
    for idx, e in enumerate(events):
        if is_crash(e):
            crashed.add(e.loc)
        elif e.name == "decide" and e.loc in crashed:
            crash_validity = Verdict.violated("decide-after-crash", index=idx + 1)
            break

    decisions = [(idx, e) for idx, e in enumerate(events) if e.name == "decide"]
    agreement = Verdict.holds()
    values = {e.payload[0] for _, e in decisions}
    if len(values) > 1:
        agreement = Verdict.violated("two-decision-values",
                                     index=decisions[-1][0] + 1)

    validity = Verdict.holds()
    propose_values = {e.payload[0] for e in events if e.name == "propose"}
    for idx, e in decisions:
        if e.payload[0] not in propose_values:
            validity = Verdict.violated("decision-not-proposed", index=idx + 1)
            break

    termination = Verdict.holds()
    per_loc: Dict[int, int] = {}
    for idx, e in decisions:
        per_loc[e.loc] = per_loc.get(e.loc, 0) + 1
        if per_loc[e.loc] > 1:
            termination = Verdict.violated("second-decide", index=idx + 1)
            break
    if termination.status == HOLDS:
        undecided = [i for i in live if per_loc.get(i, 0) == 0]
        if undecided:
            termination = (Verdict.violated(f"live-location-never-decides-{undecided[0]}")
                           if complete else Verdict.undetermined("decisions-pending"))

    hypothesis = [env, f_crash]
    conclusion = [crash_validity, agreement, validity, termination]
    if any(v.is_violated for v in hypothesis):
        overall = Verdict.holds()
    elif any(v.is_violated for v in conclusion):
        overall = next(v for v in conclusion if v.is_violated)
    elif complete:
        overall = Verdict.holds()
    elif any(v.status == UNDETERMINED for v in hypothesis + conclusion):
        overall = Verdict.undetermined("prefix")
    else:
        overall = Verdict.holds()
    return ConsensusVerdict(env, f_crash, crash_validity, agreement,
                            validity, termination, overall)


# --- environment --------------------------------------------------------------

def env_automaton_parts(locs: Locations,
                        pinned: Optional[Dict[int, int]] = None) -> list:
    """Per-location proposing environment: two one-action tasks that any
    propose or crash permanently disables.  `pinned` restricts location i to
    proposing one fixed value (scenario control; the signature is unchanged)."""
    pinned = pinned or {}
    parts = []
    for i in locs.pi:
        parts.append(_env_part(i, pinned.get(i)))
    return parts


def _env_part(i: int, pin: Optional[int]) -> Automaton:
    def classify(action: Action):
        if action.loc != i:
            return None
        if action.name in ("crash", "decide"):
            return INPUT
        if action.name == "propose":
            return OUTPUT
        return None

    def step(stop: bool, action: Action):
        if action.name in ("crash", "propose"):
            return True
        return stop

    def propose_task(v: int):
        def enabled(stop: bool):
            if stop or (pin is not None and pin != v):
                return None
            return propose_action(i, v)
        return enabled

    return Automaton(("env", i), False, classify, step,
                     (Task(("env", i, 0), propose_task(0)),
                      Task(("env", i, 1), propose_task(1))))


# --- rotating-coordinator solver -----------------------------------------------

def _coord(r: int, n: int) -> int:
    return (r % n) + 1


def _majority(n: int) -> int:
    return (n + 2) // 2


@dataclass(frozen=True)
class CtState:
    est: Optional[int] = None
    ts: int = -1
    round: int = 0
    fd: Optional[int] = None
    decided: Optional[int] = None
    emitted: bool = False
    sendq: tuple = ()
    est_sent: frozenset = frozenset()
    ests: tuple = ()        # ((round, sender, est, ts), ...)
    cord_sent: tuple = ()   # ((round, value), ...)
    acks: tuple = ()        # ((round, frozenset of ackers), ...)
    faulty: bool = False


def _cord_value(s: CtState, r: int) -> Optional[int]:
    for rr, v in s.cord_sent:
        if rr == r:
            return v
    return None


def _ack_set(s: CtState, r: int) -> frozenset:
    for rr, who in s.acks:
        if rr == r:
            return who
    return frozenset()


def _with_ack(s: CtState, r: int, who: int) -> CtState:
    rest = tuple((rr, ws) for rr, ws in s.acks if rr != r)
    return replace(s, acks=rest + ((r, _ack_set(s, r) | {who}),))


def ct_process(i: int, locs: Locations) -> ProcessContract:
    """The consensus process automaton at location i (single task)."""
    n = locs.n
    others = locs.cyclic_others(i)
    maj = _majority(n)

    def classify(action: Action):
        if action.name == "crash" and action.loc == i:
            return INPUT
        if action.name == "fd" and action.loc == i:
            return INPUT
        if action.name == "propose" and action.loc == i:
            return INPUT
        if action.name == "recv" and action.loc == i:
            return INPUT
        if action.name == "send" and action.loc == i:
            return OUTPUT
        if action.name == "decide" and action.loc == i:
            return OUTPUT
        return None

    def queue(s: CtState, msg, dest: int) -> CtState:
        return replace(s, sendq=s.sendq + ((msg, dest),))

    def broadcast(s: CtState, msg) -> CtState:
        for j in others:
            s = queue(s, msg, j)
        return s

    def normalize(s: CtState) -> CtState:
        if s.faulty or s.decided is not None or s.est is None:
            return s
        r = s.round
        c = _coord(r, n)
        if r not in s.est_sent:
            s = replace(s, est_sent=s.est_sent | {r})
            if c == i:
                s = replace(s, ests=s.ests + ((r, i, s.est, s.ts),))
            else:
                s = queue(s, ("est", r, s.est, s.ts), c)
        # Coordinator duties for every round this process coordinates and has
        # heard about.  Serving a round older than the own adoption timestamp
        # would break the majority-lock argument, so those are skipped.
        rounds = sorted({rr for rr, *_ in s.ests if _coord(rr, n) == i})
        for rr in rounds:
            if _cord_value(s, rr) is not None or s.ts > rr:
                continue
            if not any(rr2 == rr and sender == i for rr2, sender, _, _ in s.ests):
                s = replace(s, ests=s.ests + ((rr, i, s.est, s.ts),))
            entries = []
            senders = set()
            for rr2, sender, e, t in s.ests:
                if rr2 == rr and sender not in senders:
                    senders.add(sender)
                    entries.append((e, t))
            if len(entries) < maj:
                continue
            best_ts = max(t for _, t in entries)
            v = next(e for e, t in entries if t == best_ts)
            s = replace(s, cord_sent=s.cord_sent + ((rr, v),),
                        est=v, ts=rr)
            s = broadcast(s, ("cord", rr, v))
            s = _with_ack(s, rr, i)
        # Decide once a round this process coordinates reaches a majority.
        for rr, who in s.acks:
            if s.decided is None and len(who) >= maj:
                v = _cord_value(s, rr)
                if v is not None:
                    s = replace(s, decided=v, est=v)
                    s = broadcast(s, ("dec", v))
        return s

    def step(s: CtState, action: Action) -> CtState:
        if action.name == "crash":
            return replace(s, faulty=True)
        if s.faulty:
            return s
        if action.name == "propose":
            if s.est is None:
                s = replace(s, est=action.payload[0])
            return normalize(s)
        if action.name == "fd":
            leader = action.payload[0]
            s = replace(s, fd=leader)
            if s.decided is None and leader != _coord(s.round, n):
                s = replace(s, round=s.round + 1)
            return normalize(s)
        if action.name == "recv":
            msg, sender = action.payload
            kind = msg[0]
            if kind == "est":
                _, r, e, t = msg
                if _coord(r, n) == i:
                    s = replace(s, ests=s.ests + ((r, sender, e, t),))
                return normalize(s)
            if kind == "cord":
                _, r, v = msg
                if s.decided is None and r >= s.round:
                    s = replace(s, est=v, ts=r, round=r,
                                est_sent=s.est_sent | {r})
                    s = queue(s, ("ack", r), sender)
                    if maj == 2:
                        # Coordinator adopted at broadcast; with this adoption
                        # the value is locked by a majority.
                        s = replace(s, decided=v)
                        s = broadcast(s, ("dec", v))
                return normalize(s)
            if kind == "ack":
                _, r = msg
                if _coord(r, n) == i:
                    s = _with_ack(s, r, sender)
                return normalize(s)
            if kind == "dec":
                _, v = msg
                if s.decided is None:
                    s = replace(s, decided=v, est=v)
                return s
            return s
        if action.name in ("send", "decide"):
            if action.name == "decide":
                return replace(s, emitted=True)
            return replace(s, sendq=s.sendq[1:])
        return s

    def enabled(s: CtState) -> Optional[Action]:
        if s.faulty:
            return None
        if s.decided is not None and not s.emitted:
            return decide_action(i, s.decided)
        if s.sendq:
            msg, dest = s.sendq[0]
            return send_action(i, msg, dest)
        return None

    return ProcessContract(
        Automaton(("proc", i), CtState(), classify, step,
                  (Task(("proc", i), enabled),)), i)


def ct_algorithm(locs: Locations) -> Dict[int, ProcessContract]:
    """The full distributed algorithm: one process per location."""
    return {i: ct_process(i, locs) for i in locs.pi}
