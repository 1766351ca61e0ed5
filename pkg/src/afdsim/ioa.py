"""Task-deterministic I/O automata: composition, fair scheduling, executions.

Automata are value-oriented: states are immutable, transitions return fresh
states, and a run is a pure function of (system, policy, externals).  Tasks
are modelled as functions returning the at-most-one enabled action in a
state, which bakes task determinism into the representation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence

from .errors import CompositionError, ConfigError, ModelError, StepError

INPUT = "input"
OUTPUT = "output"
INTERNAL = "internal"

ROUND_ROBIN = "round-robin"
SEEDED_RANDOM = "random"


@dataclass(frozen=True, slots=True)
class Action:
    """A named action occurring at a location, with a structured payload.

    Two automata interact on an action when they build equal Action values;
    the classification (input/output/internal) is per automaton, not part of
    the action's identity.
    """

    name: str
    loc: Optional[int] = None
    payload: tuple = ()

    def __str__(self) -> str:
        args = ",".join(str(p) for p in self.payload)
        base = f"{self.name}({args})" if args else self.name
        return f"{base}_{self.loc}" if self.loc is not None else base


@dataclass(frozen=True)
class Task:
    """A schedulable task: returns the single enabled action, or None."""

    tid: tuple
    enabled: Callable[[Any], Optional[Action]]


class Automaton:
    """A task-deterministic I/O automaton with a unique start state.

    `classify(action)` returns INPUT/OUTPUT/INTERNAL or None when the action
    is not in the signature.  `step(state, action)` must be total for inputs
    and is only invoked on locally controlled actions that are enabled.
    """

    def __init__(self, name: tuple, initial_state, classify, step,
                 tasks: Sequence[Task] = ()):
        self.name = name
        self.initial_state = initial_state
        self.classify = classify
        self.step = step
        self.tasks = tuple(tasks)

    def __repr__(self) -> str:
        return f"Automaton({self.name})"


def _empty_classify(action: Action):
    return None


def _empty_step(state, action: Action):
    return state


def empty_automaton(name: tuple = ("empty",)) -> Automaton:
    """The identity of composition: one state, no actions, no tasks."""
    return Automaton(name, (), _empty_classify, _empty_step, ())


class System(Automaton):
    """A composition of automata; itself an automaton over tuple states.

    Components are kept addressable by name so analyses (projection,
    similarity relations) can inspect per-component state.
    """

    def __init__(self, parts: Sequence[Automaton], name: tuple = ("system",),
                 require_input_match: tuple = ()):
        self.parts = tuple(parts)
        self.part_index = {p.name: k for k, p in enumerate(self.parts)}
        if len(self.part_index) != len(self.parts):
            raise CompositionError("duplicate component names in composition")
        self._require_input_match = tuple(require_input_match)
        tasks = []
        for k, part in enumerate(self.parts):
            for task in part.tasks:
                tasks.append(Task(task.tid, _part_enabled(k, task)))
        tids = [t.tid for t in tasks]
        if len(set(tids)) != len(tids):
            raise CompositionError("duplicate task ids in composition")
        initial = tuple(p.initial_state for p in self.parts)
        super().__init__(name, initial, self._classify, self._step, tasks)

    def _owners(self, action: Action):
        owners = []
        takers = []
        for part in self.parts:
            kind = part.classify(action)
            if kind in (OUTPUT, INTERNAL):
                owners.append((part, kind))
            elif kind == INPUT:
                takers.append(part)
        return owners, takers

    def _classify(self, action: Action):
        owners, takers = self._owners(action)
        if len(owners) > 1:
            names = ", ".join(str(p.name) for p, _ in owners)
            raise CompositionError(
                f"action {action} is an output of more than one component: {names}")
        if owners:
            return owners[0][1]
        if takers:
            return INPUT
        return None

    def _step(self, state: tuple, action: Action):
        kind = self._classify(action)
        if kind is None:
            raise StepError(f"action {action} is not in the composed signature")
        if action.name in self._require_input_match:
            _, takers = self._owners(action)
            if not takers:
                raise StepError(
                    f"action {action} has no matching input in the composition")
        out = list(state)
        for k, part in enumerate(self.parts):
            if part.classify(action) is not None:
                out[k] = part.step(state[k], action)
        return tuple(out)

    def component_state(self, state: tuple, name: tuple):
        return state[self.part_index[name]]

    def task_component(self, tid: tuple) -> Automaton:
        for part in self.parts:
            for task in part.tasks:
                if task.tid == tid:
                    return part
        raise KeyError(tid)


def _part_enabled(index: int, task: Task):
    def enabled(state):
        return task.enabled(state[index])
    return enabled


def compose(parts: Sequence[Automaton], name: tuple = ("system",),
            require_input_match: tuple = ()) -> Automaton:
    """Compose automata by matching equal actions; [] gives the empty automaton.

    Output-action uniqueness is enforced at dispatch time: performing an
    action owned by two components raises CompositionError naming both.
    """
    if not parts:
        return empty_automaton(name)
    return System(parts, name, require_input_match)


@dataclass(frozen=True)
class Execution:
    """Alternating states and events; len(events) == len(states) - 1."""

    states: tuple
    events: tuple

    def __post_init__(self):
        if len(self.states) != len(self.events) + 1:
            raise ModelError("execution shape: need one more state than events")

    @property
    def is_null(self) -> bool:
        return not self.events

    @property
    def final_state(self):
        return self.states[-1]


def apply_action(system: Automaton, state, action: Action):
    """One step of the (possibly composed) automaton."""
    return system.step(state, action)


def replay(system: Automaton, events: Iterable[Action]) -> Execution:
    """Rebuild an execution from the initial state; raises if any step is illegal."""
    states = [system.initial_state]
    evs = []
    for action in events:
        states.append(system.step(states[-1], action))
        evs.append(action)
    return Execution(tuple(states), tuple(evs))


def project(events_or_execution, selector) -> tuple:
    """Subsequence of events drawn from a set or predicate of actions."""
    if isinstance(events_or_execution, Execution):
        events = events_or_execution.events
    else:
        events = tuple(events_or_execution)
    if callable(selector):
        return tuple(e for e in events if selector(e))
    sel = set(selector)
    return tuple(e for e in events if e in sel)


def project_component(system: System, execution: Execution, name: tuple) -> Execution:
    """Projection of a composed execution onto one component (paper-style)."""
    part = system.parts[system.part_index[name]]
    idx = system.part_index[name]
    states = [execution.states[0][idx]]
    events = []
    for k, action in enumerate(execution.events):
        if part.classify(action) is not None:
            events.append(action)
            states.append(execution.states[k + 1][idx])
    return Execution(tuple(states), tuple(events))


@dataclass(frozen=True)
class SchedulerPolicy:
    """Deterministic fair scheduling: round-robin or seeded random with a
    fairness window (every task gets a turn at least once per window)."""

    mode: str = ROUND_ROBIN
    seed: int = 0
    horizon: int = 0
    window: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (ROUND_ROBIN, SEEDED_RANDOM):
            raise ConfigError(f"unknown scheduler mode: {self.mode}")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")


@dataclass
class RunLog:
    """Bookkeeping for a fair run; skips live here, not in the Execution."""

    skips: list = field(default_factory=list)
    scheduled: dict = field(default_factory=dict)
    state_index_after_turn: list = field(default_factory=list)


def run_fair(system: Automaton, policy: SchedulerPolicy,
             externals: Sequence[tuple] = (), log: Optional[RunLog] = None) -> Execution:
    """Run the system to the horizon under the policy, interleaving external
    events at their turn indices.  Pure in (system, policy, externals).

    A scheduled task with nothing enabled is a skip: logged, not recorded in
    the execution.  Horizon 0 yields the null execution.
    """
    tasks = system.tasks
    horizon = policy.horizon
    by_turn: dict = {}
    for turn, action in externals:
        if not (0 <= turn < max(horizon, 1)) or turn >= horizon:
            raise ConfigError(
                f"external event {action} at turn {turn} outside horizon {horizon}")
        by_turn.setdefault(turn, []).append(action)

    states = [system.initial_state]
    events: list = []
    if log is None:
        log = RunLog()
    log.scheduled = {t.tid: 0 for t in tasks}

    order = _schedule(tasks, policy)
    for turn in range(horizon):
        for action in by_turn.get(turn, ()):
            states.append(system.step(states[-1], action))
            events.append(action)
        if tasks:
            task = order[turn]
            log.scheduled[task.tid] += 1
            action = task.enabled(states[-1])
            if action is None:
                log.skips.append((turn, task.tid))
            else:
                kind = system.classify(action)
                if kind not in (OUTPUT, INTERNAL):
                    raise ModelError(
                        f"task {task.tid} offered non-locally-controlled action {action}")
                states.append(system.step(states[-1], action))
                events.append(action)
        log.state_index_after_turn.append(len(states) - 1)
    return Execution(tuple(states), tuple(events))


def _schedule(tasks: Sequence[Task], policy: SchedulerPolicy) -> list:
    """Precompute the task for every turn; enforces the fairness window."""
    n = len(tasks)
    if n == 0:
        return []
    if policy.mode == ROUND_ROBIN:
        return [tasks[t % n] for t in range(policy.horizon)]
    window = policy.window if policy.window is not None else 4 * n
    if window < n:
        raise ConfigError(f"fairness window {window} smaller than task count {n}")
    rng = random.Random(policy.seed)
    order = []
    pending: list = []
    for turn in range(policy.horizon):
        pos = turn % window
        if pos == 0:
            pending = list(range(n))
        remaining_turns = window - pos
        if len(pending) >= remaining_turns:
            pick = pending[rng.randrange(len(pending))]
        else:
            pick = rng.randrange(n)
        if pick in pending:
            pending.remove(pick)
        order.append(tasks[pick])
    return order
