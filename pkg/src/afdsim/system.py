"""Concrete system components: locations, FIFO channels, crash automaton,
process contracts, and assembly of a full message-passing system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

from .errors import AssemblyError, ConfigError, StepError
from .ioa import INPUT, OUTPUT, Action, Automaton, System, Task, compose


@dataclass(frozen=True)
class Locations:
    """The location set {1..n} with its total order, plus the crash budget f."""

    n: int
    f: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need at least one location")
        if not 0 <= self.f < self.n:
            raise ConfigError(f"crash tolerance f={self.f} must satisfy 0 <= f < n={self.n}")

    @property
    def pi(self) -> tuple:
        return tuple(range(1, self.n + 1))

    def others(self, i: int) -> tuple:
        return tuple(j for j in self.pi if j != i)

    def cyclic_others(self, i: int) -> tuple:
        """All other locations starting after i and wrapping around."""
        return tuple(((i - 1 + k) % self.n) + 1 for k in range(1, self.n))


def crash_action(i: int) -> Action:
    return Action("crash", i)


def send_action(i: int, message, j: int) -> Action:
    """send(m, j)_i -- occurs at i."""
    return Action("send", i, (message, j))


def receive_action(j: int, message, i: int) -> Action:
    """receive(m, i)_j -- occurs at j, message came from i."""
    return Action("recv", j, (message, i))


def channel_automaton(i: int, j: int) -> Automaton:
    """Reliable FIFO channel from i to j; single task delivering the head."""

    def classify(action: Action):
        if action.name == "send" and action.loc == i and action.payload[1] == j:
            return INPUT
        if action.name == "recv" and action.loc == j and action.payload[1] == i:
            return OUTPUT
        return None

    def step(queue: tuple, action: Action):
        if action.name == "send":
            return queue + (action.payload[0],)
        if not queue or queue[0] != action.payload[0]:
            raise StepError(f"receive of {action} with queue head mismatch")
        return queue[1:]

    def head_delivery(queue: tuple) -> Optional[Action]:
        if queue:
            return receive_action(j, queue[0], i)
        return None

    name = ("chan", i, j)
    return Automaton(name, (), classify, step, (Task(name, head_delivery),))


def crash_automaton(locs: Locations) -> Automaton:
    """Outputs crash_i; has no tasks of its own.  Crash events are injected
    as externals at fixed turns, which keeps any crash pattern expressible
    and scenarios reproducible.  Repeated crashes are legal inputs."""

    pi = set(locs.pi)

    def classify(action: Action):
        if action.name == "crash" and action.loc in pi:
            return OUTPUT
        return None

    def step(crashed: frozenset, action: Action):
        return crashed | {action.loc}

    return Automaton(("crash",), frozenset(), classify, step, ())


@dataclass(frozen=True)
class ProcessContract:
    """A deterministic process automaton pinned to its location.

    The automaton must have exactly one task, all actions at the location,
    and must disable every locally controlled action once crash_i arrives.
    """

    automaton: Automaton
    location: int

    def __post_init__(self):
        if len(self.automaton.tasks) != 1:
            raise AssemblyError(
                f"process at {self.location} must have exactly one task, "
                f"has {len(self.automaton.tasks)}")


def build_system(algorithm: Dict[int, ProcessContract],
                 environment_parts: Sequence[Automaton],
                 locs: Locations,
                 extras: Sequence[Automaton] = (),
                 with_crash: bool = True,
                 name: tuple = ("system",)) -> System:
    """Compose processes, the n(n-1) channels, optionally the crash automaton,
    per-location environment parts, and any extra components (e.g. an AFD
    automaton).  Sends with no matching channel fail at dispatch with an
    assembly-style error."""
    missing = [i for i in locs.pi if i not in algorithm]
    if missing:
        raise AssemblyError(f"no process automaton for locations {missing}")
    for i, contract in algorithm.items():
        if contract.location != i:
            raise AssemblyError(
                f"process mapped to {i} declares location {contract.location}")
    parts = [algorithm[i].automaton for i in locs.pi]
    for i in locs.pi:
        for j in locs.others(i):
            parts.append(channel_automaton(i, j))
    if with_crash:
        parts.append(crash_automaton(locs))
    parts.extend(environment_parts)
    parts.extend(extras)
    return System(parts, name, require_input_match=("send",))


def noop_process(i: int, locs: Locations) -> ProcessContract:
    """A do-nothing process: accepts everything at i, never acts."""

    def classify(action: Action):
        if action.loc == i and action.name in ("crash", "recv", "fd", "propose", "decide"):
            return INPUT
        return None

    def step(state, action: Action):
        if action.name == "crash":
            return "crashed"
        return state

    def never(state) -> Optional[Action]:
        return None

    return ProcessContract(
        Automaton(("proc", i), "idle", classify, step, (Task(("proc", i), never),)), i)


def crash_externals(schedule: Sequence[tuple]) -> tuple:
    """Turn a CrashSchedule [(turn, location), ...] into external events."""
    return tuple((turn, crash_action(loc)) for turn, loc in schedule)
