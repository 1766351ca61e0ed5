"""Lazy execution trees over a system and a finite observation.

A tree node carries the path of labelled, tagged edges from the root, the
latest observation vertex (or None for the null vertex), and the full system
configuration.  Nodes are generated on demand; the per-(configuration,
vertex) expansion is cached, since nodes with equal tags have identical
child spectra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .ioa import Action, Execution, System
from .observation import Observation, Vertex
from .system import Locations

PROC, CHAN, ENV, FD = "proc", "chan", "env", "fd"


def label_location(label: tuple) -> int:
    """The location at which a label's actions occur; Chan_{i,j} delivers at j."""
    kind = label[0]
    if kind == CHAN:
        return label[2]
    return label[1]


@dataclass(frozen=True, slots=True)
class TreeEdge:
    label: tuple
    vertex_tag: Optional[Vertex]
    action_tag: Optional[Action]

    @property
    def is_bot(self) -> bool:
        return self.action_tag is None


@dataclass(frozen=True)
class TreeNode:
    path: Tuple[TreeEdge, ...]
    vertex_tag: Optional[Vertex]
    config: tuple
    depth: int

    @property
    def key(self) -> tuple:
        """Nodes with equal keys have pairwise-matching child spectra."""
        return (self.config, self.vertex_tag)

    @property
    def is_non_bot(self) -> bool:
        return all(not e.is_bot for e in self.path)


class TreeContext:
    """Expansion rules for the tree of (system, observation)."""

    def __init__(self, system: System, g: Observation, locs: Locations):
        self.system = system
        self.g = g
        self.locs = locs
        self.height = len(g)
        self.task_labels = tuple(t.tid for t in system.tasks)
        self.fd_labels = tuple((FD, i) for i in locs.pi)
        self._tasks_by_label = {t.tid: t for t in system.tasks}
        self._expand_cache: Dict[tuple, tuple] = {}
        self.cache_misses = 0
        self.cache_hits = 0

    def root(self) -> TreeNode:
        return TreeNode((), None, self.system.initial_state, 0)

    def _i_condition(self, vtag: Optional[Vertex], i: int) -> bool:
        """Whether location-i process/environment actions may occur: the
        observation must still promise an output at i after the current tag."""
        if vtag is None:
            return bool(self.g.at_location(i))
        return bool(self.g.successors_at(vtag, i))

    def edges_of(self, config: tuple, vtag: Optional[Vertex]) -> tuple:
        """All outgoing (TreeEdge, child_config, child_vtag) triples for a
        node with these tags (memoized on the tags)."""
        key = (config, vtag)
        cached = self._expand_cache.get(key)
        if cached is not None:
            self.cache_hits += 1
            return cached
        self.cache_misses += 1
        out: List[tuple] = []
        for label in self.task_labels:
            task = self._tasks_by_label[label]
            action = task.enabled(config)
            if action is not None and label[0] in (PROC, ENV):
                if not self._i_condition(vtag, label[1]):
                    action = None
            if action is None:
                out.append((TreeEdge(label, vtag, None), config, vtag))
            else:
                out.append((TreeEdge(label, vtag, action),
                            self.system.step(config, action), vtag))
        for label in self.fd_labels:
            i = label[1]
            if vtag is None:
                succs = self.g.at_location(i)
            else:
                succs = self.g.successors_at(vtag, i)
            if not succs:
                out.append((TreeEdge(label, vtag, None), config, vtag))
            else:
                for v in succs:
                    out.append((TreeEdge(label, v, v.action),
                                self.system.step(config, v.action), v))
        result = tuple(out)
        self._expand_cache[key] = result
        return result

    def expand(self, node: TreeNode, non_bot_only: bool = False) -> list:
        """Children of an internal node; a node at depth |V| is a leaf."""
        if node.depth >= self.height:
            return []
        children = []
        for edge, child_config, child_vtag in self.edges_of(node.config, node.vertex_tag):
            if non_bot_only and edge.is_bot:
                continue
            children.append((edge, TreeNode(node.path + (edge,), child_vtag,
                                            child_config, node.depth + 1)))
        return children

    def exe(self, node: TreeNode) -> Execution:
        """The finite execution spelled by the non-bot action tags on the path."""
        states = [self.system.initial_state]
        events = []
        for edge in node.path:
            if edge.action_tag is not None:
                events.append(edge.action_tag)
                states.append(self.system.step(states[-1], edge.action_tag))
        return Execution(tuple(states), tuple(events))


def similar_modulo(system: System, a: TreeNode, b: TreeNode, i: int,
                   locs: Locations) -> bool:
    """a is similar-modulo-i to b: equal vertex tags; all states equal except
    at i; messages in transit from i in a form a prefix of those in b."""
    if a.vertex_tag != b.vertex_tag:
        return False
    ca, cb = a.config, b.config
    for j in locs.pi:
        if j == i:
            continue
        for name in ((PROC, j), (ENV, j)):
            if name in system.part_index:
                if system.component_state(ca, name) != system.component_state(cb, name):
                    return False
    for j in locs.pi:
        for k in locs.pi:
            if j == k or i in (j, k):
                continue
            name = (CHAN, j, k)
            if system.component_state(ca, name) != system.component_state(cb, name):
                return False
    for j in locs.others(i):
        name = (CHAN, i, j)
        qa = system.component_state(ca, name)
        qb = system.component_state(cb, name)
        if qa != qb[:len(qa)]:
            return False
    return True


def is_post_crash(node: TreeNode, i: int, g: Observation) -> bool:
    """No i-output can ever follow this node's tag in the observation."""
    if node.vertex_tag is None:
        return not g.at_location(i)
    return not g.successors_at(node.vertex_tag, i)


def decide_values_in(events) -> frozenset:
    return frozenset(e.payload[0] for e in events if e.name == "decide")
