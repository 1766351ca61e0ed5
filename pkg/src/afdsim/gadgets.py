"""Valence classification, decision gadgets, and the metric ordering that
picks the first gadget of an execution tree.

Enumeration walks only non-bot paths (every node has a non-bot twin with the
same execution, so no decision value is lost), memoizes reachable decision
values on (configuration, vertex tag, remaining depth), and ranks nodes by
the lexicographic metric (depth + vertex index, edge metric sequence).
"""

from __future__ import annotations

import hashlib
from bisect import bisect_left
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from .errors import CapacityError, InternalInvariantError
from .observation import Vertex
from .tree import CHAN, ENV, FD, PROC, TreeContext, TreeEdge, TreeNode, label_location

BIVALENT = "bivalent"
ZERO_VALENT = "zero_valent"
ONE_VALENT = "one_valent"
UNDECIDED = "undecided"


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def label_metric(label: tuple, n: int) -> int:
    """Bijection from the n^2 + 3n labels onto [1, n^2 + 3n]: processes,
    then environment tasks, then channels in (i, j) order with the diagonal
    compressed, then the per-location detector labels."""
    kind = label[0]
    if kind == PROC:
        return label[1]
    if kind == ENV:
        i, x = label[1], label[2]
        return n + 2 * i - 1 + x
    if kind == CHAN:
        i, j = label[1], label[2]
        adj = j if j < i else j - 1
        return 3 * n + (n - 1) * (i - 1) + adj
    if kind == FD:
        return n * n + 2 * n + label[1]
    raise ValueError(f"not a tree label: {label}")


def vertex_metric(v: Optional[Vertex], n: int) -> int:
    """Null vertex maps to 0; vertex (i, k, e) maps to k*n + i."""
    if v is None:
        return 0
    return v.index * n + v.loc


def edge_metric(edge: TreeEdge, n: int) -> int:
    """(vertex metric, label metric) packed into one integer preserving the
    lexicographic order: label metrics lie in [1, n^2 + 3n]."""
    span = n * n + 3 * n + 1
    return vertex_metric(edge.vertex_tag, n) * span + label_metric(edge.label, n)


def node_metric(path: Tuple[TreeEdge, ...], vertex_tag: Optional[Vertex],
                n: int) -> tuple:
    k = vertex_tag.index if vertex_tag is not None else 0
    return (len(path) + k,) + tuple(edge_metric(e, n) for e in path)


@dataclass(frozen=True)
class Gadget:
    kind: str  # "fork" | "hook"
    node: TreeNode
    l_label: tuple
    r_label: Optional[tuple]
    e_l: TreeEdge
    e_other: TreeEdge  # fork: the second l-edge; hook: E^rl
    e_r: Optional[TreeEdge]
    critical: int
    child_a_metric: tuple
    child_b_metric: tuple

    def path_digest(self) -> str:
        text = ";".join(
            f"{e.label}|{e.vertex_tag}|{e.action_tag}" for e in self.node.path)
        return hashlib.sha1(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class RankedGadget:
    gadget: Gadget
    metric: int
    rank_n: int
    rank_a: int
    rank_b: int

    def report_line(self) -> str:
        g = self.gadget
        return (f"gadget {g.kind} metric={self.metric} critical={g.critical} "
                f"node={g.path_digest()}")


class RankTable:
    """Sorted node metrics of all enumerated non-bot nodes; rank = position."""

    def __init__(self, metrics: List[tuple]):
        metrics.sort()
        for a, b in zip(metrics, metrics[1:]):
            if a == b:
                raise InternalInvariantError(f"duplicate node metric {a}")
        self.metrics = metrics

    def rank(self, metric: tuple) -> int:
        pos = bisect_left(self.metrics, metric)
        if pos >= len(self.metrics) or self.metrics[pos] != metric:
            raise KeyError(f"metric not enumerated: {metric}")
        return pos

    def __len__(self) -> int:
        return len(self.metrics)


class TreeAnalysis:
    """Valence and gadget analysis over one TreeContext."""

    def __init__(self, ctx: TreeContext, node_budget: int = 400_000):
        self.ctx = ctx
        self.node_budget = node_budget
        self._dv_cache: Dict[tuple, FrozenSet[int]] = {}
        self.nodes_enumerated = 0

    # -- decision values and valence ------------------------------------------

    def _dv(self, key: tuple, rem: int, include_bot: bool) -> FrozenSet[int]:
        """Decision values reachable strictly below a node with this key and
        this much remaining depth."""
        if rem <= 0:
            return frozenset()
        memo_key = (key, rem, include_bot)
        hit = self._dv_cache.get(memo_key)
        if hit is not None:
            return hit
        config, vtag = key
        found = set()
        for edge, child_config, child_vtag in self.ctx.edges_of(config, vtag):
            if edge.is_bot and not include_bot:
                continue
            if edge.action_tag is not None and edge.action_tag.name == "decide":
                found.add(edge.action_tag.payload[0])
            found |= self._dv((child_config, child_vtag), rem - 1, include_bot)
            if len(found) == 2:
                break
        result = frozenset(found)
        self._dv_cache[memo_key] = result
        return result

    def decision_values(self, node: TreeNode, include_bot: bool = False) -> frozenset:
        prefix = frozenset(e.action_tag.payload[0] for e in node.path
                           if e.action_tag is not None and e.action_tag.name == "decide")
        return prefix | self._dv(node.key, self.ctx.height - node.depth, include_bot)

    def classify_valence(self, node: TreeNode) -> str:
        return _valence_of(self.decision_values(node))

    # -- enumeration -----------------------------------------------------------

    def enumerate_nodes(self):
        """Yield (node, prefix_decides) for every non-bot node, root included."""
        root = self.ctx.root()
        stack = [(root, frozenset())]
        while stack:
            node, prefix = stack.pop()
            self.nodes_enumerated += 1
            if self.nodes_enumerated > self.node_budget:
                raise CapacityError(
                    f"non-bot node enumeration exceeded budget {self.node_budget}")
            yield node, prefix
            if node.depth >= self.ctx.height:
                continue
            for edge, child in self.ctx.expand(node, non_bot_only=True):
                child_prefix = prefix
                if edge.action_tag.name == "decide":
                    child_prefix = prefix | {edge.action_tag.payload[0]}
                stack.append((child, child_prefix))

    def _child_valence(self, prefix: frozenset, edge: TreeEdge,
                       child_key: tuple, child_rem: int) -> str:
        dec = set(prefix)
        if edge.action_tag is not None and edge.action_tag.name == "decide":
            dec.add(edge.action_tag.payload[0])
        dec |= self._dv(child_key, child_rem, include_bot=False)
        return _valence_of(frozenset(dec))

    def gadgets_at(self, node: TreeNode, prefix: frozenset) -> list:
        """All decision gadgets anchored at a bivalent non-bot node, validated
        against the fork/hook definitions."""
        found: List[Gadget] = []
        height = self.ctx.height
        if node.depth > height - 1:
            return found
        rem_child = height - node.depth - 1
        outgoing = self.ctx.expand(node, non_bot_only=True)
        by_label: Dict[tuple, list] = {}
        valences = {}
        for edge, child in outgoing:
            by_label.setdefault(edge.label, []).append((edge, child))
            valences[edge] = self._child_valence(prefix, edge, child.key, rem_child)

        for label, group in by_label.items():
            if label[0] != FD or len(group) < 2:
                continue
            for x in range(len(group)):
                for y in range(len(group)):
                    if x == y:
                        continue
                    ex, _ = group[x]
                    ey, _ = group[y]
                    if valences[ex] == ZERO_VALENT and valences[ey] == ONE_VALENT:
                        found.append(self._make_fork(node, label, ex, ey))

        if node.depth > height - 2:
            return found
        rem_grand = height - node.depth - 2
        for r_edge, r_child in outgoing:
            r_prefix = prefix
            if r_edge.action_tag.name == "decide":
                r_prefix = prefix | {r_edge.action_tag.payload[0]}
            r_out = self.ctx.expand(r_child, non_bot_only=True)
            for l_label, group in by_label.items():
                if l_label == r_edge.label:
                    continue
                rl_group = [(e, c) for e, c in r_out if e.label == l_label]
                for e_l, _ in group:
                    va = valences[e_l]
                    if va not in (ZERO_VALENT, ONE_VALENT):
                        continue
                    want = ONE_VALENT if va == ZERO_VALENT else ZERO_VALENT
                    for e_rl, c_rl in rl_group:
                        if self._child_valence(r_prefix, e_rl, c_rl.key,
                                               rem_grand) == want:
                            found.append(self._make_hook(node, l_label, e_l,
                                                         r_edge, e_rl))
        return found

    def _make_fork(self, node: TreeNode, label: tuple,
                   e0: TreeEdge, e1: TreeEdge) -> Gadget:
        loc0 = e0.action_tag.loc
        loc1 = e1.action_tag.loc
        if loc0 != loc1:
            raise InternalInvariantError(
                f"fork action tags at distinct locations {loc0} vs {loc1}")
        n = self.ctx.locs.n
        ma = node_metric(node.path + (e0,), e0.vertex_tag, n)
        mb = node_metric(node.path + (e1,), e1.vertex_tag, n)
        if mb < ma:
            e0, e1, ma, mb = e1, e0, mb, ma
        return Gadget("fork", node, label, None, e0, e1, None, loc0, ma, mb)

    def _make_hook(self, node: TreeNode, l_label: tuple, e_l: TreeEdge,
                   e_r: TreeEdge, e_rl: TreeEdge) -> Gadget:
        loc_l = e_l.action_tag.loc
        loc_r = e_r.action_tag.loc
        if loc_l != loc_r:
            raise InternalInvariantError(
                f"hook action tags at distinct locations {loc_l} vs {loc_r}")
        n = self.ctx.locs.n
        ma = node_metric(node.path + (e_l,), e_l.vertex_tag, n)
        mb = node_metric(node.path + (e_r, e_rl), e_rl.vertex_tag, n)
        return Gadget("hook", node, l_label, e_r.label, e_l, e_rl, e_r,
                      loc_l, ma, mb)


def _valence_of(values: frozenset) -> str:
    if values == frozenset((0, 1)):
        return BIVALENT
    if values == frozenset((0,)):
        return ZERO_VALENT
    if values == frozenset((1,)):
        return ONE_VALENT
    return UNDECIDED


def enumerate_gadgets(analysis: TreeAnalysis) -> list:
    """All non-bot decision gadgets of the tree, in gadget-metric order."""
    _, ranked, _ = rank_and_first(analysis)
    return ranked


def rank_and_first(analysis: TreeAnalysis):
    """Rank every non-bot node by metric, compute gadget metrics via nested
    pairing of ranks, and return (rank table, ranked gadgets sorted by
    metric, first gadget or None)."""
    ctx = analysis.ctx
    n = ctx.locs.n
    height = ctx.height
    budget = analysis.node_budget
    edges_of = ctx.edges_of
    dv = analysis._dv
    both = frozenset((0, 1))
    metrics: List[tuple] = []
    raw: List[Gadget] = []
    # Stack entries: (path, vtag, config, depth, metric, decides-on-path).
    stack = [((), None, ctx.system.initial_state, 0, (0,), frozenset())]
    while stack:
        path, vtag, config, depth, metric, prefix = stack.pop()
        analysis.nodes_enumerated += 1
        if analysis.nodes_enumerated > budget:
            raise CapacityError(
                f"non-bot node enumeration exceeded budget {budget}")
        metrics.append(metric)
        if depth >= height:
            continue
        if prefix | dv((config, vtag), height - depth, False) == both:
            node = TreeNode(path, vtag, config, depth)
            raw.extend(analysis.gadgets_at(node, prefix))
        body = metric[1:]
        for edge, child_config, child_vtag in edges_of(config, vtag):
            action = edge.action_tag
            if action is None:
                continue
            child_prefix = prefix
            if action.name == "decide":
                child_prefix = prefix | {action.payload[0]}
            child_k = child_vtag.index if child_vtag is not None else 0
            child_metric = (depth + 1 + child_k,) + body + (edge_metric(edge, n),)
            stack.append((path + (edge,), child_vtag, child_config,
                          depth + 1, child_metric, child_prefix))
    table = RankTable(metrics)
    ranked: List[RankedGadget] = []
    seen: Dict[int, RankedGadget] = {}
    for g in raw:
        rank_n = table.rank(node_metric(g.node.path, g.node.vertex_tag, n))
        rank_a = table.rank(g.child_a_metric)
        rank_b = table.rank(g.child_b_metric)
        metric = cantor_pair(rank_n, cantor_pair(rank_a, rank_b))
        rg = RankedGadget(g, metric, rank_n, rank_a, rank_b)
        prev = seen.get(metric)
        if prev is not None:
            if (prev.gadget.kind, prev.gadget.node.path) != (g.kind, g.node.path):
                raise InternalInvariantError(
                    f"distinct gadgets share metric {metric}")
            continue
        seen[metric] = rg
        ranked.append(rg)
    ranked.sort(key=lambda rg: rg.metric)
    first = ranked[0] if ranked else None
    return table, ranked, first
