"""DOT export of observations and bounded tree slices."""

from __future__ import annotations

from typing import Optional

from .observation import Observation
from .tree import TreeContext, TreeNode


def observation_dot(g: Observation) -> str:
    """Vertices render as "i:k" nodes; edges implied by transitivity are
    dashed so the covering order stays readable."""
    lines = ["digraph observation {", "  rankdir=LR;"]
    verts = sorted(g.vertices, key=lambda v: (v.index, v.loc))
    for v in verts:
        lines.append(f'  "{v.loc}:{v.index}" [label="{v.loc}:{v.index}\\n{v.action}"];')
    for (a, b) in sorted(g.edges, key=lambda e: (e[0].index, e[0].loc,
                                                 e[1].index, e[1].loc)):
        transitive = any((a, c) in g.edges and (c, b) in g.edges
                         for c in g.successors(a))
        style = ' [style=dashed, color=gray]' if transitive else ""
        lines.append(f'  "{a.loc}:{a.index}" -> "{b.loc}:{b.index}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _label_str(label: tuple) -> str:
    return ".".join(str(p) for p in label)


def tree_slice_dot(ctx: TreeContext, root: Optional[TreeNode] = None,
                   depth_limit: int = 2) -> str:
    """The tree slice below `root` (default: the real root) down to the
    depth limit; edges show label and action tag (or bot)."""
    if root is None:
        root = ctx.root()
    lines = ["digraph tree {"]
    counter = [0]

    def node_id(node: TreeNode) -> str:
        counter[0] += 1
        return f"n{counter[0]}"

    def vlabel(node: TreeNode) -> str:
        v = node.vertex_tag
        tag = f"{v.loc}:{v.index}" if v is not None else "null"
        return f"d{node.depth} v={tag}"

    def walk(node: TreeNode, ident: str, depth: int):
        lines.append(f'  {ident} [label="{vlabel(node)}"];')
        if depth >= depth_limit:
            return
        for edge, child in ctx.expand(node):
            cid = node_id(child)
            action = str(edge.action_tag) if edge.action_tag is not None else "bot"
            style = ' style=dashed color=gray' if edge.is_bot else ""
            lines.append(f'  {ident} -> {cid} '
                         f'[label="{_label_str(edge.label)}/{action}"{style}];')
            walk(child, cid, depth + 1)

    walk(root, node_id(root), 0)
    lines.append("}")
    return "\n".join(lines) + "\n"
