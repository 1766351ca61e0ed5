import random

from afdsim.afd import AfdTrace, fd_output
from afdsim.consensus import ct_algorithm, env_automaton_parts
from afdsim.ioa import replay
from afdsim.observation import (EMPTY_OBSERVATION, Observation, Vertex, insert,
                                is_prefix, observation_from_trace)
from afdsim.system import Locations, build_system
from afdsim.tree import (FD, TreeContext, is_post_crash, label_location,
                         similar_modulo)

L2 = Locations(2)


def reference(locs=L2):
    return build_system(ct_algorithm(locs), env_automaton_parts(locs), locs,
                        with_crash=False, name=("reference",))


def grow(seq, leaders=None):
    g = EMPTY_OBSERVATION
    counts = {}
    for x, loc in enumerate(seq):
        counts[loc] = counts.get(loc, 0) + 1
        leader = leaders[x] if leaders else 1
        g = insert(g, Vertex(loc, counts[loc], fd_output(loc, leader)))
    return g


def test_root_shape():
    ctx = TreeContext(reference(), grow([1, 2]), L2)
    root = ctx.root()
    assert root.depth == 0 and root.vertex_tag is None
    assert ctx.exe(root).is_null
    assert root.config == ctx.system.initial_state


def test_empty_observation_root_is_leaf():
    ctx = TreeContext(reference(), EMPTY_OBSERVATION, L2)
    assert ctx.expand(ctx.root()) == []


def test_edge_rules_at_root_with_empty_observation():
    ctx = TreeContext(reference(), EMPTY_OBSERVATION, L2)
    edges = ctx.edges_of(ctx.system.initial_state, None)
    labels = [e.label for e, _, _ in edges]
    # 2 Proc + 2 Chan + 4 Env task edges, plus one FD edge per location.
    assert len(labels) == 10
    assert all(e.action_tag is None for e, _, _ in edges)


def test_fd_edges_carry_vertex_actions():
    g = grow([1])
    ctx = TreeContext(reference(), g, L2)
    children = ctx.expand(ctx.root())
    fd1 = [(e, c) for e, c in children if e.label == (FD, 1)]
    fd2 = [(e, c) for e, c in children if e.label == (FD, 2)]
    assert len(fd1) == 1 and fd1[0][0].action_tag == fd_output(1, 1)
    assert fd1[0][0].vertex_tag == g.at(1, 1)
    assert len(fd2) == 1 and fd2[0][0].is_bot


def test_null_tag_fd_edges_enumerate_every_vertex():
    g = grow([1, 2, 1])
    ctx = TreeContext(reference(), g, L2)
    children = ctx.expand(ctx.root())
    fd1_tags = {e.vertex_tag for e, _ in children if e.label == (FD, 1)}
    assert fd1_tags == {g.at(1, 1), g.at(1, 2)}


def test_bot_edge_preserves_exe_config_and_tag():
    ctx = TreeContext(reference(), grow([1, 2]), L2)
    root = ctx.root()
    for edge, child in ctx.expand(root):
        if edge.is_bot:
            assert child.config == root.config
            assert child.vertex_tag == root.vertex_tag
            assert ctx.exe(child).events == ctx.exe(root).events


def test_exe_replays_against_the_system():
    rng = random.Random(8)
    ctx = TreeContext(reference(), grow([1, 2, 1, 2]), L2)
    frontier = [ctx.root()]
    seen = 0
    while frontier and seen < 4000:
        node = frontier.pop()
        seen += 1
        exe = ctx.exe(node)
        replayed = replay(ctx.system, exe.events)
        assert replayed.final_state == node.config
        kids = ctx.expand(node)
        rng.shuffle(kids)
        frontier.extend(c for _, c in kids[:3])


def test_exe_afd_projection_is_a_path_to_the_tag():
    ctx = TreeContext(reference(), grow([1, 2, 1]), L2)
    node = ctx.root()
    for _ in range(3):
        fd_children = [c for e, c in ctx.expand(node)
                       if e.label[0] == FD and not e.is_bot]
        if not fd_children:
            break
        node = fd_children[-1]
    tags = [e.vertex_tag for e in node.path if e.label[0] == FD and not e.is_bot]
    g = ctx.g
    assert tags[-1] == node.vertex_tag
    for a, b in zip(tags, tags[1:]):
        assert (a, b) in g.edges
    outputs = [e for e in ctx.exe(node).events if e.name == "fd"]
    assert outputs == [t.action for t in tags]


def test_child_uniqueness_by_label_and_tag():
    ctx = TreeContext(reference(), grow([1, 2, 1]), L2)
    for node in (ctx.root(),):
        seen = set()
        for edge, child in ctx.expand(node):
            key = (edge.label, child.vertex_tag)
            assert key not in seen
            seen.add(key)


def test_key_equal_nodes_have_matching_child_spectra():
    ctx = TreeContext(reference(), grow([1, 2, 1, 2]), L2)
    by_key = {}
    frontier = [ctx.root()]
    while frontier:
        node = frontier.pop()
        by_key.setdefault(node.key, []).append(node)
        if node.depth < 2:
            frontier.extend(c for _, c in ctx.expand(node))
    for key, nodes in by_key.items():
        if len(nodes) < 2:
            continue
        spectra = []
        for node in nodes:
            spectra.append([(e.label, e.vertex_tag, e.action_tag, c.config,
                             c.vertex_tag) for e, c in ctx.expand(node)])
        assert all(s == spectra[0] for s in spectra)


def test_similar_modulo_reflexive_and_queue_prefix():
    ctx = TreeContext(reference(), grow([1, 2, 1, 2, 1]), L2)
    node = ctx.root()
    # Walk to a state where process 1 has queued a message.
    for _ in range(6):
        options = ctx.expand(node, non_bot_only=True)
        sender = [c for e, c in options
                  if e.action_tag is not None and e.action_tag.name == "send"
                  and e.action_tag.loc == 1]
        if sender:
            after = sender[0]
            assert similar_modulo(ctx.system, node, after, 1, L2)
            assert not similar_modulo(ctx.system, after, node, 1, L2)
            break
        assert similar_modulo(ctx.system, node, node, 1, L2)
        node = options[0][1]
    else:
        raise AssertionError("never reached a send step at location 1")


def test_post_crash_detection():
    ctx = TreeContext(reference(), EMPTY_OBSERVATION, L2)
    assert is_post_crash(ctx.root(), 1, ctx.g)
    assert is_post_crash(ctx.root(), 2, ctx.g)
    g = grow([1, 1])
    ctx = TreeContext(reference(), g, L2)
    sink_tagged = [c for e, c in ctx.expand(ctx.root())
                   if c.vertex_tag == g.at(1, 2)]
    source_tagged = [c for e, c in ctx.expand(ctx.root())
                     if c.vertex_tag == g.at(1, 1)]
    assert is_post_crash(sink_tagged[0], 1, g)
    assert is_post_crash(sink_tagged[0], 2, g)
    assert not is_post_crash(source_tagged[0], 1, g)


def test_bot_edges_consume_depth():
    g = grow([1])
    ctx = TreeContext(reference(), g, L2)
    _, child = ctx.expand(ctx.root())[0]
    assert child.depth == 1
    assert ctx.expand(child) == []  # depth == |V| == 1: leaf


def test_prefix_observation_paths_replay_in_super_tree():
    g_small = grow([1, 2, 1])
    g_big = insert(g_small, Vertex(2, 2, fd_output(2, 1)))
    assert is_prefix(g_small, g_big)
    small = TreeContext(reference(), g_small, L2)
    big = TreeContext(reference(), g_big, L2)
    frontier = [(small.root(), big.root())]
    checked = 0
    while frontier and checked < 3000:
        s_node, b_node = frontier.pop()
        checked += 1
        b_children = {(e.label, e.vertex_tag): (e, c)
                      for e, c in big.expand(b_node, non_bot_only=True)}
        for e, c in small.expand(s_node, non_bot_only=True):
            match = b_children.get((e.label, e.vertex_tag))
            assert match is not None, (e.label, e.vertex_tag)
            be, bc = match
            assert be.action_tag == e.action_tag
            assert bc.config == c.config and bc.vertex_tag == c.vertex_tag
            frontier.append((c, bc))
    assert checked > 10


def test_label_location_of_channel_is_destination():
    assert label_location(("chan", 2, 1)) == 1
    assert label_location(("proc", 2)) == 2
    assert label_location(("env", 1, 0)) == 1
    assert label_location((FD, 3)) == 3
