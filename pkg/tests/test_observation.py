import random

import pytest

from afdsim.afd import AfdTrace, fd_output, is_valid_sequence
from afdsim.errors import CapacityError, ObservationConflict
from afdsim.observation import (EMPTY_OBSERVATION, Observation, Vertex,
                                branches, format_observation, insert,
                                is_compatible, is_prefix, observation_from_trace,
                                parse_observation, union, validate,
                                viable_for_omega_f)
from afdsim.system import Locations, crash_action

L2 = Locations(2)
L3 = Locations(3, 1)


def v(loc, k, leader=1):
    return Vertex(loc, k, fd_output(loc, leader))


def chain(*verts):
    g = EMPTY_OBSERVATION
    for x in verts:
        g = insert(g, x)
    return g


def test_validate_empty_ok():
    assert validate(EMPTY_OBSERVATION) is None


def test_validate_detects_index_gap():
    g = Observation([v(1, 1), v(1, 3)], [(v(1, 1), v(1, 3))])
    bad = validate(g)
    assert bad is not None and bad.prop == "property-2"


def test_validate_detects_duplicate_slot():
    a, b = v(1, 1, 1), v(1, 1, 2)
    bad = validate(Observation([a, b], []))
    assert bad is not None and bad.prop == "property-1"


def test_validate_detects_missing_chain_edge():
    g = Observation([v(1, 1), v(1, 2)], [])
    bad = validate(g)
    assert bad is not None and bad.prop == "property-3"


def test_validate_detects_missing_transitive_edge():
    a, b, c = v(1, 1), v(1, 2), v(2, 1)
    g = Observation([a, b, c], [(a, b), (b, c)])
    bad = validate(g)
    assert bad is not None and bad.prop == "property-5"


def test_validate_detects_cycle():
    a, b = v(1, 1), v(2, 1)
    bad = validate(Observation([a, b], [(a, b), (b, a)]))
    assert bad is not None and bad.prop == "acyclic"


def test_insert_adds_edges_from_every_vertex():
    a, b = v(1, 1), v(2, 1)
    g = chain(a, b)
    w = v(1, 2)
    g2 = insert(g, w)
    assert (a, w) in g2.edges and (b, w) in g2.edges
    assert validate(g2) is None


def test_insert_rejects_wrong_index():
    with pytest.raises(ValueError):
        insert(EMPTY_OBSERVATION, v(1, 2))


def test_sequential_inserts_always_validate():
    g = EMPTY_OBSERVATION
    for k, loc in enumerate([1, 2, 1, 2, 1], start=1):
        g = insert(g, Vertex(loc, (k + 1) // 2, fd_output(loc, 1)))
        assert validate(g) is None


def test_union_idempotent():
    g = chain(v(1, 1), v(2, 1), v(1, 2))
    assert union(g, g) == g


def test_union_disjoint_locations_keeps_both_chains():
    g = chain(v(1, 1), v(1, 2))
    h = chain(v(2, 1), v(2, 2))
    merged = union(g, h)
    assert validate(merged) is None
    assert len(merged) == 4


def test_union_conflicting_action_raises():
    g = chain(Vertex(1, 1, fd_output(1, 1)))
    h = chain(Vertex(1, 1, fd_output(1, 2)))
    with pytest.raises(ObservationConflict) as err:
        union(g, h)
    assert err.value.kind == "vertex-action"


def test_union_conflicting_incoming_edges_raises():
    a, b = v(1, 1), v(2, 1)
    g = Observation([a, b], [(a, b)])
    h = Observation([a, b], [])  # b has no incoming edges here
    with pytest.raises(ObservationConflict) as err:
        union(g, h)
    assert err.value.kind == "incoming-edges"


def test_prefix_examples():
    g = chain(v(1, 1), v(2, 1), v(1, 2))
    assert is_prefix(EMPTY_OBSERVATION, g)
    sink = v(1, 2)
    without_sink = Observation(g.vertices - {sink},
                               {(a, b) for a, b in g.edges if sink not in (a, b)})
    assert is_prefix(without_sink, g)
    # Dropping an incoming edge of a kept vertex breaks prefix-ness.
    broken = Observation(g.vertices, set(g.edges) - {(v(1, 1), v(1, 2))})
    assert not is_prefix(broken, g)


def test_prefix_chain_under_growth():
    g = EMPTY_OBSERVATION
    seen = []
    for k, loc in enumerate([1, 2, 2, 1, 1, 2]):
        g = insert(g, Vertex(loc, g.max_index(loc) + 1, fd_output(loc, 1)))
        seen.append(g)
    for a, b in zip(seen, seen[1:]):
        assert is_prefix(a, b)


def test_observation_from_trace_examples():
    assert observation_from_trace(AfdTrace(()), L2) == EMPTY_OBSERVATION
    e1, e2 = fd_output(1, 1), fd_output(2, 1)
    g = observation_from_trace(AfdTrace((e1, e2)), L2)
    assert g.at(1, 1).action == e1 and g.at(2, 1).action == e2
    assert (g.at(1, 1), g.at(2, 1)) in g.edges
    with pytest.raises(ValueError):
        observation_from_trace(AfdTrace((crash_action(1), e1)), L2)


def test_compatibility_examples():
    assert is_compatible((), EMPTY_OBSERVATION)
    e1, e2 = fd_output(1, 1), fd_output(2, 1)
    g = observation_from_trace(AfdTrace((e1, e2)), L2)
    assert is_compatible((e1, e2), g)
    assert not is_compatible((e2, e1), g)
    incomparable = Observation([v(1, 1), v(2, 1)], [])
    assert is_compatible((v(1, 1).action, v(2, 1).action), incomparable)
    assert is_compatible((v(2, 1).action, v(1, 1).action), incomparable)


def test_compatibility_capacity_bound():
    g = chain(*[Vertex(1, k, fd_output(1, 1)) for k in range(1, 10)])
    with pytest.raises(CapacityError):
        is_compatible(tuple(x.action for x in g.vertices), g, bound=8)


def random_valid_trace(rng, locs, length):
    events = []
    crashed = set()
    for _ in range(length):
        alive = [i for i in locs.pi if i not in crashed]
        if alive and rng.random() < 0.9:
            events.append(fd_output(rng.choice(alive), rng.choice(locs.pi)))
        else:
            i = rng.choice(locs.pi)
            events.append(crash_action(i))
            crashed.add(i)
    return AfdTrace(tuple(events))


def test_from_trace_always_compatible():
    rng = random.Random(21)
    for _ in range(300):
        t = random_valid_trace(rng, L3, rng.randrange(0, 8))
        g = observation_from_trace(t, L3)
        assert validate(g) is None
        assert is_compatible(t.events, g)


def test_viability_empty_holds():
    assert viable_for_omega_f(EMPTY_OBSERVATION, 0, L2).status == "holds"


def test_viability_of_detector_run_holds():
    t = AfdTrace((fd_output(1, 1), fd_output(2, 1), fd_output(1, 1),
                  fd_output(2, 1)))
    g = observation_from_trace(t, L2)
    assert viable_for_omega_f(g, 0, L2).status == "holds"


def test_viability_disagreeing_leaders_violated():
    g = chain(Vertex(1, 1, fd_output(1, 1)), Vertex(2, 1, fd_output(2, 2)))
    assert viable_for_omega_f(g, 0, L2).is_violated


def test_viability_prefix_mode_undetermined():
    g = chain(v(1, 1))
    assert viable_for_omega_f(g, 0, L2, complete=False).status == "undetermined"


def test_branches_examples():
    single = chain(v(1, 1))
    assert branches(single) == [(v(1, 1),)]
    three = chain(v(1, 1), v(1, 2), v(1, 3))
    assert branches(three) == [(v(1, 1), v(1, 2), v(1, 3))]
    incomparable = Observation([v(1, 1), v(2, 1)], [])
    assert len(branches(incomparable)) == 2


def test_observation_round_trip():
    g = chain(v(1, 1), v(2, 1, leader=2), v(1, 2))
    text = format_observation(g, 2)
    parsed, n = parse_observation(text)
    assert n == 2 and parsed == g


def test_random_op_sequences_stay_valid():
    rng = random.Random(2024)
    for _ in range(500):
        pool = [EMPTY_OBSERVATION]
        for _ in range(6):
            g = rng.choice(pool)
            if rng.random() < 0.7:
                loc = rng.choice(L3.pi)
                g2 = insert(g, Vertex(loc, g.max_index(loc) + 1,
                                      fd_output(loc, rng.choice(L3.pi))))
                assert validate(g2) is None
                pool.append(g2)
            else:
                h = rng.choice(pool)
                try:
                    merged = union(g, h)
                except ObservationConflict:
                    continue
                assert validate(merged) is None
                pool.append(merged)
