import random

import pytest

from afdsim.afd import is_crash, omega_automaton
from afdsim.consensus import (check_consensus_trace, ct_algorithm,
                              decide_action, env_automaton_parts,
                              propose_action)
from afdsim.ioa import SchedulerPolicy, run_fair
from afdsim.system import Locations, build_system, crash_action, crash_externals

L2 = Locations(2)
L3 = Locations(3, 1)


def consensus_events(execution):
    return tuple(e for e in execution.events
                 if e.name in ("propose", "decide") or is_crash(e))


def simulate(locs, pins, seed, horizon=800, crashes=(), mode="random"):
    system = build_system(ct_algorithm(locs), env_automaton_parts(locs, pins),
                          locs, extras=(omega_automaton(locs),))
    return run_fair(system, SchedulerPolicy(mode=mode, seed=seed,
                                            horizon=horizon),
                    crash_externals(crashes))


def test_checker_accepts_clean_run():
    t = (propose_action(1, 1), propose_action(2, 1),
         decide_action(1, 1), decide_action(2, 1))
    v = check_consensus_trace(t, 1, L2, complete=True)
    assert all(x.status == "holds" for _, x in v.lines())


def test_checker_catches_disagreement():
    t = (propose_action(1, 0), propose_action(2, 1),
         decide_action(1, 0), decide_action(2, 1))
    v = check_consensus_trace(t, 1, L2, complete=True)
    assert v.agreement.is_violated
    assert v.overall.is_violated


def test_checker_catches_unproposed_decision():
    t = (propose_action(1, 1), propose_action(2, 1), decide_action(1, 1),
         decide_action(2, 1), )
    bad = t[:2] + (decide_action(1, 0),)
    v = check_consensus_trace(bad, 1, L2, complete=False)
    assert v.validity.is_violated


def test_checker_overall_holds_when_hypothesis_fails():
    t = (crash_action(1), crash_action(2),
         propose_action(3, 1), decide_action(3, 1))
    v = check_consensus_trace(t, 1, L3, complete=True)
    assert v.f_crash_limited.is_violated
    assert v.overall.status == "holds"


def test_checker_prefix_termination_undetermined():
    t = (propose_action(1, 1), propose_action(2, 1))
    v = check_consensus_trace(t, 0, L2, complete=False)
    assert v.termination.status == "undetermined"
    assert v.overall.status == "undetermined"


def test_env_automaton_enable_disable():
    part = env_automaton_parts(L2)[0]
    t0 = next(t for t in part.tasks if t.tid == ("env", 1, 0))
    t1 = next(t for t in part.tasks if t.tid == ("env", 1, 1))
    assert t0.enabled(False) == propose_action(1, 0)
    assert t1.enabled(False) == propose_action(1, 1)
    after = part.step(False, propose_action(1, 0))
    assert t0.enabled(after) is None and t1.enabled(after) is None
    crashed = part.step(False, crash_action(1))
    assert t0.enabled(crashed) is None


def test_both_propose_one_decide_one():
    exe = simulate(L2, {1: 1, 2: 1}, seed=0, horizon=200, mode="round-robin")
    events = consensus_events(exe)
    v = check_consensus_trace(events, 0, L2, complete=True)
    assert v.overall.status == "holds"
    decided = {e.payload[0] for e in events if e.name == "decide"}
    assert decided == {1}


def test_survivors_agree_after_early_crash():
    for seed in range(1, 21):
        exe = simulate(L3, {1: 0, 2: 1, 3: 1}, seed=seed, crashes=[(0, 1)])
        events = consensus_events(exe)
        v = check_consensus_trace(events, 1, L3, complete=True)
        assert v.overall.status == "holds", (seed, [str(x) for x in events])
        decided = [e for e in events if e.name == "decide"]
        assert {e.payload[0] for e in decided} <= {0, 1}
        assert len({e.payload[0] for e in decided}) == 1


def test_no_decide_after_crash_at_location():
    rng = random.Random(4)
    for seed in range(10):
        crashes = [(rng.randrange(400), rng.choice(L3.pi))]
        exe = simulate(L3, {1: 0, 2: 1, 3: 0}, seed=seed, crashes=crashes)
        crashed = set()
        for e in exe.events:
            if is_crash(e):
                crashed.add(e.loc)
            elif e.loc in crashed:
                assert e.name not in ("decide", "send", "propose")


def test_env_well_formedness_on_every_run():
    for seed in range(10):
        exe = simulate(L3, {}, seed=seed, crashes=[(50, 2)])
        events = consensus_events(exe)
        v = check_consensus_trace(events, 1, L3, complete=True)
        assert v.env_well_formed.status == "holds"


def test_exactly_one_decision_value_per_fair_run():
    for seed in range(20):
        pins = {1: seed % 2, 2: (seed // 2) % 2, 3: 1}
        exe = simulate(L3, pins, seed=seed)
        values = {e.payload[0] for e in exe.events if e.name == "decide"}
        assert len(values) == 1
