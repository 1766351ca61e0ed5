import pytest

from afdsim.afd import fd_output, omega_automaton
from afdsim.errors import CompositionError, ConfigError
from afdsim.ioa import (Action, Automaton, Execution, RunLog, SchedulerPolicy,
                        Task, compose, project, project_component, replay,
                        run_fair, INPUT, OUTPUT)
from afdsim.system import (Locations, build_system, channel_automaton,
                           crash_action, crash_automaton, crash_externals,
                           noop_process, receive_action, send_action)


def test_compose_empty_is_identity():
    empty = compose([])
    assert empty.classify(Action("anything")) is None
    assert empty.tasks == ()
    assert empty.step(empty.initial_state, Action("x")) == empty.initial_state


def test_compose_matches_crash_inputs_across_components():
    locs = Locations(2)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    state = system.step(system.initial_state, crash_action(1))
    # Both the detector and the crash automaton saw the event.
    assert system.component_state(state, ("fd",)) == frozenset({1})
    assert system.component_state(state, ("crash",)) == frozenset({1})


def test_compose_rejects_shared_output_action():
    def emitter(name):
        act = Action("tick", 1)
        return Automaton((name,), 0,
                         lambda a: OUTPUT if a == act else None,
                         lambda s, a: s + 1,
                         (Task((name, "t"), lambda s: act),))

    system = compose([emitter("a"), emitter("b")])
    with pytest.raises(CompositionError) as err:
        system.classify(Action("tick", 1))
    assert "a" in str(err.value) and "b" in str(err.value)


def test_channel_fifo_against_reference_queue():
    import random
    chan = channel_automaton(1, 2)
    rng = random.Random(11)
    state, reference, delivered = chan.initial_state, [], []
    for step in range(200):
        if reference and (rng.random() < 0.5):
            action = chan.tasks[0].enabled(state)
            assert action == receive_action(2, reference[0], 1)
            delivered.append(reference.pop(0))
            state = chan.step(state, action)
        else:
            m = ("msg", step)
            reference.append(m)
            state = chan.step(state, send_action(1, m, 2))
    while reference:
        action = chan.tasks[0].enabled(state)
        delivered.append(reference.pop(0))
        state = chan.step(state, action)
    assert chan.tasks[0].enabled(state) is None
    assert delivered == [("msg", k) for k in range(200) if ("msg", k) in delivered]


def test_run_fair_horizon_zero_is_null_execution():
    locs = Locations(2)
    system = compose([omega_automaton(locs)])
    exe = run_fair(system, SchedulerPolicy(horizon=0))
    assert exe.is_null
    assert exe.states == (system.initial_state,)


def test_run_fair_omega_alone_outputs_leader_one():
    locs = Locations(2)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    exe = run_fair(system, SchedulerPolicy(horizon=8))
    for i in locs.pi:
        outputs = [e for e in exe.events if e.loc == i]
        assert outputs and all(e == fd_output(i, 1) for e in outputs)


def test_run_fair_crash_shifts_leader_and_silences_location():
    locs = Locations(2)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    exe = run_fair(system, SchedulerPolicy(horizon=8),
                   crash_externals([(0, 1)]))
    assert all(e.loc != 1 for e in exe.events if e.name == "fd")
    assert all(e == fd_output(2, 2) for e in exe.events if e.name == "fd")


def test_run_fair_is_deterministic_in_seed():
    locs = Locations(3)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    policy = SchedulerPolicy(mode="random", seed=42, horizon=60)
    externals = crash_externals([(10, 3)])
    a = run_fair(system, policy, externals)
    b = run_fair(system, policy, externals)
    assert a == b
    c = run_fair(system, SchedulerPolicy(mode="random", seed=43, horizon=60),
                 externals)
    assert c != a


def test_run_fair_rejects_externals_beyond_horizon():
    locs = Locations(2)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    with pytest.raises(ConfigError):
        run_fair(system, SchedulerPolicy(horizon=5), crash_externals([(5, 1)]))


def test_fairness_audit_every_task_scheduled():
    locs = Locations(3)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    horizon = 120
    for mode, window in (("round-robin", len(system.tasks)), ("random", None)):
        policy = SchedulerPolicy(mode=mode, seed=9, horizon=horizon, window=window)
        log = RunLog()
        run_fair(system, policy, log=log)
        bound = window if window is not None else 4 * len(system.tasks)
        for tid, count in log.scheduled.items():
            assert count >= horizon // bound, (mode, tid, count)


def test_projection_idempotent_and_null():
    locs = Locations(2)
    system = compose([omega_automaton(locs), crash_automaton(locs)])
    exe = run_fair(system, SchedulerPolicy(horizon=10), crash_externals([(4, 2)]))
    sel = lambda e: e.name == "fd" and e.loc == 1
    once = project(exe, sel)
    assert project(once, sel) == once
    assert project(Execution((system.initial_state,), ()), sel) == ()


def test_component_projection_replays_step_by_step():
    locs = Locations(2)
    system = build_system({i: noop_process(i, locs) for i in locs.pi}, (),
                          locs, extras=(omega_automaton(locs),))
    exe = run_fair(system, SchedulerPolicy(mode="random", seed=2, horizon=80),
                   crash_externals([(30, 2)]))
    for part in system.parts:
        proj = project_component(system, exe, part.name)
        state = part.initial_state
        assert proj.states[0] == state
        for k, action in enumerate(proj.events):
            state = part.step(state, action)
            assert state == proj.states[k + 1], part.name
