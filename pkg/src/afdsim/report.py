"""Scenario orchestration and machine-readable reports.

A report is a deterministic, delimited text file plus rendered figures and
optional DOT exports, all written into one output directory.  Identical
(scenario file, seed) pairs produce byte-identical report text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from . import figures as figmod
from .afd import AfdTrace, Verdict, check_T_omega_f, format_trace, is_crash, omega_automaton
from .consensus import check_consensus_trace, ct_algorithm, env_automaton_parts
from .dot import observation_dot, tree_slice_dot
from .errors import CapacityError
from .extraction import run_extraction
from .gadgets import TreeAnalysis, rank_and_first
from .ioa import RunLog, SchedulerPolicy, System, run_fair
from .observation import (EMPTY_OBSERVATION, Observation, Vertex,
                          format_observation, insert)
from .scenario import Scenario
from .system import Locations, build_system, crash_automaton, crash_externals
from .tree import TreeContext

VERDICT_OK = ("holds", "undetermined")


@dataclass
class Report:
    scenario_name: str
    mode: str
    seed: int
    inputs_hash: str
    verdicts: List[tuple] = field(default_factory=list)   # (name, Verdict)
    lines: List[str] = field(default_factory=list)
    counters: Dict[str, int] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    capacity_failure: Optional[str] = None

    def add_verdict(self, name: str, verdict: Verdict) -> None:
        self.verdicts.append((name, verdict))

    @property
    def exit_code(self) -> int:
        if self.capacity_failure is not None:
            return 2
        if any(v.status not in VERDICT_OK for _, v in self.verdicts):
            return 1
        return 0

    def text(self) -> str:
        out = ["afdsim-report v1",
               f"scenario\t{self.scenario_name}",
               f"mode\t{self.mode}",
               f"seed\t{self.seed}",
               f"inputs\tsha256={self.inputs_hash}"]
        for name, v in self.verdicts:
            out.append(f"verdict\t{name}\t{v}")
        out.extend(self.lines)
        for key in sorted(self.counters):
            out.append(f"counter\t{key}\t{self.counters[key]}")
        for a in self.artifacts:
            out.append(f"artifact\t{a}")
        if self.capacity_failure:
            out.append(f"capacity-error\t{self.capacity_failure}")
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.txt"
        path.write_text(self.text())
        return path


def _inputs_hash(scenario: Scenario) -> str:
    src = Path(scenario.source)
    payload = src.read_bytes() if src.exists() else repr(scenario).encode()
    return hashlib.sha256(payload + f"|seed={scenario.seed}".encode()).hexdigest()[:16]


def run_scenario(scenario: Scenario, out_dir=None, render_figures: bool = True,
                 export_dot: bool = False) -> Report:
    """Run one scenario end to end and assemble its report; artifacts are
    written when an output directory is given."""
    report = Report(Path(scenario.source).name, scenario.mode, scenario.seed,
                    _inputs_hash(scenario))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    try:
        if scenario.mode == "consensus":
            _run_consensus(scenario, report, out, render_figures)
        elif scenario.mode == "extraction":
            _run_extraction_mode(scenario, report, out, render_figures, export_dot)
        else:
            _run_tree_analysis(scenario, report, out, render_figures, export_dot)
    except CapacityError as exc:
        report.capacity_failure = str(exc)
    if out is not None:
        report.write(out)
    return report


def _policy(scenario: Scenario) -> SchedulerPolicy:
    return SchedulerPolicy(mode=scenario.scheduler, seed=scenario.seed,
                           horizon=scenario.horizon)


def _run_consensus(scenario: Scenario, report: Report, out, render: bool) -> None:
    locs = scenario.locations
    if 2 * scenario.f >= scenario.n:
        report.lines.append(
            f"warning\tf={scenario.f} is not below n/2; end-to-end guarantees lapse")
    system = build_system(ct_algorithm(locs),
                          env_automaton_parts(locs, scenario.propose_map),
                          locs, extras=(omega_automaton(locs),),
                          name=("consensus",))
    log = RunLog()
    execution = run_fair(system, _policy(scenario),
                         crash_externals(scenario.crash_schedule), log)
    consensus_events = tuple(e for e in execution.events
                             if e.name in ("propose", "decide") or is_crash(e))
    verdict = check_consensus_trace(consensus_events, scenario.f, locs,
                                    complete=True)
    for name, v in verdict.lines():
        report.add_verdict(f"consensus-{name}", v)
    afd_events = tuple(e for e in execution.events
                       if e.name == "fd" or is_crash(e))
    report.add_verdict("afd-trace", check_T_omega_f(
        AfdTrace(afd_events, complete=True), scenario.f, locs))
    decisions = [e for e in consensus_events if e.name == "decide"]
    for e in decisions:
        report.lines.append(f"decide\t{e.loc}\t{e.payload[0]}")
    report.counters["events"] = len(execution.events)
    report.counters["skips"] = len(log.skips)
    if out is not None:
        (out / "consensus-trace.txt").write_text(format_trace(consensus_events))
        report.artifacts.append("consensus-trace.txt")
        (out / "afd-trace.txt").write_text(format_trace(afd_events))
        report.artifacts.append("afd-trace.txt")
        if render:
            report.artifacts.append(Path(figmod.event_timeline_figure(
                consensus_events, out / "events.png", "consensus events")).name)


def _run_extraction_mode(scenario: Scenario, report: Report, out,
                         render: bool, export_dot: bool) -> None:
    locs = scenario.locations
    result = run_extraction(locs, scenario.horizon, seed=scenario.seed,
                            scheduler=scenario.scheduler,
                            crash_schedule=scenario.crash_schedule,
                            analysis_bound=scenario.analysis_bound,
                            stability_window=scenario.stability_window)
    report.add_verdict("omega-trace", result.omega_verdict)
    report.add_verdict("stabilization", result.stabilization)
    if result.stable_value is not None:
        report.lines.append(f"stable-leader\t{result.stable_value}")
    for i in sorted(result.fdout_timelines):
        for turn, value in enumerate(result.fdout_timelines[i]):
            report.lines.append(f"fdout {i} {turn} {value}")
    report.counters.update(result.counters)
    for i, size in sorted(result.final_g_sizes.items()):
        report.counters[f"observation_size_{i}"] = size
    if out is not None:
        (out / "omega-trace.txt").write_text(format_trace(result.omega_events))
        report.artifacts.append("omega-trace.txt")
        if render:
            report.artifacts.append(Path(figmod.fdout_timeline_figure(
                result.fdout_timelines, out / "fdout-timeline.png")).name)


def _run_tree_analysis(scenario: Scenario, report: Report, out,
                       render: bool, export_dot: bool) -> None:
    locs = scenario.locations
    # Run the detector alone with the crash automaton to harvest a trace.
    system = System((omega_automaton(locs), crash_automaton(locs)), ("afd-run",))
    log = RunLog()
    execution = run_fair(system, _policy(scenario),
                         crash_externals(scenario.crash_schedule), log)
    outputs = [e for e in execution.events if e.name == "fd"]
    reference = build_system(ct_algorithm(locs), env_automaton_parts(locs),
                             locs, with_crash=False, name=("reference",))
    g = EMPTY_OBSERVATION
    counts: Dict[int, int] = {}
    sizes: List[int] = []
    metric_track: List[Optional[int]] = []
    last = None
    nodes_total = 0
    for e in outputs[:scenario.analysis_bound]:
        counts[e.loc] = counts.get(e.loc, 0) + 1
        g = insert(g, Vertex(e.loc, counts[e.loc], e))
        ctx = TreeContext(reference, g, locs)
        analysis = TreeAnalysis(ctx)
        table, gadgets, first = rank_and_first(analysis)
        nodes_total += analysis.nodes_enumerated
        sizes.append(len(g))
        metric_track.append(first.metric if first is not None else None)
        last = (ctx, analysis, table, gadgets, first)
    if last is None:
        report.add_verdict("root-valence", Verdict.undetermined("no-detector-outputs"))
        return
    ctx, analysis, table, gadgets, first = last
    root_valence = analysis.classify_valence(ctx.root())
    report.lines.append(f"root-valence\t{root_valence}")
    report.add_verdict("root-bivalent",
                       Verdict.holds() if root_valence == "bivalent"
                       else Verdict.violated(f"root-{root_valence}"))
    report.add_verdict("gadget-found",
                       Verdict.holds() if first is not None
                       else Verdict.violated("no-decision-gadget"))
    for rg in gadgets:
        report.lines.append(rg.report_line())
    stable_from = _metric_stability(metric_track)
    report.lines.append(f"first-gadget-stable-from-step\t{stable_from}")
    report.counters["nodes_enumerated"] = nodes_total
    report.counters["ranked_nodes"] = len(table)
    report.counters["observation_size"] = len(g)
    if out is not None:
        (out / "observation.txt").write_text(format_observation(g, locs.n))
        report.artifacts.append("observation.txt")
        if export_dot:
            (out / "observation.dot").write_text(observation_dot(g))
            report.artifacts.append("observation.dot")
            (out / "tree-slice.dot").write_text(tree_slice_dot(ctx, depth_limit=2))
            report.artifacts.append("tree-slice.dot")
        if render:
            report.artifacts.append(Path(figmod.growth_figure(
                sizes, metric_track, out / "growth.png")).name)


def _metric_stability(track: List[Optional[int]]) -> int:
    """First growth step (1-based) after which the first-gadget metric never
    changes; 0 when no gadget ever appeared."""
    last_change = 0
    prev = None
    for x, m in enumerate(track, start=1):
        if m != prev:
            last_change = x
            prev = m
    return last_change if prev is not None else 0
