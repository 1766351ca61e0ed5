"""afdsim: a deterministic workbench for asynchronous failure detectors.

I/O-automata simulation, leader-election detectors, observation DAGs,
execution trees with valence and decision-gadget analysis, and the
distributed algorithm that extracts a leader from any detector strong
enough to solve consensus.
"""

from .afd import (AfdTrace, Verdict, check_T_omega_f, is_constrained_reordering,
                  is_sampling, is_strong_sampling, is_valid_sequence, mincrash,
                  omega_automaton)
from .consensus import check_consensus_trace, ct_algorithm, env_automaton_parts
from .extraction import run_extraction, window_observation
from .gadgets import TreeAnalysis, cantor_pair, label_metric, rank_and_first, vertex_metric
from .ioa import (Action, Automaton, Execution, SchedulerPolicy, Task, compose,
                  project, run_fair)
from .observation import (Observation, Vertex, branches, insert, is_compatible,
                          is_prefix, observation_from_trace, union, validate,
                          viable_for_omega_f)
from .scenario import Scenario, inline_scenario, load_scenario
from .system import Locations, ProcessContract, build_system, channel_automaton, crash_automaton
from .tree import TreeContext, TreeEdge, TreeNode, is_post_crash, similar_modulo

__version__ = "0.1.0"
