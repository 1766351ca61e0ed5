"""Exception types shared across the workbench."""


class AfdsimError(Exception):
    """Base class for all workbench errors."""


class CompositionError(AfdsimError):
    """Two automata claim the same output action, or a composition is malformed."""


class AssemblyError(AfdsimError):
    """A system cannot be wired together (e.g. a send with no matching channel)."""


class StepError(AfdsimError):
    """A locally controlled action was applied in a state where it is disabled."""


class ModelError(AfdsimError):
    """An automaton violated the task-deterministic model contract."""


class ConfigError(AfdsimError):
    """A scenario or schedule is malformed."""


class CapacityError(AfdsimError):
    """An exhaustive analysis exceeded its configured bound."""


class ObservationConflict(AfdsimError):
    """Union of two observations failed one of the consistency conditions."""

    def __init__(self, kind: str, witness):
        super().__init__(f"observation union conflict ({kind}): {witness}")
        self.kind = kind
        self.witness = witness


class InternalInvariantError(AfdsimError):
    """A structure contradicts an invariant that should hold by construction."""


class TraceFormatError(AfdsimError):
    """A serialized trace or observation could not be parsed."""
