"""Plain-text scenario files: one `key value` pair per line, versioned.

Example::

    afdsim-scenario v1
    n 3
    f 1
    seed 3
    horizon 600
    scheduler random
    mode consensus
    afd omega_f
    crash 120 2
    propose 1 0
    propose 2 1
    propose 3 1
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .errors import ConfigError
from .ioa import ROUND_ROBIN, SEEDED_RANDOM
from .system import Locations

MODES = ("consensus", "extraction", "tree-analysis")
AFDS = ("omega", "omega_f")
HEADER = "afdsim-scenario v1"


@dataclass(frozen=True)
class Scenario:
    n: int
    f: int = 0
    seed: int = 0
    horizon: int = 100
    scheduler: str = ROUND_ROBIN
    mode: str = "consensus"
    afd: str = "omega"
    crash_schedule: Tuple[tuple, ...] = ()
    proposes: Tuple[tuple, ...] = ()
    analysis_bound: int = 8
    stability_window: int = 10
    source: str = "<inline>"

    @property
    def locations(self) -> Locations:
        return Locations(self.n, self.f)

    @property
    def propose_map(self) -> Dict[int, int]:
        return dict(self.proposes)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


def _validate(s: Scenario) -> Scenario:
    if s.n < 1:
        raise ConfigError("n must be at least 1")
    if not 0 <= s.f < s.n:
        raise ConfigError(f"f={s.f} must satisfy 0 <= f < n={s.n}")
    if s.horizon < 1:
        raise ConfigError("horizon must be at least 1")
    if s.scheduler not in (ROUND_ROBIN, SEEDED_RANDOM):
        raise ConfigError(f"unknown scheduler {s.scheduler!r}")
    if s.mode not in MODES:
        raise ConfigError(f"unknown mode {s.mode!r}")
    if s.afd not in AFDS:
        raise ConfigError(f"unknown afd {s.afd!r}")
    if s.analysis_bound < 1:
        raise ConfigError("analysis_bound must be at least 1")
    if s.stability_window < 1:
        raise ConfigError("stability_window must be at least 1")
    pi = set(range(1, s.n + 1))
    for turn, loc in s.crash_schedule:
        if loc not in pi:
            raise ConfigError(f"crash location {loc} outside 1..{s.n}")
        if not 0 <= turn < s.horizon:
            raise ConfigError(f"crash turn {turn} outside horizon {s.horizon}")
    seen = set()
    for loc, value in s.proposes:
        if loc not in pi:
            raise ConfigError(f"propose location {loc} outside 1..{s.n}")
        if value not in (0, 1):
            raise ConfigError(f"propose value {value} not binary")
        if loc in seen:
            raise ConfigError(f"duplicate propose for location {loc}")
        seen.add(loc)
    return s


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; defaults fill missing fields."""
    path = Path(path)
    text = path.read_text()
    fields: dict = {"source": str(path)}
    crashes = []
    proposes = []
    lines = [ln for ln in text.splitlines()]
    stripped = [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    if not stripped or stripped[0] != HEADER:
        raise ConfigError(f"{path}:1: expected header {HEADER!r}")
    int_keys = {"n", "f", "seed", "horizon", "analysis_bound", "stability_window"}
    str_keys = {"scheduler", "mode", "afd"}
    for no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line == HEADER:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key in int_keys and len(parts) == 2:
                fields[key] = int(parts[1])
            elif key in str_keys and len(parts) == 2:
                fields[key] = parts[1]
            elif key == "crash" and len(parts) == 3:
                crashes.append((int(parts[1]), int(parts[2])))
            elif key == "propose" and len(parts) == 3:
                proposes.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError
        except ValueError:
            raise ConfigError(f"{path}:{no}: cannot parse {raw!r}") from None
    if "n" not in fields:
        raise ConfigError(f"{path}: missing required field 'n'")
    try:
        scenario = Scenario(crash_schedule=tuple(crashes),
                            proposes=tuple(proposes), **fields)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return _validate(scenario)


def inline_scenario(**kwargs) -> Scenario:
    return _validate(Scenario(**kwargs))
