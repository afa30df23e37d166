"""Fixed-iteration golden-section search over a temperature interval."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

# Truncated ratio used verbatim so results match the published pseudocode.
# Reusing an interior point placed with it puts that point slightly off the
# golden position of the next interval, and the offset grows by about 1.618
# per iteration: harmless at K = 5 (~0.2%), but past K ~ 12 the two interior
# points can cross. Use GOLDEN for long searches.
RATIO = 0.618
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_T_MIN = 0.5
DEFAULT_T_MAX = 3.0
DEFAULT_ITERATIONS = 5


class Mode(enum.Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class SearchConfig:
    t_min: float = DEFAULT_T_MIN
    t_max: float = DEFAULT_T_MAX
    iterations: int = DEFAULT_ITERATIONS
    mode: Mode = Mode.MIN
    ratio: float = RATIO

    def __post_init__(self):
        if not 0.5 < self.ratio < 1.0:
            raise ValueError(f"ratio must lie in (0.5, 1), got {self.ratio}")
        if not 0 < self.t_min < self.t_max:
            raise ValueError(f"need 0 < t_min < t_max, got [{self.t_min}, {self.t_max}]")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations}")

    @property
    def n_evaluations(self) -> int:
        return self.iterations + 2

    @property
    def final_width(self) -> float:
        """Nominal final interval width; exact only for ``ratio=GOLDEN``."""
        return (self.t_max - self.t_min) * self.ratio**self.iterations


@dataclass
class SearchTrace:
    """Evaluation points and retained intervals from one search, in order."""

    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    intervals: list = field(default_factory=list)


def golden_section(
    objective: Callable[[float], float],
    cfg: SearchConfig | None = None,
    trace: SearchTrace | None = None,
) -> float:
    """Locate the extremum of a unimodal ``objective`` on ``[cfg.t_min, cfg.t_max]``.

    Always makes exactly ``cfg.iterations + 2`` objective calls: two interior
    points up front and one new point per iteration. Each iteration keeps the
    segment holding the better interior point; on ties the right segment is
    kept. Returns the midpoint of the final interval.
    """
    cfg = cfg or SearchConfig()
    if cfg.mode is Mode.MAX:
        f = lambda t: -objective(t)  # noqa: E731
    else:
        f = objective

    def evaluate(t):
        v = f(t)
        if trace is not None:
            trace.points.append(t)
            trace.values.append(v)
        return v

    r = cfg.ratio
    lo, hi = cfg.t_min, cfg.t_max
    t0 = hi - (hi - lo) * r
    t1 = lo + (hi - lo) * r
    v0 = evaluate(t0)
    v1 = evaluate(t1)
    if trace is not None:
        trace.intervals.append((lo, hi))
    for _ in range(cfg.iterations):
        if v0 >= v1:
            lo, t0, v0 = t0, t1, v1
            t1 = lo + (hi - lo) * r
            v1 = evaluate(t1)
        else:
            hi, t1, v1 = t1, t0, v0
            t0 = hi - (hi - lo) * r
            v0 = evaluate(t0)
        if trace is not None:
            trace.intervals.append((lo, hi))
    return (lo + hi) / 2
