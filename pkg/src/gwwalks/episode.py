"""Stop conditions and episode records shared by the discrete walks and the VRJP."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DomainError
from .gwtree import VertexId


class Outcome(str, enum.Enum):
    RETURNED_TO_ROOT = "returned_to_root"
    REACHED_LEVEL = "reached_level"
    EXITED_SUBTREE = "exited_subtree"
    ABSORBED = "absorbed"
    STEP_CAP = "step_cap"
    TIME_CAP = "time_cap"
    JUMP_CAP = "jump_cap"
    LEVEL_CAP = "level_cap"

    @property
    def censored(self) -> bool:
        return self in _CAPS


_CAPS = frozenset({Outcome.STEP_CAP, Outcome.TIME_CAP, Outcome.JUMP_CAP, Outcome.LEVEL_CAP})


@dataclass(frozen=True)
class StopCondition:
    """Disjunction of stopping events; the episode ends at the first to fire.

    ``exit_subtree`` is H for a fixed vertex (first visit to its parent after
    the vertex itself was visited). ``exit_first_at_level`` is the same time
    for whichever vertex at that level is visited first. ``max_level`` is a
    censoring cap, unlike ``reach_level``. When several events fire on the
    same step the first in field order wins, and caps lose to real events.
    """

    return_to_root: bool = False
    reach_level: int | None = None
    exit_subtree: VertexId | None = None
    exit_first_at_level: int | None = None
    max_steps: int | None = None
    max_time: float | None = None
    max_jumps: int | None = None
    max_level: int | None = None

    def __post_init__(self) -> None:
        if self.reach_level is not None and self.reach_level < 1:
            raise DomainError("reach_level must be >= 1")
        if self.exit_subtree is not None and len(self.exit_subtree) == 0:
            raise DomainError("the root has no parent, so it cannot be exited")
        if self.exit_first_at_level is not None and self.exit_first_at_level < 1:
            raise DomainError("exit_first_at_level must be >= 1")
        for name in ("max_steps", "max_jumps", "max_level"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise DomainError(f"{name} must be positive")
        if self.max_time is not None and not self.max_time > 0:
            raise DomainError("max_time must be positive")

    @property
    def bounded(self) -> bool:
        return any(
            x is not None for x in (self.max_steps, self.max_time, self.max_jumps, self.max_level)
        )


@dataclass
class EpisodeRecord:
    """What happened in one run of a process until its stop condition.

    ``steps`` counts discrete steps, or jumps for the VRJP (the two coincide
    for the discrete walks, where ``elapsed_time`` stays ``None``).
    ``first_visits`` maps each vertex at an observed level to the step (or
    process time) of its first visit. ``subtree_root`` / ``subtree_entry``
    identify the vertex whose exit time was watched and when it was entered.
    The VRJP also fills ``local_times`` (values other than 1) and, on
    request, ``events``.
    """

    outcome: Outcome
    steps: int
    max_level: int
    final: VertexId
    first_visits: dict[VertexId, float] = field(default_factory=dict)
    subtree_root: VertexId | None = None
    subtree_entry: float | None = None
    elapsed_time: float | None = None
    events: list | None = None
    local_times: dict[VertexId, float] | None = None

    @property
    def censored(self) -> bool:
        return self.outcome.censored

    @property
    def jumps(self) -> int:
        return self.steps

    def descendants_visited(self, gap: int) -> int:
        """Distinct vertices ``gap`` levels below the subtree root that were visited."""
        nu = self.subtree_root
        if nu is None:
            return 0
        depth = len(nu) + gap
        return sum(1 for v in self.first_visits if len(v) == depth and v[: len(nu)] == nu)
