"""Vertex-reinforced jump process, simulated event by event.

While the process sits at ``u`` it jumps to a neighbour ``y`` at rate
``L(y)``, where ``L(y) = 1 + time spent at y so far``. Only ``L(u)`` grows
during the stay and ``u`` is not its own neighbour, so the rates are
constant between jumps and each stay is an exact exponential race: every
neighbour ``v`` draws ``h ~ Exp(1)`` and rings at ``h / L(v)``; the first
clock to ring decides both the holding time and the destination. A fresh
race is drawn on every arrival, which by memorylessness has the same law
as keeping one clock sequence per directed edge.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .episode import EpisodeRecord, Outcome, StopCondition
from .errors import DomainError, GWWalksError, IsolatedVertexError
from .gwtree import ROOT, TreeSampler, VertexId

CONSERVATION_TOL = 1e-9
CHECK_EVERY = 10_000
_NEVER = 1 << 62


class ConservationError(GWWalksError):
    """Accumulated local time no longer matches the elapsed process time."""


@dataclass(frozen=True)
class VrjpState:
    """Current vertex, process time, local times and jump count.

    ``local_times`` lists vertices whose local time differs from the default
    1; ``initial`` records values injected at time 0, which are the
    baseline for the occupation-time bookkeeping instead of 1.
    """

    current: VertexId = ROOT
    clock: float = 0.0
    local_times: Mapping[VertexId, float] = field(default_factory=dict)
    jump_count: int = 0
    initial: Mapping[VertexId, float] = field(default_factory=dict)

    @classmethod
    def start(cls, current: VertexId = ROOT, injected: Mapping[VertexId, float] | None = None) -> VrjpState:
        injected = {tuple(k): float(v) for k, v in (injected or {}).items()}
        if any(not v >= 1.0 for v in injected.values()):
            raise DomainError("injected local times must be >= 1")
        return cls(tuple(current), 0.0, dict(injected), 0, dict(injected))

    def local_time(self, v: VertexId) -> float:
        return self.local_times.get(tuple(v), 1.0)

    def occupation_total(self) -> float:
        """Sum over vertices of L(v, t) - L(v, 0)."""
        return math.fsum(
            val - self.initial.get(v, 1.0) for v, val in self.local_times.items()
        )


@dataclass(frozen=True)
class VrjpEvent:
    time: float
    source: VertexId
    target: VertexId
    holding: float


def _neighbour_nodes(tree: TreeSampler, node: int) -> list[int]:
    s = tree.expand(node)
    first = tree.first_child[node]
    out = [tree.parent_of[node]] if node else []
    out.extend(range(first, first + s))
    return out


def jump_rates(sampler: TreeSampler, state: VrjpState) -> dict[VertexId, float]:
    """Rate of jumping to each neighbour of the current vertex, i.e. its local time."""
    node = sampler.node(state.current)
    nbrs = _neighbour_nodes(sampler, node)
    if not nbrs:
        raise IsolatedVertexError("VRJP at a childless root has no neighbour to jump to")
    return {(v := sampler.path(i)): state.local_time(v) for i in nbrs}


def _race(rates: list[float], rand: Callable[[], float]) -> tuple[int, float]:
    """Index of the first clock to ring and its ringing time."""
    best = math.inf
    arg = 0
    for k, rate in enumerate(rates):
        t = -math.log(1.0 - rand()) / rate
        if t < best:
            best = t
            arg = k
    return arg, best


def next_event(sampler: TreeSampler, state: VrjpState, rng: random.Random) -> tuple[VrjpEvent, VrjpState]:
    rates = jump_rates(sampler, state)
    nbrs = list(rates)
    k, hold = _race(list(rates.values()), rng.random)
    cur = tuple(state.current)
    lt = dict(state.local_times)
    lt[cur] = state.local_time(cur) + hold
    clock = state.clock + hold
    event = VrjpEvent(clock, cur, nbrs[k], hold)
    return event, VrjpState(nbrs[k], clock, lt, state.jump_count + 1, state.initial)


def run_vrjp_episode(
    sampler: TreeSampler,
    stop: StopCondition,
    rng: random.Random,
    observe_levels: Iterable[int] = (),
    injected: Mapping[VertexId, float] | None = None,
    keep_events: bool = False,
) -> EpisodeRecord:
    """Run the VRJP from the root until ``stop`` fires.

    Returning to the root means the first jump that lands on it. A childless
    root has no neighbour; the episode is then frozen at time 0 and reported
    as ``ABSORBED``. ``max_steps`` is treated as a jump cap. Occupation-time
    conservation is verified every ``CHECK_EVERY`` jumps and at the end.
    """
    tree = sampler
    parent_of, first_child, nchild, depth, expand = (
        tree.parent_of, tree.first_child, tree.nchild, tree.depth, tree.expand,
    )
    rand = rng.random
    log = math.log

    nu = -1
    if stop.exit_subtree is not None:
        nu = tree.realize(stop.exit_subtree)
        if nu is None:
            nu = -1
    L = [1.0] * len(tree)
    comp = [0.0] * len(tree)
    baseline_excess = 0.0
    for v, val in (injected or {}).items():
        if not val >= 1.0:
            raise DomainError("injected local times must be >= 1")
        i = tree.realize(tuple(v))
        if i is None:
            raise DomainError(f"cannot inject a local time at absent vertex {v!r}")
        if len(L) < len(tree):
            L.extend([1.0] * (len(tree) - len(L)))
            comp.extend([0.0] * (len(tree) - len(comp)))
        baseline_excess += val - L[i]
        L[i] = float(val)

    ret = stop.return_to_root
    target = stop.reach_level if stop.reach_level is not None else -1
    level_cap = stop.max_level if stop.max_level is not None else _NEVER
    caps = [c for c in (stop.max_jumps, stop.max_steps) if c is not None]
    jump_cap = min(caps) if caps else _NEVER
    jump_cap_outcome = Outcome.JUMP_CAP if stop.max_jumps is not None and stop.max_jumps == jump_cap else Outcome.STEP_CAP
    time_cap = stop.max_time if stop.max_time is not None else math.inf
    dyn_level = stop.exit_first_at_level if stop.exit_first_at_level is not None else -1

    seen = False
    nu_par = -2
    entry = None

    obs = frozenset(observe_levels)
    fv: dict[int, float] = {0: 0.0} if 0 in obs else {}
    events: list[VrjpEvent] | None = [] if keep_events else None

    def conserve() -> None:
        n = len(L)
        occupied = (math.fsum(L) - math.fsum(comp)) - n - baseline_excess
        if abs(occupied - (clock - clock_c)) > CONSERVATION_TOL:
            raise ConservationError(
                f"occupation total {occupied!r} differs from elapsed time {clock - clock_c!r}"
            )

    node = 0
    clock = 0.0
    clock_c = 0.0
    jumps = 0
    maxlev = 0
    outcome = None
    while outcome is None:
        s = nchild[node]
        if s < 0:
            s = expand(node)
            if len(L) < len(parent_of):
                grow = len(parent_of) - len(L)
                L.extend([1.0] * grow)
                comp.extend([0.0] * grow)
        if node == 0 and s == 0:
            outcome = Outcome.ABSORBED
            break
        # exponential race, parent first then children in order (as in _race)
        if node:
            dest = parent_of[node]
            best = -log(1.0 - rand()) / L[dest]
        else:
            dest = -1
            best = math.inf
        first = first_child[node]
        for c in range(first, first + s):
            t = -log(1.0 - rand()) / L[c]
            if t < best:
                best = t
                dest = c
        hold = best
        if clock + hold > time_cap:
            hold = time_cap - clock
            dest = -1
        # compensated updates of L(node) and the clock
        y = hold - comp[node]
        t = L[node] + y
        comp[node] = (t - L[node]) - y
        L[node] = t
        y = hold - clock_c
        t = clock + y
        clock_c = (t - clock) - y
        clock = t
        if dest < 0:
            outcome = Outcome.TIME_CAP
            break
        jumps += 1
        if events is not None:
            events.append(VrjpEvent(clock, tree.path(node), tree.path(dest), hold))
        node = dest
        level = depth[node]
        if level > maxlev:
            maxlev = level
        if obs and level in obs and node not in fv:
            fv[node] = clock
        if ret and node == 0:
            outcome = Outcome.RETURNED_TO_ROOT
        elif level == target:
            outcome = Outcome.REACHED_LEVEL
        elif seen and node == nu_par:
            outcome = Outcome.EXITED_SUBTREE
        elif level >= level_cap:
            outcome = Outcome.LEVEL_CAP
        elif jumps >= jump_cap:
            outcome = jump_cap_outcome
        if not seen and (node == nu or (nu < 0 and level == dyn_level)):
            seen = True
            nu = node
            nu_par = parent_of[node]
            entry = clock
        if jumps % CHECK_EVERY == 0:
            conserve()
    conserve()

    record = EpisodeRecord(
        outcome=outcome,
        steps=jumps,
        max_level=maxlev,
        final=tree.path(node),
        first_visits={tree.path(i): t for i, t in fv.items()},
        subtree_root=tree.path(nu) if seen else None,
        subtree_entry=entry,
        elapsed_time=clock - clock_c,
        events=events,
        local_times={tree.path(i): L[i] - comp[i] for i in range(len(L)) if L[i] != 1.0},
    )
    return record
