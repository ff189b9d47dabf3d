"""Discrete-time nearest-neighbour processes on a lazily realised tree.

Two processes are provided:

* the lambda-biased walk: from a non-root vertex with ``s`` children it moves
  to the parent with probability ``lam / (lam + s)`` and to each child with
  probability ``1 / (lam + s)``; from the root it picks a child uniformly,
  or stays put when the root is childless;
* the once-reinforced walk (ORRW): every edge starts with weight 1 and has
  weight ``delta`` from the step after it is first traversed; moves are
  proportional to the weights of the incident edges.

``biased_transition`` / ``orrw_transition`` return the one-step law as a
dict for inspection. ``advance`` and ``run_episode`` share one sampling
kernel per process, so a single step and a full episode draw from the
random stream identically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from .episode import EpisodeRecord, Outcome, StopCondition
from .errors import DomainError, IsolatedVertexError
from .gwtree import ROOT, TreeSampler, VertexId

_NEVER = 1 << 62
ABSORB = -1

Edge = tuple[VertexId, VertexId]  # (parent, child)


@dataclass(frozen=True)
class BiasedParams:
    lam: float

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError(f"bias lambda must be positive, got {self.lam!r}")


@dataclass(frozen=True)
class OrrwParams:
    delta: float

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise DomainError(f"reinforcement delta must be positive, got {self.delta!r}")


Params = Union[BiasedParams, OrrwParams]


@dataclass(frozen=True)
class WalkState:
    current: VertexId = ROOT
    step_count: int = 0


@dataclass(frozen=True)
class OrrwState:
    """ORRW state; ``reinforced`` holds every edge traversed so far as (parent, child)."""

    current: VertexId = ROOT
    step_count: int = 0
    reinforced: frozenset[Edge] = field(default_factory=frozenset)


def edge(u: VertexId, v: VertexId) -> Edge:
    """Canonical (parent, child) form of the tree edge joining ``u`` and ``v``."""
    u, v = tuple(u), tuple(v)
    if len(u) > len(v):
        u, v = v, u
    if len(v) != len(u) + 1 or v[:-1] != u:
        raise DomainError(f"{u!r} and {v!r} are not neighbours")
    return (u, v)


# -- transition laws -----------------------------------------------------------


def biased_transition(sampler: TreeSampler, params: BiasedParams, v: VertexId) -> dict[VertexId, float]:
    v = tuple(v)
    kids = sampler.children_of(v)
    s = len(kids)
    lam = params.lam
    if not v:
        if s == 0:
            return {ROOT: 1.0}
        return {c: 1.0 / s for c in kids}
    out = {v[:-1]: lam / (lam + s)}
    out.update((c, 1.0 / (lam + s)) for c in kids)
    return out


def orrw_weights(sampler: TreeSampler, params: OrrwParams, state: OrrwState) -> dict[VertexId, float]:
    """Current edge weight toward each neighbour (1, or delta once traversed)."""
    v = tuple(state.current)
    delta = params.delta
    reinforced = state.reinforced
    out = {}
    if v:
        out[v[:-1]] = delta if (v[:-1], v) in reinforced else 1.0
    for c in sampler.children_of(v):
        out[c] = delta if (v, c) in reinforced else 1.0
    return out


def orrw_transition(sampler: TreeSampler, params: OrrwParams, state: OrrwState) -> dict[VertexId, float]:
    weights = orrw_weights(sampler, params, state)
    if not weights:
        raise IsolatedVertexError("ORRW at a childless root has no neighbour to move to")
    total = sum(weights.values())
    return {u: w / total for u, w in weights.items()}


# -- sampling kernels ----------------------------------------------------------
#
# A mover maps (node, child count) to the next node, drawing exactly one
# uniform from the stream. It returns ABSORB when there is nowhere to go.


def _biased_mover(tree: TreeSampler, lam: float, rand: Callable[[], float]):
    parent_of, first_child = tree.parent_of, tree.first_child

    def move(node: int, s: int) -> int:
        u = rand()
        if node == 0:
            if s == 0:
                return 0
            k = int(u * s)
            return first_child[0] + (k if k < s else s - 1)
        r = u * (lam + s)
        if r < lam:
            return parent_of[node]
        k = int(r - lam)
        return first_child[node] + (k if k < s else s - 1)

    return move


def _orrw_mover(tree: TreeSampler, delta: float, rand: Callable[[], float], reinf: set[int], nre: dict[int, int]):
    # An edge is keyed by its child endpoint; nre[v] counts reinforced child edges of v.
    parent_of, first_child = tree.parent_of, tree.first_child
    bump = delta - 1.0

    def move(node: int, s: int) -> int:
        if node == 0:
            if s == 0:
                rand()
                return ABSORB
            wp = 0.0
        else:
            wp = delta if node in reinf else 1.0
        r = rand() * (wp + s + bump * nre.get(node, 0))
        if r < wp:
            if node not in reinf:
                reinf.add(node)
                p = parent_of[node]
                nre[p] = nre.get(p, 0) + 1
            return parent_of[node]
        r -= wp
        c = first = first_child[node]
        for c in range(first, first + s):
            w = delta if c in reinf else 1.0
            if r < w:
                break
            r -= w
        if c not in reinf:
            reinf.add(c)
            nre[node] = nre.get(node, 0) + 1
        return c

    return move


def _orrw_sets(tree: TreeSampler, reinforced: Iterable[Edge]) -> tuple[set[int], dict[int, int]]:
    reinf: set[int] = set()
    nre: dict[int, int] = {}
    for p, c in reinforced:
        i = tree.node(c)
        if tree.node(p) != tree.parent_of[i]:
            raise DomainError(f"reinforced pair {(p, c)!r} is not a tree edge")
        if i not in reinf:
            reinf.add(i)
            nre[tree.parent_of[i]] = nre.get(tree.parent_of[i], 0) + 1
    return reinf, nre


def advance(sampler: TreeSampler, params: Params, state, rng: random.Random):
    """One step of the process; returns the successor state."""
    i = sampler.node(state.current)
    s = sampler.expand(i)
    if isinstance(params, BiasedParams):
        nxt = _biased_mover(sampler, params.lam, rng.random)(i, s)
        return WalkState(sampler.path(nxt), state.step_count + 1)
    if isinstance(params, OrrwParams):
        reinf, nre = _orrw_sets(sampler, state.reinforced)
        nxt = _orrw_mover(sampler, params.delta, rng.random, reinf, nre)(i, s)
        if nxt == ABSORB:
            raise IsolatedVertexError("ORRW at a childless root has no neighbour to move to")
        cur, new = tuple(state.current), sampler.path(nxt)
        return OrrwState(new, state.step_count + 1, state.reinforced | {edge(cur, new)})
    raise DomainError(f"unknown process parameters {params!r}")


# -- episodes ------------------------------------------------------------------


def run_episode(
    sampler: TreeSampler,
    params: Params,
    stop: StopCondition,
    rng: random.Random,
    observe_levels: Iterable[int] = (),
) -> EpisodeRecord:
    """Run the process from the root until ``stop`` fires.

    An ORRW that finds itself at a childless root is absorbed (outcome
    ``ABSORBED``); the biased walk instead stays at the root, which counts as
    a return. With no cap in ``stop`` the episode may not terminate.
    """
    if isinstance(params, BiasedParams):
        move = _biased_mover(sampler, params.lam, rng.random)
    elif isinstance(params, OrrwParams):
        move = _orrw_mover(sampler, params.delta, rng.random, set(), {})
    else:
        raise DomainError(f"unknown process parameters {params!r}")
    return _drive(sampler, stop, move, observe_levels)


def _drive(tree: TreeSampler, stop: StopCondition, move, observe_levels: Iterable[int]) -> EpisodeRecord:
    parent_of, nchild, depth, expand = tree.parent_of, tree.nchild, tree.depth, tree.expand
    ret = stop.return_to_root
    target = stop.reach_level if stop.reach_level is not None else -1
    level_cap = stop.max_level if stop.max_level is not None else _NEVER
    step_cap = stop.max_steps if stop.max_steps is not None else _NEVER
    dyn_level = stop.exit_first_at_level if stop.exit_first_at_level is not None else -1

    nu = -1
    if stop.exit_subtree is not None:
        nu = tree.realize(stop.exit_subtree)
        if nu is None:
            nu = -1
    seen = False
    nu_par = -2
    entry = None

    obs = frozenset(observe_levels)
    fv: dict[int, int] = {0: 0} if 0 in obs else {}

    node = 0
    level = 0
    steps = 0
    maxlev = 0
    outcome = None
    while outcome is None:
        s = nchild[node]
        if s < 0:
            s = expand(node)
        nxt = move(node, s)
        if nxt == ABSORB:
            outcome = Outcome.ABSORBED
            break
        steps += 1
        node = nxt
        level = depth[node]
        if level > maxlev:
            maxlev = level
        if obs and level in obs and node not in fv:
            fv[node] = steps
        if ret and node == 0:
            outcome = Outcome.RETURNED_TO_ROOT
        elif level == target:
            outcome = Outcome.REACHED_LEVEL
        elif seen and node == nu_par:
            outcome = Outcome.EXITED_SUBTREE
        elif level >= level_cap:
            outcome = Outcome.LEVEL_CAP
        elif steps >= step_cap:
            outcome = Outcome.STEP_CAP
        if not seen and (node == nu or (nu < 0 and level == dyn_level)):
            seen = True
            nu = node
            nu_par = parent_of[node]
            entry = steps

    return EpisodeRecord(
        outcome=outcome,
        steps=steps,
        max_level=maxlev,
        final=tree.path(node),
        first_visits={tree.path(i): t for i, t in fv.items()},
        subtree_root=tree.path(nu) if seen else None,
        subtree_entry=entry,
    )
