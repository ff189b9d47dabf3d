"""Monte Carlo estimators built on independent, replayable trials.

Trial ``i`` of a spec with master seed ``s`` realises its tree from
``derive_seed(s, i, "tree")`` and drives the process with
``derive_seed(s, i, "walk")``. Results are reduced in trial order with exact
summation, so an estimate is bit-identical for any number of workers.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .episode import Outcome, StopCondition
from .errors import DegenerateEstimateError, DomainError, GWWalksError
from .gwtree import OffspringDistribution, TreeSampler, VertexId
from .seeding import derive_seed, stream
from .vrjp import run_vrjp_episode
from .walks import BiasedParams, OrrwParams, run_episode

PROCESSES = ("biased", "orrw", "vrjp")
WORKERS_ENV = "GWWALKS_WORKERS"
CENSORING_WARN = 0.01
Z95 = 1.96


class HighCensoringWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Caps:
    """Per-trial limits. Hitting one censors the trial."""

    max_steps: int = 10**6
    max_jumps: int = 10**6
    max_time: float | None = None
    max_level: int | None = None

    def __post_init__(self) -> None:
        if self.max_steps < 1 or self.max_jumps < 1:
            raise DomainError("step and jump caps must be positive")
        if self.max_time is not None and not self.max_time > 0:
            raise DomainError("time cap must be positive")
        if self.max_level is not None and self.max_level < 1:
            raise DomainError("level cap must be positive")


@dataclass(frozen=True)
class TrialSpec:
    process: str
    offspring: OffspringDistribution
    seed: int
    trials: int
    lam: float | None = None
    delta: float | None = None
    caps: Caps = field(default_factory=Caps)
    pinned: tuple[tuple[VertexId, int], ...] = ()

    def __post_init__(self) -> None:
        if self.process not in PROCESSES:
            raise DomainError(f"unknown process {self.process!r}; expected one of {PROCESSES}")
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials!r}")
        self.params  # validates lambda / delta

    @property
    def params(self) -> BiasedParams | OrrwParams | None:
        if self.process == "biased":
            if self.lam is None:
                raise DomainError("the biased walk needs lambda")
            return BiasedParams(self.lam)
        if self.process == "orrw":
            if self.delta is None:
                raise DomainError("ORRW needs delta")
            return OrrwParams(self.delta)
        return None

    def with_parameter(self, name: str, value: float) -> TrialSpec:
        if name == "lambda":
            return replace(self, lam=value)
        if name == "delta":
            return replace(self, delta=value)
        if name == "m":
            return replace(self, offspring=self.offspring.with_mean(value))
        raise DomainError(f"cannot set parameter {name!r} on a trial spec")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate.

    ``trials`` is the number of trials run, ``samples`` the number entering
    the mean (fewer when censored or undefined trials are excluded).
    """

    mean: float
    stderr: float
    trials: int
    ci95: tuple[float, float]
    censored_fraction: float
    seed: int
    samples: int

    def as_dict(self) -> dict:
        return asdict(self)


# -- per-trial work ----------------------------------------------------------------
#
# A trial returns (value, censored, included).


def _stop(spec: TrialSpec, **events) -> StopCondition:
    caps = spec.caps
    if spec.process == "vrjp":
        return StopCondition(max_jumps=caps.max_jumps, max_time=caps.max_time, max_level=caps.max_level, **events)
    return StopCondition(max_steps=caps.max_steps, max_level=caps.max_level, **events)


def _episode(spec: TrialSpec, i: int, stop: StopCondition, observe=(), tree: TreeSampler | None = None):
    if tree is None:
        tree = _tree(spec, i)
    rng = stream(spec.seed, i, "walk")
    if spec.process == "vrjp":
        return run_vrjp_episode(tree, stop, rng, observe)
    return run_episode(tree, spec.params, stop, rng, observe)


def _tree(spec: TrialSpec, i: int) -> TreeSampler:
    return TreeSampler(spec.offspring, derive_seed(spec.seed, i, "tree"), dict(spec.pinned))


def _escape_trial(spec: TrialSpec, i: int, level: int):
    rec = _episode(spec, i, _stop(spec, return_to_root=True, reach_level=level))
    return float(rec.outcome is Outcome.REACHED_LEVEL), rec.censored, True


def _return_trial(spec: TrialSpec, i: int):
    rec = _episode(spec, i, _stop(spec, return_to_root=True))
    if rec.outcome is Outcome.ABSORBED:
        return 0.0, False, False
    tau = rec.elapsed_time if spec.process == "vrjp" else float(rec.steps)
    return tau, rec.censored, not rec.censored


def _embedded_trial(spec: TrialSpec, i: int, gap: int, base: int):
    tree = _tree(spec, i)
    if not tree.has_level(base):
        return 0.0, False, False
    stop = _stop(spec, exit_first_at_level=base)
    rec = _episode(spec, i, stop, observe=(base + gap,), tree=tree)
    if rec.subtree_root is None:
        # capped before any base-level vertex was reached
        return 0.0, rec.censored, False
    return float(rec.descendants_visited(gap)), rec.censored, True


_TRIALS = {"escape": _escape_trial, "return": _return_trial, "embedded": _embedded_trial}


def _run_chunk(job):
    kind, spec, args, lo, hi = job
    fn = _TRIALS[kind]
    return [fn(spec, i, *args) for i in range(lo, hi)]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def run_trials(kind: str, spec: TrialSpec, args: tuple = (), workers: int | None = None) -> list[tuple]:
    """Per-trial results in trial order, computed serially or on a process pool."""
    workers = default_workers() if workers is None else max(1, int(workers))
    n = spec.trials
    if workers == 1 or n < 2:
        return _run_chunk((kind, spec, args, 0, n))
    nchunks = min(n, workers * 4)
    bounds = [n * k // nchunks for k in range(nchunks + 1)]
    jobs = [(kind, spec, args, bounds[k], bounds[k + 1]) for k in range(nchunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return [r for part in parts for r in part]


def summarize(results: Sequence[tuple], seed: int) -> Estimate:
    trials = len(results)
    values = [v for v, _, used in results if used]
    censored = sum(1 for _, c, _ in results if c)
    n = len(values)
    if n == 0:
        raise DegenerateEstimateError(f"no usable trials out of {trials} ({censored} censored)")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
    stderr = math.sqrt(var / n)
    frac = censored / trials
    if frac > CENSORING_WARN:
        warnings.warn(f"{frac:.2%} of trials were censored by a cap", HighCensoringWarning, stacklevel=3)
    return Estimate(mean, stderr, trials, (mean - Z95 * stderr, mean + Z95 * stderr), frac, seed, n)


# -- estimators --------------------------------------------------------------------


def estimate_escape_probability(spec: TrialSpec, level: int, workers: int | None = None) -> Estimate:
    """Fraction of trials reaching ``level`` before returning to the root.

    Trees that die out above ``level`` count as returns; capped trials count
    as failures and are reported through ``censored_fraction``.
    """
    if isinstance(level, bool) or int(level) != level or level < 1:
        raise DomainError(f"level must be a positive integer, got {level!r}")
    return summarize(run_trials("escape", spec, (int(level),), workers), spec.seed)


def estimate_return_time(spec: TrialSpec, workers: int | None = None) -> Estimate:
    """Mean first return time to the root over uncensored trials.

    Steps for the discrete walks, process time for the VRJP.
    """
    return summarize(run_trials("return", spec, (), workers), spec.seed)


def estimate_embedded_offspring(
    spec: TrialSpec, n: int = 1, base_level: int | None = None, workers: int | None = None
) -> Estimate:
    """Mean number of vertices ``n`` levels below nu visited before the walk first steps above nu.

    ``nu`` is the first vertex visited at ``base_level`` (default ``n``, or 1
    for the VRJP, where ``n`` must be 1: children of nu). Trials on trees
    with no vertex at the base level are left out; capped trials keep the
    count reached so far.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if spec.process == "vrjp" and n != 1:
        raise DomainError("the VRJP statistic counts children only (n = 1)")
    if base_level is None:
        base_level = 1 if spec.process == "vrjp" else n
    if base_level < 1:
        raise DomainError("base level must be >= 1")
    return summarize(run_trials("embedded", spec, (int(n), int(base_level)), workers), spec.seed)


SWEEP_PARAMETERS = ("lambda", "delta", "m", "level")
QUANTITIES = ("escape", "return-time", "embedded")


@dataclass(frozen=True)
class SweepPoint:
    parameter: str
    value: float
    estimate: Estimate | None
    error: str | None = None
    seed: int = 0


def estimate(spec: TrialSpec, quantity: str, level: int | None = None, n: int = 1, workers: int | None = None) -> Estimate:
    if quantity == "escape":
        if level is None:
            raise DomainError("the escape estimate needs a level")
        return estimate_escape_probability(spec, level, workers)
    if quantity == "return-time":
        return estimate_return_time(spec, workers)
    if quantity == "embedded":
        return estimate_embedded_offspring(spec, n, level, workers)
    raise DomainError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")


def sweep(
    base: TrialSpec,
    parameter: str,
    grid: Sequence[float],
    *,
    quantity: str = "escape",
    level: int | None = None,
    n: int = 1,
    workers: int | None = None,
) -> list[SweepPoint]:
    """One estimate per grid value, in grid order.

    Point ``k`` uses master seed ``derive_seed(base.seed, "sweep", k)``.
    Failures are returned in the point's ``error`` rather than raised.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise DomainError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    if len(grid) == 0:
        raise DomainError("sweep grid is empty")
    out = []
    for k, value in enumerate(grid):
        seed = derive_seed(base.seed, "sweep", k)
        try:
            point_level = level
            if parameter == "level":
                if float(value) != int(value):
                    raise DomainError(f"level must be an integer, got {value!r}")
                point_level = int(value)
                spec = replace(base, seed=seed)
            else:
                spec = replace(base.with_parameter(parameter, value), seed=seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HighCensoringWarning)
                est = estimate(spec, quantity, point_level, n, workers)
            out.append(SweepPoint(parameter, value, est, None, seed))
        except (GWWalksError, ValueError) as exc:
            out.append(SweepPoint(parameter, value, None, f"{type(exc).__name__}: {exc}", seed))
    return out
