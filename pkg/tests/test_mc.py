import math
import statistics

import pytest

from gwwalks import oracle
from gwwalks.errors import DegenerateEstimateError, DomainError
from gwwalks.gwtree import OffspringDistribution
from gwwalks.mc import (
    Caps,
    HighCensoringWarning,
    _escape_trial,
    TrialSpec,
    default_workers,
    estimate,
    estimate_embedded_offspring,
    estimate_escape_probability,
    estimate_return_time,
    run_trials,
    summarize,
    sweep,
)
from gwwalks.seeding import derive_seed

BINARY = OffspringDistribution.deterministic(2)
UNARY = OffspringDistribution.deterministic(1, allow_subcritical=True)


def test_summary_statistics():
    vals = [1.0, 4.0, 2.5, 7.0]
    est = summarize([(v, False, True) for v in vals], seed=9)
    assert est.mean == statistics.fmean(vals)
    assert est.stderr == pytest.approx(statistics.stdev(vals) / 2)
    lo, hi = est.ci95
    assert hi - est.mean == pytest.approx(1.96 * est.stderr)
    assert (est.trials, est.samples, est.seed) == (4, 4, 9)


def test_censored_trials_are_reported_and_warned():
    rows = [(1.0, False, True)] * 95 + [(0.0, True, False)] * 5
    with pytest.warns(HighCensoringWarning):
        est = summarize(rows, seed=0)
    assert est.censored_fraction == 0.05 and est.samples == 95


def test_no_usable_trials():
    with pytest.raises(DegenerateEstimateError):
        summarize([(0.0, True, False)], seed=0)


def test_spec_validation():
    with pytest.raises(DomainError):
        TrialSpec("biased", BINARY, seed=0, trials=10)
    with pytest.raises(DomainError):
        TrialSpec("levy", BINARY, seed=0, trials=10, lam=1.0)
    with pytest.raises(DomainError):
        TrialSpec("biased", BINARY, seed=0, trials=0, lam=1.0)
    with pytest.raises(DomainError):
        Caps(max_steps=0)


def test_trial_seeds_are_derived_per_index():
    spec = TrialSpec("biased", BINARY, seed=5, trials=30, lam=1.0)
    whole = run_trials("escape", spec, (6,), workers=1)
    assert [_escape_trial(spec, i, 6) for i in (3, 17, 29)] == [whole[3], whole[17], whole[29]]
    assert derive_seed(5, 1, "tree") != derive_seed(5, 2, "tree")


@pytest.mark.parametrize("process,kw", [("biased", {"lam": 1.2}), ("orrw", {"delta": 3.0}), ("vrjp", {})])
def test_worker_count_does_not_change_estimates(process, kw):
    spec = TrialSpec(process, OffspringDistribution.poisson(1.7), seed=17, trials=200, caps=Caps(10**4, 10**4), **kw)
    one = estimate_escape_probability(spec, 5, workers=1)
    three = estimate_escape_probability(spec, 5, workers=3)
    assert one == three


def test_env_var_sets_default_workers(monkeypatch):
    monkeypatch.setenv("GWWALKS_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("GWWALKS_WORKERS", "x")
    with pytest.raises(DomainError):
        default_workers()


def test_fair_ruin_estimate():
    spec = TrialSpec("biased", UNARY, seed=1, trials=20000, lam=1.0)
    est = estimate_escape_probability(spec, 5)
    assert abs(est.mean - 0.2) < 4 * est.stderr


def test_orrw_unary_escape():
    spec = TrialSpec("orrw", UNARY, seed=2, trials=20000, delta=2.0)
    est = estimate_escape_probability(spec, 4)
    assert abs(est.mean - oracle.orrw_escape_product(3, 2.0)) < 4 * est.stderr


def test_positive_recurrent_return_time():
    # the level of the walk on the binary tree is a reflected chain; E[tau] = 1 + 1 / (q - p)
    spec = TrialSpec("biased", BINARY, seed=3, trials=20000, lam=3.0)
    est = estimate_return_time(spec)
    assert abs(est.mean - 6.0) < 4 * est.stderr
    assert est.censored_fraction == 0.0


def test_embedded_offspring_biased():
    spec = TrialSpec("biased", BINARY, seed=4, trials=20000, lam=3.0)
    est = estimate_embedded_offspring(spec, n=2)
    assert abs(est.mean - oracle.biased_embedded_mean(2, 3, 2)) < 4 * est.stderr


def test_embedded_skips_trees_without_the_base_level():
    law = OffspringDistribution.custom({0: 0.5, 3: 0.5})
    spec = TrialSpec("biased", law, seed=0, trials=300, lam=2.0, caps=Caps(10**5))
    est = estimate_embedded_offspring(spec, n=1, base_level=2)
    assert est.samples < est.trials


def test_vrjp_embedded_only_children():
    with pytest.raises(DomainError):
        estimate_embedded_offspring(TrialSpec("vrjp", BINARY, seed=0, trials=5), n=2)


def test_estimate_dispatch():
    spec = TrialSpec("biased", BINARY, seed=0, trials=50, lam=3.0)
    assert estimate(spec, "return-time") == estimate_return_time(spec)
    with pytest.raises(DomainError):
        estimate(spec, "escape")
    with pytest.raises(DomainError):
        estimate(spec, "speed")


class TestSweep:
    def test_points_and_seeds(self):
        base = TrialSpec("biased", BINARY, seed=7, trials=200, lam=1.0)
        pts = sweep(base, "lambda", [0.5, 1.0, 4.0], quantity="escape", level=4)
        assert [p.value for p in pts] == [0.5, 1.0, 4.0]
        assert [p.seed for p in pts] == [derive_seed(7, "sweep", k) for k in range(3)]
        assert pts[0].estimate.mean > pts[2].estimate.mean

    def test_bad_point_becomes_error_row(self):
        base = TrialSpec("biased", BINARY, seed=7, trials=50, lam=1.0)
        pts = sweep(base, "lambda", [-1.0, 1.0], quantity="escape", level=3)
        assert pts[0].estimate is None and "DomainError" in pts[0].error
        assert pts[1].error is None

    def test_level_and_mean_sweeps(self):
        base = TrialSpec("biased", OffspringDistribution.poisson(2.0), seed=1, trials=100, lam=1.0)
        by_level = sweep(base, "level", [2, 3])
        assert all(p.estimate is not None for p in by_level)
        by_mean = sweep(base, "m", [1.5, 3.0], level=3)
        assert math.isfinite(by_mean[1].estimate.mean)

    def test_unknown_parameter(self):
        base = TrialSpec("biased", BINARY, seed=0, trials=5, lam=1.0)
        with pytest.raises(DomainError):
            sweep(base, "temperature", [1.0])
        with pytest.raises(DomainError):
            sweep(base, "lambda", [])


def test_distinct_vertices_before_return():
    """Each level-n vertex is hit before the return with probability (lam - 1) / (m (lam^n - 1)).

    Summing over levels gives (bound - 1) / m distinct non-root vertices.
    """
    import random

    from gwwalks.episode import StopCondition
    from gwwalks.gwtree import TreeSampler
    from gwwalks.walks import BiasedParams, run_episode

    m, lam, depth = 2, 3.0, 40
    stop = StopCondition(return_to_root=True, max_level=depth)
    rng = random.Random(77)
    tree = TreeSampler(BINARY, 0)
    n = 20000
    counts = [
        len(run_episode(tree, BiasedParams(lam), stop, rng, observe_levels=range(1, depth + 1)).first_visits)
        for _ in range(n)
    ]
    mean = statistics.fmean(counts)
    se = statistics.stdev(counts) / math.sqrt(n)
    expected = (oracle.mean_return_time_bound(m, lam) - 1) / m
    assert abs(mean - expected) < 4 * se
