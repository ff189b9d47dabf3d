"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Seeds are fixed up front. Monte Carlo comparisons use the tolerance stated
with each criterion (3 standard errors unless noted).
"""

import math
import random
import subprocess
import sys
import time
import warnings

import pytest

from brute import hit_top_before_zero, vrjp_constant_mp
from gwwalks import oracle
from gwwalks.gwtree import ROOT, OffspringDistribution, TreeSampler
from gwwalks.mc import (
    Caps,
    HighCensoringWarning,
    TrialSpec,
    estimate_embedded_offspring,
    estimate_escape_probability,
    estimate_return_time,
)
from gwwalks.vrjp import VrjpState, next_event, run_vrjp_episode
from gwwalks.episode import StopCondition
from verdicts import record

pytestmark = pytest.mark.slow

UNARY = OffspringDistribution.deterministic(1, allow_subcritical=True)
BINARY = OffspringDistribution.deterministic(2)
TERNARY = OffspringDistribution.deterministic(3)


def within(est, target, k=3.0):
    return abs(est.mean - target) <= k * est.stderr


def show(est):
    return f"{est.mean:.5f} +/- {est.stderr:.5f}"


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_01_ruin_against_simulation():
    fair, t1 = timed(estimate_escape_probability, TrialSpec("biased", UNARY, seed=101, trials=10**5, lam=1.0), 5)
    skew, t2 = timed(estimate_escape_probability, TrialSpec("biased", UNARY, seed=102, trials=10**5, lam=2.0), 4)
    exact_skew = oracle.ruin_probability(1 / 3, 3)
    ok = (
        within(fair, 0.2)
        and within(skew, 1 / 15)
        and exact_skew == pytest.approx(1 / 15, rel=1e-12)
        and exact_skew == pytest.approx(hit_top_before_zero(1 / 3, 4), rel=1e-9)
        and max(t1, t2) < 10
    )
    assert record(1, ok, f"fair {show(fair)} vs 0.2; p=1/3 {show(skew)} vs 1/15; {t1:.1f}s/{t2:.1f}s")


def test_criterion_02_orrw_half_line_product():
    spec = TrialSpec("orrw", UNARY, seed=201, trials=10**5, delta=2.0)
    est, t = timed(estimate_escape_probability, spec, 4)
    plain = estimate_escape_probability(TrialSpec("orrw", UNARY, seed=202, trials=10**5, delta=1.0), 5)
    ok = (
        within(est, 0.1)
        and oracle.orrw_escape_product(3, 2.0) == pytest.approx(0.1, rel=1e-15)
        and oracle.orrw_escape_product(4, 1.0) == pytest.approx(oracle.ruin_probability(0.5, 4), rel=1e-15)
        and within(plain, 0.2)
        and t < 30
    )
    assert record(2, ok, f"delta=2 {show(est)} vs 0.1; delta=1 {show(plain)} vs 0.2; {t:.1f}s")


def test_criterion_03_binary_escape():
    est, t = timed(estimate_escape_probability, TrialSpec("biased", BINARY, seed=301, trials=10**5, lam=1.0), 20)
    chain = hit_top_before_zero(2 / 3, 400)
    ok = within(est, 0.5) and oracle.birth_death_escape(2, 1.0) == 0.5 and abs(chain - 0.5) < 1e-9 and t < 60
    assert record(3, ok, f"{show(est)} vs 0.5 (finite chain {chain:.10f}); {t:.1f}s")


def test_criterion_04_positive_recurrence():
    spec = TrialSpec("biased", BINARY, seed=401, trials=10**5, lam=3.0, caps=Caps(max_steps=10**6))
    est, t = timed(estimate_return_time, spec)
    bound = oracle.mean_return_time_bound(2, 3)
    finite = est.censored_fraction < 1e-3
    below = est.ci95[0] <= bound
    assert record(
        4,
        finite and below and t < 60,
        f"E[tau] {show(est)}, censored {est.censored_fraction:.4%}, bound {bound:.5f}, "
        f"CI low {est.ci95[0]:.5f}; {t:.1f}s",
    )


def test_criterion_05_boundary_divergence():
    trials = 20_000
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HighCensoringWarning)
        short = estimate_return_time(TrialSpec("biased", BINARY, seed=501, trials=trials, lam=2.0, caps=Caps(max_steps=10**4)))
        long = estimate_return_time(TrialSpec("biased", BINARY, seed=502, trials=trials, lam=2.0, caps=Caps(max_steps=10**6)))
    joint = math.hypot(short.stderr, long.stderr)
    gap = long.mean - short.mean
    assert record(5, gap > 3 * joint, f"cap 1e4 {show(short)}, cap 1e6 {show(long)}, gap {gap / joint:.1f} joint stderr")


def test_criterion_06_embedded_offspring_mean():
    est, t = timed(estimate_embedded_offspring, TrialSpec("biased", BINARY, seed=601, trials=10**5, lam=3.0), 2)
    target = oracle.biased_embedded_mean(2, 3, 2)
    ok = within(est, 4 / 13) and target == pytest.approx(4 / 13, rel=1e-14) and t < 60
    assert record(6, ok, f"{show(est)} vs 4/13 = {4 / 13:.5f}; {t:.1f}s")


def _bracketed(value_at, n):
    return value_at(n) > 1 and all(value_at(k) <= 1 for k in range(1, n))


def test_criterion_07_thresholds():
    frozen = oracle.biased_threshold_n(2, 1.5) == 4 and oracle.orrw_threshold_n(2, 1) == 2
    biased_grid = [(m, f * m) for m in (1.5, 2.0, 3.0, 5.0) for f in (0.1, 0.3, 0.6, 0.8, 0.95)]
    orrw_grid = [(m, d) for m in (1.5, 2.0, 3.0, 5.0) for d in (0.5, 1.0, 2.0, 5.0, 10.0)]
    biased_ok = all(
        _bracketed(lambda k: oracle.biased_embedded_mean(m, lam, k), oracle.biased_threshold_n(m, lam))
        for m, lam in biased_grid
    )
    orrw_ok = all(
        _bracketed(lambda k: oracle.orrw_embedded_mean(m, d, k), oracle.orrw_threshold_n(m, d)) for m, d in orrw_grid
    )
    ok = frozen and biased_ok and orrw_ok and len(biased_grid) == len(orrw_grid) == 20
    assert record(7, ok, f"n(2, 1.5)={oracle.biased_threshold_n(2, 1.5)}, n_orrw(2, 1)={oracle.orrw_threshold_n(2, 1)}, 40 grid points bracketed")


def test_criterion_08_vrjp_constant():
    a = oracle._quad_truncated(1e-10)
    b = oracle._gauss_legendre_mapped(1e-10)
    c = oracle.vrjp_constant()
    ref = float(vrjp_constant_mp())
    ok = abs(a - b) < 1e-8 and f"{c:.2f}" == "0.36" and abs(c - 0.3613286) < 1e-7 and abs(c - ref) < 1e-10
    assert record(8, ok, f"quad {a!r}, Gauss-Legendre {b!r}, reference {ref!r}")


def test_criterion_09_vrjp_local_law():
    # integers ... -1, 0, 1, 2 ...: the root is 0, (1,) is 1 and (1, 0) is 2
    line = TreeSampler(UNARY, 0, {ROOT: 2})
    line.realize((1, 0))
    start = VrjpState.start((1,), {ROOT: 1.7, (1, 0): 1.0})
    rng = random.Random(901)
    n = 10**5
    to_zero = 0
    worst = 0.0
    for _ in range(n):
        ev, after = next_event(line, start, rng)
        to_zero += ev.target == ROOT
        worst = max(worst, abs(after.occupation_total() - after.clock))
    p = to_zero / n
    se = math.sqrt(p * (1 - p) / n)
    target = 1.7 / 2.7
    # long runs re-check conservation every 10^4 jumps internally
    long_runs = [
        run_vrjp_episode(TreeSampler(tree, 902 + k), StopCondition(max_jumps=50_000), random.Random(902 + k))
        for k, tree in enumerate((UNARY, BINARY, TERNARY))
    ]
    drift = max(abs(math.fsum(v - 1 for v in r.local_times.values()) - r.elapsed_time) for r in long_runs)
    ok = abs(p - target) <= 3 * se and worst <= 1e-9 and drift <= 1e-9
    assert record(9, ok, f"{p:.5f} +/- {se:.5f} vs 1.7/2.7 = {target:.5f}; conservation drift {max(worst, drift):.1e}")


def test_criterion_10_vrjp_transience_ternary():
    esc, t1 = timed(estimate_escape_probability, TrialSpec("vrjp", TERNARY, seed=1001, trials=10**5), 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HighCensoringWarning)
        y, t2 = timed(
            estimate_embedded_offspring, TrialSpec("vrjp", TERNARY, seed=1002, trials=20_000, caps=Caps(max_level=30)), 1
        )
    bound = 3 * oracle.vrjp_constant()
    escape_ok = esc.mean >= 0.05
    bound_ok = y.ci95[1] >= bound
    assert record(
        10,
        escape_ok and bound_ok and t1 + t2 < 300,
        f"escape {show(esc)} (>= 0.05: {escape_ok}); children before exit {show(y)} vs 3c = {bound:.5f} "
        f"(CI high {y.ci95[1]:.5f}, censored {y.censored_fraction:.1%}); {t1 + t2:.0f}s",
    )


CLI_RUN = [
    "simulate", "--process", "vrjp", "--offspring-kind", "poisson", "--offspring-params", "2.5",
    "--level", "6", "--trials", "3000", "--seed", "1101", "--max-jumps", "100000",
]


def test_criterion_11_reproducibility():
    spec = TrialSpec("orrw", OffspringDistribution.poisson(1.8), seed=1102, trials=4000, delta=2.0, caps=Caps(10**5))
    serial = estimate_escape_probability(spec, 6, workers=1)
    same = serial == estimate_escape_probability(spec, 6, workers=1)
    parallel = all(serial == estimate_escape_probability(spec, 6, workers=w) for w in (2, 3))

    def cli(*extra, env=None):
        return subprocess.run([sys.executable, "-m", "gwwalks.cli", *CLI_RUN, *extra], capture_output=True, check=True, env=env).stdout

    import os

    base = cli("--workers", "1")
    outputs = [cli("--workers", "1"), cli("--workers", "2"), cli(env={**os.environ, "GWWALKS_WORKERS": "3"})]
    json_runs = [cli("--format", "json", "--workers", str(w)) for w in (1, 2)]
    bytes_ok = all(o == base for o in outputs) and json_runs[0] == json_runs[1] and base
    assert record(11, same and parallel and bool(bytes_ok), f"estimates equal across 1/2/3 workers; CLI csv+json byte-identical ({len(base)} bytes)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
