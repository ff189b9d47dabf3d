"""Closed-form predictions for the walks.

Ruin probabilities, supercriticality thresholds of the embedded branching
processes, the VRJP constant, the transience/recurrence classifier for the
biased walk and the bound on its mean return time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import DivergentSeriesError, DomainError, NoThresholdError, QuadratureDisagreementError

_MAX_THRESHOLD = 10**8


def _check_int(name: str, n: int, lo: int) -> None:
    if isinstance(n, bool) or int(n) != n or n < lo:
        raise DomainError(f"{name} must be an integer >= {lo}, got {n!r}")


def _log_ruin_ratio(a: float, n: int) -> float:
    """log of (r - 1) / (r^(n+1) - 1) with r = e^a, continuous at a = 0."""
    if n == 0:
        return 0.0
    if a == 0.0:
        return -math.log(n + 1)
    x = (n + 1) * a
    if a > 0:
        # (e^a - 1) / (e^x - 1) = (e^a - 1) e^-x / (1 - e^-x)
        return math.log(math.expm1(a)) - x - math.log(-math.expm1(-x))
    return math.log(-math.expm1(a)) - math.log(-math.expm1(x))


def ruin_probability(p: float, n: int) -> float:
    """P(hit n + 1 before 0) for the walk started at 1 with up-probability p.

    Evaluated through ``expm1`` of ``log(q / p)`` so that it is accurate and
    continuous across p = 1/2, where it equals 1 / (n + 1).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    _check_int("n", n, 0)
    a = math.log1p((1.0 - 2.0 * p) / p)
    return min(1.0, math.exp(_log_ruin_ratio(a, int(n))))


def _log_biased_embedded_mean(m: float, lam: float, n: int) -> float:
    return n * math.log(m) + _log_ruin_ratio(math.log(lam), n)


def biased_embedded_mean(m: float, lam: float, n: int) -> float:
    """Expected number of level-n descendants visited before backtracking, m^n (lam - 1) / (lam^(n+1) - 1).

    ``lam = 1`` gives the limit m^n / (n + 1).
    """
    if not m > 0:
        raise DomainError(f"m must be positive, got {m!r}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    _check_int("n", n, 0)
    return math.exp(_log_biased_embedded_mean(m, lam, int(n)))


def biased_threshold_n(m: float, lam: float) -> int:
    """Smallest n >= 1 with biased_embedded_mean(m, lam, n) > 1."""
    if not m > 1:
        raise DomainError(f"m must exceed 1, got {m!r}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    if lam >= m:
        raise NoThresholdError(f"no threshold exists when lambda >= m (lambda={lam!r}, m={m!r})")
    for n in range(1, _MAX_THRESHOLD):
        if biased_embedded_mean(m, lam, n) > 1.0:
            return n
    raise NoThresholdError(f"no threshold below {_MAX_THRESHOLD} for m={m!r}, lambda={lam!r}")


def orrw_escape_product(n: int, delta: float) -> float:
    """prod_{j=1}^{n} j / (j + delta): P(reach n + 1 before 0) for ORRW on the half-line."""
    _check_int("n", n, 0)
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    n = int(n)
    if n <= 150:
        num, den = float(math.factorial(n)), 1.0
        for j in range(1, n + 1):
            den *= j + delta
        if math.isfinite(den) and den > 0:
            return num / den
    return math.exp(math.lgamma(n + 1) + math.lgamma(1 + delta) - math.lgamma(n + 1 + delta))


def orrw_threshold_n(m: float, delta: float) -> int:
    """Smallest n >= 1 with m^n prod_{j<=n} j / (j + delta) > 1."""
    if not m > 1:
        raise DomainError(f"m must exceed 1, got {m!r}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    log_m = math.log(m)
    acc = 0.0
    for n in range(1, _MAX_THRESHOLD):
        acc += log_m + math.log(n) - math.log(n + delta)
        if acc > 0.0:
            return n
    raise NoThresholdError(f"no threshold below {_MAX_THRESHOLD} for m={m!r}, delta={delta!r}")


def orrw_embedded_mean(m: float, delta: float, n: int) -> float:
    return m**n * orrw_escape_product(n, delta)


# -- VRJP constant ---------------------------------------------------------------


def _integrand(z):
    return np.exp(-z) / (2.0 + z)


def _quad_truncated(tol: float) -> float:
    """Adaptive QUADPACK on [0, Z]; the dropped tail is below e^-Z / 2."""
    cut = math.log(1.0 / tol) + 2.0
    val, _ = integrate.quad(_integrand, 0.0, cut, epsabs=tol / 10, epsrel=0.0, limit=200)
    return val


def _mapped(t):
    # z = t / (1 - t) sends [0, 1) onto [0, inf); dz = dt / (1 - t)^2
    one_minus = 1.0 - t
    z = t / one_minus
    return np.exp(-z) / ((2.0 - t) * one_minus)


def _gauss_legendre_mapped(tol: float, order: int = 20, max_panels: int = 1 << 14) -> float:
    """Composite Gauss-Legendre on the compactified integral, panels doubled until stable."""
    x, w = np.polynomial.legendre.leggauss(order)
    prev = None
    panels = 1
    while panels <= max_panels:
        edges = np.linspace(0.0, 1.0, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = mid[:, None] + half[:, None] * x[None, :]
        total = float(np.sum(half[:, None] * w[None, :] * _mapped(nodes)))
        if prev is not None and abs(total - prev) < tol / 10:
            return total
        prev = total
        panels *= 2
    raise QuadratureDisagreementError("Gauss-Legendre panels did not stabilise")


@lru_cache(maxsize=None)
def vrjp_constant(tol: float = 1e-10) -> float:
    """The integral of e^-z / (2 + z) over [0, inf), about 0.3613.

    Computed by two unrelated quadratures that must agree to ``tol``.
    """
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol!r}")
    a = _quad_truncated(tol)
    b = _gauss_legendre_mapped(tol)
    if abs(a - b) > tol:
        raise QuadratureDisagreementError(f"quadratures disagree: {a!r} vs {b!r} (tol {tol!r})")
    return 0.5 * (a + b)


class TransienceCheck(NamedTuple):
    transient: bool
    margin: float


def vrjp_transient_condition(m: float) -> TransienceCheck:
    """Whether m times the VRJP constant exceeds 1; margin is m c - 1."""
    if not m > 1:
        raise DomainError(f"m must exceed 1, got {m!r}")
    margin = m * vrjp_constant() - 1.0
    return TransienceCheck(margin > 0.0, margin)


# -- biased walk: classification and return time -----------------------------------


class Verdict(str, enum.Enum):
    TRANSIENT = "transient"
    RECURRENT_NOT_POSITIVE = "recurrent-not-positive"
    POSITIVE_RECURRENT = "positive-recurrent"
    BOUNDARY_UNKNOWN = "boundary-unknown"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    justification: str


def classify_biased(m: float, lam: float) -> Classification:
    if not m > 1:
        raise DomainError(f"m must exceed 1, got {m!r}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    if lam < m:
        return Classification(Verdict.TRANSIENT, "0 < lambda < m: transient")
    if lam > m:
        return Classification(Verdict.POSITIVE_RECURRENT, "lambda > m: positive recurrent")
    return Classification(
        Verdict.RECURRENT_NOT_POSITIVE, "lambda = m: recurrent, mean return time infinite"
    )


def mean_return_time_bound(m: float, lam: float, tol: float = 1e-12) -> float:
    """Upper bound 1 + sum_{n>=1} m^n (lam - 1) / (lam^n - 1) on E[tau] when lam > m.

    Summed until the geometric tail bound (ratio m / lam) drops below ``tol``.
    """
    if not m > 1:
        raise DomainError(f"m must exceed 1, got {m!r}")
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol!r}")
    if not lam > m:
        raise DivergentSeriesError(f"the series diverges unless lambda > m (lambda={lam!r}, m={m!r})")
    ratio = m / lam
    terms = [1.0]
    n = 0
    while True:
        n += 1
        # m^n (lam - 1) / (lam^n - 1) = (lam - 1) ratio^n / (1 - lam^-n)
        terms.append((lam - 1.0) * ratio**n / -math.expm1(-n * math.log(lam)))
        tail = (lam - 1.0) * ratio ** (n + 1) / (1.0 - ratio) / -math.expm1(-(n + 1) * math.log(lam))
        if tail < tol:
            return math.fsum(terms)


def birth_death_escape(b: int, lam: float) -> float:
    """P(never return to the root) for the biased walk on the b-ary tree, 1 - lam / b."""
    _check_int("b", b, 1)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    if lam >= b:
        raise DomainError(f"escape probability is 0 unless lambda < b (lambda={lam!r}, b={b!r})")
    return 1.0 - lam / b


def biased_level_escape(b: int, lam: float, level: int) -> float:
    """P(reach ``level`` before returning to the root) for the biased walk on the b-ary tree.

    The first step is forced to level 1; after that the level performs a
    walk with up-probability b / (b + lam).
    """
    _check_int("b", b, 1)
    _check_int("level", level, 1)
    return ruin_probability(b / (b + lam), level - 1)
