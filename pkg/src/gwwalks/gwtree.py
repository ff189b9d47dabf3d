"""Lazily realised Galton-Watson trees.

A vertex is identified by its path of child indices from the root, so the
root is ``()`` and ``(1, 0)`` is the first child of the root's second child.
The number of children of a vertex is drawn from a uniform that is a hash
of ``(seed, path)``; the tree is therefore fixed by the seed no matter in
which order it is explored.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, NonConvergenceError, SubcriticalError, UnreachableVertexError
from .seeding import MASK64, child_hash, splitmix64, to_unit

VertexId = tuple[int, ...]
ROOT: VertexId = ()

KINDS = ("deterministic", "poisson", "geometric", "binomial", "custom")

# Tail mass below this is folded into the last tabulated count.
_TAIL_EPS = 1e-18


def level(v: VertexId) -> int:
    return len(v)


def parent(v: VertexId) -> VertexId:
    if not v:
        raise DomainError("the root has no parent")
    return v[:-1]


def is_ancestor(a: VertexId, v: VertexId) -> bool:
    """True when ``a`` lies on the path from the root to ``v`` (inclusive)."""
    return len(a) <= len(v) and v[: len(a)] == a


@dataclass(frozen=True)
class OffspringDistribution:
    """Law of the number of children of each vertex.

    Use the named constructors (:meth:`deterministic`, :meth:`poisson`, ...)
    rather than building instances by hand. ``params`` holds the parameters
    of the kind, for ``custom`` a tuple of ``(count, prob)`` pairs.

    Construction fails for mean ``m <= 1`` unless ``allow_subcritical`` is
    set, since the walks are studied on supercritical trees.
    """

    kind: str
    params: tuple
    allow_subcritical: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown offspring kind {self.kind!r}; expected one of {KINDS}")
        getattr(self, f"_check_{self.kind}")(*self.params)
        if not self.allow_subcritical and self.mean <= 1.0:
            raise SubcriticalError(
                f"offspring mean m = {self.mean!r} <= 1; the tree must be supercritical "
                "(1 < m < infinity); pass allow_subcritical to override"
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def deterministic(cls, b: int, *, allow_subcritical: bool = False) -> OffspringDistribution:
        return cls("deterministic", (b,), allow_subcritical)

    @classmethod
    def poisson(cls, mean: float, *, allow_subcritical: bool = False) -> OffspringDistribution:
        return cls("poisson", (float(mean),), allow_subcritical)

    @classmethod
    def geometric(cls, p: float, *, allow_subcritical: bool = False) -> OffspringDistribution:
        """Number of failures before the first success, P(k) = p (1 - p)^k."""
        return cls("geometric", (float(p),), allow_subcritical)

    @classmethod
    def binomial(cls, trials: int, p: float, *, allow_subcritical: bool = False) -> OffspringDistribution:
        return cls("binomial", (trials, float(p)), allow_subcritical)

    @classmethod
    def custom(
        cls,
        pmf: Mapping[int, float] | Iterable[tuple[int, float]],
        *,
        allow_subcritical: bool = False,
    ) -> OffspringDistribution:
        items = pmf.items() if isinstance(pmf, Mapping) else pmf
        pairs = tuple(sorted((int(k), float(p)) for k, p in items))
        return cls("custom", pairs, allow_subcritical)

    @classmethod
    def from_config(cls, kind: str, params: Sequence | Mapping, *, allow_subcritical: bool = False):
        """Build from a config-style ``kind`` and parameter list or mapping."""
        if kind == "custom":
            return cls.custom(params, allow_subcritical=allow_subcritical)
        if isinstance(params, Mapping):
            names = {
                "deterministic": ("b",),
                "poisson": ("mean",),
                "geometric": ("p",),
                "binomial": ("trials", "p"),
            }.get(kind, ())
            try:
                params = [params[name] for name in names]
            except KeyError as exc:
                raise DomainError(f"offspring kind {kind!r} needs parameters {names}") from exc
        ctor = getattr(cls, kind, None)
        if kind not in KINDS or ctor is None:
            raise DomainError(f"unknown offspring kind {kind!r}; expected one of {KINDS}")
        try:
            return ctor(*params, allow_subcritical=allow_subcritical)
        except TypeError as exc:
            raise DomainError(f"bad parameters {list(params)!r} for offspring kind {kind!r}") from exc

    def with_mean(self, m: float) -> OffspringDistribution:
        """Same family, re-parametrised to have mean ``m``."""
        kw = {"allow_subcritical": self.allow_subcritical}
        if self.kind == "deterministic":
            if m != int(m):
                raise DomainError(f"deterministic offspring needs an integer mean, got {m!r}")
            return self.deterministic(int(m), **kw)
        if self.kind == "poisson":
            return self.poisson(m, **kw)
        if self.kind == "geometric":
            return self.geometric(1.0 / (1.0 + m), **kw)
        if self.kind == "binomial":
            n = self.params[0]
            return self.binomial(n, m / n, **kw)
        raise DomainError("a custom offspring law cannot be re-parametrised by its mean")

    # -- validation ---------------------------------------------------------

    @staticmethod
    def _check_deterministic(b) -> None:
        if isinstance(b, bool) or not isinstance(b, int) or b < 0:
            raise DomainError(f"deterministic offspring count must be a nonnegative integer, got {b!r}")

    @staticmethod
    def _check_poisson(mean) -> None:
        if not (mean > 0 and math.isfinite(mean)):
            raise DomainError(f"poisson mean must be positive and finite, got {mean!r}")

    @staticmethod
    def _check_geometric(p) -> None:
        if not 0.0 < p < 1.0:
            raise DomainError(f"geometric success probability must lie in (0, 1), got {p!r}")

    @staticmethod
    def _check_binomial(n, p) -> None:
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise DomainError(f"binomial trials must be a positive integer, got {n!r}")
        if not 0.0 < p <= 1.0:
            raise DomainError(f"binomial probability must lie in (0, 1], got {p!r}")

    @staticmethod
    def _check_custom(*pairs) -> None:
        if not pairs:
            raise DomainError("custom pmf is empty")
        counts = [k for k, _ in pairs]
        if len(set(counts)) != len(counts):
            raise DomainError("custom pmf lists a count more than once")
        if any(k < 0 for k in counts):
            raise DomainError("custom pmf counts must be nonnegative")
        probs = [p for _, p in pairs]
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise DomainError("custom pmf probabilities must be nonnegative")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"custom pmf sums to {total!r}, not 1")

    # -- moments and pgf ----------------------------------------------------

    @cached_property
    def mean(self) -> float:
        k, prm = self.kind, self.params
        if k == "deterministic":
            return float(prm[0])
        if k == "poisson":
            return prm[0]
        if k == "geometric":
            return (1.0 - prm[0]) / prm[0]
        if k == "binomial":
            return prm[0] * prm[1]
        return math.fsum(c * p for c, p in prm)

    @cached_property
    def fixed_count(self) -> int | None:
        """The child count when the law is a point mass, else ``None``."""
        if self.kind == "deterministic":
            return self.params[0]
        if self.kind == "binomial" and self.params[1] == 1.0:
            return self.params[0]
        if self.kind == "custom":
            support = [c for c, p in self.params if p > 0]
            if len(support) == 1:
                return support[0]
        return None

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        kind, prm = self.kind, self.params
        if kind == "deterministic":
            return 1.0 if k == prm[0] else 0.0
        if kind == "poisson":
            mu = prm[0]
            return math.exp(k * math.log(mu) - mu - math.lgamma(k + 1))
        if kind == "geometric":
            p = prm[0]
            return p * (1.0 - p) ** k
        if kind == "binomial":
            n, p = prm
            if k > n:
                return 0.0
            return math.comb(n, k) * p**k * (1.0 - p) ** (n - k)
        return dict(prm).get(k, 0.0)

    def pgf(self, s: float) -> float:
        """Probability generating function E[s^Z] for s in [0, 1]."""
        kind, prm = self.kind, self.params
        if kind == "deterministic":
            return s ** prm[0]
        if kind == "poisson":
            return math.exp(prm[0] * (s - 1.0))
        if kind == "geometric":
            p = prm[0]
            return p / (1.0 - (1.0 - p) * s)
        if kind == "binomial":
            n, p = prm
            return (1.0 - p + p * s) ** n
        return math.fsum(p * s**c for c, p in prm)

    # -- sampling -----------------------------------------------------------

    @cached_property
    def _table(self) -> tuple[list[int], list[float]]:
        """Support points and cumulative probabilities for inverse-cdf draws."""
        if self.kind == "custom":
            counts = [c for c, p in self.params if p > 0]
            probs = [p for _, p in self.params if p > 0]
        else:
            counts, probs = [], []
            k, acc = 0, 0.0
            mode = max(self.mean, 1.0)
            while True:
                p = self.pmf(k)
                counts.append(k)
                probs.append(p)
                acc += p
                if self.kind == "binomial" and k == self.params[0]:
                    break
                if k > mode and (1.0 - acc < _TAIL_EPS or p < _TAIL_EPS * 1e-3):
                    break
                k += 1
        cdf, acc = [], 0.0
        for p in probs:
            acc += p
            cdf.append(acc)
        return counts, cdf

    def sample(self, u: float) -> int:
        """Inverse-cdf draw from a uniform ``u`` in [0, 1)."""
        fixed = self.fixed_count
        if fixed is not None:
            return fixed
        if self.kind == "geometric":
            return int(math.log1p(-u) / math.log1p(-self.params[0]))
        counts, cdf = self._table
        i = bisect.bisect_right(cdf, u * cdf[-1])
        return counts[min(i, len(counts) - 1)]


def extinction_probability(d: OffspringDistribution, tol: float = 1e-12, max_iter: int = 1_000_000) -> float:
    """Smallest root of ``f(q) = q`` on [0, 1], f the offspring pgf.

    Iterates ``q <- f(q)`` from 0, which increases monotonically to the
    smallest fixed point. Non-supercritical laws are answered directly: 1
    when ``m <= 1`` (0 for the point mass at one child, whose every q is a
    fixed point), because the iteration there converges only like 1/k.
    """
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol!r}")
    if d.fixed_count == 1:
        return 0.0
    if d.mean <= 1.0:
        return 1.0
    q = 0.0
    for _ in range(max_iter):
        fq = d.pgf(q)
        if abs(fq - q) <= tol:
            return fq
        q = fq
    raise NonConvergenceError("extinction-probability iteration did not converge", q)


class TreeSampler:
    """One lazily realised Galton-Watson tree.

    Vertices are stored in flat arrays indexed by an internal node number
    (root = 0); the children of a node occupy a contiguous block allocated
    the first time the node is expanded. The public methods speak
    :data:`VertexId` paths; the walk kernels use the node numbers directly.

    ``pinned`` fixes the child count of chosen vertices (e.g. ``{(): 2}``
    with a unary law gives the two-sided integer line). Pinned counts are
    part of the tree's definition, so they keep the seed-determinism
    guarantee.
    """

    def __init__(
        self,
        distribution: OffspringDistribution,
        seed: int,
        pinned: Mapping[VertexId, int] | None = None,
    ):
        self.distribution = distribution
        self.seed = int(seed) & MASK64
        self._pinned = {tuple(k): int(v) for k, v in (pinned or {}).items()}
        if any(v < 0 for v in self._pinned.values()):
            raise DomainError("pinned child counts must be nonnegative")
        self._fixed = distribution.fixed_count
        self._hashed = self._fixed is None
        self.parent_of: list[int] = [-1]
        self.first_child: list[int] = [-1]
        self.nchild: list[int] = [-1]
        self.depth: list[int] = [0]
        self._hash: list[int] = [splitmix64(self.seed)] if self._hashed else []

    def __len__(self) -> int:
        """Number of generated vertices."""
        return len(self.parent_of)

    # -- node-level kernel ----------------------------------------------------

    def expand(self, i: int) -> int:
        """Sample (once) the child count of node ``i`` and allocate its children."""
        s = self.nchild[i]
        if s >= 0:
            return s
        if self._pinned and (path := self.path(i)) in self._pinned:
            s = self._pinned[path]
        elif self._fixed is not None:
            s = self._fixed
        else:
            s = self.distribution.sample(to_unit(self._hash[i]))
        first = len(self.parent_of)
        self.nchild[i] = s
        self.first_child[i] = first
        if s:
            self.parent_of.extend([i] * s)
            self.first_child.extend([-1] * s)
            self.nchild.extend([-1] * s)
            self.depth.extend([self.depth[i] + 1] * s)
            if self._hashed:
                h = self._hash[i]
                self._hash.extend([child_hash(h, k) for k in range(s)])
        return s

    def path(self, i: int) -> VertexId:
        out = []
        parent_of, first = self.parent_of, self.first_child
        while i:
            p = parent_of[i]
            out.append(i - first[p])
            i = p
        return tuple(reversed(out))

    def node(self, v: VertexId) -> int:
        """Node number of a generated vertex."""
        i = 0
        for k in v:
            s = self.nchild[i]
            if s < 0 or not 0 <= k < s:
                raise UnreachableVertexError(f"vertex {tuple(v)!r} has not been generated")
            i = self.first_child[i] + k
        return i

    def realize(self, v: VertexId) -> int | None:
        """Expand the ancestors of ``v`` and return its node, or None if absent.

        Child counts are a pure function of the seed, so this never changes
        the tree; it only materialises part of it early.
        """
        i = 0
        for k in v:
            s = self.expand(i)
            if not 0 <= k < s:
                return None
            i = self.first_child[i] + k
        return i

    def has_level(self, n: int) -> bool:
        """Whether the tree has at least one vertex at level ``n`` (depth-first search)."""
        stack = [0]
        while stack:
            i = stack.pop()
            if self.depth[i] == n:
                return True
            s = self.expand(i)
            first = self.first_child[i]
            stack.extend(range(first + s - 1, first - 1, -1))
        return False

    # -- public vertex API ----------------------------------------------------

    def children_of(self, v: VertexId) -> list[VertexId]:
        i = self.node(v)
        s = self.expand(i)
        v = tuple(v)
        return [v + (k,) for k in range(s)]

    def num_children(self, v: VertexId) -> int:
        return self.expand(self.node(v))

    def is_generated(self, v: VertexId) -> bool:
        try:
            self.node(v)
        except UnreachableVertexError:
            return False
        return True

    def neighbours(self, v: VertexId) -> list[VertexId]:
        out = [v[:-1]] if v else []
        return out + self.children_of(v)


def offspring_mean(d: OffspringDistribution) -> float:
    return d.mean
