"""Ground sets, pseudodiversity evaluation, axiom checks and induced metrics."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

TOL = 1e-9
FULL_TRIPLE_LIMIT = 8
EXHAUSTIVE_LIMIT = 12


class DiversityError(Exception):
    """Base class for errors raised by this package."""


class DomainError(DiversityError, ValueError):
    pass


class SizeError(DiversityError, ValueError):
    pass


class UnsupportedError(DiversityError, ValueError):
    pass


class PreconditionError(DiversityError, ValueError):
    pass


def label_key(x):
    # ints before strings before tuples, so mixed label lists still sort
    if isinstance(x, bool):
        return (0, int(x))
    if isinstance(x, (int, float)):
        return (0, x)
    if isinstance(x, str):
        return (1, x)
    return (2, tuple(label_key(v) for v in x))


@dataclass(frozen=True)
class GroundSet:
    labels: tuple

    def __init__(self, labels: Iterable[Hashable]):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise DomainError("ground labels must be distinct")
        object.__setattr__(self, "labels", tuple(sorted(labels, key=label_key)))

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, x):
        return x in self._index

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {x: i for i, x in enumerate(self.labels)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise DomainError(f"unknown label {x!r}") from None

    def subset(self, items: Iterable) -> tuple:
        """Canonical form of a subset: sorted by ground order, no duplicates."""
        idx = sorted({self.index(x) for x in items})
        return tuple(self.labels[i] for i in idx)

    def mask(self, items: Iterable) -> int:
        m = 0
        for x in items:
            m |= 1 << self.index(x)
        return m

    def from_mask(self, m: int) -> tuple:
        return tuple(x for i, x in enumerate(self.labels) if m >> i & 1)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def all_masks(self) -> range:
        return range(1 << len(self.labels))


def canonical(items: Iterable) -> tuple:
    """Canonical subset for open (unbounded) ground spaces."""
    return tuple(sorted(set(items), key=label_key))


@dataclass(frozen=True)
class DiversityValue:
    lb: float
    ub: float

    def __post_init__(self):
        if not (0 <= self.lb <= self.ub):
            raise DomainError(f"invalid diversity interval [{self.lb}, {self.ub}]")

    @classmethod
    def exact(cls, v: float) -> "DiversityValue":
        v = float(v)
        return cls(v, v)

    @property
    def is_exact(self) -> bool:
        return self.lb == self.ub

    @property
    def center(self) -> float:
        return (self.lb + self.ub) / 2

    @property
    def width(self) -> float:
        return self.ub - self.lb

    def to_json(self):
        return {"lb": self.lb, "ub": self.ub}


@dataclass(frozen=True, eq=False)
class PseudodiversityFn:
    """A set function on finite subsets.

    ``evaluator`` receives a canonical tuple of labels and returns either a
    float (exact) or a :class:`DiversityValue`. ``ground`` is ``None`` for
    open spaces such as R^n, where labels are the points themselves.
    ``pairwise`` marks diameter-type functions whose value on any set is the
    largest value on its pairs; analysis uses it to transfer metric moduli.
    """

    evaluator: Callable[[tuple], object]
    name: str
    exact: bool = True
    ground: GroundSet | None = None
    pairwise: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def canon(self, items: Iterable) -> tuple:
        if self.ground is None:
            return canonical(items)
        return self.ground.subset(items)

    def __call__(self, items: Iterable) -> DiversityValue:
        return evaluate(self, items)

    def value(self, items: Iterable) -> float:
        """Upper end of the value; the exact value for exact functions."""
        return evaluate(self, items).ub


def evaluate(delta: PseudodiversityFn, items: Iterable) -> DiversityValue:
    A = delta.canon(items)
    hit = delta._cache.get(A)
    if hit is not None:
        return hit
    raw = delta.evaluator(A)
    out = raw if isinstance(raw, DiversityValue) else DiversityValue.exact(raw)
    if delta.exact and not out.is_exact:
        raise DomainError(f"{delta.name} declared exact but returned an interval")
    delta._cache[A] = out
    return out


def _probe(delta: PseudodiversityFn, A: tuple) -> tuple[float, float]:
    """(lb, ub) without validation, so negative values can be reported."""
    raw = delta.evaluator(A)
    if isinstance(raw, DiversityValue):
        return raw.lb, raw.ub
    return float(raw), float(raw)


def subset_values(delta: PseudodiversityFn, X: GroundSet) -> tuple[np.ndarray, np.ndarray]:
    """(lb, ub) arrays indexed by subset bitmask over X."""
    n = 1 << len(X)
    lb = np.empty(n)
    ub = np.empty(n)
    for m in range(n):
        lb[m], ub[m] = _probe(delta, X.from_mask(m))
    return lb, ub


# ---------------------------------------------------------------------------
# Metric tables


@dataclass(frozen=True, eq=False)
class MetricTable:
    ground: GroundSet
    entries: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.entries, dtype=float)
        n = len(self.ground)
        if d.shape != (n, n):
            raise DomainError(f"metric table shape {d.shape} does not match ground of size {n}")
        object.__setattr__(self, "entries", d)
        d.setflags(write=False)

    def violations(self, tol: float = TOL) -> list[str]:
        d = self.entries
        out = []
        if np.any(d < -tol):
            out.append("negative entry")
        if np.any(np.abs(np.diag(d)) > tol):
            out.append("nonzero diagonal")
        if np.any(np.abs(d - d.T) > tol):
            out.append("asymmetric")
        L = self.ground.labels
        for j in range(len(L)):
            # d[i,k] <= d[i,j] + d[j,k]
            bad = d > d[:, j, None] + d[None, j, :] + tol
            if bad.any():
                i, k = map(int, np.argwhere(bad)[0])
                out.append(f"triangle inequality fails at ({L[i]!r}, {L[j]!r}, {L[k]!r})")
                break
        return out

    def validate(self, tol: float = TOL) -> "MetricTable":
        problems = self.violations(tol)
        if problems:
            raise DomainError("invalid metric table: " + "; ".join(problems))
        return self

    def d(self, x, y) -> float:
        return float(self.entries[self.ground.index(x), self.ground.index(y)])

    def submatrix(self, items: Sequence) -> np.ndarray:
        idx = [self.ground.index(x) for x in items]
        return self.entries[np.ix_(idx, idx)]

    def to_json(self):
        return {"ground": list(self.ground.labels), "entries": self.entries.tolist()}


def induced_metric(delta: PseudodiversityFn, X: GroundSet, tol: float = TOL) -> MetricTable:
    n = len(X)
    d = np.zeros((n, n))
    for i, x in enumerate(X.labels):
        d[i, i] = evaluate(delta, (x,)).ub
        for j in range(i + 1, n):
            v = evaluate(delta, (x, X.labels[j]))
            if not v.is_exact:
                raise UnsupportedError(f"{delta.name} is not exact on pairs")
            d[i, j] = d[j, i] = v.ub
    return MetricTable(X, d).validate(tol)


# ---------------------------------------------------------------------------
# Axiom checks


@dataclass
class AxiomReport:
    name: str
    mode: str
    ground_size: int
    d1: list = field(default_factory=list)
    d2: list = field(default_factory=list)
    monotonicity: list = field(default_factory=list)
    d2_total: int = 0
    monotonicity_total: int = 0
    strict_d1: bool = True
    d2_method: str = "full"
    checked_triples: int = 0

    @property
    def passed(self) -> bool:
        return not (self.d1 or self.d2_total or self.monotonicity_total)

    @property
    def violations(self) -> int:
        return len(self.d1) + self.d2_total + self.monotonicity_total

    def to_json(self):
        return {
            "name": self.name,
            "mode": self.mode,
            "ground_size": self.ground_size,
            "passed": self.passed,
            "is_diversity": self.passed and self.strict_d1,
            "d1_violations": self.d1,
            "d2_violations": self.d2,
            "d2_total": self.d2_total,
            "d2_method": self.d2_method,
            "monotonicity_violations": self.monotonicity,
            "monotonicity_total": self.monotonicity_total,
            "checked_triples": self.checked_triples,
        }


def check_axioms(
    delta: PseudodiversityFn,
    X: GroundSet,
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
    tol: float = TOL,
    limit: int = 1000,
) -> AxiomReport:
    """Check D1 (weak form), D2 and monotonicity of ``delta`` over subsets of ``X``.

    Exhaustive mode enumerates every triple (A, B, C) for |X| <= 8. For
    8 < |X| <= 12 it first checks monotonicity on all pairs A ⊆ B; when that
    holds, D2 reduces to disjoint A, B and singleton C, which is what gets
    enumerated. At most ``limit`` violations of each kind are listed; totals
    are always exact.
    """
    n = len(X)
    if mode not in ("exhaustive", "sampled"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "exhaustive":
        if not delta.exact:
            raise UnsupportedError("interval-valued diversities cannot be checked exhaustively")
        if n > EXHAUSTIVE_LIMIT:
            raise SizeError(f"exhaustive mode needs |X| <= {EXHAUSTIVE_LIMIT}, got {n}")
    rep = AxiomReport(delta.name, mode, n)
    name = lambda m: list(X.from_mask(m))  # noqa: E731

    if mode == "sampled":
        for m in [0] + [1 << i for i in range(n)]:
            lo, hi = _probe(delta, X.from_mask(m))
            if lo < -tol or abs(hi) > tol:
                rep.d1.append({"set": name(m), "value": hi, "rule": "zero on sets of size <= 1"})
        _sampled(delta, X, samples, seed, tol, limit, rep)
        return rep

    _, v = subset_values(delta, X)
    for m in range(1 << n):
        size = bin(m).count("1")
        if v[m] < -tol:
            rep.d1.append({"set": name(m), "value": float(v[m]), "rule": "nonnegative"})
        elif size <= 1 and abs(v[m]) > tol:
            rep.d1.append({"set": name(m), "value": float(v[m]), "rule": "zero on sets of size <= 1"})
        elif size >= 2 and v[m] <= tol:
            rep.strict_d1 = False
    del rep.d1[limit:]

    _monotone(v, n, tol, limit, rep, name)

    if n <= FULL_TRIPLE_LIMIT:
        _d2_full(v, n, tol, limit, rep, name)
    elif rep.monotonicity_total == 0:
        _d2_reduced(v, n, tol, limit, rep, name)
    else:
        raise UnsupportedError(
            f"D2 on |X|={n} > {FULL_TRIPLE_LIMIT} needs monotonicity, which already fails"
        )
    return rep


def _monotone(v, n, tol, limit, rep, name):
    # best[B] = max over submasks A of v[A], via the standard sum-over-subsets pass
    best = v.copy()
    for i in range(n):
        bit = 1 << i
        idx = np.flatnonzero(np.arange(1 << n) & bit)
        best[idx] = np.maximum(best[idx], best[idx ^ bit])
    bad = np.flatnonzero(best > v + tol)
    for B in bad:
        B = int(B)
        A = B
        while True:
            A = (A - 1) & B
            if v[A] > v[B] + tol:
                rep.monotonicity_total += 1
                if len(rep.monotonicity) < limit:
                    rep.monotonicity.append(
                        {"A": name(A), "B": name(B), "delta_A": float(v[A]), "delta_B": float(v[B])}
                    )
            if A == 0:
                break


def _d2_full(v, n, tol, limit, rep, name):
    M = 1 << n
    ar = np.arange(M)
    union = v[np.bitwise_or.outer(ar, ar)]
    for C in range(1, M):
        left = v[ar | C]
        bad = union > left[:, None] + left[None, :] + tol
        rep.checked_triples += M * M
        if bad.any():
            hits = np.argwhere(bad)
            rep.d2_total += len(hits)
            for A, B in hits[: max(0, limit - len(rep.d2))]:
                A, B = int(A), int(B)
                rep.d2.append(_d2_row(v, A, B, C, name))


def _d2_reduced(v, n, tol, limit, rep, name):
    rep.d2_method = "reduced: monotone, disjoint A and B, singleton C"
    M = 1 << n
    ar = np.arange(M)
    for A in range(M):
        comp = (M - 1) & ~A
        # B ranges over submasks of the complement of A
        B = ar[(ar & ~comp) == 0]
        lhs = v[A | B]
        for c in range(n):
            C = 1 << c
            rhs = v[A | C] + v[B | C]
            bad = lhs > rhs + tol
            rep.checked_triples += len(B)
            if bad.any():
                for b in B[bad]:
                    rep.d2_total += 1
                    if len(rep.d2) < limit:
                        rep.d2.append(_d2_row(v, A, int(b), C, name))


def _d2_row(v, A, B, C, name):
    return {
        "A": name(A),
        "B": name(B),
        "C": name(C),
        "lhs": float(v[A | B]),
        "rhs": float(v[A | C] + v[C | B]),
    }


def _sampled(delta, X, samples, seed, tol, limit, rep):
    rng = random.Random(seed)
    n = len(X)
    val = lambda m: evaluate(delta, X.from_mask(m))  # noqa: E731
    name = lambda m: list(X.from_mask(m))  # noqa: E731
    rep.d2_method = "sampled"
    for _ in range(samples):
        A = rng.getrandbits(n)
        B = rng.getrandbits(n)
        C = rng.getrandbits(n) or (1 << rng.randrange(n))
        rep.checked_triples += 1
        # a violation must be certain: lower end of lhs above upper end of rhs
        if val(A | B).lb > val(A | C).ub + val(C | B).ub + tol:
            rep.d2_total += 1
            if len(rep.d2) < limit:
                rep.d2.append(
                    {"A": name(A), "B": name(B), "C": name(C),
                     "lhs": val(A | B).lb, "rhs": val(A | C).ub + val(C | B).ub}
                )
        small, big = A & B, A | B
        if val(small).lb > val(big).ub + tol:
            rep.monotonicity_total += 1
            if len(rep.monotonicity) < limit:
                rep.monotonicity.append(
                    {"A": name(small), "B": name(big), "delta_A": val(small).lb, "delta_B": val(big).ub}
                )


# ---------------------------------------------------------------------------
# Sandwich bound and map checks


@dataclass
class SandwichReport:
    rows: list
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self):
        return {"passed": self.passed, "rows": self.rows, "violations": self.violations}


def check_sandwich(
    delta: PseudodiversityFn, metric: MetricTable, subsets: Iterable[Iterable], tol: float = TOL
) -> SandwichReport:
    """Check diam(A) <= delta(A) <= MST(A), the extremes for a fixed induced metric.

    ``metric`` may also be a ``PointCloud``; its Euclidean table is used.
    """
    from .zoo import mst  # zoo builds on this module

    if hasattr(metric, "metric") and callable(metric.metric):
        metric = metric.metric()
    X = metric.ground
    for x, y in combinations(X.labels, 2):
        got = evaluate(delta, (x, y))
        want = metric.d(x, y)
        if abs(got.lb - want) > tol or abs(got.ub - want) > tol:
            raise PreconditionError(
                f"{delta.name} does not induce the metric at pair ({x!r}, {y!r}): "
                f"{got.ub} != {want}"
            )
    rows, bad = [], []
    for A in subsets:
        A = X.subset(A)
        sub = metric.submatrix(A)
        diam = float(sub.max()) if len(A) > 1 else 0.0
        upper = mst(metric, A).value.ub
        v = evaluate(delta, A)
        row = {"set": list(A), "diam": diam, "lb": v.lb, "ub": v.ub, "mst": upper}
        rows.append(row)
        if diam - tol > v.ub or v.lb > upper + tol:
            bad.append(row)
    return SandwichReport(rows, bad)


@dataclass
class UCReport:
    rows: list
    uniformly_continuous: bool
    nonexpansive: bool
    expansion_witness: dict | None

    def to_json(self):
        return {
            "uniformly_continuous": self.uniformly_continuous,
            "nonexpansive": self.nonexpansive,
            "expansion_witness": self.expansion_witness,
            "rows": self.rows,
        }


def check_map_uniform_continuity(
    f: dict, delta_x: PseudodiversityFn, delta_y: PseudodiversityFn, eps_grid: Iterable[float],
    tol: float = TOL,
) -> UCReport:
    """For each eps, the largest attained threshold d with delta_x(A) < d => delta_y(f(A)) < eps.

    ``d`` is reported as ``inf`` when every subset qualifies, and as ``None``
    when even the smallest positive threshold fails.
    """
    X = delta_x.ground
    if X is None:
        raise DomainError("map checks need a finite ground on the domain side")
    for x in X.labels:
        if x not in f:
            raise DomainError(f"map is not defined at {x!r}")
    if delta_y.ground is not None:
        for x in X.labels:
            if f[x] not in delta_y.ground:
                raise DomainError(f"image {f[x]!r} of {x!r} is outside the codomain")
    pairs = []
    for m in X.all_masks():
        A = X.from_mask(m)
        pairs.append((A, evaluate(delta_x, A).ub, evaluate(delta_y, [f[a] for a in A]).ub))
    thresholds = sorted({dx for _, dx, _ in pairs if dx > tol})
    rows = []
    ok = True
    for eps in eps_grid:
        best = None
        for d in thresholds + [float("inf")]:
            if all(dy < eps for _, dx, dy in pairs if dx < d):
                best = d
            else:
                break
        rows.append({"eps": eps, "d": best})
        ok = ok and best is not None
    witness = None
    for A, dx, dy in pairs:
        if dy > dx + tol:
            witness = {"set": list(A), "delta_x": dx, "delta_y": dy}
            break
    return UCReport(rows, ok, witness is None, witness)


def function_from_values(
    X: GroundSet, values: dict, name: str = "table"
) -> PseudodiversityFn:
    """Exact pseudodiversity from an explicit {frozenset: value} table."""
    table = {frozenset(k): float(v) for k, v in values.items()}
    return PseudodiversityFn(lambda A: table.get(frozenset(A), 0.0), name, True, X)


def cardinality_function(X: GroundSet) -> PseudodiversityFn:
    """delta(A) = |A|; violates D1 on singletons. Used as a negative control."""
    return PseudodiversityFn(lambda A: float(len(A)), "cardinality", True, X)


def zero_function(X: GroundSet | None = None) -> PseudodiversityFn:
    return PseudodiversityFn(lambda A: 0.0, "zero", True, X, pairwise=True)
