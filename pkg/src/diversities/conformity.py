"""Conformities on finite ground sets.

A conformity is a filter on the collections of finite subsets. Over a finite
ground every filter is principal: its smallest member (the kernel) is the
intersection of all base members, and two bases generate the same filter
exactly when their kernels agree. Subsets are bitmasks over the ground.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import (
    TOL,
    DomainError,
    GroundSet,
    MetricTable,
    PseudodiversityFn,
    SizeError,
    UnsupportedError,
    function_from_values,
    induced_metric,
    subset_values,
)

MAX_GROUND = 6


def _bits(m: int):
    i = 0
    while m:
        if m & 1:
            yield i
        m >>= 1
        i += 1


def _popcount(m: int) -> int:
    return bin(m).count("1")


@dataclass(frozen=True)
class SetFamily:
    """A collection of subsets of ``ground``, stored as bitmasks."""

    ground: GroundSet
    members: frozenset

    @classmethod
    def of(cls, ground: GroundSet, subsets: Iterable[Iterable]) -> "SetFamily":
        return cls(ground, frozenset(ground.mask(s) for s in subsets))

    @classmethod
    def powerset(cls, ground: GroundSet) -> "SetFamily":
        return cls(ground, frozenset(ground.all_masks()))

    @classmethod
    def discrete(cls, ground: GroundSet) -> "SetFamily":
        return cls(ground, frozenset([0] + [1 << i for i in range(len(ground))]))

    def __contains__(self, A) -> bool:
        m = A if isinstance(A, int) else self.ground.mask(A)
        return m in self.members

    def __len__(self):
        return len(self.members)

    def __le__(self, other: "SetFamily") -> bool:
        _same(self, other)
        return self.members <= other.members

    def __and__(self, other: "SetFamily") -> "SetFamily":
        _same(self, other)
        return SetFamily(self.ground, self.members & other.members)

    def __or__(self, other: "SetFamily") -> "SetFamily":
        _same(self, other)
        return SetFamily(self.ground, self.members | other.members)

    def sorted_masks(self) -> list:
        return sorted(self.members, key=lambda m: (_popcount(m), self.ground.from_mask(m)))

    def subsets(self) -> list:
        return [self.ground.from_mask(m) for m in self.sorted_masks()]

    def down_closure(self) -> "SetFamily":
        out = set()
        for m in self.members:
            sub = m
            while True:
                out.add(sub)
                if sub == 0:
                    break
                sub = (sub - 1) & m
        return SetFamily(self.ground, frozenset(out))

    def to_json(self):
        return [list(s) for s in self.subsets()]


def _same(a, b):
    if a.ground != b.ground:
        raise DomainError("families live on different grounds")


def compose(U: SetFamily, V: SetFamily) -> SetFamily:
    """{u ∪ v : u ∈ U, v ∈ V, u ∩ v ≠ ∅}."""
    _same(U, V)
    return SetFamily(U.ground, frozenset(u | v for u in U.members for v in V.members if u & v))


def _meet_closure(families: Sequence[SetFamily]) -> dict:
    """Intersection closure of a base as {members: index tuple of a generating meet}."""
    seen = {f.members: (i,) for i, f in enumerate(families)}
    frontier = list(seen.items())
    while frontier:
        nxt = []
        for mem, idx in frontier:
            for j, f in enumerate(families):
                m = mem & f.members
                if m not in seen:
                    seen[m] = tuple(sorted(set(idx) | {j}))
                    nxt.append((m, seen[m]))
        frontier = nxt
    return seen


@dataclass(frozen=True)
class FilterBase:
    """A nonempty list of families generating a filter on collections of subsets."""

    families: tuple

    def __post_init__(self):
        if not self.families:
            raise DomainError("a filter base needs at least one family")
        g = self.families[0].ground
        for f in self.families:
            if f.ground != g:
                raise DomainError("families live on different grounds")
            if not f.members:
                raise DomainError("the empty family cannot be a filter element")
        if len(g) > MAX_GROUND:
            raise SizeError(f"ground of size {len(g)} exceeds {MAX_GROUND}")
        if not self.kernel.members:
            raise DomainError("base members meet in the empty family")

    @property
    def ground(self) -> GroundSet:
        return self.families[0].ground

    @property
    def kernel(self) -> SetFamily:
        out = self.families[0].members
        for f in self.families[1:]:
            out &= f.members
        return SetFamily(self.ground, out)

    def closure(self) -> list:
        return [SetFamily(self.ground, m) for m in _meet_closure(self.families)]

    def generates_same(self, other: "FilterBase") -> bool:
        return dominates(self.families, other.families) and dominates(other.families, self.families)

    def to_json(self):
        return {"ground": list(self.ground.labels), "families": [f.to_json() for f in self.families]}


def dominates(base: Sequence, others: Sequence) -> bool:
    """Every member of ``others`` contains some meet of members of ``base``."""
    meets = list(_meet_closure(list(base)))
    return all(any(m <= o.members for m in meets) for o in others)


@dataclass
class ViolationReport:
    axiom: str
    family: int
    detail: dict

    passed = False

    def to_json(self):
        return {"passed": False, "axiom": self.axiom, "family": self.family, "detail": self.detail}


@dataclass(frozen=True)
class ConformityBase:
    base: FilterBase
    certificates: tuple = ()
    labels: tuple = ()

    passed = True

    @property
    def ground(self) -> GroundSet:
        return self.base.ground

    @property
    def families(self) -> tuple:
        return self.base.families

    @property
    def kernel(self) -> SetFamily:
        return self.base.kernel

    def to_json(self):
        out = self.base.to_json()
        out["certificates"] = list(self.certificates)
        return out


def validate_conformity(base: FilterBase) -> ConformityBase | ViolationReport:
    X = base.ground
    singles = [1 << i for i in range(len(X))]
    for k, C in enumerate(base.families):
        for s in singles:
            if s not in C.members:
                return ViolationReport("C1", k, {"missing": list(X.from_mask(s))})
    for k, C in enumerate(base.families):
        for m in sorted(C.members):
            for i in _bits(m):
                b = m & ~(1 << i)
                if b not in C.members:
                    return ViolationReport("C2", k, {"member": list(X.from_mask(m)),
                                                     "missing_subset": list(X.from_mask(b))})
    closure = sorted(_meet_closure(base.families).items(), key=lambda kv: (len(kv[1]), kv[1]))
    certs = []
    for k, C in enumerate(base.families):
        for mem, idx in closure:
            D = SetFamily(X, mem)
            if compose(D, D) <= C:
                certs.append({"family": k, "witness_meet": list(idx)})
                break
        else:
            K = base.kernel
            bad = sorted(compose(K, K).members - C.members)[0]
            return ViolationReport("C3", k, {"kernel_square_escapes": list(X.from_mask(bad))})
    return ConformityBase(base, tuple(certs))


def conformity(families: Sequence[SetFamily]) -> ConformityBase:
    """Validate and return, raising on the first violation."""
    out = validate_conformity(FilterBase(tuple(families)))
    if isinstance(out, ViolationReport):
        raise DomainError(f"not a conformity: {out.axiom} fails for family {out.family}: {out.detail}")
    return out


def discrete_conformity(X: GroundSet) -> ConformityBase:
    return conformity([SetFamily.discrete(X)])


def indiscrete_conformity(X: GroundSet) -> ConformityBase:
    return conformity([SetFamily.powerset(X)])


# ---------------------------------------------------------------------------
# Generation from pseudodiversities


def _exact_table(delta: PseudodiversityFn, X: GroundSet):
    if not delta.exact:
        raise UnsupportedError(f"{delta.name} is not exact")
    lb, ub = subset_values(delta, X)
    if (lb != ub).any():
        raise UnsupportedError(f"{delta.name} returned interval values")
    return ub


def scale_grid(values) -> list:
    """Attained values plus one scale below the smallest positive value."""
    pos = sorted({float(v) for v in values if v > 0})
    grid = sorted(set(pos) | {pos[0] / 2 if pos else 0.0}, reverse=True)
    return grid


def generate_from_diversities(deltas: Sequence[PseudodiversityFn], X: GroundSet) -> ConformityBase:
    """Base {δ⁻¹[0, ε]} over each δ and each ε in its attained-value grid."""
    if len(X) > MAX_GROUND:
        raise SizeError(f"ground of size {len(X)} exceeds {MAX_GROUND}")
    fams, labels, seen = [], [], set()
    for delta in deltas:
        v = _exact_table(delta, X)
        for eps in scale_grid(v):
            mem = frozenset(m for m in X.all_masks() if v[m] <= eps)
            if mem in seen:
                continue
            seen.add(mem)
            fams.append(SetFamily(X, mem))
            labels.append({"delta": delta.name, "eps": eps})
    out = validate_conformity(FilterBase(tuple(fams)))
    if isinstance(out, ViolationReport):
        raise DomainError(f"generated base is not a conformity: {out.to_json()}")
    return ConformityBase(out.base, out.certificates, tuple(labels))


def level_family(delta: PseudodiversityFn, X: GroundSet, eps: float, strict: bool = False) -> SetFamily:
    """δ⁻¹[0, ε], or δ⁻¹[0, ε) when ``strict``."""
    v = _exact_table(delta, X)
    keep = (lambda x: x < eps) if strict else (lambda x: x <= eps)
    return SetFamily(X, frozenset(m for m in X.all_masks() if keep(v[m])))


def pointwise_conformity(functions: dict) -> ConformityBase:
    """Conformity of pointwise convergence, sampled: labels map to value vectors.

    Coordinate s contributes the pseudodiversity A ↦ max f(s) − min f(s) over f ∈ A.
    """
    if not functions:
        raise DomainError("at least one function is required")
    X = GroundSet(list(functions))
    lengths = {len(v) for v in functions.values()}
    if len(lengths) != 1 or 0 in lengths:
        raise DomainError("all functions need the same nonempty list of sample values")
    deltas = []
    for s in range(lengths.pop()):
        vals = {}
        for m in X.all_masks():
            A = X.from_mask(m)
            col = [float(functions[f][s]) for f in A]
            vals[A] = max(col) - min(col) if len(col) > 1 else 0.0
        deltas.append(function_from_values(X, vals, f"spread@{s}"))
    return generate_from_diversities(deltas, X)


# ---------------------------------------------------------------------------
# Uniformities and topologies


def _rel_compose(R: frozenset, S: frozenset) -> frozenset:
    return frozenset((x, z) for (x, y) in R for (y2, z) in S if y == y2)


@dataclass(frozen=True)
class UniformityBase:
    ground: GroundSet
    relations: tuple

    def __post_init__(self):
        if not self.relations:
            raise DomainError("a uniformity base needs at least one relation")

    @property
    def kernel(self) -> frozenset:
        out = self.relations[0]
        for r in self.relations[1:]:
            out &= r
        return out

    def validate(self) -> dict:
        n = len(self.ground)
        diag = {(i, i) for i in range(n)}
        u1 = all(diag <= r for r in self.relations)
        u2 = all(all((y, x) in r for (x, y) in r) for r in self.relations)
        meets = list(_meet_closure([_Rel(r) for r in self.relations]))
        u3 = all(any(_rel_compose(w, w) <= r for w in meets) for r in self.relations)
        return {"U1": u1, "U2": u2, "U3": u3}

    def generates_same(self, other: "UniformityBase") -> bool:
        a = [_Rel(r) for r in self.relations]
        b = [_Rel(r) for r in other.relations]
        return dominates(a, b) and dominates(b, a)

    def to_json(self):
        L = self.ground.labels
        return {"ground": list(L),
                "relations": [sorted([L[x], L[y]] for x, y in r) for r in self.relations]}


@dataclass(frozen=True)
class _Rel:
    members: frozenset


def induced_uniformity(c: ConformityBase) -> UniformityBase:
    """One relation {(x, y) : {x, y} ∈ C} per base family."""
    if not isinstance(c, ConformityBase):
        raise DomainError("induced uniformity needs a validated conformity")
    n = len(c.ground)
    rels = tuple(
        frozenset((i, j) for i in range(n) for j in range(n) if (1 << i | 1 << j) in C.members)
        for C in c.families
    )
    return UniformityBase(c.ground, rels)


def metric_uniformity(metrics: Sequence[MetricTable]) -> UniformityBase:
    """Base {d < ε} over each metric and each positive attained distance, plus the full relation."""
    X = metrics[0].ground
    n = len(X)
    rels = []
    for mt in metrics:
        d = mt.entries
        off = [d[i, j] for i in range(n) for j in range(n) if i != j]
        pos = sorted({float(v) for v in off if v > 0})
        for eps in pos + [max(pos, default=0.0) + 1.0]:
            rels.append(frozenset((i, j) for i in range(n) for j in range(n) if d[i, j] < eps))
    return UniformityBase(X, tuple(dict.fromkeys(rels)))


@dataclass(frozen=True)
class Topology:
    ground: GroundSet
    opens: frozenset

    def is_discrete(self) -> bool:
        return len(self.opens) == 1 << len(self.ground)

    def is_indiscrete(self) -> bool:
        return self.opens == frozenset({0, self.ground.full_mask})

    def to_json(self):
        return {"ground": list(self.ground.labels),
                "opens": [list(self.ground.from_mask(m)) for m in sorted(self.opens)]}


def uniform_topology(u: UniformityBase) -> Topology:
    """O is open iff each x ∈ O has a relation U in the filter with N(x, U) ⊆ O."""
    n = len(u.ground)
    K = u.kernel  # smallest filter member, so the best neighbourhoods
    nbhd = [sum(1 << y for y in range(n) if (x, y) in K) for x in range(n)]
    opens = frozenset(O for O in u.ground.all_masks() if all(nbhd[x] & ~O == 0 for x in _bits(O)))
    return Topology(u.ground, opens)


def metric_topology(mt: MetricTable) -> Topology:
    """Open sets of the pseudometric: unions of open balls."""
    n = len(mt.ground)
    d = mt.entries
    pos = [d[i, j] for i in range(n) for j in range(n) if d[i, j] > 0]
    r = min(pos, default=1.0)
    balls = {sum(1 << y for y in range(n) if d[x, y] < r) for x in range(n)}
    opens = {0}
    for k in range(1, len(balls) + 1):
        for combo in itertools.combinations(sorted(balls), k):
            m = 0
            for b in combo:
                m |= b
            opens.add(m)
    return Topology(mt.ground, frozenset(opens))


@dataclass
class UniformityComparison:
    holds: bool
    conformity_base_size: int
    uniformity_base_size: int
    metric_base_size: int

    def __bool__(self):
        return self.holds

    def to_json(self):
        return {"holds": self.holds, "conformity_base_size": self.conformity_base_size,
                "uniformity_base_size": self.uniformity_base_size,
                "metric_base_size": self.metric_base_size}


def compare_uniformities(deltas: Sequence[PseudodiversityFn], X: GroundSet) -> UniformityComparison:
    """Induced uniformity of the generated conformity vs the uniformity of the induced metrics."""
    c = generate_from_diversities(deltas, X)
    lhs = induced_uniformity(c)
    rhs = metric_uniformity([induced_metric(d, X) for d in deltas])
    return UniformityComparison(lhs.generates_same(rhs), len(c.families), len(lhs.relations), len(rhs.relations))


# ---------------------------------------------------------------------------
# Cauchy filters and sequences


def filter_cauchy_and_limits(f: SetFamily, c: ConformityBase) -> tuple[bool, list]:
    """``f`` lists a filter base on the ground; P(F) ⊆ C reduces to F ∈ C by downward closure."""
    if 0 in f.members or not f.members:
        raise DomainError("a filter base on the ground may not contain the empty set")
    meets = {m for m in f.members}
    changed = True
    while changed:
        new = {a & b for a in meets for b in meets} - meets
        changed = bool(new)
        meets |= new
    if 0 in meets:
        raise DomainError("filter base members meet in the empty set")
    cauchy = all(any(F in C.members for F in meets) for C in c.families)
    limits = [x for i, x in enumerate(c.ground.labels)
              if all(any((F | 1 << i) in C.members for F in meets) for C in c.families)]
    return cauchy, limits


@dataclass
class SequenceConformityVerdict:
    status: str
    per_family: list = field(default_factory=list)

    def to_json(self):
        return {"status": self.status, "per_family": self.per_family}


def sequence_cauchy_conformity(prefix: Sequence, c: ConformityBase, period: int | None = None
                               ) -> SequenceConformityVerdict:
    """Least N with the tail set {x_N, ..., x_end} in C, per base family.

    With a declared ``period`` the last ``period`` terms repeat forever, so
    the eventual range decides each family exactly. Without it the prefix
    alone can only refute nothing and certify nothing.
    """
    X = c.ground
    if not prefix:
        raise DomainError("empty prefix")
    if period is not None and not 1 <= period <= len(prefix):
        raise DomainError("period must be between 1 and the prefix length")
    masks = [X.mask([x]) for x in prefix]
    tails = [0] * (len(masks) + 1)
    for i in range(len(masks) - 1, -1, -1):
        tails[i] = tails[i + 1] | masks[i]
    rows = []
    for k, C in enumerate(c.families):
        N = next((i + 1 for i in range(len(masks)) if tails[i] in C.members), None)
        if period is None:
            state = "prefix-only"
        elif tails[len(masks) - period] in C.members:
            state = "certified"
        else:
            state = "refuted"
            N = None
        rows.append({"family": k, "N": N, "state": state,
                     "eventual_range": list(X.from_mask(tails[len(masks) - (period or 1)]))})
    if any(r["state"] == "refuted" for r in rows):
        status = "refuted"
    elif all(r["state"] == "certified" for r in rows):
        status = "certified"
    else:
        status = "inconclusive"
    return SequenceConformityVerdict(status, rows)


# ---------------------------------------------------------------------------
# Functor diagram


@dataclass
class DiagramReport:
    uniformities_equal: bool
    topologies_equal: bool
    uniform_topology: Topology
    metric_topology: Topology

    @property
    def passed(self) -> bool:
        return self.uniformities_equal and self.topologies_equal

    def to_json(self):
        return {"passed": self.passed, "uniformities_equal": self.uniformities_equal,
                "topologies_equal": self.topologies_equal,
                "uniform_topology": self.uniform_topology.to_json(),
                "metric_topology": self.metric_topology.to_json()}


def functor_diagram_check(delta: PseudodiversityFn, X: GroundSet) -> DiagramReport:
    """Diversity → conformity → uniformity → topology against diversity → metric → topology."""
    c = generate_from_diversities([delta], X)
    u = induced_uniformity(c)
    mt = induced_metric(delta, X)
    um = metric_uniformity([mt])
    tu = uniform_topology(u)
    tm = metric_topology(mt)
    return DiagramReport(u.generates_same(um), tu == tm, tu, tm)


# ---------------------------------------------------------------------------
# JSON


def _parse_ground(obj) -> GroundSet:
    if not isinstance(obj, dict) or "ground" not in obj:
        raise DomainError("expected an object with a 'ground' list")
    g = obj["ground"]
    if not isinstance(g, list) or not all(isinstance(x, (str, int)) and not isinstance(x, bool) for x in g):
        raise DomainError("'ground' must be a list of strings or integers")
    return GroundSet(g)


def _parse_family(X: GroundSet, fam, where: str) -> SetFamily:
    if not isinstance(fam, list) or not all(isinstance(s, list) for s in fam):
        raise DomainError(f"{where} must be a list of subsets")
    try:
        return SetFamily.of(X, fam)
    except TypeError:
        raise DomainError(f"{where} contains an unhashable label") from None


def filter_base_from_json(obj) -> FilterBase:
    X = _parse_ground(obj)
    fams = obj.get("families")
    if not isinstance(fams, list) or not fams:
        raise DomainError("'families' must be a nonempty list")
    return FilterBase(tuple(_parse_family(X, f, f"families[{i}]") for i, f in enumerate(fams)))


__all__ = [
    "SetFamily", "FilterBase", "ConformityBase", "ViolationReport", "UniformityBase", "Topology",
    "UniformityComparison", "DiagramReport", "SequenceConformityVerdict",
    "compose", "dominates", "validate_conformity", "conformity", "discrete_conformity",
    "indiscrete_conformity", "generate_from_diversities", "level_family", "scale_grid",
    "induced_uniformity", "metric_uniformity", "uniform_topology", "metric_topology",
    "compare_uniformities", "pointwise_conformity", "filter_cauchy_and_limits", "sequence_cauchy_conformity",
    "functor_diagram_check", "filter_base_from_json", "TOL",
]
