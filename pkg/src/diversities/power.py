"""Power conformities and uniform continuity of pseudodiversities.

For a family u of subsets, C_u holds the collections {A_1, ..., A_n} of
subsets with n ≤ 1 or A_1 ∪ ... ∪ A_n ∈ u. Collections are frozensets of
bitmasks and are only ever enumerated up to a small size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .conformity import (
    ConformityBase,
    SetFamily,
    _meet_closure,
    compose,
    dominates,
)
from .core import (
    TOL,
    DomainError,
    PseudodiversityFn,
    SizeError,
    UnsupportedError,
    function_from_values,
    subset_values,
)
from .metrization import compute_metrics, refine_nested_base

MAX_POWER = 4
MAX_COLLECTION = 4


def collection(u_or_ground, subsets: Iterable) -> frozenset:
    X = getattr(u_or_ground, "ground", u_or_ground)
    return frozenset(s if isinstance(s, int) else X.mask(s) for s in subsets)


def power_member(u: SetFamily, coll: Iterable) -> bool:
    """Whether the collection lies in C_u."""
    coll = collection(u, coll)
    full = u.ground.full_mask
    if any(m & ~full for m in coll):
        raise DomainError("collection uses labels outside the ground")
    if len(coll) <= 1:
        return True
    union = 0
    for m in coll:
        union |= m
    return union in u.members


def collections_up_to(X, size: int) -> list:
    subsets = list(X.all_masks())
    out = []
    for k in range(size + 1):
        out.extend(frozenset(c) for c in itertools.combinations(subsets, k))
    return out


def compose_collections(P: Iterable, Q: Iterable) -> set:
    return {p | q for p in P for q in Q if p & q}


@dataclass
class PowerReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.checks.values())

    def failed(self) -> list:
        return [k for k, v in self.checks.items() if not v["passed"]]

    def to_json(self):
        return {"passed": self.passed, "failed": self.failed(), "checks": self.checks}


def _check(name, bad):
    return {"passed": not bad, "violations": len(bad), "witnesses": bad[:10]}


def _show(X, coll):
    return sorted([list(X.from_mask(m)) for m in coll], key=lambda s: (len(s), s))


def validate_power_conformity(c: ConformityBase, sample_collections: Sequence = (),
                              size: int | None = None, compose_size: int | None = None) -> PowerReport:
    """Filter-base, C1, C2 and C3 checks for {C_u} on enumerated collections.

    C3 is also reported over collections without the empty set as a member,
    since two collections meeting only in ∅ can have disjoint unions.
    """
    X = c.ground
    if len(X) > MAX_POWER:
        raise SizeError(f"ground of size {len(X)} exceeds {MAX_POWER}")
    if size is None:
        size = 3
    if compose_size is None:
        compose_size = 3 if len(X) <= 3 else 2
    colls = collections_up_to(X, size) + [collection(X, s) for s in sample_collections]
    fams = list(c.families)
    meets = [SetFamily(X, m) for m in _meet_closure(fams)]
    mem = lambda u, P: power_member(u, P)  # noqa: E731

    bad = []
    for u, v in itertools.combinations_with_replacement(fams, 2):
        uv = u & v
        for P in colls:
            if (mem(u, P) and mem(v, P)) != mem(uv, P):
                bad.append({"collection": _show(X, P)})
    checks = {"filter_base": _check("filter_base", bad)}

    bad = [{"family": k, "collection": _show(X, [A])}
           for k, u in enumerate(fams) for A in X.all_masks() if not mem(u, [A])]
    checks["C1"] = _check("C1", bad)

    bad = []
    for k, u in enumerate(fams):
        for P in colls:
            if mem(u, P):
                for A in P:
                    if not mem(u, P - {A}):
                        bad.append({"family": k, "collection": _show(X, P), "dropped": list(X.from_mask(A))})
    checks["C2"] = _check("C2", bad)

    small = [P for P in collections_up_to(X, compose_size) if P]
    checks["C3"] = _check("C3", _c3(X, fams, meets, small))
    # a shared empty member does not make the two unions meet
    nonempty = [P for P in small if 0 not in P]
    checks["C3_nonempty_members"] = _check("C3", _c3(X, fams, meets, nonempty))
    return PowerReport(checks)


def _c3(X, fams, meets, colls):
    bad = []
    for k, u in enumerate(fams):
        v = next((w for w in meets if compose(w, w) <= u), None)
        if v is None:
            bad.append({"family": k, "reason": "no witness with v∘v ⊆ u"})
            continue
        Cv = [P for P in colls if power_member(v, P)]
        for P in Cv:
            for Q in Cv:
                if P & Q and not power_member(u, P | Q):
                    bad.append({"family": k, "left": _show(X, P), "right": _show(X, Q)})
    return bad


# ---------------------------------------------------------------------------
# Uniform continuity


def _table(delta: PseudodiversityFn, X):
    if not delta.exact:
        raise UnsupportedError(f"{delta.name} is not exact")
    lb, ub = subset_values(delta, X)
    if (lb != ub).any():
        raise UnsupportedError(f"{delta.name} returned interval values")
    return ub


@dataclass
class UCReport:
    rows: list

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def to_json(self):
        return {"passed": self.passed, "eps": self.rows}


def uc_test_pseudodiversity(delta: PseudodiversityFn, c: ConformityBase, eps_set: Sequence[float] | None = None,
                            tol: float = TOL) -> UCReport:
    """For each eps, whether V_eps = {A : δ(A) < eps} contains a member of the filter.

    On success the witness u is that member, and every pair with A ∪ B ∈ u
    is checked to satisfy |δ(A) − δ(B)| < eps.
    """
    X = c.ground
    v = _table(delta, X)
    if eps_set is None:
        eps_set = sorted({float(x) for x in v if x > 0}) or [1.0]
    closure = sorted(_meet_closure(list(c.families)).items(), key=lambda kv: (len(kv[1]), kv[1]))
    rows = []
    for eps in eps_set:
        V = frozenset(m for m in X.all_masks() if v[m] < eps)
        hit = next(((mem, idx) for mem, idx in closure if mem <= V), None)
        row = {"eps": eps, "passed": hit is not None, "V_size": len(V)}
        if hit is None:
            K = c.kernel.members
            row["outside"] = [list(X.from_mask(m)) for m in sorted(K - V)[:10]]
        else:
            mem, idx = hit
            row["witness_meet"] = list(idx)
            worst = 0.0
            for A, B in itertools.combinations(sorted(mem), 2):
                if (A | B) in mem:
                    worst = max(worst, float(abs(v[A] - v[B])))
            row["max_pair_gap"] = worst
            row["two_sided"] = bool(worst < eps)
        rows.append(row)
    return UCReport(rows)


# ---------------------------------------------------------------------------
# Generation by uniformly continuous pseudodiversities


@dataclass
class GenerationReport:
    rows: list
    recovered: bool

    @property
    def passed(self) -> bool:
        return self.recovered and all(r["identity"] and r["uniformly_continuous"] for r in self.rows)

    def to_json(self):
        return {"passed": self.passed, "recovered": self.recovered, "members": self.rows}


def generation_check(c: ConformityBase) -> GenerationReport:
    """For each base member u, metrize a nested base through u and compare filters."""
    X = c.ground
    if len(X) > MAX_POWER:
        raise SizeError(f"ground of size {len(X)} exceeds {MAX_POWER}")
    rows, gen = [], []
    for k, u in enumerate(c.families):
        b = refine_nested_base(c, seed=u)
        M = compute_metrics(b)
        level = next(i for i, C in enumerate(b.levels) if C.members == u.members)
        r = 2.0**-level
        back = frozenset(m for m in X.all_masks() if M.prime[m] <= r)
        delta = function_from_values(X, {X.from_mask(m): M.cyc[m] for m in X.all_masks()}, f"delta[{k}]")
        uc = uc_test_pseudodiversity(delta, c)
        rows.append({"member": k, "levels": b.m, "level_of_u": level, "identity": back == u.members,
                     "uniformly_continuous": uc.passed})
        for eps in sorted({float(x) for x in M.cyc if x > 0}) + [0.0]:
            gen.append(SetFamily(X, frozenset(m for m in X.all_masks() if M.cyc[m] <= eps)))
    recovered = dominates(gen, c.families) and dominates(c.families, gen)
    return GenerationReport(rows, recovered)


__all__ = ["power_member", "collection", "collections_up_to", "compose_collections",
           "validate_power_conformity", "uc_test_pseudodiversity", "generation_check",
           "PowerReport", "UCReport", "GenerationReport"]
