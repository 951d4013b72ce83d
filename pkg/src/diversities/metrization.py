"""From a nested countable base to a pseudodiversity.

Levels C_0 = P(X) ⊇ C_1 ⊇ ... ⊇ C_m with C_i∘C_i∘C_i ⊆ C_{i-1} give the
step function δ′ (2^-k on C_k minus C_{k+1}, zero on the kernel C_m). Chains
are sequences of nonempty sets with consecutive members meeting; cycles
additionally close up. δ̄ and δ are infima of Σ δ′ over chains and cycles
covering a set. Both are computed exactly by Dijkstra over walk states;
sets may repeat and are then counted again.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conformity import (
    ConformityBase,
    SetFamily,
    ViolationReport,
    _bits,
    compose,
    validate_conformity,
)
from .core import TOL, DomainError, GroundSet, SizeError, check_axioms, function_from_values

MAX_METRIZE = 6


@dataclass(frozen=True, eq=False)
class NestedBase:
    ground: GroundSet
    levels: tuple

    def __post_init__(self):
        X = self.ground
        if len(X) > MAX_METRIZE:
            raise SizeError(f"ground of size {len(X)} exceeds {MAX_METRIZE}")
        if not self.levels:
            raise DomainError("at least the level C_0 is required")
        lv = self.levels
        if lv[0].members != frozenset(X.all_masks()):
            raise DomainError("C_0 must be the full power set")
        singles = {1 << i for i in range(len(X))}
        for i, C in enumerate(lv):
            if C.ground != X:
                raise DomainError(f"level {i} lives on another ground")
            if not singles <= C.members or 0 not in C.members:
                raise DomainError(f"level {i} misses a singleton or the empty set")
            if C.down_closure().members != C.members:
                raise DomainError(f"level {i} is not closed under subsets")
        for i in range(1, len(lv)):
            if not lv[i] <= lv[i - 1]:
                raise DomainError(f"level {i} is not contained in level {i - 1}")
            if not compose(compose(lv[i], lv[i]), lv[i]) <= lv[i - 1]:
                raise DomainError(f"triple composition of level {i} escapes level {i - 1}")
        K = lv[-1]
        if not compose(compose(K, K), K) <= K:
            raise DomainError("last level cannot repeat: its triple composition escapes it")

    @property
    def m(self) -> int:
        return len(self.levels) - 1

    def to_json(self):
        return {"ground": list(self.ground.labels), "levels": [C.to_json() for C in self.levels]}

    @classmethod
    def from_json(cls, obj) -> "NestedBase":
        if not isinstance(obj, dict) or not isinstance(obj.get("ground"), list):
            raise DomainError("expected an object with 'ground' and 'levels'")
        X = GroundSet(obj["ground"])
        lv = obj.get("levels")
        if not isinstance(lv, list) or not lv:
            raise DomainError("'levels' must be a nonempty list")
        return cls(X, tuple(SetFamily.of(X, f) for f in lv))


# ---------------------------------------------------------------------------
# Nested refinement of a conformity base


def refine_nested_base(c: ConformityBase, seed: SetFamily | None = None) -> NestedBase:
    """W_n = V_n ∩ W_{n-1}; keep W_n once its fourfold composition fits the previous level.

    With ``seed`` the sequence starts V_1 = seed, so C_1 = seed unless it is
    the whole power set. After the listed families the kernel repeats; since
    K∘K ⊆ K for a valid conformity this always terminates at K.
    """
    if isinstance(c, ViolationReport) or not isinstance(validate_conformity(c.base), ConformityBase):
        raise DomainError("refinement needs a valid conformity")
    X = c.ground
    V = list(c.families)
    if seed is not None:
        if seed.ground != X:
            raise DomainError("seed family lives on another ground")
        V = [seed] + V
    K = c.kernel
    W = [SetFamily.powerset(X)]
    for v in V:
        W.append(W[-1] & v)
    W.append(K)
    levels = [W[0]]
    for w in W[1:]:
        if w.members == levels[-1].members:
            continue
        ww = compose(w, w)
        if compose(ww, ww) <= levels[-1]:
            levels.append(w)
        if levels[-1].members == K.members:
            break
    return NestedBase(X, tuple(levels))


# ---------------------------------------------------------------------------
# δ′, δ̄, δ


def delta_prime_table(b: NestedBase) -> np.ndarray:
    n = 1 << len(b.ground)
    out = np.ones(n)
    for k, C in enumerate(b.levels):
        for A in C.members:
            out[A] = 2.0**-k
    for A in b.levels[-1].members:
        out[A] = 0.0
    return out


def delta_prime(b: NestedBase, A) -> float:
    m = A if isinstance(A, int) else b.ground.mask(A)
    return float(delta_prime_table(b)[m])


def _walk_search(cost: np.ndarray, nbits: int, cycle: bool):
    """Least cost per covered mask, over chains (or cycles) of nonempty sets.

    Returns (best, witness) where best[U] is the least cost of a walk whose
    union is exactly U and witness[U] its set sequence.
    """
    sets = list(range(1, 1 << nbits))
    full = 1 << nbits
    nbr = {S: [T for T in sets if S & T] for S in sets}
    dist: dict = {}
    prev: dict = {}
    heap = []
    for S in sets:
        state = (S if cycle else 0, S, S)
        dist[state] = float(cost[S])
        prev[state] = None
        heap.append((float(cost[S]), state))
    heapq.heapify(heap)
    best = np.full(full, np.inf)
    best_state = [None] * full
    while heap:
        c, state = heapq.heappop(heap)
        if c > dist[state]:
            continue
        first, cur, cov = state
        if (not cycle or cur & first) and c < best[cov]:
            best[cov] = c
            best_state[cov] = state
        for T in nbr[cur]:
            nxt = (first, T, cov | T)
            nc = c + float(cost[T])
            if nc < dist.get(nxt, np.inf):
                dist[nxt] = nc
                prev[nxt] = state
                heapq.heappush(heap, (nc, nxt))

    def walk(U):
        s, out = best_state[U], []
        while s is not None:
            out.append(s[1])
            s = prev[s]
        return out[::-1]

    return best, walk


def _cover_min(best: np.ndarray, nbits: int) -> tuple[np.ndarray, np.ndarray]:
    """inf over U ⊇ A of best[U], with the argmin."""
    full = 1 << nbits
    val = best.copy()
    arg = np.arange(full)
    for i in range(nbits):
        for A in range(full):
            if not A >> i & 1:
                B = A | 1 << i
                if val[B] < val[A]:
                    val[A], arg[A] = val[B], arg[B]
    return val, arg


@dataclass
class Metrics:
    """Exact tables of δ′, δ̄ (chains) and δ (cycles) over all subset masks."""

    base: NestedBase
    prime: np.ndarray
    bar: np.ndarray
    cyc: np.ndarray
    _walks: dict = field(default_factory=dict, repr=False)

    def witness(self, A: int, kind: str = "cycle") -> list:
        walk, arg = self._walks[kind]
        if A == 0:
            return []
        return [list(self.base.ground.from_mask(S)) for S in walk(int(arg[A]))]


def compute_metrics(b: NestedBase) -> Metrics:
    n = len(b.ground)
    prime = delta_prime_table(b)
    best_chain, walk_chain = _walk_search(prime, n, cycle=False)
    best_cyc, walk_cyc = _walk_search(prime, n, cycle=True)
    bar, arg_bar = _cover_min(best_chain, n)
    cyc, arg_cyc = _cover_min(best_cyc, n)
    bar[0] = cyc[0] = 0.0
    return Metrics(b, prime, bar, cyc, {"chain": (walk_chain, arg_bar), "cycle": (walk_cyc, arg_cyc)})


def delta_bar(b: NestedBase, A) -> float:
    m = A if isinstance(A, int) else b.ground.mask(A)
    return float(compute_metrics(b).bar[m])


def delta_cycle(b: NestedBase, A) -> float:
    m = A if isinstance(A, int) else b.ground.mask(A)
    return float(compute_metrics(b).cyc[m])


def kernel_blocks(b: NestedBase) -> list:
    """Connected components of the ground under 'lie together in a kernel set'."""
    n = len(b.ground)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for A in b.levels[-1].members:
        pts = list(_bits(A))
        for p in pts[1:]:
            parent[find(p)] = find(pts[0])
    groups: dict = {}
    for x in range(n):
        groups.setdefault(find(x), []).append(x)
    return [sum(1 << x for x in g) for g in sorted(groups.values())]


def delta_cycle_contracted(b: NestedBase) -> np.ndarray:
    """δ for every subset, searching on the quotient by kernel blocks.

    Kernel sets cost nothing and can connect any two points of a block, so
    a walk only needs to know which blocks each set touches. Every block is
    itself a free node.
    """
    blocks = kernel_blocks(b)
    q = len(blocks)
    n = len(b.ground)
    prime = delta_prime_table(b)
    image = [sum(1 << j for j, B in enumerate(blocks) if A & B) for A in range(1 << n)]
    qcost = np.full(1 << q, np.inf)
    for A in range(1, 1 << n):
        qcost[image[A]] = min(qcost[image[A]], prime[A])
    for j in range(q):
        qcost[1 << j] = 0.0
    best, _ = _walk_search(qcost, q, cycle=True)
    qval, _ = _cover_min(best, q)
    out = np.array([qval[image[A]] for A in range(1 << n)])
    out[0] = 0.0
    return out


def brute_force_cycles(b: NestedBase, max_len: int = 6) -> np.ndarray:
    """Least Σ δ′ over every cycle of length ≤ max_len, by plain enumeration."""
    n = len(b.ground)
    prime = delta_prime_table(b)
    sets = range(1, 1 << n)
    best = np.full(1 << n, np.inf)

    def extend(seq, cov, cost):
        if seq[0] & seq[-1] and cost < best[cov]:
            best[cov] = cost
        if len(seq) == max_len:
            return
        for T in sets:
            if T & seq[-1]:
                extend(seq + [T], cov | T, cost + prime[T])

    for S in sets:
        extend([S], S, prime[S])
    out = np.array([min(best[U] for U in range(1 << n) if U & A == A) for A in range(1 << n)])
    out[0] = 0.0
    return out


# ---------------------------------------------------------------------------
# Verification


def _compare(name, lhs, rhs, masks, X, tol, limit=20):
    bad = [m for m in masks if lhs[m] > rhs[m] + tol]
    return {"relation": name, "passed": not bad, "violations": len(bad),
            "witnesses": [{"subset": list(X.from_mask(m)), "lhs": float(lhs[m]), "rhs": float(rhs[m])}
                          for m in bad[:limit]]}


@dataclass
class MetrizationReport:
    checks: dict
    values: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failed(self) -> list:
        return [k for k, c in self.checks.items() if not c["passed"]]

    def to_json(self):
        return {"passed": self.passed, "checks": self.checks, "values": self.values}


STATED = ("axioms", "delta<=bar", "bar<=2delta", "bar<=prime", "prime<=2bar",
          "delta<=prime", "prime<=4delta", "identity", "generation")


def verify_metrization(b: NestedBase, tol: float = TOL) -> MetrizationReport:
    """Every relation between δ, δ̄ and δ′ over all subsets, plus the level identities.

    The keys in ``STATED`` are the relations as asserted for the construction.
    ``bar<=delta`` and ``delta<=2bar`` hold by definition (cycles are chains;
    a chain run forward then back is a cycle) and are reported alongside.
    """
    X = b.ground
    M = compute_metrics(b)
    P, Bar, D = M.prime, M.bar, M.cyc
    masks = list(X.all_masks())
    checks = {}

    delta = function_from_values(X, {X.from_mask(m): D[m] for m in masks}, "cycle-delta")
    ax = check_axioms(delta, X, tol=tol)
    checks["axioms"] = {"relation": "pseudodiversity", "passed": ax.passed, "violations": ax.violations,
                        "witnesses": (ax.d1 + ax.d2 + ax.monotonicity)[:20]}
    checks["delta<=bar"] = _compare("δ ≤ δ̄", D, Bar, masks, X, tol)
    checks["bar<=2delta"] = _compare("δ̄ ≤ 2δ", Bar, 2 * D, masks, X, tol)
    checks["bar<=prime"] = _compare("δ̄ ≤ δ′", Bar, P, masks, X, tol)
    checks["prime<=2bar"] = _compare("δ′ ≤ 2δ̄", P, 2 * Bar, masks, X, tol)
    checks["delta<=prime"] = _compare("δ ≤ δ′", D, P, masks, X, tol)
    checks["prime<=4delta"] = _compare("δ′ ≤ 4δ", P, 4 * D, masks, X, tol)
    checks["bar<=delta"] = _compare("δ̄ ≤ δ", Bar, D, masks, X, tol)
    checks["delta<=2bar"] = _compare("δ ≤ 2δ̄", D, 2 * Bar, masks, X, tol)

    bad_id, bad_gen = [], []
    for k, C in enumerate(b.levels):
        r = 2.0**-k
        pre = frozenset(m for m in masks if P[m] <= r)
        if pre != C.members:
            bad_id.append({"level": k, "extra": [list(X.from_mask(m)) for m in sorted(pre - C.members)],
                           "missing": [list(X.from_mask(m)) for m in sorted(C.members - pre)]})
        inner = frozenset(m for m in masks if D[m] <= r / 4)
        outer = frozenset(m for m in masks if D[m] <= r)
        if not (inner <= C.members <= outer):
            bad_gen.append({"level": k,
                            "inner_escapes": [list(X.from_mask(m)) for m in sorted(inner - C.members)],
                            "outer_misses": [list(X.from_mask(m)) for m in sorted(C.members - outer)]})
    checks["identity"] = {"relation": "δ′⁻¹[0, 2^-k] = C_k", "passed": not bad_id,
                          "violations": len(bad_id), "witnesses": bad_id}
    checks["generation"] = {"relation": "δ⁻¹[0, 2^-k-2] ⊆ C_k ⊆ δ⁻¹[0, 2^-k]", "passed": not bad_gen,
                            "violations": len(bad_gen), "witnesses": bad_gen}
    for c in checks.values():
        for w in c["witnesses"]:
            if isinstance(w, dict) and "subset" in w and "cycle" not in w:
                m = X.mask(w["subset"])
                w["cycle"] = M.witness(m, "cycle")
                w["chain"] = M.witness(m, "chain")
    values = {",".join(map(str, X.from_mask(m))) or "∅":
              {"prime": float(P[m]), "bar": float(Bar[m]), "delta": float(D[m])} for m in masks}
    return MetrizationReport(checks, values)


# ---------------------------------------------------------------------------
# Random nested bases


def _union_close(fam: set) -> set:
    """Smallest superset closed under unions of meeting members and under subsets."""
    fam = set(fam)
    while True:
        new = {a | b for a in fam for b in fam if a & b} - fam
        if not new:
            break
        fam |= new
    out = set()
    for m in fam:
        sub = m
        while True:
            out.add(sub)
            if sub == 0:
                break
            sub = (sub - 1) & m
    return out


def random_nested_base(seed: int, n: int | None = None, max_levels: int = 6) -> NestedBase:
    """Grow levels upward from a random kernel; accept a level only if it absorbs the triple composition below."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, 5))
    X = GroundSet([chr(ord("a") + i) for i in range(n)])
    full = 1 << n
    kernel = {0} | {1 << i for i in range(n)}
    if rng.random() < 0.3:
        kernel |= {int(rng.integers(1, full))}
    kernel = _union_close(kernel)
    chain = [frozenset(kernel)]
    target = int(rng.integers(1, max_levels + 1))
    tries = 0
    while len(chain) < target and tries < 200:
        tries += 1
        prev = chain[-1]
        extra = {int(x) for x in rng.integers(1, full, size=int(rng.integers(1, 4)))}
        cand = set(prev) | extra
        closed = set()
        for m in cand:
            sub = m
            while True:
                closed.add(sub)
                if sub == 0:
                    break
                sub = (sub - 1) & m
        cand = frozenset(closed)
        if cand == prev:
            continue
        P = SetFamily(X, prev)
        if compose(compose(P, P), P) <= SetFamily(X, cand):
            chain.append(cand)
    levels = [SetFamily.powerset(X)] + [SetFamily(X, f) for f in reversed(chain)]
    if levels[1].members == levels[0].members:
        levels = levels[1:]
    return NestedBase(X, tuple(levels))


__all__ = [
    "NestedBase", "Metrics", "MetrizationReport", "STATED",
    "refine_nested_base", "delta_prime", "delta_prime_table", "delta_bar", "delta_cycle",
    "compute_metrics", "delta_cycle_contracted", "kernel_blocks", "brute_force_cycles",
    "verify_metrization", "random_nested_base",
]
