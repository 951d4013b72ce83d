"""Cauchy and convergence analysis of sequences under diversities and metrics.

Tail suprema quantify over every finite subset of a tail, which cannot be
evaluated directly. Verdicts are therefore certified only from structural
knowledge carried by the sequence (eventual constancy, a declared period,
a metric modulus, the grid construction); finite windows can refute but
never certify on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import TOL, DiversityError, DomainError, PreconditionError, PseudodiversityFn, evaluate
from .zoo import STEINER_RATIO, grid_mst_bound, grid_points

KINDS = ("eventually-constant", "finite-prefix", "grid-concat", "modulus-backed")
DEFAULT_EPS = tuple(2.0**-k for k in range(21))


@dataclass(frozen=True, eq=False)
class SequenceRep:
    """A sequence x_1, x_2, ... of points (coordinate tuples or labels).

    ``modulus(eps)`` returns N with d(x_m, x_n) < eps for all m, n >= N.
    ``tail_within(n, r)`` decides exactly whether d(x_n, x_m) < r for all
    m >= n; it is optional and only speeds up subsequence extraction.
    """

    kind: str
    prefix: tuple = ()
    constant: object = None
    period: int | None = None
    term: Callable[[int], object] | None = None
    modulus: Callable[[float], int] | None = None
    limit: object = None
    tail_within: Callable[[int, float], bool] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "finite-prefix" and self.period is not None:
            if not 1 <= self.period <= len(self.prefix):
                raise DomainError("period must be between 1 and the prefix length")

    def element(self, i: int):
        if i < 1:
            raise DomainError("sequence indices start at 1")
        if i <= len(self.prefix):
            return self.prefix[i - 1]
        if self.kind == "eventually-constant":
            return self.constant
        if self.kind == "finite-prefix":
            if self.period is None:
                raise DomainError(f"index {i} is beyond the known prefix")
            start = len(self.prefix) - self.period
            return self.prefix[start + (i - start - 1) % self.period]
        return self.term(i)

    def elements(self, start: int, stop: int) -> list:
        """x_start .. x_stop inclusive."""
        return [self.element(i) for i in range(start, stop + 1)]

    @property
    def stable_from(self) -> int:
        """For eventually-constant sequences, the first index of the constant tail."""
        N = len(self.prefix) + 1
        while N > 1 and self.prefix[N - 2] == self.constant:
            N -= 1
        return N

    @property
    def periodic_from(self) -> int:
        return len(self.prefix) - self.period + 1

    def to_json(self):
        out = {"kind": self.kind, "name": self.name}
        if self.prefix:
            out["prefix"] = [_jsonable(p) for p in self.prefix]
        if self.kind == "eventually-constant":
            out["constant"] = _jsonable(self.constant)
        if self.period is not None:
            out["period"] = self.period
        if self.limit is not None:
            out["limit"] = _jsonable(self.limit)
        return out


def _jsonable(p):
    if isinstance(p, tuple):
        return [_jsonable(v) for v in p]
    if isinstance(p, (np.floating, np.integer)):
        return p.item()
    return p


def eventually_constant(prefix: Sequence, constant) -> SequenceRep:
    prefix = tuple(prefix)
    N = len(prefix) + 1
    while N > 1 and prefix[N - 2] == constant:
        N -= 1
    return SequenceRep("eventually-constant", prefix, constant=constant,
                       modulus=lambda eps: N, limit=constant, name="eventually-constant")


def constant_sequence(x) -> SequenceRep:
    return eventually_constant([x], x)


def finite_prefix(prefix: Sequence, period: int | None = None) -> SequenceRep:
    return SequenceRep("finite-prefix", tuple(prefix), period=period, name="finite-prefix")


def modulus_backed(term, modulus, limit=None, tail_within=None, name="modulus-backed") -> SequenceRep:
    return SequenceRep("modulus-backed", term=term, modulus=modulus, limit=limit,
                       tail_within=tail_within, name=name)


def inverse_sequence() -> SequenceRep:
    """x_n = 1/n on the real line, as 1-tuples, with modulus ceil(1/eps)."""

    def within(n, r):
        # sup over m >= n of 1/n - 1/m is 1/n and is never attained
        return 1.0 / n <= r

    return modulus_backed(
        lambda n: (1.0 / n,),
        lambda eps: max(1, math.ceil(1.0 / eps)),
        limit=(0.0,),
        tail_within=within,
        name="inverse",
    )


# ---------------------------------------------------------------------------
# The concatenated grid sequence G_1 G_2 G_3 ...


def grid_offset(n: int) -> int:
    """Number of elements in G_1 .. G_{n-1}."""
    return ((n - 1) * n // 2) ** 2


def grid_block(i: int) -> tuple[int, int]:
    """(n, p): element i lies in G_n at 0-based lexicographic position p."""
    # offset(n) = ((n-1)n/2)^2 < i, so (n-1)n/2 < sqrt(i)
    n = max(1, int(math.isqrt(2 * math.isqrt(i))) - 1)
    while grid_offset(n + 1) < i:
        n += 1
    while grid_offset(n) >= i:
        n -= 1
    return n, i - grid_offset(n) - 1


def grid_term(i: int) -> tuple:
    n, p = grid_block(i)
    a, rest = divmod(p, n * n)
    b, c = divmod(rest, n)
    s = n * n
    return (a / s, b / s, c / s)


def _grid_tail_sup(i: int) -> float:
    """Exact sup over m >= i of |x_i - x_m| for the concatenated grid; attained."""
    n, p = grid_block(i)
    a, rest = divmod(p, n * n)
    b, c = divmod(rest, n)
    top = n - 1
    far = lambda v: max(v, top - v)  # noqa: E731
    best = 0
    if c < top:
        best = max(best, (top - c) ** 2)
    if b < top:
        best = max(best, (top - b) ** 2 + far(c) ** 2)
    if a < top:
        best = max(best, (top - a) ** 2 + far(b) ** 2 + far(c) ** 2)
    s = n * n
    within = math.sqrt(best) / s
    # later blocks: coordinate extent (m-1)/m^2 is largest at m = n + 1
    ext = n / (n + 1) ** 2
    beyond = math.sqrt(sum(max(v / s, ext - v / s) ** 2 for v in (a, b, c)))
    return max(within, beyond)


def _grid_skip(i: int, r: float) -> int:
    """Smallest i' >= i whose block, slab and row lower bounds on the tail sup are all < r."""
    while True:
        n, p = grid_block(i)
        s = n * n
        top = n - 1
        ext = n / (n + 1) ** 2
        half = math.ceil(top / 2)
        start = grid_offset(n) + 1
        if math.sqrt(3) * ext / 2 >= r:
            i = grid_offset(n + 1) + 1
            continue
        a, rest = divmod(p, s)
        b = rest // n
        fa = max(a / s, ext - a / s)
        slab = math.sqrt(fa * fa + 2 * (ext / 2) ** 2)
        if a < top:
            slab = max(slab, math.sqrt((top - a) ** 2 + 2 * half * half) / s)
        if slab >= r:
            i = start + (a + 1) * s
            continue
        fb = max(b / s, ext - b / s)
        row = math.sqrt(fa * fa + fb * fb + (ext / 2) ** 2)
        if a < top:
            row = max(row, math.sqrt((top - a) ** 2 + max(b, top - b) ** 2 + half * half) / s)
        if b < top:
            row = max(row, math.sqrt((top - b) ** 2 + half * half) / s)
        if row >= r:
            i = start + a * s + (b + 1) * n
            continue
        return i


def concatenated_grid_sequence() -> SequenceRep:
    """G_1 G_2 G_3 ... with each block in lexicographic (i, j, k) order."""

    def modulus(eps):
        # G_m lies in [0, 1/K)^3 for every m >= K, so pairs there are closer than sqrt(3)/K
        K = max(1, math.ceil(math.sqrt(3) / eps))
        return grid_offset(K) + 1

    return SequenceRep(
        "grid-concat",
        term=grid_term,
        modulus=modulus,
        limit=(0.0, 0.0, 0.0),
        tail_within=lambda n, r: _grid_tail_sup(n) < r,
        name="grid-concat",
    )


# ---------------------------------------------------------------------------
# Verdicts


@dataclass
class CauchyVerdict:
    status: str
    witness: dict | None = None
    modulus_table: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    growth: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"

    def to_json(self):
        out = {"status": self.status, "witness": self.witness,
               "modulus_table": [{"eps": e, "N": N} for e, N in self.modulus_table],
               "notes": self.notes}
        if self.growth:
            out["growth"] = self.growth
        return out


def _refuting_eps(value: float, eps_grid: Sequence[float]) -> float:
    """Largest grid eps strictly below ``value``; ``value`` itself if none is."""
    below = [e for e in eps_grid if e < value]
    return max(below) if below else value


def _check_window_monotone(delta, pts, tol):
    # interval lower bounds need not grow; only an upper bound under an earlier lower bound is a contradiction
    prev = 0.0
    for k in range(2, len(pts) + 1):
        v = evaluate(delta, pts[:k])
        if v.ub < prev - tol:
            raise PreconditionError(f"{delta.name} is not monotone on a growing window")
        prev = max(prev, v.lb)
    return prev


def is_cauchy_diversity(
    s: SequenceRep,
    delta: PseudodiversityFn,
    eps_grid: Sequence[float] = DEFAULT_EPS,
    window: int = 8,
    witness_grid: int = 10,
    scan: int = 64,
    tol: float = TOL,
) -> CauchyVerdict:
    if window < 2:
        raise DomainError("window must be at least 2")
    return _tail_verdict(s, delta, None, eps_grid, window, witness_grid, scan, tol)


def converges_to(
    s: SequenceRep,
    x,
    delta: PseudodiversityFn,
    eps_grid: Sequence[float] = DEFAULT_EPS,
    window: int = 8,
    witness_grid: int = 10,
    scan: int = 64,
    tol: float = TOL,
) -> CauchyVerdict:
    """Same scan as :func:`is_cauchy_diversity` with ``x`` added to every window."""
    if window < 2:
        raise DomainError("window must be at least 2")
    return _tail_verdict(s, delta, x, eps_grid, window, witness_grid, scan, tol)


def is_cauchy_metric(
    s: SequenceRep,
    d=None,
    eps_grid: Sequence[float] = DEFAULT_EPS,
    window: int = 8,
    tol: float = TOL,
) -> CauchyVerdict:
    """Metric Cauchy test; ``d`` is a MetricTable, a callable, or None for Euclidean."""
    return is_cauchy_diversity(s, metric_diameter(d), eps_grid, window, tol=tol)


def metric_diameter(d=None) -> PseudodiversityFn:
    """The diameter diversity of a metric given as table, callable or None (Euclidean)."""
    from .zoo import diameter_diversity, euclidean_diameter

    if d is None:
        return euclidean_diameter("euclidean-diam")
    if hasattr(d, "entries"):
        return diameter_diversity(d)

    def diam(A):
        return max((float(d(a, b)) for i, a in enumerate(A) for b in A[i + 1:]), default=0.0)

    return PseudodiversityFn(diam, "metric-diam", True, None, pairwise=True)


def _tail_verdict(s, delta, x, eps_grid, window, witness_grid, scan, tol):
    extra = [] if x is None else [x]
    eps_grid = sorted(eps_grid, reverse=True)
    if s.kind == "eventually-constant":
        N = s.stable_from
        v = evaluate(delta, [s.constant] + extra)
        if v.ub <= tol:
            return CauchyVerdict("certified", modulus_table=[(e, N) for e in eps_grid],
                                 notes=["tail is constant"])
        eps = _refuting_eps(v.lb, eps_grid)
        return CauchyVerdict("refuted", {"eps": eps, "window": [N, N], "with_point": _jsonable(x),
                                         "value": v.to_json()},
                             notes=["constant tail stays away from the point"])

    if s.kind == "finite-prefix":
        if s.period is None:
            stats = _scan(s, delta, extra, 1, len(s.prefix), window, tol)
            return CauchyVerdict("inconclusive", notes=[
                "no eventual period declared; prefix windows only bound the tail from below",
                {"window_values": stats},
            ])
        start = s.periodic_from
        cycle = s.elements(start, len(s.prefix))
        v = evaluate(delta, cycle + extra)
        if v.ub <= tol:
            table = []
            for e in eps_grid:
                N = start
                while N > 1 and evaluate(delta, s.elements(N - 1, len(s.prefix)) + extra).ub < e:
                    N -= 1
                table.append((e, N))
            return CauchyVerdict("certified", modulus_table=table,
                                 notes=["every tail covers exactly the periodic part"])
        if v.lb > tol:
            eps = _refuting_eps(v.lb, eps_grid)
            return CauchyVerdict("refuted", {"eps": eps, "window": [start, len(s.prefix)],
                                             "with_point": _jsonable(x), "value": v.to_json()},
                                 notes=["every tail contains the whole period"])
        return CauchyVerdict("inconclusive", notes=["interval value straddles zero"])

    if delta.pairwise and s.modulus is not None:
        return _pairwise_verdict(s, delta, x, eps_grid, tol)

    if s.kind == "grid-concat":
        return _grid_growth(s, delta, extra, eps_grid, witness_grid, tol)

    stats = _scan(s, delta, extra, 1, scan, window, tol)
    return CauchyVerdict("inconclusive", notes=[
        "no structural certificate for this diversity; finite windows cannot decide",
        {"window_values": stats},
    ])


def _pairwise_verdict(s, delta, x, eps_grid, tol):
    # diameter-type: the tail value is a sup over pairs, bounded by the metric modulus
    if x is None:
        return CauchyVerdict("certified", modulus_table=[(e, s.modulus(e)) for e in eps_grid],
                             notes=["pairwise diversity: metric modulus bounds every tail"])
    if s.limit is None:
        return CauchyVerdict("inconclusive", notes=["no declared limit to compare against"])
    gap = evaluate(delta, [x, s.limit])
    if gap.ub <= tol:
        # d(x, x_n) = lim_m d(x_m, x_n) <= eps for n >= N(eps)
        return CauchyVerdict("certified", modulus_table=[(e, s.modulus(e)) for e in eps_grid],
                             notes=["point equals the sequence limit"])
    D = gap.lb
    N = s.modulus(D / 4)
    v = evaluate(delta, [x, s.element(N)])
    return CauchyVerdict("refuted", {"eps": D / 2, "window": [N, N], "with_point": _jsonable(x),
                                     "value": v.to_json(), "tail_from": N},
                         notes=[f"every x_n with n >= {N} is within {D / 4} of the limit, "
                                f"so at least {3 * D / 4} from the point"])


def _grid_growth(s, delta, extra, eps_grid, witness_grid, tol):
    growth = []
    prev = -math.inf
    increasing = True
    for n in range(1, witness_grid + 1):
        pts = [tuple(map(float, p)) for p in grid_points(n)]
        v = evaluate(delta, pts + extra)
        growth.append({"n": n, "window": [grid_offset(n) + 1, grid_offset(n + 1)], "lb": v.lb, "ub": v.ub,
                       "bound": STEINER_RATIO * grid_mst_bound(n)})
        if n >= 2 and v.lb <= prev + tol:
            increasing = False
        prev = v.lb
    last = growth[-1]
    if not increasing or last["lb"] <= min(eps_grid):
        return CauchyVerdict("inconclusive", growth=growth,
                             notes=["block values do not grow; no refutation"])
    eps = _refuting_eps(last["lb"], eps_grid)
    witness = {"eps": eps, "window": last["window"], "block": witness_grid,
               "value": {"lb": last["lb"], "ub": last["ub"]}}
    if extra:
        witness["with_point"] = _jsonable(extra[0])
    return CauchyVerdict(
        "refuted", witness, growth=growth,
        notes=[
            "each block G_n is a window of the sequence and every tail contains all later blocks",
            "block lower bounds grow like 0.615 (n^3 - 1) / n^2, so every tail has windows above eps",
        ],
    )


def _scan(s, delta, extra, first, last, window, tol):
    out = []
    for N in range(first, last + 1):
        stop = N + window
        if s.kind == "finite-prefix" and s.period is None:
            stop = min(stop, len(s.prefix))
        if stop <= N:
            break
        pts = s.elements(N, stop) + extra
        out.append({"N": N, "value": _check_window_monotone(delta, pts, tol)})
    return out


# ---------------------------------------------------------------------------
# Cauchy subsequences of metric-Cauchy sequences


@dataclass
class SubsequenceResult:
    indices: list
    minimal: list
    bound_table: list

    @property
    def passed(self) -> bool:
        return all(r["ok"] for r in self.bound_table)

    def to_json(self):
        return {"indices": self.indices, "minimal": self.minimal,
                "bound_table": self.bound_table, "passed": self.passed}


def _euclid(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def extract_cauchy_subsequence(
    s: SequenceRep,
    delta: PseudodiversityFn,
    count: int = 12,
    budget: int = 20_000,
    tol: float = TOL,
) -> SubsequenceResult:
    """Indices n_i = min{n : d(x_n, x_m) < 2^-i for all m >= n}, i = 1..count.

    The search for each n_i runs from n_{i-1} up to the modulus bound
    N(2^-i). Candidates below the bound are accepted only when certified:
    exactly through ``s.tail_within`` when available, otherwise by checking
    every m up to N(eta) with eta = 2^-i / 4 and adding eta for the rest.
    If ``budget`` candidates pass without success the search jumps to the
    first certified block start (grid sequences) or to the modulus bound,
    and the index is flagged as not minimal. Indices are then made strictly
    increasing.
    """
    if s.modulus is None:
        raise PreconditionError("subsequence extraction needs a metric modulus")
    _check_induced(s, delta, tol)
    raw, minimal = [], []
    lo = 1
    for i in range(1, count + 1):
        r = 2.0**-i
        bound = s.modulus(r)
        n, exact = _least_within(s, lo, bound, r, budget)
        raw.append(n)
        minimal.append(exact)
        lo = n
    indices = []
    for n in raw:
        indices.append(max(n, indices[-1] + 1) if indices else n)
    pts = [s.element(n) for n in indices]
    table = []
    for N in range(1, count):
        win = pts[N - 1:]
        value = evaluate(delta, win).ub
        chain = sum(evaluate(delta, [a, b]).ub for a, b in zip(win, win[1:]))
        bound = 2.0 ** (1 - N)
        table.append({"N": N, "bound": bound, "window": indices[N - 1:], "value": value,
                      "chain": chain, "ok": value <= bound + tol and chain <= bound + tol})
    return SubsequenceResult(indices, minimal, table)


def _check_induced(s, delta, tol):
    a, b = s.element(1), s.element(2)
    if a == b:
        return
    got = evaluate(delta, [a, b]).ub
    if abs(got - _euclid(a, b)) > 1e-7:
        raise PreconditionError(f"{delta.name} does not induce the Euclidean metric of the sequence")


def _least_within(s, lo, bound, r, budget):
    if s.tail_within is not None:
        skip = _grid_skip if s.kind == "grid-concat" else (lambda n, r: n)
        n, spent = skip(lo, r), 0
        while n < bound and spent < budget:
            if s.tail_within(n, r):
                return n, True
            n, spent = skip(n + 1, r), spent + 1
        return bound, n >= bound
    eta = r / 4
    far = max(s.modulus(eta), bound)
    pts = np.array([s.element(m) for m in range(lo, far + 1)], dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    for n in range(lo, min(bound, lo + budget)):
        if n >= bound:
            break
        seg = pts[n - lo:]
        worst = float(np.sqrt(((seg - seg[0]) ** 2).sum(1)).max())
        if worst + eta < r:
            return n, True
    return bound, bound <= lo + budget


def limits_are_unique(s: SequenceRep, x, y, delta: PseudodiversityFn, **kw) -> bool:
    """False only if both points are certified limits while being apart."""
    if evaluate(delta, [x, y]).ub <= TOL:
        return True
    a = converges_to(s, x, delta, **kw)
    b = converges_to(s, y, delta, **kw)
    return not (a.certified and b.certified)


__all__ = [
    "SequenceRep", "CauchyVerdict", "SubsequenceResult", "DiversityError",
    "eventually_constant", "constant_sequence", "finite_prefix", "modulus_backed",
    "inverse_sequence", "concatenated_grid_sequence", "grid_offset", "grid_block", "grid_term",
    "is_cauchy_diversity", "is_cauchy_metric", "converges_to", "extract_cauchy_subsequence",
    "metric_diameter", "limits_are_unique",
]
