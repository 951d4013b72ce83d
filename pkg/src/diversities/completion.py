"""Points of the completion as Cauchy sequences carrying a diversity modulus.

For a pseudodiversity, |δ(a_1..a_k) − δ(b_1..b_k)| ≤ Σ δ({a_j, b_j}). With a
diversity-Cauchy modulus per point this turns one evaluation of δ at a common
late index into an interval for the limit value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .analysis import DEFAULT_EPS, SequenceRep, constant_sequence, _jsonable
from .core import TOL, DiversityValue, DomainError, PreconditionError, PseudodiversityFn, evaluate


@dataclass(frozen=True, eq=False)
class CompletionPoint:
    """``modulus(eps)`` gives N with δ(F) ≤ eps for every finite F in the tail from N."""

    rep: SequenceRep
    modulus: Callable[[float], int]
    label: object = None

    def to_json(self, eps_grid: Sequence[float] = DEFAULT_EPS[:11]):
        return {"label": _jsonable(self.label), "representative": self.rep.to_json(),
                "modulus_table": [{"eps": e, "N": self.modulus(e)} for e in eps_grid]}


def certified_modulus(rep: SequenceRep, delta: PseudodiversityFn) -> Callable[[float], int]:
    """A diversity-Cauchy modulus for ``rep`` under ``delta``, when one is known."""
    if rep.kind == "eventually-constant":
        N = rep.stable_from
        return lambda eps: N
    if delta.pairwise and rep.modulus is not None:
        # a pairwise diversity is a sup over pairs, so the metric modulus carries over
        return rep.modulus
    raise PreconditionError(f"no certified {delta.name} modulus for a {rep.kind} sequence")


def point(rep: SequenceRep, delta: PseudodiversityFn, label=None) -> CompletionPoint:
    return CompletionPoint(rep, certified_modulus(rep, delta), label if label is not None else rep.name)


def embed(x) -> CompletionPoint:
    rep = constant_sequence(x)
    return CompletionPoint(rep, lambda eps: 1, x)


def _exact_from(p: CompletionPoint, n: int) -> bool:
    return p.rep.kind == "eventually-constant" and n >= p.rep.stable_from


def equivalent(p: CompletionPoint, q: CompletionPoint, delta: PseudodiversityFn, tol: float = 1e-6,
               samples: int = 8) -> bool:
    """Decide lim δ({x_n, y_n}) < tol from the moduli.

    Past N = max(N_p(tol/4), N_q(tol/4)) every pair value is within tol/2 of
    the limit. The answer is true iff all sampled pair values are below tol
    and the smallest one plus tol/2 is too.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    N = max(p.modulus(tol / 4), q.modulus(tol / 4))
    idx = sorted({N + j for j in range(samples)} | {2 * N, 10 * N})
    vals = [evaluate(delta, [p.rep.element(n), q.rep.element(n)]).ub for n in idx]
    return max(vals) < tol and min(vals) + tol / 2 < tol


def delta_hat(points: Sequence[CompletionPoint], delta: PseudodiversityFn, eps: float) -> DiversityValue:
    """Interval of width at most eps containing the limit value of δ on the points."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    k = len(points)
    if k <= 1:
        return DiversityValue.exact(0.0)
    share = eps / (2 * k)
    n = max(p.modulus(share) for p in points)
    v = evaluate(delta, [p.rep.element(n) for p in points])
    err = sum(0.0 if _exact_from(p, n) else share for p in points)
    return DiversityValue(max(0.0, v.lb - err), v.ub + err)


@dataclass
class DensityReport:
    rows: list
    passed: bool

    def to_json(self):
        return {"rows": self.rows, "passed": self.passed}


def density_check(p: CompletionPoint, delta: PseudodiversityFn, eps_grid: Sequence[float] = DEFAULT_EPS[1:11],
                  tol: float = TOL) -> DensityReport:
    """Embedded terms y_i approach p: δ̂({embed(y_i), p}) ≤ eps once i ≥ N(eps)."""
    rows = []
    for e in eps_grid:
        i = p.modulus(e)
        y = p.rep.element(i)
        v = delta_hat([embed(y), p], delta, e / 8)
        rows.append({"eps": e, "index": i, "lb": v.lb, "ub": v.ub, "ok": v.lb <= e + tol})
    return DensityReport(rows, all(r["ok"] for r in rows))


__all__ = ["CompletionPoint", "certified_modulus", "point", "embed", "equivalent", "delta_hat",
           "density_check", "DensityReport"]
