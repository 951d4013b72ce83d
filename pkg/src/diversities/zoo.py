"""Concrete diversities: diameter, MST, exact graph Steiner, Euclidean Steiner bounds.

Also the nested grids G_n in [0, 1/n]^3 whose Steiner value grows without
bound while their diameter shrinks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, shortest_path

from .core import (
    TOL,
    DiversityValue,
    DomainError,
    GroundSet,
    MetricTable,
    PseudodiversityFn,
    SizeError,
)

STEINER_RATIO = 0.615
MAX_TERMINALS = 12
MAX_GRID_POINTS = 10**6


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    labels: GroundSet

    def __init__(self, points, labels: Iterable | None = None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 1)
        if pts.shape[1] not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {pts.shape[1]}")
        raw = list(range(len(pts))) if labels is None else list(labels)
        if len(raw) != len(pts):
            raise DomainError("one label per point required")
        ground = GroundSet(raw)
        # keep points aligned with the canonical label order
        order = [raw.index(x) for x in ground.labels]
        pts = pts[order]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", ground)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def coords(self, items: Iterable) -> np.ndarray:
        return self.points[[self.labels.index(x) for x in items]]

    def metric(self) -> MetricTable:
        return MetricTable(self.labels, _pairwise(self.points))


def _pairwise(pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(-1))


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    vertices: GroundSet
    edges: tuple

    def __init__(self, vertices: Iterable, edges: Iterable[Sequence]):
        V = GroundSet(vertices)
        E = []
        for u, v, w in edges:
            V.index(u), V.index(v)
            if w < 0:
                raise DomainError(f"negative weight on edge ({u!r}, {v!r})")
            E.append((u, v, float(w)))
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "edges", tuple(E))
        n = len(V)
        adj = np.full((n, n), np.inf)
        np.fill_diagonal(adj, 0.0)
        for u, v, w in E:
            i, j = V.index(u), V.index(v)
            if w < adj[i, j]:
                adj[i, j] = adj[j, i] = w
        off = adj.copy()
        np.fill_diagonal(off, np.inf)
        sparse = csgraph_from_dense(off, null_value=np.inf)
        if n and connected_components(sparse, directed=False)[0] != 1:
            raise DomainError("graph is not connected")
        object.__setattr__(self, "adjacency", adj)
        dist, pred = shortest_path(sparse, directed=False, return_predecessors=True)
        object.__setattr__(self, "_dist", dist)
        object.__setattr__(self, "_pred", pred)

    def metric(self) -> MetricTable:
        return MetricTable(self.vertices, self._dist)

    def path(self, u: int, v: int) -> list[int]:
        """Vertex indices of a shortest path from u to v."""
        out = [v]
        while out[-1] != u:
            out.append(int(self._pred[u, out[-1]]))
        return out[::-1]


@dataclass(frozen=True)
class SteinerResult:
    value: DiversityValue
    tree_edges: tuple
    method: str

    def to_json(self):
        return {
            "value": self.value.to_json(),
            "tree_edges": [list(e) for e in self.tree_edges],
            "method": self.method,
        }


def diameter_diversity(metric: MetricTable, name: str = "diameter") -> PseudodiversityFn:
    def diam(A):
        if len(A) <= 1:
            return 0.0
        return float(metric.submatrix(A).max())

    return PseudodiversityFn(diam, name, True, metric.ground, pairwise=True)


def euclidean_diameter(name: str = "diam") -> PseudodiversityFn:
    """Diameter diversity on R^n; labels are coordinate tuples."""

    def diam(A):
        if len(A) <= 1:
            return 0.0
        return float(_pairwise(np.asarray(A, dtype=float)).max())

    return PseudodiversityFn(diam, name, True, None, pairwise=True)


def _prim(d: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Dense Prim from vertex 0; ties go to the lowest index."""
    n = len(d)
    if n <= 1:
        return 0.0, []
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].astype(float).copy()
    parent = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    total = 0.0
    edges = []
    for _ in range(n - 1):
        j = int(np.argmin(best))
        total += float(best[j])
        i = int(parent[j])
        edges.append((min(i, j), max(i, j)))
        in_tree[j] = True
        best[j] = np.inf
        closer = ~in_tree & (d[j] < best)
        best[closer] = d[j][closer]
        parent[closer] = j
    return total, sorted(edges)


def mst(metric: MetricTable, A: Iterable) -> SteinerResult:
    A = metric.ground.subset(A)
    total, edges = _prim(metric.submatrix(A))
    tree = tuple((A[i], A[j], float(metric.d(A[i], A[j]))) for i, j in edges)
    return SteinerResult(DiversityValue.exact(total), tree, "mst")


def mst_points(points: np.ndarray) -> float:
    return _prim(_pairwise(np.asarray(points, dtype=float)))[0]


def steiner_graph_exact(g: WeightedGraph, terminals: Iterable) -> SteinerResult:
    """Minimum Steiner tree by Dreyfus-Wagner over (terminal subset, vertex)."""
    T = g.vertices.subset(terminals)
    k = len(T)
    if k > MAX_TERMINALS:
        raise SizeError(f"at most {MAX_TERMINALS} terminals supported, got {k}")
    if k <= 1:
        return SteinerResult(DiversityValue.exact(0.0), (), "dreyfus-wagner")
    D = g._dist
    n = len(D)
    t_idx = [g.vertices.index(t) for t in T]
    full = (1 << k) - 1
    dp = np.full((1 << k, n), np.inf)
    # split[S][u]: best terminal split merged at u; move[S][v]: u reached from
    split = np.full((1 << k, n), -1, dtype=np.int64)
    move = np.full((1 << k, n), -1, dtype=np.int64)
    for i, t in enumerate(t_idx):
        dp[1 << i] = D[t]
        move[1 << i] = t
    for S in range(1, full + 1):
        if S & (S - 1) == 0:
            continue
        low = S & -S
        best = np.full(n, np.inf)
        arg = np.full(n, -1, dtype=np.int64)
        sub = (S - 1) & S
        while sub:
            if sub & low:
                cand = dp[sub] + dp[S ^ sub]
                better = cand < best - 1e-15
                best[better] = cand[better]
                arg[better] = sub
            sub = (sub - 1) & S
        # dp[S][v] = min_u best[u] + D[u][v]
        via = best[:, None] + D
        u = np.argmin(via, axis=0)
        dp[S] = via[u, np.arange(n)]
        split[S] = arg
        move[S] = u
    root = t_idx[0]
    value = float(dp[full, root])
    edges: set[tuple[int, int]] = set()

    def expand(S, v):
        if S & (S - 1) == 0:
            _add_path(g, edges, int(move[S, v]), v)
            return
        u = int(move[S, v])
        _add_path(g, edges, u, v)
        T1 = int(split[S, u])
        expand(T1, u)
        expand(S ^ T1, u)

    expand(full, root)
    tree = _clean_tree(g, edges, set(t_idx))
    weight = sum(w for _, _, w in tree)
    if abs(weight - value) > 1e-7 * max(1.0, value):
        raise AssertionError(f"reconstructed tree weight {weight} != DP value {value}")
    return SteinerResult(DiversityValue.exact(value), tree, "dreyfus-wagner")


def _add_path(g, edges, u, v):
    if u == v:
        return
    p = g.path(u, v)
    for a, b in zip(p, p[1:]):
        edges.add((min(a, b), max(a, b)))


def _clean_tree(g, edges, terminals):
    """Spanning tree of the reconstructed edge union with non-terminal leaves pruned."""
    adj = g.adjacency
    nodes = sorted({x for e in edges for x in e})
    if not nodes:
        return ()
    pos = {v: i for i, v in enumerate(nodes)}
    d = np.full((len(nodes), len(nodes)), np.inf)
    np.fill_diagonal(d, 0)
    for a, b in edges:
        d[pos[a], pos[b]] = d[pos[b], pos[a]] = adj[a, b]
    _, local = _prim(d)
    kept = {(nodes[i], nodes[j]) for i, j in local}
    while True:
        deg: dict[int, int] = {}
        for a, b in kept:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        drop = {e for e in kept if any(deg[x] == 1 and x not in terminals for x in e)}
        if not drop:
            break
        kept -= drop
    L = g.vertices.labels
    return tuple(sorted((L[a], L[b], float(adj[a, b])) for a, b in kept))


def graph_steiner_diversity(g: WeightedGraph, name: str = "graph-steiner") -> PseudodiversityFn:
    return PseudodiversityFn(
        lambda A: steiner_graph_exact(g, A).value.ub, name, True, g.vertices
    )


def steiner_euclidean_bounds(
    cloud: PointCloud, A: Iterable, ratio_2d: float = STEINER_RATIO
) -> SteinerResult:
    """Interval [ratio * MST, MST] for the Euclidean Steiner value of A."""
    A = cloud.labels.subset(A)
    total = mst_points(cloud.coords(A)) if A else 0.0
    return SteinerResult(_euclid_interval(total, cloud.dim, len(A), ratio_2d), (), "euclidean-bounds")


def _euclid_interval(total, dim, size, ratio_2d):
    if size <= 2 or dim == 1:
        return DiversityValue.exact(total)
    rho = ratio_2d if dim == 2 else STEINER_RATIO
    return DiversityValue(rho * total, total)


def euclidean_steiner(dim: int = 3, ratio_2d: float = STEINER_RATIO, name: str = "steiner") -> PseudodiversityFn:
    """Interval-valued Steiner tree diversity on R^dim; labels are coordinate tuples."""

    def value(A):
        if len(A) <= 1:
            return 0.0
        pts = np.asarray(A, dtype=float)
        return _euclid_interval(mst_points(pts), dim, len(A), ratio_2d)

    return PseudodiversityFn(value, name, dim == 1, None, pairwise=dim == 1)


def cloud_steiner_diversity(cloud: PointCloud, ratio_2d: float = STEINER_RATIO) -> PseudodiversityFn:
    return PseudodiversityFn(
        lambda A: steiner_euclidean_bounds(cloud, A, ratio_2d).value,
        "euclidean-steiner",
        cloud.dim == 1,
        cloud.labels,
        pairwise=cloud.dim == 1,
    )


# ---------------------------------------------------------------------------
# Grid construction


def grid_points(n: int) -> np.ndarray:
    """G_n as an (n^3, 3) array, lexicographic in (i, j, k)."""
    if n < 1:
        raise DomainError("n must be positive")
    if n**3 > MAX_GRID_POINTS:
        raise SizeError(f"G_{n} has {n**3} points, more than {MAX_GRID_POINTS}")
    r = np.arange(n) / n**2
    i, j, k = np.meshgrid(r, r, r, indexing="ij")
    return np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)


def grid_Gn(n: int) -> PointCloud:
    pts = grid_points(n)
    return PointCloud(pts, [tuple(map(float, p)) for p in pts])


def grid_diameter(n: int) -> float:
    return math.sqrt(3) * (n - 1) / n**2


def grid_mst_bound(n: int) -> float:
    return (n**3 - 1) / n**2


@dataclass
class ExperimentTable:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    COLUMNS = ("n", "diam", "mst", "mst_bound", "steiner_lb")

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self):
        return {"columns": list(self.COLUMNS), "rows": self.rows, "passed": self.passed,
                "failures": self.failures}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return format_table(self.COLUMNS, [[r[c] for c in self.COLUMNS] for r in self.rows])


def format_table(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(columns)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.9f}"
    return str(v)


def grid_experiment(n_values: Iterable[int], tol: float = TOL) -> ExperimentTable:
    table = ExperimentTable()
    for n in n_values:
        pts = grid_points(n)
        d = _pairwise(pts) if n > 1 else np.zeros((1, 1))
        total, _ = _prim(d)
        row = {
            "n": n,
            "diam": float(d.max()),
            "mst": total,
            "mst_bound": grid_mst_bound(n),
            "steiner_lb": STEINER_RATIO * total,
        }
        table.rows.append(row)
        if total < row["mst_bound"] - tol:
            table.failures.append({"n": n, "mst": total, "mst_bound": row["mst_bound"]})
    return table
