"""Slow, independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def floyd(n, edges):
    d = [[math.inf] * n for _ in range(n)]
    for i in range(n):
        d[i][i] = 0.0
    for u, v, w in edges:
        if w < d[u][v]:
            d[u][v] = d[v][u] = float(w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def kruskal(nodes, d):
    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    total = 0.0
    for w, u, v in sorted((d[u][v], u, v) for u, v in itertools.combinations(nodes, 2)):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            total += w
    return total


def steiner_brute(n, edges, terminals):
    """Min over Steiner-vertex sets S of the MST of the metric closure on T ∪ S."""
    T = sorted(set(terminals))
    if len(T) <= 1:
        return 0.0
    d = floyd(n, edges)
    others = [v for v in range(n) if v not in T]
    best = math.inf
    for k in range(len(others) + 1):
        for S in itertools.combinations(others, k):
            best = min(best, kruskal(T + list(S), d))
    return best


def fermat_length(pts):
    """Least total distance from one free point to the given points (Nelder-Mead)."""
    pts = np.asarray(pts, dtype=float)
    f = lambda p: float(np.linalg.norm(pts - p, axis=1).sum())  # noqa: E731
    res = minimize(f, pts.mean(axis=0), method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-12})
    return res.fun, res.x


def tail_sup_brute(points, i, stop):
    seg = np.asarray(points[i - 1:stop], dtype=float)
    return float(np.sqrt(((seg - seg[0]) ** 2).sum(1)).max())
