"""Point clouds, Euclidean distances, ball queries and the Euclidean MST."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import NamedTuple

import numpy as np


class InputError(ValueError):
    """Raised for malformed user input (bad shapes, empty clouds, bad params)."""


class PointCloud:
    """An immutable ordered set of ``n`` points in ``R^D``.

    Points are identified by their row index; duplicates are allowed.
    """

    __slots__ = ("_points",)

    def __init__(self, points):
        arr = np.array(points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"point cloud must be a non-empty (n, D) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("point cloud contains non-finite coordinates")
        arr.setflags(write=False)
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, idx):
        return self._points[idx]

    def __repr__(self):
        return f"PointCloud(n={self.n}, D={self.dim})"

    def subset(self, indices) -> "PointCloud":
        return PointCloud(self._points[np.asarray(indices, dtype=np.intp)])

    def diameter(self) -> float:
        return diameter(self._points)


class MstEdge(NamedTuple):
    i: int
    j: int
    length: float


def _as_array(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    arr = np.asarray(cloud, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def euclidean_dist(p, q) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise InputError(f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


def range_query(cloud, center, r: float) -> np.ndarray:
    """Indices of all points in the closed ball of radius ``r`` about ``center``."""
    pts = _as_array(cloud)
    center = np.asarray(center, dtype=np.float64).ravel()
    if center.shape[0] != pts.shape[1]:
        raise InputError(f"dimension mismatch: {center.shape[0]} vs {pts.shape[1]}")
    if r < 0:
        raise InputError("radius must be nonnegative")
    d = np.sqrt(np.sum((pts - center) ** 2, axis=1))
    return np.flatnonzero(d <= r)


def diameter(points) -> float:
    pts = _as_array(points)
    if pts.shape[0] < 2:
        return 0.0
    from scipy.spatial import ConvexHull, QhullError
    from scipy.spatial.distance import pdist

    # the diameter is attained on hull vertices; fall back for degenerate sets
    cand = pts
    if pts.shape[0] > 500 and pts.shape[1] <= 3:
        try:
            cand = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            cand = pts
    if cand.shape[0] <= 3000:
        return float(pdist(cand).max())
    best = 0.0
    for k in range(cand.shape[0]):
        d = np.sqrt(np.sum((cand[k + 1:] - cand[k]) ** 2, axis=1))
        if d.size:
            best = max(best, float(d.max()))
    return best


def minimum_spanning_tree(cloud) -> list[MstEdge]:
    """Prim's algorithm on the complete Euclidean graph, O(n^2) time, O(n) memory.

    Edges are totally ordered by ``(length, min(i, j), max(i, j))`` so the tree
    is unique; the result is sorted in that order with ``i < j``.
    """
    pts = _as_array(cloud)
    n = pts.shape[0]
    if n <= 1:
        return []
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    # endpoint in the tree realising best[v]
    parent = np.full(n, -1, dtype=np.intp)

    in_tree[0] = True
    best[0] = -1.0
    d = np.sqrt(np.sum((pts - pts[0]) ** 2, axis=1))
    best[1:] = d[1:]
    parent[1:] = 0

    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        m = cand.min()
        ties = np.flatnonzero(cand == m)
        if ties.size > 1:
            lo = np.minimum(ties, parent[ties])
            hi = np.maximum(ties, parent[ties])
            v = ties[np.lexsort((hi, lo))[0]]
        else:
            v = ties[0]
        u = parent[v]
        edges.append(MstEdge(int(min(u, v)), int(max(u, v)), float(m)))
        in_tree[v] = True

        d = np.sqrt(np.sum((pts - pts[v]) ** 2, axis=1))
        better = ~in_tree & (d < best)
        # equal length: keep the lexicographically smaller edge key
        tie = ~in_tree & (d == best)
        if tie.any():
            t = np.flatnonzero(tie)
            new_key = np.stack([np.minimum(t, v), np.maximum(t, v)], axis=1)
            old_key = np.stack([np.minimum(t, parent[t]), np.maximum(t, parent[t])], axis=1)
            smaller = (new_key[:, 0] < old_key[:, 0]) | (
                (new_key[:, 0] == old_key[:, 0]) & (new_key[:, 1] < old_key[:, 1])
            )
            better[t[smaller]] = True
        best[better] = d[better]
        parent[better] = v

    edges.sort(key=lambda e: (e.length, e.i, e.j))
    return edges


def mst_lengths(cloud) -> np.ndarray:
    """Sorted MST edge lengths (tie-breaking is irrelevant for the multiset)."""
    return np.array([e.length for e in minimum_spanning_tree(cloud)], dtype=np.float64)


# -- CSV -------------------------------------------------------------------


def read_cloud_csv(path, header: bool = False) -> PointCloud:
    text = Path(path).read_text()
    return parse_cloud_csv(text, header=header)


def parse_cloud_csv(text: str, header: bool = False) -> PointCloud:
    rows = []
    reader = csv.reader(io.StringIO(text))
    width = None
    for lineno, row in enumerate(reader, start=1):
        if header and lineno == 1:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"line {lineno}: expected {width} fields, got {len(row)}")
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    if not rows:
        raise InputError("no points in CSV input")
    return PointCloud(rows)


def format_cloud_csv(cloud) -> str:
    pts = _as_array(cloud)
    buf = io.StringIO()
    for row in pts:
        buf.write(",".join(repr(float(x)) for x in row))
        buf.write("\n")
    return buf.getvalue()


def write_cloud_csv(cloud, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, format_cloud_csv(cloud))
