"""Persistent homology of point clouds.

All filtration values are in ball-radius units: a simplex enters the
Vietoris-Rips filtration at half its diameter, so an edge of length ``d``
appears at ``d / 2``, exactly when the closed balls around its endpoints meet.
Coefficients are in the two-element field.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .geometry import InputError, PointCloud, _as_array, mst_lengths

DEFAULT_SIMPLEX_CAP = 2_000_000
DEFAULT_SUBSAMPLE = 300


class UnsupportedError(InputError):
    pass


@dataclass
class PersistenceDiagram:
    dim: int
    dots: list = field(default_factory=list)  # (birth, death) tuples, death may be inf
    approximate: bool = False

    def persistence(self) -> np.ndarray:
        return np.array([d - b for b, d in self.dots], dtype=np.float64)

    def finite(self) -> list:
        return [(b, d) for b, d in self.dots if math.isfinite(d)]

    def essential(self) -> list:
        return [(b, d) for b, d in self.dots if not math.isfinite(d)]

    def __len__(self):
        return len(self.dots)


@dataclass(frozen=True)
class BettiVector:
    beta0: int
    beta1: int
    beta2: int
    cutoff: float

    def as_tuple(self) -> tuple:
        return (self.beta0, self.beta1, self.beta2)


def h0_diagram(cloud) -> PersistenceDiagram:
    lengths = mst_lengths(cloud)
    dots = [(0.0, float(l) / 2.0) for l in lengths]
    dots.append((0.0, math.inf))
    return PersistenceDiagram(0, dots)


def connectivity_threshold(cloud) -> float:
    """Smallest ball radius at which the union of balls is connected."""
    lengths = mst_lengths(cloud)
    return float(lengths.max()) / 2.0 if lengths.size else 0.0


def farthest_point_sample(points: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Greedy farthest-point subsample of ``k`` indices, started from a seeded index."""
    n = points.shape[0]
    if k >= n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d = np.sqrt(np.sum((points - points[chosen[0]]) ** 2, axis=1))
    for _ in range(k - 1):
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, np.sqrt(np.sum((points - points[nxt]) ** 2, axis=1)))
    return np.sort(np.array(chosen, dtype=np.intp))


def _count_simplices(adj: np.ndarray, top_dim: int, cap: int) -> int:
    """Number of simplices of dimension <= top_dim in the clique complex, or
    ``cap + 1`` as soon as the running total exceeds ``cap``."""
    n = adj.shape[0]
    total = n
    if top_dim >= 1:
        total += int(np.triu(adj, 1).sum())
    if total > cap or top_dim < 2:
        return total
    upper = np.triu(adj, 1)
    for i in range(n):
        nbrs = np.flatnonzero(upper[i])
        if nbrs.size < 2:
            continue
        sub = upper[np.ix_(nbrs, nbrs)]
        total += int(sub.sum())
        if top_dim >= 3:
            for a in range(nbrs.size):
                common = np.flatnonzero(sub[a])
                if common.size >= 2:
                    total += int(sub[np.ix_(common, common)].sum())
                if total > cap:
                    return cap + 1
        if total > cap:
            return cap + 1
    return total


def _enumerate(adj: np.ndarray, dist: np.ndarray, top_dim: int):
    """Simplices of the clique complex up to ``top_dim`` as per-dimension lists
    of (value, vertex tuple), values in half-diameter units."""
    n = adj.shape[0]
    out = [[(0.0, (i,)) for i in range(n)]]
    upper = np.triu(adj, 1)
    if top_dim >= 1:
        edges = []
        ii, jj = np.nonzero(upper)
        for i, j in zip(ii.tolist(), jj.tolist()):
            edges.append((dist[i, j] / 2.0, (i, j)))
        out.append(edges)
    if top_dim >= 2:
        tris, tets = [], []
        for i in range(n):
            nbrs = np.flatnonzero(upper[i]).tolist()
            for a, j in enumerate(nbrs):
                common = [k for k in nbrs[a + 1:] if upper[j, k]]
                for b, k in enumerate(common):
                    v = max(dist[i, j], dist[i, k], dist[j, k])
                    tris.append((v / 2.0, (i, j, k)))
                    if top_dim >= 3:
                        for l in common[b + 1:]:
                            if upper[k, l]:
                                w = max(v, dist[i, l], dist[j, l], dist[k, l])
                                tets.append((w / 2.0, (i, j, k, l)))
        out.append(tris)
        if top_dim >= 3:
            out.append(tets)
    for lst in out:
        lst.sort()
    return out


def _faces(simplex: tuple):
    for skip in range(len(simplex)):
        yield simplex[:skip] + simplex[skip + 1:]


def _reduce(columns, n_rows, skip=frozenset()):
    """Standard column reduction over Z/2.

    ``columns`` is a list of row-index lists. Returns ``{col: low}`` for the
    nonzero reduced columns; columns listed in ``skip`` are known to vanish.
    """
    pivot_col = {}
    reduced = {}
    lows = {}
    for j, col in enumerate(columns):
        if j in skip or not col:
            continue
        c = set(col)
        low = max(c)
        while low in pivot_col:
            c ^= reduced[pivot_col[low]]
            if not c:
                break
            low = max(c)
        if c:
            pivot_col[low] = j
            reduced[j] = c
            lows[j] = low
    return lows


def rips_persistence(cloud, max_dim: int = 1, max_scale: float = math.inf,
                     simplex_cap: int = DEFAULT_SIMPLEX_CAP,
                     subsample: int = DEFAULT_SUBSAMPLE, seed: int = 0) -> list:
    """Vietoris-Rips persistence diagrams in dimensions ``0..max_dim``.

    The filtration is truncated at ``max_scale`` (ball-radius units); classes
    still alive there are reported with death ``inf``. If the complex would
    hold more than ``simplex_cap`` simplices the cloud is first replaced by a
    farthest-point subsample and every diagram is marked ``approximate``.
    """
    if max_dim not in (0, 1, 2):
        raise UnsupportedError(f"max_dim must be 0, 1 or 2, got {max_dim}")
    pts = _as_array(cloud)
    n = pts.shape[0]
    if simplex_cap < n:
        raise InputError(f"simplex_cap {simplex_cap} is below the point count {n}")
    if not max_scale > 0:
        raise InputError("max_scale must be positive")

    top = max_dim + 1
    dist = squareform(pdist(pts)) if n > 1 else np.zeros((1, 1))
    adj = dist <= 2.0 * max_scale
    np.fill_diagonal(adj, False)

    approximate = False
    if _count_simplices(adj, top, simplex_cap) > simplex_cap:
        approximate = True
        target = min(subsample, n - 1)
        while True:
            keep = farthest_point_sample(pts, target, seed)
            sub_adj = adj[np.ix_(keep, keep)]
            if _count_simplices(sub_adj, top, simplex_cap) <= simplex_cap or target <= 4:
                break
            target = max(4, int(target * 0.8))
        dist = dist[np.ix_(keep, keep)]
        adj = sub_adj
        n = keep.size

    simplices = _enumerate(adj, dist, top)
    while len(simplices) <= top:
        simplices.append([])
    index = [{s: k for k, (_, s) in enumerate(lst)} for lst in simplices]

    # reduce from the top down so positive simplices can be cleared below
    lows = [None] * (top + 1)
    cleared = set()
    for k in range(top, 0, -1):
        rows = index[k - 1]
        columns = [[rows[f] for f in _faces(s)] for _, s in simplices[k]]
        lows[k] = _reduce(columns, len(rows), skip=cleared)
        cleared = set(lows[k].values())

    diagrams = []
    for k in range(max_dim + 1):
        dots = []
        killed = set()
        if lows[k + 1] is not None:
            for j, i in sorted(lows[k + 1].items()):
                killed.add(i)
                birth = simplices[k][i][0]
                death = simplices[k + 1][j][0]
                if death > birth or k == 0:
                    dots.append((birth, death))
        negative = set(lows[k].keys()) if k >= 1 and lows[k] is not None else set()
        for i, (v, _) in enumerate(simplices[k]):
            if i not in killed and i not in negative:
                dots.append((v, math.inf))
        dots.sort()
        diagrams.append(PersistenceDiagram(k, dots, approximate))
    return diagrams


def betti_vector(diagrams, cutoff: float) -> BettiVector:
    """Count dots whose persistence exceeds ``cutoff``, per dimension 0..2."""
    if cutoff < 0:
        raise InputError("cutoff must be nonnegative")
    betti = [0, 0, 0]
    for dgm in diagrams:
        if dgm.dim > 2:
            continue
        betti[dgm.dim] += sum(1 for b, d in dgm.dots if d - b > cutoff)
    return BettiVector(betti[0], betti[1], betti[2], float(cutoff))


def diagrams_to_csv(diagrams) -> str:
    buf = io.StringIO()
    buf.write("dim,birth,death\n")
    for dgm in diagrams:
        for b, d in dgm.dots:
            death = "inf" if math.isinf(d) else repr(float(d))
            buf.write(f"{dgm.dim},{float(b)!r},{death}\n")
    return buf.getvalue()


def diagrams_from_csv(text: str) -> list:
    by_dim = {}
    lines = text.strip().splitlines()
    for line in lines[1:]:
        k, b, d = line.split(",")
        by_dim.setdefault(int(k), []).append((float(b), math.inf if d == "inf" else float(d)))
    return [PersistenceDiagram(k, by_dim[k]) for k in sorted(by_dim)]
