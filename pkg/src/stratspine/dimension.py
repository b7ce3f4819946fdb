"""Local dimension labels for scaffold nodes: eigengap estimates over a sweep of
neighbourhood radii, then refinement that separates singular (non-maximal)
nodes from mislabeled ones."""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import InputError
from .graphs import connected_components, induced_is_connected
from .mlpca import covariance_eigenvalues

log = logging.getLogger(__name__)

VOTE_RULES = ("mode",)
CENTERINGS = ("mean", "node", "max")
REFINE_RULES = ("node", "component")
_TIE_RTOL = 1e-9


@dataclass
class DimensionConfig:
    rho_lo: float
    rho_hi: float
    steps: int = 4
    vote: str = "mode"
    centering: str = "max"

    def __post_init__(self):
        if not (0 < self.rho_lo <= self.rho_hi):
            raise InputError(f"need 0 < rho_lo <= rho_hi, got {self.rho_lo}, {self.rho_hi}")
        if self.steps < 1:
            raise InputError("steps must be at least 1")
        if self.vote not in VOTE_RULES:
            raise InputError(f"unknown vote rule {self.vote!r}")
        if self.centering not in CENTERINGS:
            raise InputError(f"unknown centering {self.centering!r}; expected one of {CENTERINGS}")

    @classmethod
    def for_delta(cls, delta: float, rho_lo: Optional[float] = None,
                  rho_hi: Optional[float] = None, steps: Optional[int] = None,
                  centering: str = "max") -> "DimensionConfig":
        lo = delta if rho_lo is None else rho_lo
        hi = 2 * delta if rho_hi is None else rho_hi
        return cls(lo, max(lo, hi), 4 if steps is None else steps, centering=centering)

    def radii(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.rho_lo])
        return np.linspace(self.rho_lo, self.rho_hi, self.steps)


@dataclass
class DimensionResult:
    dims: dict
    flagged: set


@dataclass
class RefinementResult:
    dims: dict
    nonmaximal: set
    converged: bool
    passes: int


def eigengap_dimension(sigma) -> int:
    """Position of the largest drop in the max-normalised sequence ``sigma``
    (with a trailing zero appended); the first position wins near-ties."""
    s = np.asarray(sigma, dtype=np.float64).ravel()
    if s.size == 0:
        raise InputError("empty spectrum")
    top = s.max()
    if not top > 0:
        raise InputError("spectrum is identically zero")
    s = s / top
    gaps = s - np.append(s[1:], 0.0)
    best = gaps.max()
    return int(np.flatnonzero(gaps >= best * (1 - _TIE_RTOL))[0]) + 1


def _vote(estimates: list) -> int:
    counts = Counter(estimates)
    top = max(counts.values())
    return min(k for k, c in counts.items() if c == top)


def _estimate(pts: np.ndarray, center: np.ndarray, dim: int, centering: str) -> int:
    # 0 when the neighbourhood is a single repeated point
    out = 0
    for about in ((None,) if centering == "mean" else (center,) if centering == "node"
                  else (None, center)):
        lam = covariance_eigenvalues(pts, dim, about)
        if lam.max() > 0:
            out = max(out, eigengap_dimension(np.sqrt(lam)))
    return out


def initial_dimensions(scaffolding, cloud, config: DimensionConfig) -> DimensionResult:
    """Eigengap dimension of each node's neighbourhood at every sweep radius,
    aggregated by majority vote (ties go to the smaller dimension).

    The neighbourhood at radius ``rho`` is the union of the clusters of all
    nodes whose centers lie within ``rho`` of the node's center. Its second
    moments are taken about the neighbourhood mean (``centering="mean"``),
    about the node's center (``"node"``), or both with the larger estimate
    kept (``"max"``). Where several strata leave a point in different
    directions the mean-centered spectrum can tie between two dimensions,
    while moments about the point itself see every direction; on a flat
    piece away from a junction the mean-centered spectrum is the sharper one.
    """
    pts = cloud.points
    nodes = scaffolding.nodes
    centers = np.array([nd.center for nd in nodes], dtype=np.intp)
    tree = cKDTree(pts[centers])
    dims, flagged = {}, set()
    for nd in nodes:
        estimates = []
        for rho in config.radii():
            near = tree.query_ball_point(pts[nd.center], rho)
            near = sorted(set(near) | {nd.id})
            idx = np.concatenate([nodes[k].cluster for k in near])
            if idx.size < 2:
                continue
            est = _estimate(pts[idx], pts[nd.center], cloud.dim, config.centering)
            if est:
                estimates.append(est)
        if estimates:
            dims[nd.id] = _vote(estimates)
        else:
            dims[nd.id] = 0
            flagged.add(nd.id)
    return DimensionResult(dims, flagged)


def refine_dimensions(scaffolding, dims: dict, max_passes: int = 20,
                      rule: str = "component", cloud=None,
                      reach_factor: float = 3.0) -> RefinementResult:
    """Decide which nodes with a lower-dimensional neighbour are singular.

    ``rule="node"`` tests every such node ``w`` on its own: ``w`` is kept as
    non-maximal when its link is disconnected and its label is at most the sum
    of the link's labels; otherwise the whole link is relabeled with ``w``'s
    label. ``rule="component"`` applies the same idea to connected same-label
    components (see :func:`_refine_components`). Passes repeat until nothing
    is relabeled or ``max_passes`` is reached. Given ``cloud``, how far a
    piece reaches from a component is measured between cluster points against
    ``reach_factor * delta``; without it, in graph hops.
    """
    if rule not in REFINE_RULES:
        raise InputError(f"unknown refinement rule {rule!r}; expected one of {REFINE_RULES}")
    if max_passes < 1:
        raise InputError("max_passes must be at least 1")
    g = scaffolding.graph
    F = {v: int(dims[v]) for v in g.adj}
    if rule == "component":
        sizes = {nd.id: int(nd.cluster.size) for nd in scaffolding.nodes}
        positions = reach = None
        if cloud is not None:
            positions = {nd.id: cloud.points[nd.cluster] for nd in scaffolding.nodes}
            reach = reach_factor * scaffolding.delta
        return _refine_components(g, F, sizes, max_passes, positions, reach)
    nonmax = set()
    for p in range(1, max_passes + 1):
        changed = False
        nonmax = set()
        cand = [w for w in g.adj if any(F[x] < F[w] for x in g.adj[w])]
        cand.sort(key=lambda w: (F[w], w), reverse=True)
        for w in cand:
            L = g.adj[w]
            if not any(F[x] < F[w] for x in L):
                continue
            if not induced_is_connected(g, L) and F[w] <= sum(F[x] for x in L):
                nonmax.add(w)
            else:
                for x in L:
                    if F[x] != F[w]:
                        F[x] = F[w]
                        changed = True
        if not changed:
            return RefinementResult(F, nonmax, True, p)
    log.warning("dimension refinement did not converge in %d passes", max_passes)
    return RefinementResult(F, nonmax, False, max_passes)


def same_label_components(g, F: dict) -> list:
    """Connected components of equal-label vertices, each as a sorted list,
    ordered by descending label and then by smallest member."""
    comps = []
    for f in sorted(set(F.values())):
        comps.extend(connected_components(g, [v for v in g.adj if F[v] == f]))
    comps.sort(key=lambda c: (-F[c[0]], c[0]))
    return comps


def _hops(g, K: set, limit: int) -> dict:
    # breadth-first hop counts from K, explored up to ``limit``
    hops = {v: 0 for v in K}
    queue = deque(sorted(K))
    while queue:
        v = queue.popleft()
        if hops[v] >= limit:
            continue
        for y in g.adj[v]:
            if y not in hops:
                hops[y] = hops[v] + 1
                queue.append(y)
    return hops


def depth_test(g, K: set, positions: Optional[dict] = None, reach: Optional[float] = None,
               min_hops: int = 3):
    """Predicate telling whether a vertex set gets far from ``K``.

    With ``positions`` (vertex -> ``(m, D)`` array of its points) and
    ``reach``, far means some point lies at least ``reach`` from every point
    of ``K``. Otherwise it means some vertex is at least ``min_hops`` edges
    away from ``K``.
    """
    if positions is not None and reach is not None:
        tree = cKDTree(np.vstack([positions[v] for v in sorted(K)]))

        def deep(comp):
            d, _ = tree.query(np.vstack([positions[v] for v in comp]),
                              distance_upper_bound=reach)
            return bool(np.isinf(d).any())
        return deep
    hops = _hops(g, K, min_hops)
    return lambda comp: any(hops.get(v, min_hops) >= min_hops for v in comp)


def shallow_patches(g, K: set, F: dict, deep=None) -> list:
    """Vertices of lower-labeled patches touching ``K`` that stay close to it
    (components of the subgraph induced by the labels below ``K``'s; closeness
    is judged by ``deep``, see :func:`depth_test`)."""
    f = F[next(iter(K))]
    deep = deep or depth_test(g, K)
    touching = {x for v in K for x in g.adj[v] if x not in K and F[x] < f}
    out = []
    for comp in connected_components(g, [v for v in g.adj if F[v] < f]):
        if touching.isdisjoint(comp):
            continue
        if not deep(comp):
            out.extend(comp)
    return sorted(out)


def separated_pieces(g, K: set, F: dict, deep=None) -> list:
    """Strata that the vertex set ``K`` touches from below.

    ``K`` and its rim (the vertices adjacent to it) are set aside, and the
    remaining lower-labeled vertices are split into connected same-label
    components. Those that get far from ``K`` (judged by ``deep``, see
    :func:`depth_test`) and border the rim are the pieces. Rim vertices are
    then handed to the piece that reaches them first through rim vertices of
    the same label, breadth first in piece order. A shallow patch along ``K``
    is not a piece, and two strata that only meet inside the rim stay apart.
    """
    f = F[next(iter(K))]
    deep = deep or depth_test(g, K)
    rim = set().union(*(g.adj[v] for v in K)) - K
    pieces = []
    for lab in sorted({F[x] for x in rim if F[x] < f}):
        rim_lab = {x for x in rim if F[x] == lab}
        far = [v for v in g.adj if F[v] == lab and v not in K and v not in rim]
        found = [c for c in connected_components(g, far)
                 if deep(c) and any(not g.adj[v].isdisjoint(rim_lab) for v in c)]
        owner = {v: k for k, c in enumerate(found) for v in c}
        queue = deque(v for c in found for v in c)
        while queue:
            v = queue.popleft()
            for y in sorted(g.adj[v]):
                if y in rim_lab and y not in owner:
                    owner[y] = owner[v]
                    queue.append(y)
        grown = [[] for _ in found]
        for v, k in owner.items():
            grown[k].append(v)
        pieces.extend(sorted(c) for c in grown)
    return pieces


def trim_to_frontier(g, K: set, F: dict, pieces: list) -> dict:
    """Peel off the members of a singular component that border a single piece.

    Members are visited in id order, repeatedly. One whose neighbours outside
    the component all lie in a single piece joins it and takes the most
    common label among its neighbours there (ties to the larger label). Peeled members count as part of their
    piece from then on, so two pieces never come to touch. What remains
    borders two or more pieces, or none. Returns ``{vertex: label}`` for the
    peeled members.
    """
    owner = {v: k for k, pc in enumerate(pieces) for v in pc}
    core = set(K)
    out = {}
    changed = True
    while changed and len(core) > 1:
        changed = False
        for v in sorted(core):
            ks = {owner.get(y, ("outside", y)) for y in g.adj[v] if y not in core}
            if len(ks) != 1 or len(core) == 1:
                continue
            k = ks.pop()
            if isinstance(k, tuple):
                continue
            counts = Counter(F[y] if y not in out else out[y]
                             for y in g.adj[v] if owner.get(y) == k)
            top = max(counts.values())
            out[v] = max(lab for lab, c in counts.items() if c == top)
            owner[v] = k
            core.discard(v)
            changed = True
    return out


def piece_contacts(g, K: set, pieces: list, peeled=()) -> list:
    """Vertices where two different pieces of ``K`` touch next to ``K``.

    ``peeled`` members of ``K`` (see :func:`trim_to_frontier`) are counted
    with the piece they joined. Both ends of every edge joining two pieces
    are returned when either end is adjacent to the rest of ``K``: there the
    singular set is too thin to keep the strata apart.
    """
    owner = {v: k for k, pc in enumerate(pieces) for v in pc}
    core = set(K) - set(peeled)
    for v in peeled:
        ks = {owner[y] for y in g.adj[v] if y in owner}
        if len(ks) == 1:
            owner[v] = ks.pop()
    out = set()
    for x, k in owner.items():
        for y in g.adj[x]:
            if y in owner and owner[y] != k and (g.adj[x] & core or g.adj[y] & core):
                out.update((x, y))
    return sorted(out)


def _refine_components(g, F: dict, sizes: dict, max_passes: int, positions=None,
                       reach=None) -> RefinementResult:
    """Refinement on connected same-label components.

    Components ``K`` with a lower-labeled neighbour are visited from the
    highest label down, and the first matching rule applies:

    * ``K`` separates at most two pieces and is smaller than the largest,
      its lower neighbours are all 1-labeled and its link has at most two
      components. A curve passes
      through ``K``, so it is relabeled 1.
    * ``K`` separates at least two pieces (see :func:`separated_pieces`), its
      label is at most the sum of its link's labels, and it holds no more
      points than its largest piece. ``K`` is non-maximal: a singular set is
      small next to the strata meeting there.
    * ``K`` separates exactly one piece and holds fewer points than it. ``K``
      is the mislabeled side and takes the most common label of its lower
      neighbours.
    * Otherwise shallow lower-labeled patches along ``K`` take its label.
      Lower neighbours in a piece are left alone, because relabeling them
      would spread ``K``'s label along a genuine stratum.

    Once a pass changes nothing, one shaping pass reshapes every non-maximal
    component: members bordering a single piece are peeled off (see
    :func:`trim_to_frontier`), while pieces touching next to it and shallow
    patches are taken in (see :func:`piece_contacts`). Ordinary passes then
    resume until the next quiet pass. Refinement has converged when a shaping
    pass changes nothing.
    """
    nonmax: set = set()
    shaping = False
    for p in range(1, max_passes + 1):
        changed = False
        nonmax = set()
        for comp in same_label_components(g, F):
            f = F[comp[0]]
            if any(F[v] != f for v in comp):
                continue  # relabeled earlier in this pass
            K = set(comp)
            link = set().union(*(g.adj[v] for v in K)) - K
            lower = sorted(x for x in link if F[x] < f)
            if not lower:
                continue
            deep = depth_test(g, K, positions, reach)
            pieces = separated_pieces(g, K, F, deep)
            k_size = sum(sizes[v] for v in K)
            biggest = max((sum(sizes[v] for v in pc) for pc in pieces), default=0)
            if f > 1 and len(pieces) <= 2 and k_size < biggest \
                    and all(F[x] == 1 for x in lower) \
                    and len(connected_components(g, link)) <= 2:
                for v in K:
                    F[v] = 1
                changed = True
                continue
            if len(pieces) >= 2 and f <= sum(F[x] for x in link) and k_size <= biggest:
                if not shaping:
                    nonmax |= K
                    continue
                trimmed = trim_to_frontier(g, K, F, pieces)
                for v, lab in trimmed.items():
                    F[v] = lab
                sealed = piece_contacts(g, K, pieces, trimmed)
                sealed += [x for x in shallow_patches(g, K, F, deep) if x not in trimmed]
                for v in sealed:
                    F[v] = f
                nonmax |= (K - set(trimmed)) | set(sealed)
                changed = changed or bool(trimmed) or bool(sealed)
                continue
            if len(pieces) == 1 and k_size < biggest:
                counts = Counter(F[x] for x in lower)
                top = max(counts.values())
                new = max(lab for lab, c in counts.items() if c == top)
                for v in K:
                    F[v] = new
                changed = True
                continue
            enclosed = shallow_patches(g, K, F, deep)
            for x in enclosed:
                F[x] = f
            changed = changed or bool(enclosed)
        if not changed and shaping:
            return RefinementResult(F, nonmax, True, p)
        shaping = not changed
    log.warning("dimension refinement did not converge in %d passes", max_passes)
    return RefinementResult(F, nonmax, False, max_passes)
