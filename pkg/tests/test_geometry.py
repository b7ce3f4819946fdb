import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stratspine.geometry import (InputError, PointCloud, diameter, euclidean_dist,
                                 format_cloud_csv, minimum_spanning_tree, mst_lengths,
                                 parse_cloud_csv, range_query)


def test_pointcloud_rejects_bad_input():
    with pytest.raises(InputError):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(InputError):
        PointCloud([[0.0, np.nan]])
    with pytest.raises(InputError):
        PointCloud(np.zeros((2, 2, 2)))


def test_pointcloud_is_read_only():
    c = PointCloud([[0.0, 1.0], [2.0, 3.0]])
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0
    assert c.n == 2 and c.dim == 2


@pytest.mark.parametrize("p,q,expected", [
    ((0, 0), (3, 4), 5.0),
    ((1, 2), (1, 2), 0.0),
    ((1, 1, 1), (2, 3, 5), math.sqrt(21)),
])
def test_euclidean_dist(p, q, expected):
    assert euclidean_dist(p, q) == pytest.approx(expected, abs=1e-15)


def test_euclidean_dist_dimension_mismatch():
    with pytest.raises(InputError):
        euclidean_dist((0, 0), (0, 0, 0))


def test_range_query_examples():
    line = PointCloud([[0.0], [1.0], [2.0], [3.0]])
    assert range_query(line, [1.1], 1.0).tolist() == [1, 2]
    dup = PointCloud([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    assert range_query(dup, dup.points[0], 0.0).tolist() == [0, 2]
    assert range_query(line, [0.0], line.diameter()).tolist() == [0, 1, 2, 3]


def test_range_query_matches_brute_force(rng):
    for _ in range(20):
        n = int(rng.integers(1, 200))
        pts = rng.normal(size=(n, 3))
        c = rng.normal(size=3)
        r = float(rng.uniform(0, 2))
        brute = [i for i in range(n) if euclidean_dist(pts[i], c) <= r]
        assert range_query(pts, c, r).tolist() == brute


def test_mst_examples():
    assert minimum_spanning_tree(PointCloud([[0.0]])) == []
    edges = minimum_spanning_tree(PointCloud([[0.0], [1.0], [3.0]]))
    assert [(e.i, e.j, e.length) for e in edges] == [(0, 1, 1.0), (1, 2, 2.0)]
    square = PointCloud([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert sum(e.length for e in minimum_spanning_tree(square)) == pytest.approx(3.0)


def _brute_mst_weight(pts):
    # minimum over all spanning trees via Pruefer sequences
    n = len(pts)
    if n == 1:
        return 0.0
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    best = math.inf
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        total = 0.0
        for x in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            total += d[leaf, x]
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = [i for i in range(n) if degree[i] == 1]
        best = min(best, total + d[u, v])
    return best


def test_mst_total_matches_brute_force(rng):
    for n in range(1, 8):
        pts = rng.normal(size=(n, 2))
        assert mst_lengths(pts).sum() == pytest.approx(_brute_mst_weight(pts), abs=1e-12)


def test_mst_lengths_permutation_invariant(rng):
    pts = rng.normal(size=(60, 4))
    perm = rng.permutation(60)
    assert np.array_equal(mst_lengths(pts), mst_lengths(pts[perm]))


def test_mst_tie_break_is_lexicographic():
    # unit square: all four sides tie
    edges = minimum_spanning_tree(PointCloud([[0, 0], [1, 0], [1, 1], [0, 1]]))
    assert [(e.i, e.j) for e in edges] == [(0, 1), (0, 3), (1, 2)]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 4)),
              elements=st.floats(-100, 100)))
def test_diameter_matches_pdist(pts):
    from scipy.spatial.distance import pdist

    assert diameter(pts) == pytest.approx(pdist(pts).max(), abs=1e-9)


def test_csv_round_trip(rng):
    c = PointCloud(rng.normal(size=(17, 3)))
    back = parse_cloud_csv(format_cloud_csv(c))
    assert np.array_equal(back.points, c.points)


def test_csv_errors():
    with pytest.raises(InputError):
        parse_cloud_csv("1,2\n3\n")
    with pytest.raises(InputError):
        parse_cloud_csv("1,a\n")
    with pytest.raises(InputError):
        parse_cloud_csv("")
    assert parse_cloud_csv("x,y\n1,2\n", header=True).n == 1
