"""Seeded generators for stratified test clouds.

Every generator returns ``(PointCloud, labels)`` where ``labels[i]`` names the
stratum piece point ``i`` was drawn from (for evaluation only). Pieces are
sampled uniformly, then isotropic Gaussian noise of ``noise_sigma`` is added.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import InputError, PointCloud

SHAPES = ("sphere_curve", "spiral_plane", "plane_two_lines", "plane_one_line",
          "lollipops_r6", "planes_r4")

DEFAULT_COUNTS = {
    "sphere_curve": (1200, 200),
    "spiral_plane": (300, 800),
    "plane_two_lines": (3000, 300, 300),
    "plane_one_line": (1600, 300),
    "lollipops_r6": (1400, 600) * 3,
    "planes_r4": (1200, 4000),
}

# piece names, in the order of DEFAULT_COUNTS
PIECES = {
    "sphere_curve": ("sphere", "curve"),
    "spiral_plane": ("spiral", "plane"),
    "plane_two_lines": ("plane", "line_a", "line_b"),
    "plane_one_line": ("plane", "line"),
    "lollipops_r6": ("circle_0", "stick_0", "circle_1", "stick_1", "circle_2", "stick_2"),
    "planes_r4": ("plane2", "plane3"),
}


@dataclass
class SynthSpec:
    shape: str
    counts: Optional[tuple] = None
    noise_sigma: float = 0.01
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InputError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.counts is None:
            self.counts = DEFAULT_COUNTS[self.shape]
        self.counts = tuple(int(c) for c in self.counts)
        if len(self.counts) != len(DEFAULT_COUNTS[self.shape]):
            raise InputError(f"{self.shape} takes {len(DEFAULT_COUNTS[self.shape])} counts")
        if any(c <= 0 for c in self.counts):
            raise InputError("counts must be positive")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be nonnegative")


def _sphere(rng, n, radius=1.0, center=(0.0, 0.0, 0.0)):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + radius * v


def _segment(rng, n, a, b):
    t = rng.uniform(0.0, 1.0, size=(n, 1))
    a, b = np.asarray(a, float), np.asarray(b, float)
    return a + t * (b - a)


def _square(rng, n, side, dim, axes=(0, 1)):
    pts = np.zeros((n, dim))
    pts[:, list(axes)] = rng.uniform(-side / 2, side / 2, size=(n, len(axes)))
    return pts


def _curve_by_arclength(rng, n, fn, t0, t1, grid=4000):
    # uniform in arclength by inverting the cumulative length on a fine grid
    t = np.linspace(t0, t1, grid)
    xyz = fn(t)
    seg = np.linalg.norm(np.diff(xyz, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    u = rng.uniform(0.0, s[-1], size=n)
    return fn(np.interp(u, s, t))


def _sphere_curve(rng, counts, p):
    n_s, n_c = counts
    length = p.get("curve_length", 1.2)

    def curve(t):
        # leaves the north pole along the normal and bends gently
        return np.stack([0.3 * t ** 2, 0.0 * t, 1.0 + t], axis=1)

    return [_sphere(rng, n_s), _curve_by_arclength(rng, n_c, curve, 0.0, length)]


def _spiral_plane(rng, counts, p):
    n_sp, n_pl = counts
    # a steep helix crossing the plane once, sized for neighbourhoods of a few units
    scale = p.get("scale", 10.0)
    side = p.get("plane_side", 3.0) * scale
    turns = p.get("turns", 2.0)
    r0, r1 = p.get("r_start", 0.3) * scale, p.get("r_end", 0.5) * scale
    height = p.get("height", 7.5) * scale

    def spiral(t):
        theta = 2 * np.pi * turns * t
        r = r0 + (r1 - r0) * t
        return np.stack([r * np.cos(theta), r * np.sin(theta), height * (t - 0.5)], axis=1)

    return [_curve_by_arclength(rng, n_sp, spiral, 0.0, 1.0), _square(rng, n_pl, side, 3)]


def _plane_lines(rng, counts, p, offsets):
    side = p.get("plane_side", 1.0)
    half = p.get("line_half_length", 0.5)
    pieces = [_square(rng, counts[0], side, 3)]
    for (x, y), n in zip(offsets, counts[1:]):
        pieces.append(_segment(rng, n, (x, y, -half), (x, y, half)))
    return pieces


def _lollipops(rng, counts, p):
    stick = p.get("stick_length", 1.0)
    radius = p.get("circle_radius", 1.0)
    pieces = []
    for k in range(3):
        n_circ, n_stick = counts[2 * k], counts[2 * k + 1]
        e1 = np.zeros(6)
        e2 = np.zeros(6)
        e1[2 * k] = 1.0
        e2[2 * k + 1] = 1.0
        theta = rng.uniform(0.0, 2 * np.pi, size=(n_circ, 1))
        center = (stick + radius) * e1
        circle = center + radius * (np.cos(theta) * e1 + np.sin(theta) * e2)
        t = rng.uniform(0.0, stick, size=(n_stick, 1))
        pieces.extend([circle, t * e1])
    return pieces


def _planes_r4(rng, counts, p):
    # 2-plane spans e0,e1; 3-plane spans e0,e2,e3; they share the e0 axis. The
    # 2-plane is shorter along e0 so the 3-plane cuts it into two halves.
    length2 = p.get("length2", 1.2)
    width2 = p.get("width2", 2.0)
    side3 = p.get("side3", 1.5)
    n2, n3 = counts
    plane2 = np.zeros((n2, 4))
    plane2[:, 0] = rng.uniform(-length2 / 2, length2 / 2, size=n2)
    plane2[:, 1] = rng.uniform(-width2 / 2, width2 / 2, size=n2)
    return [plane2, _square(rng, n3, side3, 4, axes=(0, 2, 3))]


def generate(spec: SynthSpec):
    """Sample ``spec``; returns ``(cloud, labels)`` with integer piece labels."""
    rng = np.random.default_rng(spec.seed)
    p = spec.params
    c = spec.counts
    if spec.shape == "sphere_curve":
        pieces = _sphere_curve(rng, c, p)
    elif spec.shape == "spiral_plane":
        pieces = _spiral_plane(rng, c, p)
    elif spec.shape == "plane_two_lines":
        sep = p.get("line_separation", 0.5)
        pieces = _plane_lines(rng, c, p, [(-sep / 2, 0.0), (sep / 2, 0.0)])
    elif spec.shape == "plane_one_line":
        pieces = _plane_lines(rng, c, p, [(0.0, 0.0)])
    elif spec.shape == "lollipops_r6":
        pieces = _lollipops(rng, c, p)
    else:
        pieces = _planes_r4(rng, c, p)
    pts = np.vstack(pieces)
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(scale=spec.noise_sigma, size=pts.shape)
    labels = np.concatenate([np.full(len(piece), k) for k, piece in enumerate(pieces)])
    return PointCloud(pts), labels
