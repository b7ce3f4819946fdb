"""Multi-scale local PCA: eigenvalue profiles over a radius schedule and the
eigenmetric comparing them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import InputError, PointCloud, range_query


@dataclass(frozen=True)
class RadiusSchedule:
    radii: tuple

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise InputError("radius schedule must contain at least one radius")
        if any(not np.isfinite(r) or r <= 0 for r in radii):
            raise InputError(f"radii must be positive and finite: {radii}")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise InputError(f"radii must be strictly increasing: {radii}")
        object.__setattr__(self, "radii", radii)

    def __len__(self):
        return len(self.radii)

    @classmethod
    def default_for(cls, cloud: PointCloud) -> "RadiusSchedule":
        """Three radii at diam/32, diam/16, diam/8."""
        diam = cloud.diameter()
        if diam <= 0:
            diam = 1.0
        return cls((diam / 32, diam / 16, diam / 8))

    @classmethod
    def parse(cls, text: str) -> "RadiusSchedule":
        try:
            return cls(tuple(float(t) for t in text.split(",") if t.strip()))
        except ValueError as exc:
            raise InputError(f"bad radius list {text!r}: {exc}") from None


@dataclass(frozen=True)
class EigenProfile:
    """Local covariance spectra of one point; row ``i`` belongs to radius ``r_i``."""

    owner: int
    lambdas: np.ndarray

    @property
    def n_radii(self) -> int:
        return self.lambdas.shape[0]


def covariance_eigenvalues(pts: np.ndarray, dim: int | None = None,
                           about: np.ndarray | None = None) -> np.ndarray:
    """Population-covariance eigenvalues of ``pts``, sorted non-increasing.

    With ``about`` the second moments are taken around that point instead of
    the mean. Fewer than two points gives the zero vector. Round-off negatives
    are clipped.
    """
    pts = np.asarray(pts, dtype=np.float64)
    D = pts.shape[1] if dim is None else dim
    m = pts.shape[0]
    if m < 2:
        return np.zeros(D)
    centered = pts - (pts.mean(axis=0) if about is None else np.asarray(about, float))
    cov = centered.T @ centered / m
    w = np.linalg.eigvalsh(cov)[::-1]
    w = np.clip(w, 0.0, None)
    if w.shape[0] < D:
        w = np.concatenate([w, np.zeros(D - w.shape[0])])
    return w


def local_eigenvalues(cloud: PointCloud, p: int, r: float) -> np.ndarray:
    if r <= 0:
        raise InputError("radius must be positive")
    idx = range_query(cloud, cloud.points[p], r)
    return covariance_eigenvalues(cloud.points[idx], cloud.dim)


NORMALIZATIONS = ("none", "trace")


def normalize_spectrum(lam: np.ndarray, normalize: str) -> np.ndarray:
    """``"none"`` keeps raw eigenvalues; ``"trace"`` rescales each spectrum to
    sum to one (zero spectra stay zero)."""
    if normalize == "none":
        return lam
    if normalize == "trace":
        total = lam.sum(axis=-1, keepdims=True)
        return np.divide(lam, total, out=np.zeros_like(lam), where=total > 0)
    raise InputError(f"unknown normalization {normalize!r}; expected one of {NORMALIZATIONS}")


def eigen_profile(cloud: PointCloud, p: int, schedule: RadiusSchedule,
                  normalize: str = "none") -> EigenProfile:
    rows = [local_eigenvalues(cloud, p, r) for r in schedule.radii]
    return EigenProfile(int(p), normalize_spectrum(np.vstack(rows), normalize))


def all_profiles(cloud: PointCloud, schedule: RadiusSchedule, normalize: str = "none") -> np.ndarray:
    """Profiles of every point as an ``(n, len(schedule), D)`` array.

    Same values as calling :func:`eigen_profile` per point, but ball queries go
    through a k-d tree.
    """
    normalize_spectrum(np.zeros(1), normalize)
    pts = cloud.points
    n, D = pts.shape
    out = np.zeros((n, len(schedule), D))
    tree = cKDTree(pts)
    for k, r in enumerate(schedule.radii):
        balls = tree.query_ball_point(pts, r)
        for i, ball in enumerate(balls):
            if len(ball) >= 2:
                ball.sort()
                out[i, k] = covariance_eigenvalues(pts[ball], D)
    return normalize_spectrum(out, normalize)


def eigenmetric(a, b) -> float:
    """Euclidean norm of the per-radius Euclidean norms of spectrum differences."""
    la = a.lambdas if isinstance(a, EigenProfile) else np.asarray(a, dtype=np.float64)
    lb = b.lambdas if isinstance(b, EigenProfile) else np.asarray(b, dtype=np.float64)
    if la.shape != lb.shape:
        raise InputError(f"profiles computed on different schedules: {la.shape} vs {lb.shape}")
    per_radius = np.sqrt(np.sum((la - lb) ** 2, axis=-1))
    return float(np.sqrt(np.sum(per_radius ** 2)))


def max_pairwise_eigenmetric(profiles: np.ndarray) -> float:
    """Largest eigenmetric distance among a stack of profiles ``(m, n_radii, D)``."""
    m = profiles.shape[0]
    if m < 2:
        return 0.0
    from scipy.spatial.distance import pdist

    # Frobenius distance of the flattened profiles is the eigenmetric
    return float(pdist(profiles.reshape(m, -1)).max())
