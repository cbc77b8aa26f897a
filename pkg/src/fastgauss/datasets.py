"""Synthetic dataset generators for benchmarks and tests.

Desk-scale stand-ins for the kinds of data kernel density estimation is
run on: uniform noise, tight Gaussian clusters, and sets with exact
duplicate points (a stress case for midpoint splits and zero-width
boxes).  All generators are deterministic given the seed and produce
points roughly inside the unit hypercube.
"""

from __future__ import annotations

import numpy as np


def uniform_points(n: int, dim: int, seed: int = 0) -> np.ndarray:
    """n points uniform in [0, 1]^dim."""
    rng = np.random.default_rng(seed)
    return rng.random((n, dim))


def clustered_points(n: int, dim: int, seed: int = 0,
                     clusters: int = 5, spread: float = 0.03) -> np.ndarray:
    """n points from an isotropic Gaussian mixture with random centers."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.15, 0.85, size=(clusters, dim))
    labels = rng.integers(0, clusters, size=n)
    return centers[labels] + spread * rng.standard_normal((n, dim))


def hierarchical_clusters(n: int, dim: int, seed: int = 0,
                          coarse: int = 5, fine: int = 80,
                          coarse_spread: float = 0.08,
                          fine_spread: float = 0.002) -> np.ndarray:
    """Clusters of micro-clusters, like real sky-survey or simulation data.

    Fine structure drives the cross-validation bandwidth far below the
    coarse cluster scale, which is the regime where a bandwidth sweep
    spans qualitatively different pruning behavior.
    """
    rng = np.random.default_rng(seed)
    coarse_centers = rng.uniform(0.2, 0.8, size=(coarse, dim))
    fine_centers = (coarse_centers[rng.integers(0, coarse, size=fine)]
                    + coarse_spread * rng.standard_normal((fine, dim)))
    labels = rng.integers(0, fine, size=n)
    return fine_centers[labels] + fine_spread * rng.standard_normal((n, dim))


def duplicated_points(n: int, dim: int, seed: int = 0,
                      frac: float = 0.1) -> np.ndarray:
    """Uniform points where a fraction are exact copies of earlier points."""
    rng = np.random.default_rng(seed)
    n_dup = int(round(n * frac))
    base = rng.random((n - n_dup, dim))
    copies = base[rng.integers(0, base.shape[0], size=n_dup)]
    pts = np.vstack([base, copies])
    rng.shuffle(pts)
    return pts
