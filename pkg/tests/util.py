"""Shared helpers for the test suite: random node-pair configurations."""

import numpy as np

from fastgauss import NodePairGeometry
from fastgauss.spatial_index import max_sq_dist, min_sq_dist

# Measured errors include floating-point noise from both the evaluation
# path and the exact oracle itself (~1e-15 relative per term); dominance
# of a truncation bound is only observable above that floor.  The engine
# never operates anywhere near it (tolerances are >= 1e-6 in practice).
def noise_floor(geom, exact):
    return 1e-9 * (geom.weight_ref + float(np.abs(exact).max()) + 1.0)


def random_node_pair(rng, dim=None, order_cap=8):
    """A random (query cloud, reference cloud) pair with its geometry.

    Returns (q_points, r_points, weights, geometry, order).  Boxes are
    the exact point-set bounding boxes; radii are infinity-norm offsets
    from the centroids divided by the bandwidth, as the engine computes
    them.
    """
    if dim is None:
        dim = int(rng.integers(1, 6))
    h = float(rng.uniform(0.05, 2.0))
    order = int(rng.integers(1, order_cap + 1))
    n_r = int(rng.integers(2, 20))
    n_q = int(rng.integers(2, 20))
    r_scale = float(rng.uniform(0.01, 0.6))
    q_scale = float(rng.uniform(0.01, 0.6))
    gap = float(rng.uniform(0.0, 3.0))
    r_pts = rng.uniform(0.0, r_scale, (n_r, dim))
    q_pts = rng.uniform(0.0, q_scale, (n_q, dim)) + gap
    weights = rng.uniform(0.2, 2.0, n_r)
    r_center = r_pts.mean(axis=0)
    q_center = q_pts.mean(axis=0)
    geom = NodePairGeometry(
        min_sqdist=min_sq_dist(q_pts.min(0), q_pts.max(0), r_pts.min(0), r_pts.max(0)),
        max_sqdist=max_sq_dist(q_pts.min(0), q_pts.max(0), r_pts.min(0), r_pts.max(0)),
        r_ref=float(np.abs(r_pts - r_center).max()) / h,
        r_query=float(np.abs(q_pts - q_center).max()) / h,
        weight_ref=float(weights.sum()),
        n_query=n_q,
        n_ref=n_r,
        dim=dim,
        bandwidth=h,
    )
    return q_pts, r_pts, weights, geom, order


def exact_sums(q_pts, r_pts, weights, h):
    """O(NM) loop-free oracle for small instances."""
    d2 = ((q_pts[:, None, :] - r_pts[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-0.5 * d2 / (h * h)) @ weights
