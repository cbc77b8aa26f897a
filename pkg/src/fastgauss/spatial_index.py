"""kd-trees with cached node statistics for dual-tree summation.

The tree splits the widest bounding-box dimension at the midpoint of the
contained points' range, stops at a leaf threshold (or when all points
coincide), and stores per node: a tight bounding box, the centroid, the
contained weight, and the largest infinity-norm offset of any contained
point from the centroid.  Points are kept in one contiguous permuted
array so every node owns a contiguous slice.

The same structure serves both roles of a dual traversal.  On the
reference side, ``refresh_moments`` caches a far-field expansion per node
for the current bandwidth, built directly at the leaves and combined
bottom-up with the exact moment-shift operator.  On the query side,
``reset_query_state`` zeroes the running mass bounds, estimate
accumulators, error-token balances, and (optionally) the per-node local
polynomials, plus the per-point accumulator arrays.

Tree structure is built once per dataset; moments are bandwidth-dependent
and rebuilt per bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel_math import index_set
from .series_expansion import (
    LocalExpansion,
    accumulate_far_field,
    add_far_field,
    translate_h2h,
)

# Largest precomputed series order per dimension.  Orders above these buy
# nothing: the per-term cost grows like D^p while the tail bounds shrink
# too slowly for the selector ever to pick a deeper truncation.
_PLIMIT_SCHEDULE = {1: 8, 2: 8, 3: 6, 4: 4, 5: 4, 6: 2}


def default_plimit(dim: int) -> int:
    """Series-order cap for a given dimension (1 beyond six dimensions)."""
    return _PLIMIT_SCHEDULE.get(dim, 1)


@dataclass
class PointStore:
    """Point coordinates with positive weights.

    ``points`` is (N, D) row-major; ``weights`` defaults to all ones.
    """

    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise ValueError("points must be a non-empty (N, D) array")
        if self.weights is None:
            self.weights = np.ones(self.points.shape[0])
        else:
            self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if self.weights.shape[0] != self.points.shape[0]:
                raise ValueError("weights length must match point count")
            if np.any(self.weights <= 0.0):
                raise ValueError("weights must be positive")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


class Node:
    """One kd-tree node; geometry plus both traversal roles' caches."""

    __slots__ = (
        "index",
        "start",
        "end",
        "lo",
        "hi",
        "lo_t",
        "hi_t",
        "center",
        "count",
        "weight",
        "inf_radius",
        "left",
        "right",
        # reference-side cache
        "moments",
        # query-side traversal state
        "tokens",
        "mass_lo",
        "mass_hi",
        "pend_lo",
        "pend_hi",
        "est",
        "local",
        "local_used",
    )

    def __init__(self, index, start, end, lo, hi, center, count, weight, inf_radius):
        self.index = index
        self.start = start
        self.end = end
        self.lo = lo
        self.hi = hi
        # plain-float copies for the traversal hot path (scalar box math
        # beats small-array numpy calls by an order of magnitude)
        self.lo_t = tuple(lo.tolist())
        self.hi_t = tuple(hi.tolist())
        self.center = center
        self.count = count
        self.weight = weight
        self.inf_radius = inf_radius
        self.left = None
        self.right = None
        self.moments = None
        self.tokens = 0.0
        self.mass_lo = 0.0
        self.mass_hi = 0.0
        self.pend_lo = 0.0
        self.pend_hi = 0.0
        self.est = 0.0
        self.local = None
        self.local_used = False

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class KdTree:
    """Built tree plus the permuted point store and query-state arrays."""

    def __init__(self, points, weights, perm, root, nodes, leaves, leaf_threshold):
        self.points = points  # (N, D), tree order
        self.weights = weights  # (N,), tree order
        self.perm = perm  # tree position -> original index
        self.root = root
        self.nodes = nodes  # preorder list
        self.leaves = leaves
        self.leaf_threshold = leaf_threshold
        self.total_weight = float(weights.sum())
        self.moments_bandwidth = None
        self.moments_order = None
        # per-point query accumulators, allocated by reset_query_state
        self.q_mass_lo = None
        self.q_mass_hi = None
        self.q_est = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def refresh_moments(self, h: float, plimit: int) -> None:
        """Rebuild every node's cached far-field expansion for bandwidth h.

        Leaves accumulate their points directly; internal nodes combine
        their children's expansions with the exact moment shift, so every
        node's cache equals a direct accumulation over its descendants.
        """

        def build(node: Node):
            if node.is_leaf:
                node.moments = accumulate_far_field(
                    self.points[node.start : node.end],
                    self.weights[node.start : node.end],
                    node.center,
                    plimit,
                    h,
                )
            else:
                build(node.left)
                build(node.right)
                moments = translate_h2h(node.left.moments, node.center)
                add_far_field(moments, translate_h2h(node.right.moments, node.center))
                node.moments = moments

        build(self.root)
        self.moments_bandwidth = h
        self.moments_order = plimit

    def reset_query_state(self, total_ref_weight: float,
                          local_order: int | None = None,
                          bandwidth: float | None = None) -> None:
        """Zero all query-side state for a fresh traversal.

        Mass bounds start at [0, W]: before any work, each reference
        point contributes at least nothing and at most its full weight.
        ``local_order`` allocates a zero local polynomial per node (at
        the given bandwidth) for traversals that accumulate series
        contributions.
        """
        w = float(total_ref_weight)
        coeff_count = index_set(self.dim, local_order).count if local_order else 0
        for node in self.nodes:
            node.tokens = 0.0
            node.mass_lo = 0.0
            node.mass_hi = w
            node.pend_lo = 0.0
            node.pend_hi = 0.0
            node.est = 0.0
            node.local_used = False
            if local_order is None:
                node.local = None
            else:
                node.local = LocalExpansion(
                    node.center, local_order, np.zeros(coeff_count), bandwidth
                )
        self.q_mass_lo = np.zeros(self.n)
        self.q_mass_hi = np.full(self.n, w)
        self.q_est = np.zeros(self.n)


def build_tree(store: PointStore, leaf_threshold: int = 25) -> KdTree:
    """Build the kd-tree structure (no moments, no query state).

    Every leaf holds at most ``leaf_threshold`` points, except that a
    set of identical points becomes a single leaf regardless of size
    (there is no valid split of a zero-width box).
    """
    if leaf_threshold < 1:
        raise ValueError("leaf threshold must be at least 1")
    points = store.points
    weights = store.weights
    order = np.arange(store.n)
    nodes: list[Node] = []
    leaves: list[Node] = []

    def construct(start: int, end: int) -> Node:
        idx = order[start:end]
        pts = points[idx]
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        center = pts.mean(axis=0)
        inf_radius = float(np.abs(pts - center).max())
        node = Node(
            len(nodes), start, end, lo, hi, center,
            end - start, float(weights[idx].sum()), inf_radius,
        )
        nodes.append(node)
        widths = hi - lo
        split_dim = int(np.argmax(widths))
        if end - start <= leaf_threshold or widths[split_dim] == 0.0:
            leaves.append(node)
            return node
        mid = 0.5 * (lo[split_dim] + hi[split_dim])
        mask = pts[:, split_dim] < mid
        n_left = int(mask.sum())
        if n_left == 0 or n_left == end - start:
            # box width of ~1 ulp; no usable split
            leaves.append(node)
            return node
        order[start:end] = np.concatenate([idx[mask], idx[~mask]])
        node.left = construct(start, start + n_left)
        node.right = construct(start + n_left, end)
        return node

    root = construct(0, store.n)
    return KdTree(points[order], weights[order], order, root, nodes, leaves, leaf_threshold)


def min_sq_dist(a_lo, a_hi, b_lo, b_hi) -> float:
    """Smallest squared distance between two axis-aligned boxes."""
    gap = np.maximum(a_lo - b_hi, b_lo - a_hi)
    np.maximum(gap, 0.0, out=gap)
    return float(gap @ gap)


def max_sq_dist(a_lo, a_hi, b_lo, b_hi) -> float:
    """Largest squared distance between two axis-aligned boxes."""
    span = np.maximum(a_hi - b_lo, b_hi - a_lo)
    return float(span @ span)


def box_sq_bounds(a_lo, a_hi, b_lo, b_hi) -> tuple[float, float]:
    """Both squared-distance bounds in one pass (traversal hot path)."""
    gap = np.maximum(a_lo - b_hi, b_lo - a_hi)
    np.maximum(gap, 0.0, out=gap)
    span = np.maximum(a_hi - b_lo, b_hi - a_lo)
    return float(gap @ gap), float(span @ span)
