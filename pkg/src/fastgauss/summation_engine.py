"""The four Gaussian summation algorithms over a pair of kd-trees.

``naive_sum`` is the exact blocked reference implementation; it is the
oracle every other algorithm is verified against.

The dual-tree algorithms descend the query and reference trees together
and try to settle whole node pairs at once:

* ``dfd_run``: finite-difference pruning only.  A pair is settled by the
  midpoint kernel estimate when the kernel spread over the pair's
  distance interval fits within the per-pair share of the global error
  budget, ``err <= eps * W_R * mass_lo / W``.
* ``dfdo_run``: the same rule extended with per-node error tokens.  Every
  settled pair banks whatever share of its budget it did not use; later
  pairs may spend banked tokens to prune where the plain rule refuses.
* ``dito_run``: tokens plus series approximations.  When the
  finite-difference attempt fails, the cheapest feasible series method is
  chosen (far-field evaluation, direct local accumulation, or far-to-local
  translation) and its contribution recorded either per query point or in
  the node's local polynomial; a post-traversal sweep (``dito_post``)
  pushes node-level estimates and polynomials down to the query points.

Every algorithm guarantees max_q |G_est - G| / G <= eps.  With eps = 0
no inexact prune can fire and all three reproduce the naive sums up to
summation-order roundoff.

Query-node bookkeeping during a traversal: ``mass_lo``/``mass_hi`` are
running bounds on the total kernel mass of every query in the node,
``est`` accumulates finite-difference contributions, ``tokens`` the
banked error budget.  Bound increments are accumulated on the node where
a prune fires and pushed down lazily when the recursion descends, so
descendant prune tests always see ancestor contributions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import exp, inf, sqrt

import numpy as np

from .error_bounds import Method, NodePairGeometry, best_method, series_floor_constant
from .series_expansion import (
    accumulate_local_direct,
    add_local,
    eval_far_field,
    eval_local,
    translate_h2l,
    translate_l2l,
)
from .spatial_index import KdTree, Node, default_plimit

_ALGORITHMS = ("naive", "dfd", "dfdo", "dito")


@dataclass
class RunConfig:
    """Per-run knobs: tolerance, bandwidth, algorithm, series cap, leaf size.

    ``epsilon`` may be 0 to disable every inexact prune, which makes the
    tree algorithms reproduce the naive sums exactly (used for
    conservation checks).
    """

    bandwidth: float
    epsilon: float = 0.01
    algorithm: str = "dito"
    plimit: int | None = None
    leaf_threshold: int = 25

    def __post_init__(self):
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class TraversalCounters:
    """Work counters for one traversal."""

    pair_visits: int = 0
    base_cases: int = 0
    fd_prunes: int = 0
    hermite_prunes: int = 0
    local_prunes: int = 0
    h2l_prunes: int = 0

    @property
    def prunes(self) -> int:
        return self.fd_prunes + self.hermite_prunes + self.local_prunes + self.h2l_prunes

    def as_dict(self) -> dict:
        return {
            "pair_visits": self.pair_visits,
            "base_cases": self.base_cases,
            "fd_prunes": self.fd_prunes,
            "hermite_prunes": self.hermite_prunes,
            "local_prunes": self.local_prunes,
            "h2l_prunes": self.h2l_prunes,
        }


@dataclass
class ResultVector:
    """Per-query estimates (original input order), timing, and counters.

    ``audit`` is an optional event ledger (kind, query node index,
    reference weight, error bound, mass_lo at decision, token flow)
    recorded when a run is started with ``audit=True``.
    """

    values: np.ndarray
    seconds: float
    counters: TraversalCounters = field(default_factory=TraversalCounters)
    audit: list | None = None


def naive_sum(queries, references, weights, h: float) -> ResultVector:
    """Exact double-precision kernel sums, G(x_q) = sum_r w_r K(|x_q - x_r|).

    Blocked so temporaries stay small; squared distances accumulate one
    coordinate at a time (the same formula the tree base cases use, which
    keeps the exact-mode comparison meaningful).
    """
    t0 = time.perf_counter()
    queries = np.ascontiguousarray(queries, dtype=float)
    references = np.ascontiguousarray(references, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if queries.ndim == 1:
        queries = queries.reshape(1, -1)
    m, dim = queries.shape
    n = references.shape[0]
    neg = -0.5 / (h * h)
    out = np.empty(m)
    q_block = 256
    r_block = max(1024, min(n, 8192))
    for q0 in range(0, m, q_block):
        q_slice = queries[q0 : q0 + q_block]
        acc = np.zeros(q_slice.shape[0])
        for r0 in range(0, n, r_block):
            r_slice = references[r0 : r0 + r_block]
            d2 = np.zeros((q_slice.shape[0], r_slice.shape[0]))
            for d in range(dim):
                diff = q_slice[:, d, None] - r_slice[None, :, d]
                d2 += diff * diff
            d2 *= neg
            np.exp(d2, out=d2)
            acc += d2 @ weights[r0 : r0 + r_block]
        out[q0 : q0 + q_block] = acc
    return ResultVector(out, time.perf_counter() - t0)


def _required_tokens(ref_weight: float, err_bound: float,
                     epsilon: float, mass_lo: float, total_weight: float) -> float:
    """Token balance needed to settle a pair within the global budget.

    Settling with absolute error E is admissible when
    E <= eps * (W_R + tokens) * mass_lo / W; solving for the token need
    gives W * E / (eps * mass_lo) - W_R.  Non-positive means the pair's
    own weight share covers the error and the difference is banked.  An
    exact settlement (E = 0) always passes and banks the full W_R; a zero
    mass bound makes any inexact settlement inadmissible.
    """
    if err_bound <= 0.0:
        return -ref_weight
    denom = epsilon * mass_lo
    if denom <= 0.0:
        return inf
    return total_weight * err_bound / denom - ref_weight


def token_update(qnode: Node, ref_weight: float, err_bound: float,
                 epsilon: float, total_weight: float, mass_lo: float) -> bool:
    """Prune decision with token accounting on the query node.

    Returns True (and adjusts the node's balance: banking a surplus or
    spending a deficit) when the pair may be settled; False leaves the
    node untouched.  The balance never goes negative.
    """
    req = _required_tokens(ref_weight, err_bound, epsilon, mass_lo, total_weight)
    if req <= 0.0 or qnode.tokens >= req:
        qnode.tokens -= req
        return True
    return False


def _push_pending(qnode: Node) -> None:
    # Forward bound increments accumulated at this node to its children
    # before the recursion descends into them.
    pl = qnode.pend_lo
    ph = qnode.pend_hi
    if pl != 0.0 or ph != 0.0:
        for child in (qnode.left, qnode.right):
            child.mass_lo += pl
            child.mass_hi += ph
            child.pend_lo += pl
            child.pend_hi += ph
        qnode.pend_lo = 0.0
        qnode.pend_hi = 0.0


def _leaf_kernel_block(qtree, rtree, qnode, rnode, neg_inv):
    q_pts = qtree.points[qnode.start : qnode.end]
    r_pts = rtree.points[rnode.start : rnode.end]
    # per-coordinate accumulation, same operation order as naive_sum
    d2 = q_pts[:, 0, None] - r_pts[None, :, 0]
    d2 *= d2
    for d in range(1, q_pts.shape[1]):
        diff = q_pts[:, d, None] - r_pts[None, :, d]
        diff *= diff
        d2 += diff
    d2 *= neg_inv
    np.exp(d2, out=d2)
    return d2 @ rtree.weights[rnode.start : rnode.end]


def dito_base(qtree: KdTree, rtree: KdTree, qnode: Node, rnode: Node, h: float,
              credit_tokens: bool = True,
              counters: TraversalCounters | None = None,
              ledger: list | None = None) -> None:
    """Exhaustive base case for a leaf pair.

    Flushes the node's pending bound increments into the per-point
    accumulators, adds the exact kernel contribution of every reference
    point to every query point (tightening both bounds), banks the pair's
    full weight share as tokens, and refreshes the node bounds from the
    per-point values.
    """
    s, e = qnode.start, qnode.end
    if qnode.pend_lo != 0.0 or qnode.pend_hi != 0.0:
        qtree.q_mass_lo[s:e] += qnode.pend_lo
        qtree.q_mass_hi[s:e] += qnode.pend_hi
        qnode.pend_lo = 0.0
        qnode.pend_hi = 0.0
    contrib = _leaf_kernel_block(qtree, rtree, qnode, rnode, -0.5 / (h * h))
    qtree.q_mass_lo[s:e] += contrib
    qtree.q_mass_hi[s:e] += contrib - rnode.weight
    qtree.q_est[s:e] += contrib
    if credit_tokens:
        qnode.tokens += rnode.weight
    qnode.mass_lo = float(qtree.q_mass_lo[s:e].min())
    qnode.mass_hi = float(qtree.q_mass_hi[s:e].max())
    if counters is not None:
        counters.base_cases += 1
    if ledger is not None:
        ledger.append(("base", qnode.index, rnode.weight, 0.0, qnode.mass_lo, -rnode.weight))


def dito_post(qtree: KdTree) -> None:
    """Push node-level estimates and local polynomials down to the points.

    Internal nodes hand their accumulated estimate to both children and
    re-center their local polynomial onto each child (an exact shift);
    leaves evaluate their polynomial at every contained query point and
    add the node estimate.  After the sweep every settled contribution is
    reflected exactly once in the per-point estimates.
    """

    def descend(node: Node):
        if node.is_leaf:
            if node.est != 0.0:
                qtree.q_est[node.start : node.end] += node.est
            if node.local_used:
                qtree.q_est[node.start : node.end] += eval_local(
                    node.local, qtree.points[node.start : node.end]
                )
            return
        for child in (node.left, node.right):
            child.est += node.est
            if node.local_used:
                add_local(child.local, translate_l2l(node.local, child.center))
                child.local_used = True
        node.est = 0.0
        descend(node.left)
        descend(node.right)

    descend(qtree.root)


def _apply_bound_prune(qnode: Node, dl: float, du: float) -> None:
    qnode.mass_lo += dl
    qnode.mass_hi += du
    qnode.pend_lo += dl
    qnode.pend_hi += du


def _traverse(config: RunConfig, qtree: KdTree, rtree: KdTree,
              use_tokens: bool, use_series: bool,
              counters: TraversalCounters, ledger: list | None) -> None:
    eps = config.epsilon
    total_w = rtree.total_weight
    h = config.bandwidth
    neg_inv = -0.5 / (h * h)
    inv_h = 1.0 / h
    plimit = config.plimit if config.plimit is not None else default_plimit(qtree.dim)
    dim = qtree.dim
    dims = range(dim)
    q_est = qtree.q_est
    q_points = qtree.points
    r_points = rtree.points
    r_weights = rtree.weights
    floor_c = series_floor_constant(dim, plimit) if use_series else 0.0
    exp_ = exp

    def visit(q: Node, r: Node):
        counters.pair_visits += 1
        qlo = q.lo_t
        qhi = q.hi_t
        rlo = r.lo_t
        rhi = r.hi_t
        min_sq = 0.0
        max_sq = 0.0
        for d in dims:
            a = qlo[d] - rhi[d]
            b = rlo[d] - qhi[d]
            g = a if a > b else b
            if g > 0.0:
                min_sq += g * g
            s1 = qhi[d] - rlo[d]
            s2 = rhi[d] - qlo[d]
            s = s1 if s1 > s2 else s2
            max_sq += s * s
        k_hi = exp_(min_sq * neg_inv)
        k_lo = exp_(max_sq * neg_inv)
        w_r = r.weight
        mass_lo = q.mass_lo
        fd_err = 0.5 * w_r * (k_hi - k_lo)
        # inline _required_tokens (hot path)
        if fd_err <= 0.0:
            req = -w_r
        else:
            denom = eps * mass_lo
            req = total_w * fd_err / denom - w_r if denom > 0.0 else inf
        if req <= 0.0 or (use_tokens and q.tokens >= req):
            if use_tokens:
                q.tokens -= req
            dl = w_r * k_lo
            du = w_r * k_hi - w_r
            q.mass_lo = mass_lo + dl
            q.mass_hi += du
            q.pend_lo += dl
            q.pend_hi += du
            q.est += 0.5 * (dl + du + w_r)
            counters.fd_prunes += 1
            if ledger is not None:
                ledger.append(("fd", q.index, w_r, fd_err, mass_lo, req))
            return
        if use_series:
            maxerr = eps * (w_r + q.tokens) * mass_lo / total_w
            r_ref = r.inf_radius * inv_h
            r_qu = q.inf_radius * inv_h
            rmin = r_ref if r_ref < r_qu else r_qu
            # shared floor of every series bound; skip the full order scan
            # when even it cannot meet the budget
            possible = sqrt(k_hi) * w_r * floor_c
            if rmin < 1.0:
                possible *= rmin**plimit
            if possible <= maxerr:
                geom = NodePairGeometry(
                    min_sq, max_sq, r_ref, r_qu, w_r, q.count, r.count, dim, h
                )
                choice = best_method(geom, maxerr, plimit)
                if choice.method is not Method.EXHAUSTIVE and token_update(
                    q, w_r, choice.bound, eps, total_w, mass_lo
                ):
                    p = choice.order
                    if choice.method is Method.HERMITE:
                        q_est[q.start : q.end] += eval_far_field(
                            r.moments, q_points[q.start : q.end], order=p
                        )
                        counters.hermite_prunes += 1
                    elif choice.method is Method.LOCAL:
                        add_local(
                            q.local,
                            accumulate_local_direct(
                                r_points[r.start : r.end],
                                r_weights[r.start : r.end],
                                q.center, p, h,
                            ),
                        )
                        q.local_used = True
                        counters.local_prunes += 1
                    else:
                        add_local(
                            q.local, translate_h2l(r.moments, q.center, p, src_order=p)
                        )
                        q.local_used = True
                        counters.h2l_prunes += 1
                    _apply_bound_prune(q, w_r * k_lo, w_r * k_hi - w_r)
                    if ledger is not None:
                        ledger.append(
                            (choice.method.value, q.index, w_r, choice.bound, mass_lo,
                             _required_tokens(w_r, choice.bound, eps, mass_lo, total_w))
                        )
                    return
        q_leaf = q.left is None
        r_leaf = r.left is None
        if q_leaf and r_leaf:
            dito_base(qtree, rtree, q, r, h, credit_tokens=use_tokens,
                      counters=counters, ledger=ledger)
            return
        if q_leaf:
            visit(q, r.left)
            visit(q, r.right)
            return
        _push_pending(q)
        if r_leaf:
            visit(q.left, r)
            visit(q.right, r)
        else:
            visit(q.left, r.left)
            visit(q.left, r.right)
            visit(q.right, r.left)
            visit(q.right, r.right)
        # refresh this node's bounds from its children: every query below
        # lies under exactly one child, so the children's bounds (which
        # now include everything pushed down plus their own gains) cover
        # the node; pending is zero here, so this never loses mass
        ql = q.left
        qr = q.right
        q.mass_lo = ql.mass_lo if ql.mass_lo < qr.mass_lo else qr.mass_lo
        q.mass_hi = ql.mass_hi if ql.mass_hi > qr.mass_hi else qr.mass_hi

    visit(qtree.root, rtree.root)


def _run_tree_algorithm(config: RunConfig, qtree: KdTree, rtree: KdTree,
                        use_tokens: bool, use_series: bool, audit: bool) -> ResultVector:
    if use_series:
        plimit = config.plimit if config.plimit is not None else default_plimit(qtree.dim)
        if rtree.moments_bandwidth != config.bandwidth or (
            rtree.moments_order is None or rtree.moments_order < plimit
        ):
            raise RuntimeError(
                "reference moments missing or stale; call refresh_moments "
                "for this bandwidth first"
            )
        local_order = plimit
    else:
        local_order = None
    counters = TraversalCounters()
    ledger = [] if audit else None
    t0 = time.perf_counter()
    qtree.reset_query_state(rtree.total_weight, local_order=local_order,
                            bandwidth=config.bandwidth)
    _traverse(config, qtree, rtree, use_tokens, use_series, counters, ledger)
    dito_post(qtree)
    seconds = time.perf_counter() - t0
    values = np.empty(qtree.n)
    values[qtree.perm] = qtree.q_est
    return ResultVector(values, seconds, counters, ledger)


def dfd_run(config: RunConfig, qtree: KdTree, rtree: KdTree,
            audit: bool = False) -> ResultVector:
    """Finite-difference dual-tree summation (no tokens, no series)."""
    return _run_tree_algorithm(config, qtree, rtree,
                               use_tokens=False, use_series=False, audit=audit)


def dfdo_run(config: RunConfig, qtree: KdTree, rtree: KdTree,
             audit: bool = False) -> ResultVector:
    """Finite-difference dual-tree summation with error tokens."""
    return _run_tree_algorithm(config, qtree, rtree,
                               use_tokens=True, use_series=False, audit=audit)


def dito_run(config: RunConfig, qtree: KdTree, rtree: KdTree,
             audit: bool = False) -> ResultVector:
    """Series-accelerated dual-tree summation with error tokens.

    Requires ``rtree.refresh_moments(bandwidth, plimit)`` to have run for
    this configuration's bandwidth.
    """
    return _run_tree_algorithm(config, qtree, rtree,
                               use_tokens=True, use_series=True, audit=audit)
