"""Truncation-error bounds and the cost-based approximation selector.

For a (query node, reference node) pair with box-derived distance bounds
and infinity-norm radii, each approximation method has a closed-form
upper bound on the absolute error it can commit:

* finite difference: half the kernel spread over the distance interval,
  W_R (K(d_min) - K(d_max)) / 2;
* far-field evaluation at order p: the Hermite tail bound, with the
  reference radius driving the p-th power;
* direct local accumulation at order p: the same form with the query
  radius;
* far-to-local translation at order p: the sum of both tails (the
  conversion truncates on the moment side and the polynomial side).

``best_method`` picks the cheapest method whose bound meets a target,
scanning truncation orders from 1 up to the per-dimension cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

_SQRT2 = math.sqrt(2.0)
_INF = float("inf")


class Method(Enum):
    """Ways a reference node's contribution can be settled for a query node."""

    EXHAUSTIVE = "exhaustive"
    FINITE_DIFF = "fd"
    HERMITE = "hermite"  # evaluate the far-field series at each query
    LOCAL = "local"  # accumulate reference points into the local polynomial
    H2L = "h2l"  # translate far-field moments into the local polynomial


@dataclass
class MethodChoice:
    """Selector result: method, truncation order, error bound, cost estimate."""

    method: Method
    order: int | None
    bound: float
    cost: float


@dataclass
class NodePairGeometry:
    """Geometry and statistics of a query/reference node pair.

    Distances are stored squared (as produced by the box-distance
    routines); the radii are infinity-norm node radii already divided by
    the bandwidth.
    """

    min_sqdist: float
    max_sqdist: float
    r_ref: float
    r_query: float
    weight_ref: float
    n_query: int
    n_ref: int
    dim: int
    bandwidth: float


@lru_cache(maxsize=None)
def _tail_tables(dim: int, plimit: int):
    """Per-order constants of the series tail bounds.

    count[p] = C(D+p-1, D-1), the number of degree-p indices; denom[p] =
    sqrt(floor(p/D)!^(D-p') * ceil(p/D)!^p') with p' = p mod D, the
    factorial of the most balanced degree-p index; cross[p] =
    C(D+p-1, D), the full size of an order-p index set.
    """
    count = np.zeros(plimit + 1)
    denom = np.ones(plimit + 1)
    cross = np.zeros(plimit + 1)
    for p in range(1, plimit + 1):
        count[p] = math.comb(dim + p - 1, dim - 1)
        q, r = divmod(p, dim)
        denom[p] = math.sqrt(
            math.factorial(q) ** (dim - r) * math.factorial(q + 1) ** r
        )
        cross[p] = math.comb(dim + p - 1, dim)
    return count, denom, cross


def fd_bound(geom: NodePairGeometry) -> float:
    """Worst-case error of the midpoint kernel estimate, W_R (K_lo-K_hi)/2."""
    inv = -0.5 / (geom.bandwidth * geom.bandwidth)
    spread = math.exp(geom.min_sqdist * inv) - math.exp(geom.max_sqdist * inv)
    return 0.5 * geom.weight_ref * max(spread, 0.0)


def _tail_prefactor(geom: NodePairGeometry) -> float:
    return math.exp(-0.25 * geom.min_sqdist / (geom.bandwidth * geom.bandwidth))


def hermite_bound(p: int, geom: NodePairGeometry) -> float:
    """Truncation error of evaluating the order-p far-field series."""
    count, denom, _ = _tail_tables(geom.dim, max(p, 1))
    return (
        geom.weight_ref
        * _tail_prefactor(geom)
        * count[p]
        * geom.r_ref**p
        / denom[p]
    )


def local_bound(p: int, geom: NodePairGeometry) -> float:
    """Truncation error of the order-p direct local accumulation."""
    count, denom, _ = _tail_tables(geom.dim, max(p, 1))
    return (
        geom.weight_ref
        * _tail_prefactor(geom)
        * count[p]
        * geom.r_query**p
        / denom[p]
    )


def h2l_bound(p: int, geom: NodePairGeometry) -> float:
    """Combined truncation error of the order-p far-to-local translation.

    Two tails add: the polynomial-side tail (query radius to the p-th
    power) and the moment-side tail, which carries sqrt(2)-inflated radii
    and an extra index-count factor; the latter picks up a
    (sqrt(2) r_Q)^(p-1) growth term only once the inflated query radius
    exceeds 1.
    """
    count, denom, cross = _tail_tables(geom.dim, max(p, 1))
    pref = _tail_prefactor(geom) * count[p] / denom[p]
    poly_tail = pref * geom.r_query**p
    sq = _SQRT2 * geom.r_query
    step = 1.0 if sq <= 1.0 else sq ** (p - 1)
    moment_tail = pref * (_SQRT2 * geom.r_ref) ** p * cross[p] * step
    return geom.weight_ref * (poly_tail + moment_tail)


@lru_cache(maxsize=None)
def series_floor_constant(dim: int, plimit: int) -> float:
    """min_p count[p]/denom[p]: shared floor of every series bound.

    Each series bound is at least
    weight * prefactor * count[p] * min(r_ref, r_query)^p / denom[p],
    so weight * prefactor * this constant * min(r, 1)^plimit lower-bounds
    all of them at every order.  Traversals use it to skip the full
    order scan for pairs where no series method can possibly qualify.
    """
    count, denom, _ = _tail_tables(dim, plimit)
    return float(min(count[p] / denom[p] for p in range(1, plimit + 1)))


@lru_cache(maxsize=None)
def _scan_tables(dim: int, plimit: int):
    count, denom, cross = _tail_tables(dim, plimit)
    return tuple(count[p] / denom[p] for p in range(plimit + 1)), tuple(cross)


def best_method(geom: NodePairGeometry, maxerr: float, plimit: int) -> MethodChoice:
    """Cheapest series method meeting ``maxerr``, else exhaustive.

    For each series method the smallest feasible order 1 <= p <= plimit
    is found (infeasible methods cost infinity), then costs are compared:
    Hermite evaluation N_Q * D^(p+1), local accumulation N_R * D^(p+1),
    far-to-local D^(2p+1), exhaustive D * N_Q * N_R.  Ties break in that
    listing order.  Exhaustive is always feasible and carries zero error.

    Runs on every node pair a finite-difference prune refuses, so the
    order scans keep powers incrementally instead of calling the one-off
    bound functions (same values up to roundoff).
    """
    ct, cross = _scan_tables(geom.dim, plimit)
    base = geom.weight_ref * _tail_prefactor(geom)
    rr = geom.r_ref
    rq = geom.r_query
    sq = _SQRT2 * rq
    sr = _SQRT2 * rr
    p_h = p_l = p_t = None
    e_h = e_l = e_t = _INF
    if base == 0.0:
        # prefactor underflow: every bound is exactly zero
        p_h = p_l = p_t = 1
        e_h = e_l = e_t = 0.0
    else:
        x_r = rr  # rr^p
        x_q = rq  # rq^p
        x_sr = sr  # (sqrt2 rr)^p
        x_sq = 1.0  # (sqrt2 rq)^(p-1), applied only once sq > 1
        for p in range(1, plimit + 1):
            if p_h is None:
                err = base * ct[p] * x_r
                if err <= maxerr:
                    p_h, e_h = p, err
            if p_l is None:
                err = base * ct[p] * x_q
                if err <= maxerr:
                    p_l, e_l = p, err
            if p_t is None:
                step = x_sq if sq > 1.0 else 1.0
                err = base * ct[p] * (x_q + x_sr * cross[p] * step)
                if err <= maxerr:
                    p_t, e_t = p, err
            if p_h is not None and p_l is not None and p_t is not None:
                break
            x_r *= rr
            x_q *= rq
            x_sr *= sr
            x_sq *= sq
    d = float(geom.dim)
    c_h = geom.n_query * d ** (p_h + 1) if p_h is not None else _INF
    c_l = geom.n_ref * d ** (p_l + 1) if p_l is not None else _INF
    c_t = d ** (2 * p_t + 1) if p_t is not None else _INF
    c_x = d * geom.n_query * geom.n_ref
    c = min(c_h, c_l, c_t, c_x)
    if c == c_h:
        return MethodChoice(Method.HERMITE, p_h, e_h, c_h)
    if c == c_l:
        return MethodChoice(Method.LOCAL, p_l, e_l, c_l)
    if c == c_t:
        return MethodChoice(Method.H2L, p_t, e_t, c_t)
    return MethodChoice(Method.EXHAUSTIVE, None, 0.0, c_x)
