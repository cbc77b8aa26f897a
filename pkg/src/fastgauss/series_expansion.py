"""Far-field and local series expansions of the Gaussian kernel sum.

A far-field expansion stores scaled monomial moments A_alpha of a weighted
point set about a reference center; evaluating it at a query point sums
A_alpha * h_alpha((x - c) / sqrt(2 h^2)) over all stored indices.  A local
expansion is the dual object: a polynomial in the scaled query offset
whose coefficients are built either directly from reference points or by
translating a far-field expansion across a separation.

Three shift operators connect expansions at different centers:

* far-to-far (H2H): re-centers moments.  Exact at coefficient level, it
  is the binomial re-expansion of monomial moments.
* far-to-local (H2L): converts moments into a local polynomial across a
  gap; carries the truncation error bounded in error_bounds.
* local-to-local (L2L): re-centers a polynomial.  Exact as a function,
  since shifting a fixed-degree polynomial is closed.

All coefficient vectors are dense over the graded-lex index set of their
order, and pin the bandwidth they were built with (the sqrt(2 h^2)
scaling is baked into every coefficient).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel_math import hermite_ladder, index_set, power_table

_SQRT2 = math.sqrt(2.0)


@dataclass
class FarFieldExpansion:
    """Scaled moments A_alpha of a weighted point set about ``center``.

    A_alpha = sum_r (w_r / alpha!) * ((x_r - center) / sqrt(2 h^2))^alpha
    for all |alpha| < order, flat in graded-lex position order.
    """

    center: np.ndarray
    order: int
    coeffs: np.ndarray
    bandwidth: float

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass
class LocalExpansion:
    """Polynomial coefficients B_beta in the scaled offset from ``center``.

    Evaluation returns sum_beta B_beta * ((x - center) / sqrt(2 h^2))^beta;
    at the center itself only the constant term survives.
    """

    center: np.ndarray
    order: int
    coeffs: np.ndarray
    bandwidth: float

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def _scaled_offsets(points: np.ndarray, center: np.ndarray, h: float) -> np.ndarray:
    return (points - center) / (_SQRT2 * h)


def accumulate_far_field(points, weights, center, order: int, h: float) -> FarFieldExpansion:
    """Build the far-field moments of a weighted point set about ``center``.

    An empty point set yields an all-zero (valid) expansion.
    """
    if order < 1:
        raise ValueError("truncation order must be at least 1")
    center = np.asarray(center, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, center.shape[0])
    weights = np.asarray(weights, dtype=float).reshape(-1)
    idx = index_set(center.shape[0], order)
    coeffs = np.zeros(idx.count)
    if points.shape[0]:
        u = _scaled_offsets(points, center, h)
        mono = idx.products(power_table(u, order - 1))
        coeffs = (weights[:, None] * mono).sum(axis=0) * idx.inv_fact
    return FarFieldExpansion(center, order, coeffs, h)


def eval_far_field(exp: FarFieldExpansion, x, order: int | None = None):
    """Evaluate a far-field expansion at one point or a stack of points.

    Returns sum over |alpha| < order of
    A_alpha * h_alpha((x - center) / sqrt(2 h^2)).  A lower ``order``
    evaluates the leading prefix of the stored coefficients.
    """
    p = exp.order if order is None else order
    idx = index_set(exp.dim, p)
    x = np.asarray(x, dtype=float)
    t = _scaled_offsets(x, exp.center, exp.bandwidth)
    herm = idx.products(hermite_ladder(t, p - 1))
    return herm @ exp.coeffs[: idx.count]


def accumulate_local_direct(points, weights, center, order: int, h: float) -> LocalExpansion:
    """Form a local expansion about ``center`` directly from reference points.

    B_beta = sum_r (w_r / beta!) * h_beta((x_r - center) / sqrt(2 h^2)).
    """
    if order < 1:
        raise ValueError("truncation order must be at least 1")
    center = np.asarray(center, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, center.shape[0])
    weights = np.asarray(weights, dtype=float).reshape(-1)
    idx = index_set(center.shape[0], order)
    coeffs = np.zeros(idx.count)
    if points.shape[0]:
        u = _scaled_offsets(points, center, h)
        herm = idx.products(hermite_ladder(u, order - 1))
        coeffs = (weights[:, None] * herm).sum(axis=0) * idx.inv_fact
    return LocalExpansion(center, order, coeffs, h)


def eval_local(exp: LocalExpansion, x, order: int | None = None):
    """Evaluate the local polynomial at one point or a stack of points."""
    p = exp.order if order is None else order
    idx = index_set(exp.dim, p)
    x = np.asarray(x, dtype=float)
    u = _scaled_offsets(x, exp.center, exp.bandwidth)
    mono = idx.products(power_table(u, p - 1))
    return mono @ exp.coeffs[: idx.count]


def translate_h2h(exp: FarFieldExpansion, new_center) -> FarFieldExpansion:
    """Shift far-field moments to a new center (exact on coefficients).

    A_gamma(new) = sum_{alpha <= gamma} A_alpha(old) *
    u^(gamma-alpha) / (gamma-alpha)!  with u the scaled offset of the old
    center from the new one.  Because the moments are scaled monomial
    sums, this is an exact binomial re-expansion, not an approximation.
    """
    new_center = np.asarray(new_center, dtype=float)
    if new_center.shape != exp.center.shape:
        raise ValueError("center dimension mismatch")
    idx = index_set(exp.dim, exp.order)
    u = _scaled_offsets(exp.center, new_center, exp.bandwidth)
    shift = idx.products(power_table(u, exp.order - 1)) * idx.inv_fact
    a_idx, b_idx, s_idx = idx.shift_pairs
    out = np.bincount(
        s_idx, weights=exp.coeffs[a_idx] * shift[b_idx], minlength=idx.count
    )
    return FarFieldExpansion(new_center, exp.order, out, exp.bandwidth)


def add_far_field(dst: FarFieldExpansion, src: FarFieldExpansion) -> None:
    """Accumulate ``src`` into ``dst`` (same center, order, bandwidth)."""
    if dst.order != src.order or dst.bandwidth != src.bandwidth:
        raise ValueError("expansion order/bandwidth mismatch")
    dst.coeffs += src.coeffs


def translate_h2l(
    exp: FarFieldExpansion,
    dest_center,
    dest_order: int,
    src_order: int | None = None,
) -> LocalExpansion:
    """Convert far-field moments into a local expansion at ``dest_center``.

    C_beta = ((-1)^|beta| / beta!) * sum_{|alpha| < p} A_alpha *
    h_{alpha+beta}((dest - src) / sqrt(2 h^2)).  The Hermite values
    needed run up to per-dimension order (src_order-1) + (dest_order-1);
    the full univariate ladder is evaluated once per dimension and
    gathered per index pair.
    """
    if dest_order < 1:
        raise ValueError("truncation order must be at least 1")
    p_src = exp.order if src_order is None else src_order
    dest_center = np.asarray(dest_center, dtype=float)
    dst = index_set(exp.dim, dest_order)
    src = index_set(exp.dim, p_src)
    u = _scaled_offsets(dest_center, exp.center, exp.bandwidth)
    lad = hermite_ladder(u, (dest_order - 1) + (p_src - 1))  # (D, L)
    # summed digit matrix over (dest index, src index) pairs
    sdig = dst.digits[:, None, :] + src.digits[None, :, :]
    hvals = lad[np.arange(exp.dim), sdig].prod(axis=-1)  # (Kd, Ks)
    signs = np.where(dst.degrees % 2 == 0, 1.0, -1.0)
    coeffs = signs * dst.inv_fact * (hvals @ exp.coeffs[: src.count])
    return LocalExpansion(dest_center, dest_order, coeffs, exp.bandwidth)


def translate_l2l(exp: LocalExpansion, new_center) -> LocalExpansion:
    """Re-center a local polynomial (exact as a function).

    B_alpha(new) = sum_{beta >= alpha} C(beta, alpha) * B_beta(old) *
    u^(beta-alpha) with u the scaled offset of the new center from the
    old one.  Shifting a degree-bounded polynomial is closed, so
    evaluation is unchanged up to roundoff.
    """
    new_center = np.asarray(new_center, dtype=float)
    if new_center.shape != exp.center.shape:
        raise ValueError("center dimension mismatch")
    idx = index_set(exp.dim, exp.order)
    u = _scaled_offsets(new_center, exp.center, exp.bandwidth)
    mono = idx.products(power_table(u, exp.order - 1))
    a_idx, b_idx, s_idx = idx.shift_pairs
    # C(beta, alpha) with beta = alpha + delta at positions (s, a, b)
    binom = idx.fact[s_idx] * idx.inv_fact[a_idx] * idx.inv_fact[b_idx]
    out = np.bincount(
        a_idx, weights=binom * exp.coeffs[s_idx] * mono[b_idx], minlength=idx.count
    )
    return LocalExpansion(new_center, exp.order, out, exp.bandwidth)


def add_local(dst: LocalExpansion, src: LocalExpansion) -> None:
    """Accumulate ``src`` into ``dst``; ``src`` may have lower order.

    A lower-order contribution fills the leading graded-lex prefix of the
    destination coefficients (the index sets nest).
    """
    if src.order > dst.order or dst.bandwidth != src.bandwidth:
        raise ValueError("expansion order/bandwidth mismatch")
    dst.coeffs[: src.coeffs.shape[0]] += src.coeffs
