"""Multi-index combinatorics, the Gaussian kernel, and Hermite functions.

Shared numeric substrate for the series machinery: graded-lexicographic
multi-index enumeration (all indices of total degree < p, giving
C(D+p-1, D) terms instead of the p^D of a per-dimension product
truncation), exact factorial/binomial tables, and the scaled Hermite
function ladder h_n(t) = exp(-t^2) * H_n(t).

Everything here is pure; the index-set caches are built once per
(dimension, order) pair and then shared read-only.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# Largest factorial kept in the float table.  Per-digit factorials stay
# small (digits < PLIMIT <= 8) and bound denominators never exceed
# ceil(p/D)! at p <= 8, so 34 leaves plenty of headroom.
_MAX_FACTORIAL = 34
_FACTORIALS = np.array([float(math.factorial(n)) for n in range(_MAX_FACTORIAL + 1)])


def factorial(n: int) -> float:
    """n! as a float, from the precomputed table."""
    return _FACTORIALS[n]


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient C(n, k)."""
    return math.comb(n, k)


def gaussian_kernel(sq_dist: float, h: float) -> float:
    """exp(-sq_dist / (2 h^2)) for a squared distance and bandwidth h > 0."""
    return math.exp(-0.5 * sq_dist / (h * h))


def hermite_ladder(t, max_order: int) -> np.ndarray:
    """All scaled Hermite functions h_0(t) .. h_max_order(t).

    h_n(t) = exp(-t^2) H_n(t) with H_n the (physicists') Hermite
    polynomials.  Evaluated by the stable three-term recurrence

        h_0 = exp(-t^2),  h_1 = 2 t exp(-t^2),
        h_{n+1} = 2 t h_n - 2 n h_{n-1}

    which is the standard Hermite recurrence multiplied through by the
    Gaussian weight.

    ``t`` may be any float array (or scalar); the result has one extra
    trailing axis of length ``max_order + 1``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (max_order + 1,))
    g = np.exp(-t * t)
    out[..., 0] = g
    if max_order >= 1:
        out[..., 1] = 2.0 * t * g
    for n in range(1, max_order):
        out[..., n + 1] = 2.0 * t * out[..., n] - 2.0 * n * out[..., n - 1]
    return out


def hermite_function_1d(n: int, t: float) -> float:
    """h_n(t) = exp(-t^2) H_n(t) for a single order and point."""
    if n < 0:
        raise ValueError("order must be non-negative")
    return float(hermite_ladder(float(t), n)[..., n])


def hermite_multivariate(alpha, t) -> float:
    """Product of univariate Hermite functions, prod_d h_{alpha_d}(t_d)."""
    alpha = tuple(alpha)
    t = np.asarray(t, dtype=float)
    if t.shape != (len(alpha),):
        raise ValueError(f"point has dimension {t.shape}, index has {len(alpha)}")
    out = 1.0
    for a, td in zip(alpha, t):
        out *= hermite_function_1d(a, td)
    return out


def monomial_power(alpha, t) -> float:
    """t^alpha = prod_d t_d^alpha_d (any value to the zeroth power is 1)."""
    alpha = tuple(alpha)
    t = np.asarray(t, dtype=float)
    out = 1.0
    for a, td in zip(alpha, t):
        out *= td ** a
    return out


def power_table(u, max_power: int) -> np.ndarray:
    """Per-component powers u^0 .. u^max_power.

    ``u`` has shape (..., D); the result has shape (..., D, max_power+1)
    with out[..., d, k] = u[..., d] ** k.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (max_power + 1,))
    out[..., 0] = 1.0
    for k in range(1, max_power + 1):
        out[..., k] = out[..., k - 1] * u
    return out


def _compositions(total: int, dims: int):
    # Digit tuples with the given sum, leading digit descending.  This is
    # exactly the within-degree ordering of the graded lexicographic scheme.
    if dims == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, dims - 1):
            yield (head,) + rest


def enumerate_multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """All multi-indices with |alpha| < order, in graded-lex order.

    Sorted first by total degree, then lexicographically within a degree
    (higher leading digit first), e.g. for D=2, order=2:
    (0,0), (1,0), (0,1).  The result has C(D+order-1, D) entries.
    """
    if dim <= 0:
        raise ValueError("dimension must be positive")
    if order <= 0:
        raise ValueError("truncation order must be positive")
    out = []
    for degree in range(order):
        out.extend(_compositions(degree, dim))
    return out


class MultiIndexSet:
    """Cached enumeration of multi-indices with |alpha| < order.

    Stores the digit matrix, per-index degree and factorial products, the
    graded-lex position lookup, and (lazily) the pair table used by the
    expansion-shift operators.  Coefficient vectors throughout the package
    use the position within this enumeration as their flat index.
    """

    def __init__(self, dim: int, order: int):
        indices = enumerate_multi_indices(dim, order)
        self.dim = dim
        self.order = order
        self.count = len(indices)
        self.digits = np.array(indices, dtype=np.intp).reshape(self.count, dim)
        self.degrees = self.digits.sum(axis=1)
        # alpha! as a product of per-digit factorials; digits < order <= 8
        # keeps every product exactly representable.
        self.fact = _FACTORIALS[self.digits].prod(axis=1)
        self.inv_fact = 1.0 / self.fact
        self.position = {idx: k for k, idx in enumerate(indices)}
        # prefix_counts[p] = number of indices with degree < p
        self.prefix_counts = np.searchsorted(self.degrees, np.arange(order + 1))
        self._dims = np.arange(dim)
        self._pairs = None

    def count_below(self, p: int) -> int:
        """Number of stored indices with degree < p (a prefix of the set)."""
        return int(self.prefix_counts[p])

    def products(self, table: np.ndarray) -> np.ndarray:
        """Gather per-dimension values and multiply them per index.

        ``table`` has shape (..., D, L) with L > max digit; returns shape
        (..., count) where entry k is prod_d table[..., d, digits[k, d]].
        """
        vals = table[..., self._dims, self.digits]
        return vals.prod(axis=-1)

    @property
    def shift_pairs(self):
        """Index triples (a, b, s) over all pairs with digits_a+digits_b in set.

        For every pair of stored indices alpha (position a) and delta
        (position b) whose sum stays below the order, s is the position of
        alpha + delta.  Shared by the moment-shift and polynomial-shift
        operators.  Built on first use.
        """
        if self._pairs is None:
            a_idx, b_idx, s_idx = [], [], []
            for a in range(self.count):
                da = self.degrees[a]
                for b in range(self.count):
                    if da + self.degrees[b] >= self.order:
                        continue
                    s = self.position[tuple(self.digits[a] + self.digits[b])]
                    a_idx.append(a)
                    b_idx.append(b)
                    s_idx.append(s)
            self._pairs = (
                np.array(a_idx, dtype=np.intp),
                np.array(b_idx, dtype=np.intp),
                np.array(s_idx, dtype=np.intp),
            )
        return self._pairs


@lru_cache(maxsize=None)
def index_set(dim: int, order: int) -> MultiIndexSet:
    """Shared MultiIndexSet for the given dimension and truncation order."""
    return MultiIndexSet(dim, order)
