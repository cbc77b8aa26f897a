import math

import numpy as np
import pytest

from fastgauss import (
    accumulate_far_field,
    accumulate_local_direct,
    eval_far_field,
    eval_local,
    translate_h2h,
    translate_h2l,
    translate_l2l,
)
from fastgauss.error_bounds import h2l_bound, hermite_bound, local_bound
from fastgauss.kernel_math import (
    binomial,
    enumerate_multi_indices,
    hermite_function_1d,
    monomial_power,
)
from fastgauss.series_expansion import add_far_field, add_local

from util import exact_sums, noise_floor, random_node_pair

SQRT2 = math.sqrt(2.0)


def _moments_by_loop(points, weights, center, order, h):
    # independent per-index recomputation of the far-field coefficients
    indices = enumerate_multi_indices(len(center), order)
    out = np.zeros(len(indices))
    for k, alpha in enumerate(indices):
        fact = 1.0
        for a in alpha:
            fact *= math.factorial(a)
        for x, w in zip(points, weights):
            out[k] += w / fact * monomial_power(alpha, (x - center) / (SQRT2 * h))
    return out


def test_far_field_single_point_at_center():
    center = np.array([0.4, -1.0])
    exp = accumulate_far_field([center], [3.5], center, 4, 0.3)
    assert exp.coeffs[0] == 3.5
    assert np.all(exp.coeffs[1:] == 0.0)


def test_far_field_two_points_first_moments():
    # order-2 coefficients are the weight sum and the two scaled first
    # moments, in graded-lex order
    h = 0.5
    pts = np.array([[0.1, 0.2], [0.5, -0.3]])
    w = np.array([2.0, 3.0])
    center = pts.mean(axis=0)
    exp = accumulate_far_field(pts, w, center, 2, h)
    scaled = (pts - center) / (SQRT2 * h)
    assert exp.coeffs[0] == pytest.approx(5.0, rel=1e-15)
    assert exp.coeffs[1] == pytest.approx(float(w @ scaled[:, 0]), rel=1e-12, abs=1e-15)
    assert exp.coeffs[2] == pytest.approx(float(w @ scaled[:, 1]), rel=1e-12, abs=1e-15)


def test_far_field_random_vs_loop():
    rng = np.random.default_rng(10)
    pts = rng.uniform(-1, 1, (5, 3))
    w = rng.uniform(0.5, 2.0, 5)
    center = pts.mean(axis=0)
    exp = accumulate_far_field(pts, w, center, 4, 0.7)
    want = _moments_by_loop(pts, w, center, 4, 0.7)
    np.testing.assert_allclose(exp.coeffs, want, rtol=1e-12, atol=1e-15)


def test_far_field_empty_is_zero():
    exp = accumulate_far_field(np.empty((0, 2)), np.empty(0), np.zeros(2), 3, 0.5)
    assert np.all(exp.coeffs == 0.0)
    assert exp.coeffs.shape[0] == binomial(2 + 3 - 1, 2)


def test_eval_far_field_monopole():
    center = np.array([0.2, 0.8])
    exp = accumulate_far_field([center], [4.0], center, 5, 0.6)
    x = np.array([0.5, 0.4])
    want = 4.0 * math.exp(-float((x - center) @ (x - center)) / (2 * 0.36))
    assert eval_far_field(exp, x) == pytest.approx(want, rel=1e-10)


def test_eval_far_field_error_below_bound():
    rng = np.random.default_rng(11)
    for _ in range(100):
        q, r, w, geom, p = random_node_pair(rng)
        exact = exact_sums(q, r, w, geom.bandwidth)
        exp = accumulate_far_field(r, w, r.mean(axis=0), p, geom.bandwidth)
        err = np.abs(eval_far_field(exp, q) - exact).max()
        assert err <= hermite_bound(p, geom) + noise_floor(geom, exact)


def test_local_single_point_at_center_parity():
    center = np.array([0.1, -0.4, 0.7])
    exp = accumulate_local_direct([center], [2.0], center, 4, 0.5)
    indices = enumerate_multi_indices(3, 4)
    for k, alpha in enumerate(indices):
        if any(a % 2 == 1 for a in alpha):
            assert exp.coeffs[k] == 0.0
        else:
            fact = np.prod([math.factorial(a) for a in alpha])
            want = 2.0 / fact * np.prod([hermite_function_1d(a, 0.0) for a in alpha])
            assert exp.coeffs[k] == pytest.approx(float(want), rel=1e-12)


def test_local_constant_term_is_kernel_sum_at_center():
    rng = np.random.default_rng(12)
    pts = rng.uniform(0, 1, (8, 2))
    w = rng.uniform(0.5, 1.5, 8)
    center = np.array([0.5, 0.5])
    h = 0.4
    exp = accumulate_local_direct(pts, w, center, 3, h)
    want = float(exact_sums(center.reshape(1, 2), pts, w, h)[0])
    assert exp.coeffs[0] == pytest.approx(want, rel=1e-12)


def test_eval_local_at_center_returns_constant():
    rng = np.random.default_rng(13)
    pts = rng.uniform(0, 1, (6, 2))
    exp = accumulate_local_direct(pts, np.ones(6), np.array([0.3, 0.3]), 5, 0.5)
    assert eval_local(exp, np.array([0.3, 0.3])) == pytest.approx(exp.coeffs[0], rel=1e-15)


def test_eval_local_polynomial_identity():
    # hand-built coefficient vector evaluated against an explicit monomial sum
    from fastgauss.series_expansion import LocalExpansion

    rng = np.random.default_rng(14)
    indices = enumerate_multi_indices(2, 3)
    coeffs = rng.uniform(-1, 1, len(indices))
    center = np.array([0.2, -0.1])
    h = 0.8
    exp = LocalExpansion(center, 3, coeffs, h)
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        u = (x - center) / (SQRT2 * h)
        want = sum(c * monomial_power(a, u) for c, a in zip(coeffs, indices))
        assert eval_local(exp, x) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_local_error_below_bound():
    rng = np.random.default_rng(15)
    for _ in range(100):
        q, r, w, geom, p = random_node_pair(rng)
        exact = exact_sums(q, r, w, geom.bandwidth)
        exp = accumulate_local_direct(r, w, q.mean(axis=0), p, geom.bandwidth)
        err = np.abs(eval_local(exp, q) - exact).max()
        assert err <= local_bound(p, geom) + noise_floor(geom, exact)


def test_h2h_zero_shift_is_identity():
    rng = np.random.default_rng(16)
    pts = rng.uniform(0, 1, (5, 2))
    exp = accumulate_far_field(pts, np.ones(5), pts.mean(axis=0), 4, 0.5)
    out = translate_h2h(exp, exp.center.copy())
    np.testing.assert_allclose(out.coeffs, exp.coeffs, rtol=1e-14, atol=1e-16)


def test_h2h_matches_direct_parent_moments():
    rng = np.random.default_rng(17)
    pts = rng.uniform(0, 1, (3, 2))
    w = rng.uniform(0.5, 2.0, 3)
    child_center = pts.mean(axis=0)
    parent_center = child_center + rng.uniform(-0.5, 0.5, 2)
    h = 0.4
    child = accumulate_far_field(pts, w, child_center, 4, h)
    shifted = translate_h2h(child, parent_center)
    direct = accumulate_far_field(pts, w, parent_center, 4, h)
    np.testing.assert_allclose(shifted.coeffs, direct.coeffs, rtol=1e-12, atol=1e-14)


def test_h2h_additive_over_children():
    rng = np.random.default_rng(18)
    left = rng.uniform(0, 0.5, (6, 3))
    right = rng.uniform(0.5, 1.0, (7, 3))
    wl = rng.uniform(0.5, 2, 6)
    wr = rng.uniform(0.5, 2, 7)
    h = 0.6
    parent_center = np.vstack([left, right]).mean(axis=0)
    el = accumulate_far_field(left, wl, left.mean(axis=0), 5, h)
    er = accumulate_far_field(right, wr, right.mean(axis=0), 5, h)
    combined = translate_h2h(el, parent_center)
    add_far_field(combined, translate_h2h(er, parent_center))
    direct = accumulate_far_field(
        np.vstack([left, right]), np.concatenate([wl, wr]), parent_center, 5, h
    )
    np.testing.assert_allclose(combined.coeffs, direct.coeffs, rtol=1e-12, atol=1e-14)


def test_h2h_exactness_randomized():
    rng = np.random.default_rng(19)
    for _ in range(60):
        dim = int(rng.integers(1, 6))
        p = int(rng.integers(1, 9))
        n = int(rng.integers(1, 12))
        pts = rng.uniform(-1, 1, (n, dim))
        w = rng.uniform(0.1, 2.0, n)
        h = float(rng.uniform(0.1, 1.5))
        a = rng.uniform(-1, 1, dim)
        b = rng.uniform(-1, 1, dim)
        shifted = translate_h2h(accumulate_far_field(pts, w, a, p, h), b)
        direct = accumulate_far_field(pts, w, b, p, h)
        scale = np.abs(direct.coeffs).max() + 1.0
        assert np.abs(shifted.coeffs - direct.coeffs).max() <= 1e-10 * scale


def test_add_far_field_rejects_mismatch():
    exp1 = accumulate_far_field(np.zeros((1, 2)), [1.0], np.zeros(2), 3, 0.5)
    exp2 = accumulate_far_field(np.zeros((1, 2)), [1.0], np.zeros(2), 4, 0.5)
    exp3 = accumulate_far_field(np.zeros((1, 2)), [1.0], np.zeros(2), 3, 0.6)
    with pytest.raises(ValueError):
        add_far_field(exp1, exp2)
    with pytest.raises(ValueError):
        add_far_field(exp1, exp3)


def test_h2l_monopole_matches_single_pseudo_point():
    # a constant-only far field at x_R converts into exactly the local
    # expansion of one point of that weight sitting at x_R
    rng = np.random.default_rng(20)
    for _ in range(20):
        dim = int(rng.integers(1, 4))
        h = float(rng.uniform(0.3, 1.0))
        x_r = rng.uniform(0, 1, dim)
        x_q = x_r + rng.uniform(1.0, 2.0, dim)
        weight = float(rng.uniform(0.5, 3.0))
        far = accumulate_far_field([x_r], [weight], x_r, 1, h)
        converted = translate_h2l(far, x_q, 5, src_order=1)
        direct = accumulate_local_direct([x_r], [weight], x_q, 5, h)
        np.testing.assert_allclose(converted.coeffs, direct.coeffs, rtol=1e-12, atol=1e-300)


def test_h2l_constant_term_at_same_center():
    rng = np.random.default_rng(21)
    pts = rng.uniform(0, 1, (6, 2))
    w = rng.uniform(0.5, 1.5, 6)
    center = pts.mean(axis=0)
    far = accumulate_far_field(pts, w, center, 4, 0.5)
    loc = translate_h2l(far, center, 4, src_order=4)
    lad0 = [hermite_function_1d(int(a[0]), 0.0) * hermite_function_1d(int(a[1]), 0.0)
            for a in enumerate_multi_indices(2, 4)]
    want = float(np.dot(far.coeffs, lad0))
    assert loc.coeffs[0] == pytest.approx(want, rel=1e-12)


def test_h2l_error_below_bound():
    rng = np.random.default_rng(22)
    for _ in range(100):
        q, r, w, geom, p = random_node_pair(rng)
        exact = exact_sums(q, r, w, geom.bandwidth)
        far = accumulate_far_field(r, w, r.mean(axis=0), p, geom.bandwidth)
        loc = translate_h2l(far, q.mean(axis=0), p, src_order=p)
        err = np.abs(eval_local(loc, q) - exact).max()
        assert err <= h2l_bound(p, geom) + noise_floor(geom, exact)


def test_l2l_zero_shift_is_identity():
    rng = np.random.default_rng(23)
    pts = rng.uniform(0, 1, (5, 2))
    exp = accumulate_local_direct(pts, np.ones(5), pts.mean(axis=0), 4, 0.5)
    out = translate_l2l(exp, exp.center.copy())
    np.testing.assert_allclose(out.coeffs, exp.coeffs, rtol=1e-14, atol=1e-16)


def test_l2l_preserves_evaluation():
    from fastgauss.series_expansion import LocalExpansion

    rng = np.random.default_rng(24)
    indices = enumerate_multi_indices(2, 4)
    coeffs = rng.uniform(-1, 1, len(indices))
    center = rng.uniform(0, 1, 2)
    exp = LocalExpansion(center, 4, coeffs, 0.7)
    shifted = translate_l2l(exp, center + rng.uniform(-0.5, 0.5, 2))
    for _ in range(20):
        x = rng.uniform(-1, 2, 2)
        before = eval_local(exp, x)
        after = eval_local(shifted, x)
        assert after == pytest.approx(before, rel=1e-10, abs=1e-12)


def test_l2l_composition():
    from fastgauss.series_expansion import LocalExpansion

    rng = np.random.default_rng(25)
    indices = enumerate_multi_indices(3, 4)
    exp = LocalExpansion(rng.uniform(0, 1, 3), 4, rng.uniform(-1, 1, len(indices)), 0.5)
    mid = rng.uniform(0, 1, 3)
    final = rng.uniform(0, 1, 3)
    two_hops = translate_l2l(translate_l2l(exp, mid), final)
    one_hop = translate_l2l(exp, final)
    for _ in range(10):
        x = rng.uniform(-1, 2, 3)
        assert eval_local(two_hops, x) == pytest.approx(
            eval_local(one_hop, x), rel=1e-10, abs=1e-12
        )


def test_l2l_exactness_randomized():
    from fastgauss.series_expansion import LocalExpansion

    rng = np.random.default_rng(26)
    for _ in range(60):
        dim = int(rng.integers(1, 6))
        p = int(rng.integers(1, 9))
        indices = enumerate_multi_indices(dim, p)
        exp = LocalExpansion(
            rng.uniform(-1, 1, dim), p, rng.uniform(-1, 1, len(indices)),
            float(rng.uniform(0.2, 1.5)),
        )
        shifted = translate_l2l(exp, rng.uniform(-1, 1, dim))
        x = rng.uniform(-1.5, 1.5, (10, dim))
        before = eval_local(exp, x)
        after = eval_local(shifted, x)
        scale = np.abs(before).max() + 1.0
        assert np.abs(after - before).max() <= 1e-10 * scale


def test_parity_consistency_single_point():
    # the direct accumulation and the converted-moment formulation agree
    # coefficient by coefficient for one reference point
    rng = np.random.default_rng(27)
    for _ in range(15):
        dim = int(rng.integers(1, 4))
        h = float(rng.uniform(0.3, 1.2))
        x_r = rng.uniform(0, 1, dim)
        x_q = rng.uniform(2, 3, dim)
        w = float(rng.uniform(0.5, 2.0))
        direct = accumulate_local_direct([x_r], [w], x_q, 6, h)
        far = accumulate_far_field([x_r], [w], x_r, 1, h)
        via_moments = translate_h2l(far, x_q, 6, src_order=1)
        assert np.abs(direct.coeffs - via_moments.coeffs).max() <= 1e-12 * (
            np.abs(direct.coeffs).max() + 1e-300
        ) + 1e-300


def test_coefficient_storage_is_binomial_not_power():
    for dim in (2, 3, 5):
        for p in (2, 4, 6):
            exp = accumulate_far_field(
                np.zeros((1, dim)), [1.0], np.zeros(dim), p, 0.5
            )
            assert exp.coeffs.shape[0] == binomial(dim + p - 1, dim)
            if p > 1 and dim > 1:
                assert exp.coeffs.shape[0] != p**dim


def test_truncation_dominance_all_orders():
    # every order up to the per-dimension cap, dimensions 1..5
    rng = np.random.default_rng(28)
    for dim in (1, 2, 3, 5):
        for p in range(1, 9):
            for _ in range(6):
                q, r, w, geom, _ = random_node_pair(rng, dim=dim)
                exact = exact_sums(q, r, w, geom.bandwidth)
                floor = noise_floor(geom, exact)
                far = accumulate_far_field(r, w, r.mean(axis=0), p, geom.bandwidth)
                assert np.abs(eval_far_field(far, q) - exact).max() <= \
                    hermite_bound(p, geom) + floor
                loc = accumulate_local_direct(r, w, q.mean(axis=0), p, geom.bandwidth)
                assert np.abs(eval_local(loc, q) - exact).max() <= \
                    local_bound(p, geom) + floor
                conv = translate_h2l(far, q.mean(axis=0), p, src_order=p)
                assert np.abs(eval_local(conv, q) - exact).max() <= \
                    h2l_bound(p, geom) + floor


def test_add_local_prefix():
    rng = np.random.default_rng(29)
    pts = rng.uniform(0, 1, (4, 2))
    big = accumulate_local_direct(pts, np.ones(4), np.zeros(2), 5, 0.5)
    small = accumulate_local_direct(pts, np.ones(4), np.zeros(2), 2, 0.5)
    before = big.coeffs.copy()
    add_local(big, small)
    k = small.coeffs.shape[0]
    np.testing.assert_allclose(big.coeffs[:k], before[:k] + small.coeffs)
    np.testing.assert_allclose(big.coeffs[k:], before[k:])
