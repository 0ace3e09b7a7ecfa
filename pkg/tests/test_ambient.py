import numpy as np
import pytest

from pseudomcf.ambient import (
    NULL,
    SPACELIKE,
    TIMELIKE,
    AmbientVec,
    Signature,
    SignatureMismatchError,
    inner,
    mainly_positive_margin,
)

MINK3 = Signature(1, 3)  # one timelike, two spacelike axes


def test_inner_examples():
    assert MINK3.sq_norm([1.0, 0.0, 0.0]) == -1.0
    assert MINK3.sq_norm([1.0, 1.0, 0.0]) == 0.0
    assert MINK3.sq_norm([3.0, 4.0, 0.0]) == 7.0


def test_inner_symmetric_bilinear():
    rng = np.random.default_rng(7)
    sig = Signature(2, 5)
    for _ in range(50):
        u, v, w = rng.standard_normal((3, 5))
        a, b = rng.standard_normal(2)
        assert sig.inner(u, v) == pytest.approx(sig.inner(v, u), abs=1e-12)
        assert sig.inner(a * u + b * w, v) == pytest.approx(
            a * sig.inner(u, v) + b * sig.inner(w, v), rel=1e-12, abs=1e-12
        )


def test_euclidean_case_matches_dot():
    rng = np.random.default_rng(3)
    sig = Signature(0, 4)
    u, v = rng.standard_normal((2, 4))
    assert sig.inner(u, v) == pytest.approx(float(u @ v), abs=0.0)


def test_split_pm_axis_partition():
    vm, vp = MINK3.split_pm([2.0, 3.0, 4.0])
    assert np.array_equal(vm, [2.0, 0.0, 0.0])
    assert np.array_equal(vp, [0.0, 3.0, 4.0])


def test_split_pm_euclidean_all_plus():
    sig = Signature(0, 3)
    v = np.array([1.0, -2.0, 3.0])
    vm, vp = sig.split_pm(v)
    assert np.array_equal(vm, np.zeros(3))
    assert np.array_equal(vp, v)


def test_split_pm_sum_and_norm_additivity():
    rng = np.random.default_rng(11)
    sig = Signature(2, 6)
    v = rng.standard_normal((20, 6))
    vm, vp = sig.split_pm(v)
    assert np.array_equal(vm + vp, v)
    np.testing.assert_allclose(
        sig.sq_norm(v), sig.sq_norm(vm) + sig.sq_norm(vp), atol=1e-12
    )


def test_causal_classes():
    assert MINK3.causal_class(np.array([0.0, 1.0, 0.0])) == SPACELIKE
    assert MINK3.causal_class(np.array([1.0, 0.0, 0.0])) == TIMELIKE
    assert MINK3.causal_class(np.array([1.0, 1.0, 0.0])) == NULL


def test_causal_class_scale_invariant():
    v = np.array([1.0, 1.0, 0.0])
    for scale in (1e-8, 1.0, 1e8):
        assert MINK3.causal_class(scale * v) == NULL


def test_light_cone_bound():
    # |<X,Y>| <= |X_+||Y_+| + sqrt(-|X_-|^2) sqrt(-|Y_-|^2)
    rng = np.random.default_rng(5)
    sig = Signature(2, 5)
    for _ in range(200):
        x, y = rng.standard_normal((2, 5))
        xm, xp = sig.split_pm(x)
        ym, yp = sig.split_pm(y)
        bound = (
            np.sqrt(sig.sq_norm(xp)) * np.sqrt(sig.sq_norm(yp))
            + np.sqrt(-sig.sq_norm(xm)) * np.sqrt(-sig.sq_norm(ym))
        )
        assert abs(sig.inner(x, y)) <= bound + 1e-12


def test_signature_validation():
    with pytest.raises(ValueError):
        Signature(3, 2)
    with pytest.raises(ValueError):
        Signature(0, 1)


def test_ambientvec_mismatch():
    u = AmbientVec(np.array([1.0, 0.0, 0.0]), MINK3)
    v = AmbientVec(np.array([1.0, 0.0, 0.0]), Signature(0, 3))
    with pytest.raises(SignatureMismatchError):
        inner(u, v)
    assert inner(u, u) == -1.0


def test_random_isometry_preserves_product():
    rng = np.random.default_rng(9)
    sig = Signature(1, 4)
    iso = sig.random_isometry(rng)
    u, v = rng.standard_normal((2, 4))
    assert sig.inner(iso @ u, iso @ v) == pytest.approx(sig.inner(u, v), abs=1e-12)


class TestMainlyMargin:
    def test_euclidean_sphere_is_mainly_positive_eps_one(self):
        sig = Signature(0, 3)
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((100, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        rep = mainly_positive_margin(sig, pts, k_threshold=0.5)
        assert rep["mainly_positive"] is True
        assert rep["epsilon_pos"] == pytest.approx(1.0)

    def test_constructed_ratio_half(self):
        # points with |F_-|^2 / |F_+|^2 = -0.5, i.e. timelike part half the
        # spacelike part in magnitude
        sig = Signature(1, 3)
        ts = np.linspace(1.0, 3.0, 17)
        pts = np.stack([ts, np.sqrt(2.0) * ts, np.zeros_like(ts)], axis=-1)
        rep = mainly_positive_margin(sig, pts, k_threshold=0.0)
        assert rep["sup_ratio_pos"] == pytest.approx(0.5, abs=1e-12)
        assert rep["epsilon_pos"] == pytest.approx(0.5, abs=1e-12)
        assert rep["mainly_positive"] is True

    def test_light_cone_limit_fails_classification(self):
        sig = Signature(1, 3)
        ts = np.linspace(1.0, 2.0, 9)
        ratio = 1.0 - 1e-9  # nearly null directions
        pts = np.stack([np.sqrt(ratio) * ts, ts, np.zeros_like(ts)], axis=-1)
        rep = mainly_positive_margin(sig, pts, k_threshold=0.0)
        assert rep["epsilon_pos"] < 1e-6
        ratio = 1.0 + 1e-9  # just inside the cone
        pts = np.stack([np.sqrt(ratio) * ts, ts, np.zeros_like(ts)], axis=-1)
        rep = mainly_positive_margin(sig, pts, k_threshold=0.0)
        assert rep["mainly_positive"] is False

    def test_empty_filter_inconclusive(self):
        sig = Signature(1, 3)
        rep = mainly_positive_margin(sig, np.ones((4, 3)), k_threshold=1e9)
        assert rep["inconclusive"] is True

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            mainly_positive_margin(Signature(1, 3), np.zeros((0, 3)), 0.0)

    def test_division_by_zero_flagged(self):
        sig = Signature(1, 3)
        pts = np.array([[2.0, 0.0, 0.0]])  # purely timelike: |F_+|^2 = 0
        rep = mainly_positive_margin(sig, pts, k_threshold=0.0)
        assert rep["division_by_zero_pos"] == 1
        assert rep["sup_ratio_pos"] == float("inf")
