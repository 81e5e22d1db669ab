import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentensor.analysis import approx_gap, numerical_rank
from gentensor.constructions import (
    ConstructionError,
    basic_realizer,
    certify_depth_eff,
    certify_incompleteness,
    depth_eff_ht_weights,
    fc_universal_weights,
    indicator_cp,
    indicator_tensor,
    is_basic,
    nondegenerate_reprs,
    piecewise_affine_interpolate,
    separating_direction,
    templates_for_reprs,
    trivial_ht_weights,
)
from gentensor.decompositions import generalized_cp, generalized_ht, matricized_ht
from gentensor.networks import ReprFamily
from gentensor.operators import PoolOperator

RMAX = PoolOperator.RELU_MAX


def test_separating_direction_examples():
    assert separating_direction([[0.0], [1.0], [2.0]]).tolist() == [1.0]
    w = separating_direction(np.eye(2), seed=3)
    assert w[0] != w[1]
    pts = np.random.default_rng(0).normal(size=(10, 3))
    proj = pts @ separating_direction(pts, seed=1)
    assert np.min(np.diff(np.sort(proj))) > 0


def test_nondegenerate_relu_example():
    reprs, F, cert = nondegenerate_reprs([[0.0], [1.0], [2.0]])
    np.testing.assert_array_equal(F, [[0.5, 0, 0], [1.5, 0.5, 0], [2.5, 1.5, 0.5]])
    assert cert.passed and cert.witnesses["det"] == pytest.approx(0.125)


def test_nondegenerate_single_template():
    _, F, cert = nondegenerate_reprs([[3.0, -1.0]])
    assert F.shape == (1, 1) and F[0, 0] != 0 and cert.passed


def test_nondegenerate_sigmoid():
    t = np.random.default_rng(2).normal(size=(4, 3))
    _, F, cert = nondegenerate_reprs(t, kind="sigmoid", seed=2)
    assert cert.passed and abs(np.linalg.det(F)) >= 1e-8


def test_templates_for_coordinate_reprs():
    reprs = ReprFamily("raw-coordinates", size=3)
    t, F = templates_for_reprs(reprs, 3, seed=0)
    np.testing.assert_array_equal(F, t)
    np.testing.assert_array_equal(reprs(np.eye(3)), np.eye(3))


def test_templates_for_monomials():
    reprs = ReprFamily("custom", functions=[lambda x: np.ones(x.shape[:-1]), lambda x: x[..., 0], lambda x: x[..., 0] ** 2])
    t, F = templates_for_reprs(reprs, 1, seed=4)
    np.testing.assert_allclose(F, np.vander(t[:, 0], 3, increasing=True))
    assert abs(np.linalg.det(F)) >= 1e-10


def test_templates_for_dependent_reprs_fail():
    reprs = ReprFamily("custom", functions=[lambda x: x[..., 0], lambda x: x[..., 0]])
    with pytest.raises(ConstructionError):
        templates_for_reprs(reprs, 1)


def test_indicator_every_index():
    F = np.array([[1.0, 0.3], [-0.2, 1.0]])
    for idx in itertools.product((1, 2), repeat=4):
        A = generalized_cp(indicator_cp(idx, 2, 4, F), F, RMAX)
        np.testing.assert_allclose(A, indicator_tensor(idx, 2), atol=1e-12)
        assert np.count_nonzero(np.abs(A) > 1e-12) == 1


def test_indicator_rejects_bad_index():
    with pytest.raises(ValueError):
        indicator_cp([1, 3], 2, 2, np.eye(2))


def test_lemma_worked_example():
    W, b, a, cert = piecewise_affine_interpolate([[1.0], [2.0]], [5.0, 7.0], direction=[1.0])
    np.testing.assert_array_equal(b, [0.0, -1.0])
    np.testing.assert_array_equal(a, [5.0, -3.0])
    np.testing.assert_array_equal(W, [[1.0], [1.0]])
    assert cert.passed and cert.witnesses["relative_residual"] == 0.0


def test_lemma_single_point():
    _, _, a, cert = piecewise_affine_interpolate([[0.3, -2.0]], [4.5])
    assert a.tolist() == [4.5] and cert.passed


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 16), st.integers(1, 4), st.integers(0, 2**31))
def test_lemma_random(k, dim, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(k, dim))
    targets = rng.normal(size=k)
    W, b, a, cert = piecewise_affine_interpolate(pts, targets, seed=seed)
    assert cert.passed
    fit = np.maximum(0.0, pts @ W.T + b) @ a
    assert np.max(np.abs(fit - targets)) <= 1e-8 * max(1.0, np.max(np.abs(targets)))


def test_fc_universal_zero_and_random():
    F = np.array([[1.0, 0.0], [1.0, 1.0]])
    conv, a, cert = fc_universal_weights(np.zeros((2, 2, 2)), F)
    assert cert.passed
    target = np.random.default_rng(5).uniform(-1, 1, (2, 2, 2))
    conv, a, cert = fc_universal_weights(target, F)
    assert cert.passed and cert.witnesses["z"] == 8 and conv.shape == (8, 3, 2)
    _, _, cert = fc_universal_weights(indicator_tensor([1, 2], 2), F)
    assert cert.passed


def test_fc_universal_needs_constant_column():
    with pytest.raises(ValueError):
        fc_universal_weights(np.zeros((2, 2)), np.eye(2))


def test_depth_eff_witness_small():
    p = depth_eff_ht_weights(2, 2, 4, np.eye(2))
    mat = matricized_ht(p, np.eye(2), RMAX)
    np.testing.assert_array_equal(mat, 2 * np.ones((4, 4)) - np.eye(4))
    assert numerical_rank(mat).rank == 4
    assert approx_gap(mat, 1) == pytest.approx(3.0)


def test_depth_eff_witness_m3():
    mat = matricized_ht(depth_eff_ht_weights(3, 2, 4, np.eye(3)), np.eye(3), RMAX)
    assert np.count_nonzero(mat == 1.0) == 4 and np.count_nonzero(mat == 2.0) == 81 - 4
    assert numerical_rank(mat).rank >= 4


@pytest.mark.parametrize("m, r0, n", [(2, 2, 4), (3, 2, 4), (3, 3, 8)])
def test_depth_eff_certificate(m, r0, n):
    F = np.eye(m) + 0.1 * np.tril(np.ones((m, m)), -1)
    cert = certify_depth_eff(m, r0, n, F)
    assert cert.passed
    assert cert.witnesses["rank"] >= min(r0, m) ** (n // 2)


def test_trivial_weights_unshared():
    deep, shallow = trivial_ht_weights(2, [2, 2], 4, np.eye(2))
    A = generalized_ht(deep, np.eye(2), RMAX)
    np.testing.assert_array_equal(A, np.full((2,) * 4, 4.0))
    np.testing.assert_array_equal(shallow.conv[0, 0], [4.0, 4.0])
    np.testing.assert_array_equal(shallow.conv[0, 1:], 0.0)
    np.testing.assert_array_equal(generalized_cp(shallow, np.eye(2), RMAX), A)


def test_trivial_weights_shared_is_basic():
    deep, shallow = trivial_ht_weights(3, [2, 2], 4, np.eye(3), "shared")
    A = generalized_ht(deep.unshared(), np.eye(3), RMAX)
    u = is_basic(A)
    np.testing.assert_array_equal(u, [4.0, 8.0, 12.0])
    np.testing.assert_array_equal(generalized_cp(shallow, np.eye(3), RMAX), A)


def test_is_basic_examples():
    u = np.array([1.0, 2.0, 3.0])
    A = generalized_cp(basic_realizer(u, 4, np.eye(3)), np.eye(3), RMAX)
    np.testing.assert_array_equal(is_basic(A), u)
    assert is_basic(indicator_tensor([1, 2], 2)) is None
    np.testing.assert_array_equal(is_basic(np.zeros((2, 2, 2))), [0.0, 0.0])


@pytest.mark.parametrize("variant", ["unshared", "cross-product", "shared"])
def test_incompleteness_certificates(variant):
    F = np.array([[1.0, 0.2], [0.1, 1.0]])
    cert = certify_incompleteness(2, [2, 2], 4, F, variant, seeds=20, eps=1e-3, seed=1)
    assert cert.passed, cert.witnesses
    if variant != "shared":
        assert cert.witnesses["perturbed_ranks"] == [1]
