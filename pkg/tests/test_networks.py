import numpy as np
import pytest

from gentensor.analysis import numerical_rank
from gentensor.constructions import nondegenerate_reprs
from gentensor.decompositions import (
    CpParams,
    generalized_cp,
    generalized_ht,
    ht_from_cp,
    random_cp_params,
    random_ht_params,
)
from gentensor.networks import (
    NetworkConfig,
    ReprFamily,
    build_repr_matrix,
    check_templates,
    deep_score,
    fc_score,
    grid_tensor,
    shallow_score,
    window_offsets,
    wxh_grid_tensor,
    wxh_score,
)
from gentensor.operators import PoolOperator
from gentensor.tensor_core import matricize

OPS = list(PoolOperator)
TEMPLATES = np.array([[0.0], [1.0]])


def relu_family():
    reprs, F, _ = nondegenerate_reprs(TEMPLATES)
    return reprs, F


def test_identity_onehot_gives_identity():
    t = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(build_repr_matrix(t, ReprFamily("identity-onehot", templates=t)), np.eye(4))


def test_relu_neuron_matrix_example():
    reprs = ReprFamily("relu-neuron", weights=[[1.0]] * 3, biases=[0.5, -0.5, -1.5])
    F = build_repr_matrix([[0.0], [1.0], [2.0]], reprs)
    np.testing.assert_array_equal(F, [[0.5, 0, 0], [1.5, 0.5, 0], [2.5, 1.5, 0.5]])
    assert np.linalg.det(F) == pytest.approx(0.125)


def test_templates_must_be_distinct():
    with pytest.raises(ValueError):
        check_templates([[1.0], [1.0]])


def test_repr_count_must_match_templates():
    with pytest.raises(ValueError):
        build_repr_matrix([[0.0], [1.0]], ReprFamily("relu-neuron", weights=[[1.0]], biases=[0.0]))


@pytest.mark.parametrize("g", OPS)
def test_shallow_grid_matches_cp(g):
    reprs, F = relu_family()
    p = random_cp_params(2, 4, 3, np.random.default_rng(1))
    A = grid_tensor(lambda X: shallow_score(X, p, reprs, g), TEMPLATES, 4)
    np.testing.assert_allclose(A, generalized_cp(p, F, g), atol=1e-12)


@pytest.mark.parametrize("g", OPS)
def test_deep_grid_matches_ht(g):
    reprs, F = relu_family()
    p = random_ht_params(2, 4, [2, 3], np.random.default_rng(2))
    A = grid_tensor(lambda X: deep_score(X, p, reprs, g), TEMPLATES, 4)
    np.testing.assert_allclose(A, generalized_ht(p, F, g), atol=1e-12)


@pytest.mark.parametrize("g", OPS)
def test_deep_equals_shallow_off_grid(g):
    reprs, _ = relu_family()
    rng = np.random.default_rng(3)
    p = random_cp_params(2, 8, 3, rng)
    deep = ht_from_cp(p)
    for _ in range(20):
        X = rng.normal(size=(8, 1))
        np.testing.assert_allclose(deep_score(X, deep, reprs, g), shallow_score(X, p, reprs, g), atol=1e-12)


@pytest.mark.parametrize("g", [PoolOperator.RELU_MAX, PoolOperator.RELU_SUM])
def test_zero_weights_zero_score(g):
    reprs, _ = relu_family()
    p = CpParams(np.zeros((2, 4, 2)), np.ones(2))
    assert shallow_score(np.ones((4, 1)), p, reprs, g)[0] == 0.0


def test_product_single_channel_is_product_of_conv_values():
    reprs = ReprFamily("identity-onehot", templates=TEMPLATES)
    conv = np.array([[[2.0, 3.0], [5.0, 7.0], [11.0, 13.0]]])
    p = CpParams(conv, np.ones(1))
    X = np.array([[1.0], [0.0], [1.0]])
    assert shallow_score(X, p, reprs, PoolOperator.PRODUCT)[0] == 3.0 * 5.0 * 13.0


def test_relu_max_negative_channel_contributes_nothing():
    reprs = ReprFamily("identity-onehot", templates=TEMPLATES)
    p = CpParams(-np.ones((1, 2, 2)), np.ones(1))
    assert shallow_score(np.zeros((2, 1)), p, reprs, PoolOperator.RELU_MAX)[0] == 0.0


def test_window_offsets():
    np.testing.assert_array_equal(window_offsets(1), [0])
    np.testing.assert_array_equal(window_offsets(3), [-1, 0, 1])
    np.testing.assert_array_equal(window_offsets(2), [0, 1])


def test_wxh_grid_matches_network_and_ceiling():
    reprs, F = relu_family()
    rng = np.random.default_rng(4)
    for _ in range(5):
        conv = rng.uniform(-1, 1, (3, 8, 2, 2))
        out = rng.uniform(-1, 1, 3)
        A = wxh_grid_tensor(conv, out, F)
        B = grid_tensor(lambda X: wxh_score(X, conv, out, reprs), TEMPLATES, 8)
        np.testing.assert_allclose(A, B, atol=1e-12)
        assert numerical_rank(matricize(A)).rank <= 16


def test_wxh_zero_output_is_zero():
    _, F = relu_family()
    np.testing.assert_array_equal(wxh_grid_tensor(np.ones((2, 4, 2, 2)), np.zeros(2), F), 0.0)


def test_fc_constant_score():
    reprs = ReprFamily("custom", functions=[lambda x: np.ones(x.shape[:-1]), lambda x: x[..., 0]])
    conv = np.zeros((1, 3, 2))
    conv[0, 0, 0] = 2.5  # bias folded into the constant representation
    A = grid_tensor(lambda X: fc_score(X, conv, np.ones(1), reprs), TEMPLATES, 3)
    np.testing.assert_array_equal(A, np.full((2, 2, 2), 2.5))


def test_grid_of_constant_score():
    np.testing.assert_array_equal(grid_tensor(lambda X: 7.0, TEMPLATES, 3), np.full((2, 2, 2), 7.0))


def test_network_config_validation():
    NetworkConfig("deep", 8, 2, widths=[2])
    with pytest.raises(ValueError):
        NetworkConfig("deep", 6, 2)
    with pytest.raises(ValueError):
        NetworkConfig("shallow-wxh", 4, 2, k=4)
    with pytest.raises(ValueError):
        NetworkConfig("shallow-wxh", 8, 2, k=4)
    with pytest.warns(UserWarning):
        NetworkConfig("shallow-wxh", 8, 2, k=4, allow_wide_window=True)
    with pytest.raises(ValueError):
        NetworkConfig("recurrent", 4, 2)
