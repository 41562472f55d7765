from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from jeanie.core.alignment import (
    align_backward,
    align_features,
    aligned_distance,
    base_distance,
    distance_tensor,
    fvm,
    fvm_stage_matrix,
    jeanie,
    relative_view_tensor,
    soft_dtw,
    softmin_gamma,
)
from jeanie.core.alignment_oracle import brute_force_align
from jeanie.data.models import AlignmentConfig, AlignmentResult, FeatureMap
from jeanie.errors import InvalidArgument, InvalidState


def _cfg(gamma: float = 0.1, iota: int = 1, **kwargs) -> AlignmentConfig:
    return AlignmentConfig(gamma=gamma, iota=iota, **kwargs)


def _random(shape, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 2.0, size=shape)


def _feature(shape, seed: int) -> FeatureMap:
    data = torch.from_numpy(np.random.default_rng(seed).normal(size=shape))
    return FeatureMap(data=data)


def _central_difference(fn, d: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(d)
    for index in np.ndindex(d.shape):
        plus = d.copy()
        minus = d.copy()
        plus[index] += step
        minus[index] -= step
        grad[index] = (fn(plus) - fn(minus)) / (2 * step)
    return grad


# ============================================================
# soft minimum and base distances
# ============================================================
def test_softmin_single_value():
    assert softmin_gamma([2.5], 0.5) == pytest.approx(2.5, abs=1e-15)


def test_softmin_closed_form():
    assert softmin_gamma([0.0, 0.0], 1.0) == pytest.approx(-math.log(2.0), abs=1e-12)


def test_softmin_small_gamma_is_hard_min():
    assert softmin_gamma([1.0, 2.0, 3.0], 1e-4) == pytest.approx(1.0, abs=1e-9)


def test_softmin_ignores_infinite_entries():
    assert softmin_gamma([1.0, float('inf')], 0.5) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize('values, gamma', [([], 1.0), ([1.0], 0.0), ([float('nan')], 1.0), ([-float('inf')], 1.0)])
def test_softmin_rejects_bad_input(values, gamma):
    with pytest.raises(InvalidArgument):
        softmin_gamma(values, gamma)


@pytest.mark.parametrize('base', ['EUCLIDEAN', 'RBF'])
def test_base_distance_of_identical_vectors_is_zero(base: str):
    assert base_distance([0.3, -1.0, 2.0], [0.3, -1.0, 2.0], _cfg(base=base)) == 0.0


def test_rbf_distance_values():
    cfg = _cfg(base='RBF', sigma=2.0)
    assert base_distance([2.0, 2.0], [0.0, 0.0], cfg) == pytest.approx(2.0 - 2.0 * math.exp(-1.0), abs=1e-12)
    assert base_distance([1e3, 0.0], [0.0, 0.0], cfg) == pytest.approx(2.0)
    assert base_distance([1.0, 2.0], [0.0, 0.0], _cfg()) == pytest.approx(5.0)


def test_base_distance_rejects_length_mismatch():
    with pytest.raises(InvalidArgument):
        base_distance([1.0], [1.0, 2.0], _cfg())


def test_distance_tensor_self_diagonal_is_zero():
    q = _feature((6, 1, 1, 4), seed=1)
    d = distance_tensor(q, q, _cfg())
    assert tuple(d.shape) == (1, 1, 4, 4)
    assert torch.all(torch.diagonal(d[0, 0]) == 0)


def test_distance_tensor_shape_contract():
    d = distance_tensor(_feature((6, 3, 3, 4), 2), _feature((6, 1, 1, 5), 3), _cfg())
    assert tuple(d.shape) == (3, 3, 4, 5)
    both = distance_tensor(_feature((6, 3, 1, 4), 2), _feature((6, 3, 1, 5), 3), _cfg())
    assert tuple(both.shape) == (3, 1, 3, 1, 4, 5)


@pytest.mark.parametrize('base', ['EUCLIDEAN', 'RBF'])
def test_distance_tensor_entries_match_scalar_calls(base: str):
    cfg = _cfg(base=base)
    q = _feature((4, 2, 1, 2), 4)
    s = _feature((4, 1, 1, 2), 5)
    d = distance_tensor(q, s, cfg)
    for k, k2, t, t2 in np.ndindex(2, 1, 2, 2):
        expected = base_distance(q.data[:, k, k2, t].numpy(), s.data[:, 0, 0, t2].numpy(), cfg)
        assert float(d[k, k2, t, t2]) == pytest.approx(expected, abs=1e-12)


# ============================================================
# soft-DTW
# ============================================================
def test_soft_dtw_single_cell():
    assert soft_dtw([[3.7]], 0.01).value == 3.7


def test_soft_dtw_zero_matrix_counts_paths():
    # 25 monotone paths through a 3 x 4 grid
    assert soft_dtw(np.zeros((3, 4)), 0.1).value == pytest.approx(-0.1 * math.log(25), abs=1e-12)


def test_soft_dtw_matches_path_enumeration():
    d = _random((2, 3), seed=3)
    expected = brute_force_align(d, _cfg(gamma=0.1))
    assert soft_dtw(d, 0.1).value == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize('tau, tau2', [(m, n) for m in range(1, 5) for n in range(1, 5)])
def test_soft_dtw_matches_enumeration_on_every_small_shape(tau: int, tau2: int):
    d = _random((tau, tau2), seed=10 * tau + tau2)
    for gamma in (0.05, 1.0):
        assert soft_dtw(d, gamma).value == pytest.approx(brute_force_align(d, _cfg(gamma=gamma)), rel=1e-10, abs=1e-12)


def test_soft_dtw_gradient_matches_central_difference():
    d = _random((3, 4), seed=4)
    result = soft_dtw(d, 0.3, with_grad=True)
    numeric = _central_difference(lambda x: soft_dtw(x, 0.3).value, d)
    np.testing.assert_allclose(result.grad_d, numeric, atol=1e-6)


def test_soft_dtw_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        soft_dtw(np.zeros((2, 2)), 0.0)
    with pytest.raises(InvalidArgument):
        soft_dtw(np.zeros((2, 2, 2)), 0.1)
    with pytest.raises(InvalidArgument):
        soft_dtw([[1.0, float('nan')]], 0.1)


# ============================================================
# JEANIE
# ============================================================
def test_jeanie_without_views_is_soft_dtw():
    d = _random((4, 5), seed=5)
    value = jeanie(d[None, None], _cfg(gamma=0.05, iota=2)).value
    assert value == pytest.approx(soft_dtw(d, 0.05).value, rel=1e-12)


def test_jeanie_without_views_is_soft_dtw_on_random_matrices():
    rng = np.random.default_rng(30)
    for _ in range(1000):
        d = rng.uniform(0.0, 2.0, size=(int(rng.integers(1, 7)), int(rng.integers(1, 7))))
        gamma = float(rng.choice([0.01, 0.1, 1.0]))
        value = jeanie(d[None, None], _cfg(gamma=gamma, iota=int(rng.integers(1, 4)))).value
        assert value == pytest.approx(soft_dtw(d, gamma).value, rel=1e-12, abs=1e-12)


def test_jeanie_single_cell():
    assert jeanie(np.full((1, 1, 1, 1), 0.8), _cfg()).value == pytest.approx(0.8, abs=1e-15)


def test_jeanie_single_block_picks_cheapest_view():
    d = np.array([3.0, 0.4, 1.5]).reshape(3, 1, 1, 1)
    assert jeanie(d, _cfg(gamma=1e-4), axes=1).value == pytest.approx(0.4, abs=1e-3)


@pytest.mark.parametrize('shape, iota, iota_alt, axes', [
    ((3, 1, 3, 3), 1, None, 1),
    ((3, 1, 2, 3), 2, None, 1),
    ((5, 1, 2, 2), 2, None, 1),
    ((3, 3, 2, 2), 1, None, 2),
    ((1, 3, 2, 3), 1, None, 2),
    ((3, 3, 2, 2), 2, 1, 2),
])
def test_jeanie_matches_exhaustive_enumeration(shape, iota, iota_alt, axes):
    d = _random(shape, seed=sum(shape))
    cfg = _cfg(gamma=0.05, iota=iota, iota_alt=iota_alt)
    assert jeanie(d, cfg, axes=axes).value == pytest.approx(brute_force_align(d, cfg, axes=axes), rel=1e-9)


def test_jeanie_is_no_worse_than_any_fixed_view():
    d = _random((3, 3, 4, 4), seed=6)
    cfg = _cfg(gamma=0.1, iota=1)
    value = jeanie(d, cfg).value
    for a in range(3):
        for b in range(3):
            assert value <= soft_dtw(d[a, b], 0.1).value + 1e-12


@pytest.mark.parametrize('shape, iota', [((1, 1, 3, 3), 1), ((3, 1, 3, 2), 1), ((3, 3, 2, 3), 2)])
def test_jeanie_gradient_matches_central_difference(shape, iota):
    d = _random(shape, seed=7)
    cfg = _cfg(gamma=0.5, iota=iota)
    result = jeanie(d, cfg, with_grad=True)
    numeric = _central_difference(lambda x: jeanie(x, cfg).value, d)
    np.testing.assert_allclose(result.grad_d, numeric, atol=1e-6)
    np.testing.assert_allclose(align_backward(result, d), result.grad_d)


def test_gradients_match_central_differences_on_random_instances():
    rng = np.random.default_rng(31)
    for _ in range(100):
        shape = (int(rng.choice([1, 3])), int(rng.choice([1, 3])), int(rng.integers(1, 4)), int(rng.integers(1, 4)))
        d = rng.uniform(0.0, 2.0, size=shape)
        cfg = _cfg(gamma=float(rng.uniform(0.2, 1.0)), iota=int(rng.choice([1, 2])))
        analytic = jeanie(d, cfg, with_grad=True).grad_d
        numeric = _central_difference(lambda x: jeanie(x, cfg).value, d)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)

        plain = d[0, 0]
        analytic = soft_dtw(plain, cfg.gamma, with_grad=True).grad_d
        numeric = _central_difference(lambda x: soft_dtw(x, cfg.gamma).value, plain)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_jeanie_gradient_marks_unique_optimal_path():
    d = np.ones((1, 1, 3, 3)) - np.eye(3)[None, None]
    grad = jeanie(d, _cfg(gamma=0.01), with_grad=True).grad_d
    np.testing.assert_allclose(grad[0, 0], np.eye(3), atol=1e-8)


def test_jeanie_gradient_of_zero_tensor_is_symmetric():
    grad = jeanie(np.zeros((1, 1, 3, 3)), _cfg(gamma=1.0), with_grad=True).grad_d[0, 0]
    np.testing.assert_allclose(grad, grad.T, atol=1e-12)
    np.testing.assert_allclose(grad, grad[::-1, ::-1].T, atol=1e-12)


@pytest.mark.parametrize('shape, cfg, axes', [
    ((2, 1, 2, 2), _cfg(), 2),
    ((3, 3, 2, 2), _cfg(), 1),
    ((3, 1, 2, 2), _cfg(iota=4), 2),
    ((3, 3, 2, 2), _cfg(iota=1, iota_alt=5), 2),
    ((3, 1, 2, 2), _cfg(), 3),
    ((3, 2, 2), _cfg(), 2),
])
def test_jeanie_rejects_bad_views(shape, cfg, axes):
    with pytest.raises(InvalidArgument):
        jeanie(np.zeros(shape), cfg, axes=axes)


def test_backward_checks_cache():
    d = _random((1, 1, 2, 2))
    with pytest.raises(InvalidState):
        align_backward(AlignmentResult(value=0.0), d)
    result = jeanie(d, _cfg())
    with pytest.raises(InvalidState):
        align_backward(result, d + 1.0)


# ============================================================
# FVM and relative views
# ============================================================
def test_fvm_with_single_views_is_soft_dtw():
    d = _random((3, 4), seed=8)
    assert fvm(d[None, None, None, None], 0.1).value == pytest.approx(soft_dtw(d, 0.1).value, rel=1e-12)


def test_fvm_stage_is_bounded_by_view_pairs():
    d = _random((3, 1, 3, 1, 2, 2), seed=9)
    gamma = 0.2
    stage = fvm_stage_matrix(d, gamma)
    pairs = d.reshape(-1, 2, 2)
    assert np.all(stage <= pairs.min(axis=0) + 1e-12)
    assert np.all(stage >= pairs.min(axis=0) - gamma * math.log(len(pairs)) - 1e-12)


def test_fvm_two_view_hand_enumeration():
    d = _random((2, 1, 1, 1, 2, 2), seed=10)
    gamma = 0.1
    stage = -gamma * np.log(np.exp(-d[0, 0, 0, 0] / gamma) + np.exp(-d[1, 0, 0, 0] / gamma))
    assert fvm(d, gamma).value == pytest.approx(brute_force_align(stage, _cfg(gamma=gamma)), rel=1e-10)


def test_fvm_gradient_matches_central_difference():
    d = _random((3, 1, 1, 1, 2, 3), seed=11)
    result = fvm(d, 0.4, with_grad=True)
    numeric = _central_difference(lambda x: fvm(x, 0.4).value, d)
    np.testing.assert_allclose(result.grad_d, numeric, atol=1e-6)


def test_fvm_requires_both_grids():
    with pytest.raises(InvalidArgument):
        fvm(np.zeros((3, 1, 2, 2)), 0.1)


def test_relative_view_tensor_without_support_views_is_identity():
    d = torch.from_numpy(_random((3, 1, 1, 1, 2, 3), seed=12))
    rel = relative_view_tensor(d, 0.1)
    assert tuple(rel.shape) == (3, 1, 2, 3)
    torch.testing.assert_close(rel, d[:, :, 0, 0], atol=1e-12, rtol=0.0)


def test_relative_view_tensor_offsets():
    d = torch.from_numpy(_random((3, 1, 3, 1, 2, 2), seed=13))
    rel = relative_view_tensor(d, 0.1)
    assert tuple(rel.shape) == (5, 1, 2, 2)
    # largest offset: query view 2 against support view 0 only
    torch.testing.assert_close(rel[4, 0], d[2, 0, 0, 0], atol=1e-12, rtol=0.0)
    expected = -0.1 * torch.logsumexp(-torch.stack([d[0, 0, 0, 0], d[1, 0, 1, 0], d[2, 0, 2, 0]]) / 0.1, dim=0)
    torch.testing.assert_close(rel[2, 0], expected)


# ============================================================
# torch bridge
# ============================================================
@pytest.mark.parametrize('method, shape, axes', [
    ('jeanie', (3, 1, 2, 3), 1),
    ('jeanie', (3, 3, 2, 2), 2),
    ('softdtw', (2, 3), 2),
    ('fvm', (3, 1, 1, 1, 2, 2), 2),
    ('jeanie', (3, 1, 3, 1, 2, 2), 1),
])
def test_aligned_distance_passes_gradcheck(method: str, shape, axes: int):
    d = torch.from_numpy(_random(shape, seed=14)).requires_grad_(True)
    cfg = _cfg(gamma=0.5, iota=1)
    assert torch.autograd.gradcheck(lambda x: aligned_distance(x, cfg, method, axes), (d,), eps=1e-6, atol=1e-5)


def test_softdtw_uses_centre_view():
    d = torch.from_numpy(_random((3, 3, 2, 2), seed=15))
    value = aligned_distance(d, _cfg(), 'softdtw')
    assert float(value) == pytest.approx(soft_dtw(d[1, 1].numpy(), 0.1).value, rel=1e-12)


def test_align_features_rejects_unknown_method():
    q = _feature((4, 1, 1, 2), 16)
    with pytest.raises(InvalidArgument):
        align_features(q, q, _cfg(), method='dtw')
