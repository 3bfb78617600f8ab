"""Tests for the trainable prototype adjustment: forward pass and hand-written gradients."""

import math

import numpy as np
import pytest

from tfs3d.errors import QuestError, TrainingError
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.quest import CombineMode, QuestConfig
from tfs3d.services.fewshot_head import compute_prototypes
from tfs3d.services.quest import (
    QuestParameters,
    check_parameters,
    fc_forward,
    fc_tensor_names,
    init_parameters,
    local_max_pool,
    local_max_pool_with_argmax,
    quest_adjust,
    quest_forward,
    quest_loss,
    support_statistics,
)


def make_instance(seed, n_way=2, k_shot=1, n_queries=1, m=32, d=6):
    rng = np.random.default_rng(seed)
    support = rng.normal(size=(n_way, k_shot, m, d))
    query = rng.normal(size=(n_queries, m, d))
    support_labels = rng.integers(0, n_way + 1, size=(n_way, k_shot, m))
    support_labels[:, :, 0] = 0
    for n in range(n_way):
        support_labels[n, :, 1:4] = n + 1
    query_labels = rng.integers(0, n_way + 1, size=(n_queries, m))
    return rng, support, support_labels, query, query_labels


def randomized_params(rng, dim, pooled_len, cfg):
    params = init_parameters(dim, pooled_len, cfg)
    for name, value in params.tensors.items():
        if name.endswith(".scale"):
            params.tensors[name] = 1.0 + 0.3 * rng.normal(size=value.shape)
        elif name.endswith(".shift"):
            params.tensors[name] = 0.3 * rng.normal(size=value.shape)
    params.tensors["w_out"] = rng.uniform(-0.5, 0.5, size=(dim, dim))
    return params


def relative_error(a, b):
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(seed, cfg, head, **shape):
    rng, support, s_labels, query, q_labels = make_instance(seed, **shape)
    dim = support.shape[-1]
    params = randomized_params(rng, dim, cfg.pooled_length(support.shape[2]), cfg)
    _, grads, trace = quest_loss(support, s_labels, query, q_labels, params, cfg, head)
    base_signature = trace.kink_signature()
    h = 1e-4

    for name, tensor in params.tensors.items():
        analytic, numeric = [], []
        for idx in np.ndindex(tensor.shape):
            original = tensor[idx]
            tensor[idx] = original + h
            plus, _, t_plus = quest_loss(support, s_labels, query, q_labels, params, cfg, head,
                                         with_grad=False)
            tensor[idx] = original - h
            minus, _, t_minus = quest_loss(support, s_labels, query, q_labels, params, cfg, head,
                                           with_grad=False)
            tensor[idx] = original
            # a ReLU or pooling winner flipped inside [-h, h]: not differentiable there
            if t_plus.kink_signature() != base_signature or \
                    t_minus.kink_signature() != base_signature:
                continue
            analytic.append(grads[name][idx])
            numeric.append((plus - minus) / (2 * h))
        err = relative_error(np.array(analytic), np.array(numeric))
        assert err < 1e-4, f"seed {seed}: gradient of {name} off by {err:.2e}"


class TestParameters:
    def test_tensor_names_by_depth(self):
        assert fc_tensor_names(0) == ["fc0.scale", "fc0.shift"]
        assert "fc2.weight" in fc_tensor_names(2)
        assert len(fc_tensor_names(3)) == 2 + 3 * 3

    def test_init_shapes(self):
        params = init_parameters(6, 4, QuestConfig())
        assert params.tensors["w_q"].shape == (4, 4)
        assert params.tensors["w_v"].shape == (6, 6)
        assert params.tensors["fc1.weight"].shape == (6, 6)
        assert np.all(params.tensors["w_out"] == 0.0)
        assert params.dim == 6 and params.pooled_len == 4 and params.fc_depth == 2

    def test_init_is_seeded(self):
        a = init_parameters(6, 4, QuestConfig(seed=1))
        b = init_parameters(6, 4, QuestConfig(seed=1))
        assert all(np.array_equal(a.tensors[n], b.tensors[n]) for n in a.tensors)

    def test_init_bounds(self):
        params = init_parameters(16, 4, QuestConfig())
        assert np.abs(params.tensors["w_v"]).max() <= 1 / 4
        assert np.abs(params.tensors["w_q"]).max() <= 1 / 2

    def test_copy_is_deep(self):
        params = init_parameters(4, 2, QuestConfig())
        clone = params.copy()
        clone.tensors["w_v"][0, 0] += 1.0
        assert clone.tensors["w_v"][0, 0] != params.tensors["w_v"][0, 0]

    def test_check_parameters_rejects_mismatch(self):
        params = init_parameters(6, 4, QuestConfig())
        with pytest.raises(QuestError):
            check_parameters(params, 8, 4, QuestConfig())
        with pytest.raises(QuestError):
            check_parameters(params, 6, 2, QuestConfig())
        with pytest.raises(QuestError):
            check_parameters(params, 6, 4, QuestConfig(fc_depth=1))


class TestPooling:
    def test_windows_and_argmax(self):
        feats = np.array([[1.0], [3.0], [2.0], [5.0], [4.0]])
        pooled, argmax = local_max_pool_with_argmax(feats, kernel=2, stride=2)
        assert pooled[:, 0].tolist() == [3.0, 5.0, 4.0]
        assert argmax[:, 0].tolist() == [1, 3, 4]

    def test_pooled_length(self):
        cfg = QuestConfig(pool_kernel=32, pool_stride=32)
        assert cfg.pooled_length(2048) == 64
        assert local_max_pool(np.zeros((2048, 3)), 32, 32).shape == (64, 3)

    def test_overlapping_windows(self):
        feats = np.arange(6, dtype=float)[:, None]
        assert local_max_pool(feats, kernel=3, stride=2)[:, 0].tolist() == [2.0, 4.0, 5.0]

    def test_background_statistic_is_class_mean(self, rng):
        pooled = rng.normal(size=(3, 2, 4, 5))
        stats = support_statistics(pooled)
        assert stats.shape == (4, 2, 4, 5)
        assert np.allclose(stats[0], pooled.mean(axis=0))
        assert np.array_equal(stats[1:], pooled)


class TestFcStack:
    def test_output_non_negative_and_shaped(self, rng):
        params = init_parameters(6, 2, QuestConfig())
        out = fc_forward(rng.normal(size=(20, 6)), params, QuestConfig())
        assert out.shape == (20, 6)
        assert out.min() >= 0.0

    def test_normalization_uses_point_statistics(self, rng):
        params = init_parameters(4, 2, QuestConfig(fc_depth=0))
        x = rng.normal(size=(50, 4))
        a = fc_forward(x, params, QuestConfig(fc_depth=0))
        b = fc_forward(3.0 * x + 7.0, params, QuestConfig(fc_depth=0))
        assert np.allclose(a, b, atol=1e-4)

    def test_normalization_depends_on_whole_input(self, rng):
        cfg = QuestConfig(fc_depth=0)
        params = init_parameters(4, 2, cfg)
        x = rng.normal(size=(50, 4))
        x[0] = 3.0
        shifted = x.copy()
        shifted[1:] += 10.0
        assert (fc_forward(x, params, cfg)[0] > 0).all()
        assert (fc_forward(shifted, params, cfg)[0] == 0).all()


class TestQuestForward:
    def test_zero_output_matrix_keeps_prototypes(self):
        _, support, s_labels, query, _ = make_instance(0)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        params = init_parameters(6, 4, cfg)
        trace = quest_adjust(support, s_labels, query, params, cfg)
        assert np.allclose(trace.adjusted[0], trace.prototypes.prototypes)

    def test_hand_computed_two_channel_case(self):
        cfg = QuestConfig()
        params = QuestParameters(tensors={
            "w_q": np.eye(1), "w_k": np.eye(1), "w_v": np.eye(2), "w_out": np.eye(2),
        })
        protos = np.array([[1.0, 2.0], [3.0, 4.0]])
        support = np.array([[[[0.2, -0.4]]], [[[0.5, 1.0]]]])     # (N+1=2, K=1, M'=1, D=2)
        query = np.array([[[1.0, 0.0]]])                          # (Q=1, M'=1, D=2)
        adjusted = quest_forward(support, query, protos, params, cfg)

        expected = protos.copy()
        for n in range(2):
            k = support[n, 0, 0]
            for i in range(2):
                logits = [query[0, 0, i] * k[j] / math.sqrt(2) for j in range(2)]
                weights = [math.exp(v) for v in logits]
                total = sum(weights)
                expected[n, i] += sum(weights[j] / total * protos[n, j] for j in range(2))
        assert np.allclose(adjusted[0], expected, atol=1e-12)

    def test_sum_combination_doubles_mean_for_identical_shots(self):
        rng = np.random.default_rng(3)
        support = np.repeat(rng.normal(size=(3, 1, 2, 4)), 2, axis=1)
        query = rng.normal(size=(1, 2, 4))
        protos = rng.normal(size=(3, 4))
        params = init_parameters(4, 2, QuestConfig())
        params.tensors["w_out"] = rng.normal(size=(4, 4))
        mean = quest_forward(support, query, protos, params, QuestConfig())
        total = quest_forward(support, query, protos, params,
                              QuestConfig(combine_mode=CombineMode.sum))
        assert np.allclose(total - protos, 2.0 * (mean - protos))

    def test_attention_disabled_returns_prototypes(self):
        _, support, s_labels, query, _ = make_instance(1)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8, use_attention=False)
        params = randomized_params(np.random.default_rng(1), 6, 4, cfg)
        trace = quest_adjust(support, s_labels, query, params, cfg)
        assert np.array_equal(trace.adjusted[0], trace.prototypes.prototypes)

    def test_fc_disabled_uses_raw_features(self):
        _, support, s_labels, query, _ = make_instance(2)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8, use_fc=False)
        trace = quest_adjust(support, s_labels, query, init_parameters(6, 4, cfg), cfg)
        raw = compute_prototypes(support, s_labels)
        assert np.array_equal(trace.prototypes.prototypes, raw.prototypes)

    def test_mismatched_dims_rejected(self):
        with pytest.raises(QuestError):
            quest_adjust(np.zeros((1, 1, 8, 4)), np.zeros((1, 1, 8), dtype=int),
                         np.zeros((1, 8, 5)), init_parameters(4, 1, QuestConfig()),
                         QuestConfig(pool_kernel=8, pool_stride=8))


class TestQuestLoss:
    def test_loss_is_positive_and_finite(self):
        _, support, s_labels, query, q_labels = make_instance(0)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        loss, grads, _ = quest_loss(support, s_labels, query, q_labels,
                                    init_parameters(6, 4, cfg), cfg, HeadConfig(gamma=10.0))
        assert math.isfinite(loss) and loss > 0
        assert set(grads) == set(init_parameters(6, 4, cfg).tensors)

    def test_unlabeled_points_are_ignored(self):
        _, support, s_labels, query, q_labels = make_instance(0)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        params = init_parameters(6, 4, cfg)
        head = HeadConfig(gamma=10.0)
        base, _, _ = quest_loss(support, s_labels, query, q_labels, params, cfg, head)
        masked = q_labels.copy()
        masked[0, ::2] = -1
        loss, _, _ = quest_loss(support, s_labels, query, masked, params, cfg, head)
        assert loss != base
        assert math.isfinite(loss)

    def test_no_labeled_query_points(self):
        _, support, s_labels, query, q_labels = make_instance(0)
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        with pytest.raises(TrainingError):
            quest_loss(support, s_labels, query, np.full_like(q_labels, -1),
                       init_parameters(6, 4, cfg), cfg, HeadConfig())

    def test_label_of_missing_class(self):
        _, support, s_labels, query, q_labels = make_instance(0)
        s_labels[1] = np.where(s_labels[1] == 2, 0, s_labels[1])
        s_labels[0] = np.where(s_labels[0] == 2, 0, s_labels[0])
        q_labels[0, 0] = 2
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        with pytest.raises(QuestError):
            quest_loss(support, s_labels, query, q_labels, init_parameters(6, 4, cfg), cfg,
                       HeadConfig())


class TestGradients:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_differences(self, seed):
        cfg = QuestConfig(pool_kernel=8, pool_stride=8)
        check_gradients(seed, cfg, HeadConfig(gamma=10.0))

    @pytest.mark.parametrize("use_fc,use_attention", [(False, True), (True, False)])
    def test_ablations(self, use_fc, use_attention):
        cfg = QuestConfig(pool_kernel=8, pool_stride=8, use_fc=use_fc,
                          use_attention=use_attention)
        for seed in range(3):
            check_gradients(seed, cfg, HeadConfig(gamma=10.0))

    def test_multi_shot_sum_combination_and_two_queries(self):
        cfg = QuestConfig(pool_kernel=8, pool_stride=4, fc_depth=1,
                          combine_mode=CombineMode.sum)
        check_gradients(11, cfg, HeadConfig(gamma=10.0), k_shot=2, n_queries=2, m=16)
