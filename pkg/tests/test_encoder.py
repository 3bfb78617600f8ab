"""Tests for the training-free encoder layers against loop-based oracles."""

import math

import numpy as np
import pytest

from tfs3d.errors import EncodeError, InvalidArgument
from tfs3d.models.frequency import FrequencyDistribution
from tfs3d.models.point_cloud import PointCloud
from tfs3d.schemas.encoder import EncoderConfig, PEMode
from tfs3d.services.encoder import (
    encode,
    initial_embed,
    local_embed_layer,
    local_frequencies,
    normalize_block_coords,
    upsample_layer,
)

from tests.helpers import random_cloud


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def embed_oracle(x, freqs):
    sines, cosines = [], []
    for f in freqs:
        for a in range(3):
            sines.append(math.sin(2 * math.pi * f * x[a]))
            cosines.append(math.cos(2 * math.pi * f * x[a]))
    return np.array(sines + cosines)


def neighbors_oracle(point, ref, k):
    dists = [math.dist(point, ref[i]) for i in range(len(ref))]
    order = sorted(range(len(ref)), key=lambda i: (dists[i], *ref[i], i))[:k]
    return order, [dists[i] for i in order]


def local_layer_oracle(centers, feats, coords, colors, freqs, cfg):
    out = []
    for c in centers:
        nb, dists = neighbors_oracle(coords[c], coords, cfg.k)
        radius = max(dists[-1], 1e-8)
        rows = []
        for j in nb:
            g = np.concatenate([feats[c], feats[j]])
            pe_p = embed_oracle((coords[j] - coords[c]) / radius, freqs)
            pe_c = embed_oracle(colors[j] - colors[c], freqs)
            rows.append(cfg.alpha * (g + pe_p) * pe_p + (1 - cfg.alpha) * (g + pe_c) * pe_c)
        rows = np.array(rows)
        out.append(rows.max(axis=0) + rows.mean(axis=0))
    return np.array(out)


def upsample_oracle(child_feats, child_coords, target_coords, skip, k):
    out = []
    for p, s in zip(target_coords, skip):
        nb, dists = neighbors_oracle(p, child_coords, k)
        w = np.array([1.0 / (d + 1e-8) for d in dists])
        w /= w.sum()
        interp = sum(w[i] * child_feats[j] for i, j in enumerate(nb))
        out.append(np.concatenate([s, interp]))
    return np.array(out)


class TestNormalizeBlockCoords:
    def test_fits_unit_cube_isotropically(self):
        coords = np.array([[1.0, 1.0, 1.0], [3.0, 2.0, 1.5]])
        out = normalize_block_coords(coords)
        assert np.allclose(out, [[0, 0, 0], [1.0, 0.5, 0.25]])

    def test_coincident_points_only_shifted(self):
        out = normalize_block_coords(np.full((3, 3), 2.0))
        assert np.all(out == 0.0)


class TestInitialEmbed:
    def test_alpha_mix(self, rng, small_cfg):
        cloud = random_cloud(rng, 8)
        f0 = initial_embed(cloud, small_cfg).data
        u = [20.0 ** (i / 2) for i in (1, 2)]
        coords = normalize_block_coords(cloud.coords)
        expected = 0.8 * embed_oracle(coords[3], u) + 0.2 * embed_oracle(cloud.colors[3], u)
        assert f0.shape == (8, 12)
        assert np.allclose(f0[3], expected, atol=1e-9)

    def test_without_color(self, rng):
        cfg = EncoderConfig(d=2, k=4, use_color=False)
        cloud = random_cloud(rng, 8)
        u = [20.0 ** (i / 2) for i in (1, 2)]
        coords = normalize_block_coords(cloud.coords)
        assert np.allclose(initial_embed(cloud, cfg).data[0], embed_oracle(coords[0], u))


class TestLocalEmbedLayer:
    def test_matches_oracle_on_random_instances(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            cfg = EncoderConfig(d=1, k=int(rng.integers(1, 6)), seed=seed)
            n = int(rng.integers(max(cfg.k, 2), 40))
            feats = rng.normal(size=(n, 6))
            coords = rng.uniform(size=(n, 3))
            colors = rng.uniform(size=(n, 3))
            centers, out = local_embed_layer(1, feats, coords, colors, cfg)
            freqs = local_frequencies(cfg, 1).values
            expected = local_layer_oracle(centers, feats, coords, colors, freqs, cfg)
            assert centers.shape == (n // 2,)
            assert out.data.shape == (n // 2, 12)
            assert np.max(np.abs(out.data - expected)) <= 1e-6

    def test_single_neighbor_is_the_center(self, rng):
        cfg = EncoderConfig(d=1, k=1)
        feats = rng.normal(size=(10, 6))
        coords = rng.uniform(size=(10, 3))
        colors = rng.uniform(size=(10, 3))
        centers, out = local_embed_layer(1, feats, coords, colors, cfg)
        # sine half zeroed, cosine half (f + 1) * 1, doubled by max + mean pooling
        assert np.all(out.data[:, :6] == 0.0)
        assert np.allclose(out.data[:, 6:], 2.0 * (feats[centers] + 1.0))

    def test_channels_double(self, rng):
        cfg = EncoderConfig(d=1, k=4)
        for level, channels in ((1, 6), (2, 12), (3, 24)):
            _, out = local_embed_layer(level, rng.normal(size=(16, channels)),
                                       rng.uniform(size=(16, 3)), rng.uniform(size=(16, 3)), cfg)
            assert out.channels == 2 * channels

    @pytest.mark.parametrize("mode", list(PEMode))
    def test_pe_modes_run(self, rng, mode):
        cfg = EncoderConfig(d=1, k=3, pe_mode=mode)
        _, out = local_embed_layer(1, rng.normal(size=(12, 6)), rng.uniform(size=(12, 3)),
                                   rng.uniform(size=(12, 3)), cfg)
        assert out.data.shape == (6, 12)

    def test_too_few_parent_points(self, rng):
        cfg = EncoderConfig(d=1, k=8)
        with pytest.raises(EncodeError):
            local_embed_layer(1, rng.normal(size=(5, 6)), rng.uniform(size=(5, 3)),
                              rng.uniform(size=(5, 3)), cfg)

    def test_invalid_level(self, rng):
        with pytest.raises(InvalidArgument):
            local_embed_layer(4, np.zeros((4, 6)), np.zeros((4, 3)), np.zeros((4, 3)),
                              EncoderConfig(d=1, k=1))


class TestUpsampleLayer:
    def test_matches_oracle_on_random_instances(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            k = int(rng.integers(1, 6))
            n_child = int(rng.integers(k, 24))
            n_target = int(rng.integers(1, 48))
            child = rng.normal(size=(n_child, 5))
            child_coords = rng.uniform(size=(n_child, 3))
            target_coords = rng.uniform(size=(n_target, 3))
            skip = rng.normal(size=(n_target, 3))
            out = upsample_layer(4, child, child_coords, target_coords, skip,
                                 EncoderConfig(d=1, k=k))
            expected = upsample_oracle(child, child_coords, target_coords, skip, k)
            assert out.data.shape == (n_target, 8)
            assert np.max(np.abs(out.data - expected)) <= 1e-6

    def test_constant_field_preserved(self, rng):
        child = np.full((10, 4), 3.25)
        out = upsample_layer(5, child, rng.uniform(size=(10, 3)), rng.uniform(size=(30, 3)),
                             np.zeros((30, 2)), EncoderConfig(d=1, k=4))
        assert np.max(np.abs(out.data[:, 2:] - 3.25)) <= 1e-9

    def test_skip_count_must_match_targets(self, rng):
        with pytest.raises(EncodeError):
            upsample_layer(4, np.zeros((8, 2)), rng.uniform(size=(8, 3)),
                           rng.uniform(size=(5, 3)), np.zeros((4, 2)), EncoderConfig(d=1, k=2))


class TestEncode:
    def test_final_width_is_ninety_d(self, rng):
        for d in (1, 2, 10):
            cfg = EncoderConfig(d=d, k=8)
            enc = encode(random_cloud(rng, 64), cfg)
            assert enc.final.data.shape == (64, 90 * d)

    def test_pyramid_halves(self, rng, small_cfg):
        enc = encode(random_cloud(rng, 64), small_cfg)
        assert [lvl.features.point_count for lvl in enc.pyramid] == [64, 32, 16, 8]
        assert [lvl.features.channels for lvl in enc.pyramid] == [12, 24, 48, 96]
        assert [c.shape[0] for c in enc.layer_coords] == [64, 32, 16, 8]

    def test_too_few_points(self, rng):
        with pytest.raises(EncodeError):
            encode(random_cloud(rng, 63), EncoderConfig(d=1, k=8))

    def test_deterministic(self, rng, small_cfg):
        cloud = random_cloud(rng, 48)
        assert np.array_equal(encode(cloud, small_cfg).final.data,
                              encode(cloud, small_cfg).final.data)

    def test_permutation_equivariance(self, small_cfg):
        rng = np.random.default_rng(7)
        cloud = random_cloud(rng, 48)
        base = encode(cloud, small_cfg).final.data
        for _ in range(20):
            perm = rng.permutation(48)
            permuted = encode(cloud.subset(perm), small_cfg).final.data
            assert np.max(np.abs(permuted - base[perm])) <= 1e-9

    @pytest.mark.parametrize("dist", list(FrequencyDistribution))
    def test_local_distributions(self, rng, dist):
        cfg = EncoderConfig(d=1, k=4, local_distribution=dist)
        assert encode(random_cloud(rng, 32), cfg).final.channels == 90

    def test_block_offset_does_not_change_features(self, rng, small_cfg):
        cloud = random_cloud(rng, 40)
        shifted = PointCloud(cloud.coords + 10.0, cloud.colors)
        assert np.allclose(encode(cloud, small_cfg).final.data,
                           encode(shifted, small_cfg).final.data, atol=1e-9)
