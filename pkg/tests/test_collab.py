import math

import numpy as np
import pytest

from coassign.assigners import NEGATIVE, GroundTruth, assign_atss, assignment_from_vector
from coassign.collab import (DEFAULT_HEADS, ROLE_AUXILIARY, ROLE_SET_MATCHING,
                             HeadConfig, HeadSpec, build_head_priors,
                             build_head_targets, extract_query_seeds,
                             layout_query_groups, normalize_box,
                             positive_ratio, sinusoidal_pe)
from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import CenterBox
from coassign.priors import build_pyramid_spec, generate_anchors


def _assignment_with(num_pos, head='atss'):
    priors = generate_anchors(build_pyramid_spec(64, 64, 1))
    gt = GroundTruth(labels=[0], boxes=[[0.0, 0.0, 64.0, 64.0]], image_h=64, image_w=64, num_classes=3)
    assigned = np.full(len(priors), NEGATIVE)
    assigned[:num_pos] = 0
    return assignment_from_vector(head, priors, gt, assigned, 'deltas')


class TestHeads:
    def test_defaults(self):
        config = HeadConfig()
        assert [h.kind for h in config.heads] == list(DEFAULT_HEADS)
        assert config.K == 2
        assert config.num_levels == 5

    def test_params_merged_over_defaults(self):
        head = HeadSpec('atss', {'topk': 3})
        assert head.params['topk'] == 3
        assert head.params['scales'] == (8.0,)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            HeadSpec('yolo')

    def test_unknown_param(self):
        with pytest.raises(ConfigError):
            HeadSpec('fcos', {'topk': 9})

    def test_param_count_must_match(self):
        with pytest.raises(ConfigError):
            HeadConfig.from_kinds(['atss', 'fcos'], params=[{}])

    def test_prior_kinds(self):
        assert [HeadSpec(k).prior_kind for k in ('atss', 'fcos', 'retinanet', 'faster_rcnn')] == \
            ['anchor', 'point', 'anchor', 'proposal']

    def test_atss_head_on_worked_scene(self, atss_scene):
        anchors, _, gt = atss_scene
        head = HeadSpec('atss', {'topk': 2})
        priors = build_head_priors(head, anchors.spec, gt)
        result = build_head_targets(head, priors, gt)
        assert result.pos_keys() == [(1, 0), (1, 1)]
        assert [b.as_list() for b in result.pos_boxes] == [anchors.boxes[0].tolist(), anchors.boxes[1].tolist()]

    def test_empty_gt(self):
        spec = build_pyramid_spec(32, 32, 2)
        gt = GroundTruth.empty(32, 32, 3)
        for kind in ('atss', 'fcos', 'retinanet', 'faster_rcnn'):
            head = HeadSpec(kind)
            priors = build_head_priors(head, spec, gt, rng=np.random.default_rng(0))
            result = build_head_targets(head, priors, gt)
            assert result.pos == ()
            assert len(result.neg) == len(priors)

    def test_wrong_prior_kind(self, atss_scene):
        _, points, gt = atss_scene
        with pytest.raises(InvalidInputError):
            build_head_targets(HeadSpec('atss'), points, gt)

    def test_retinanet_head_records_its_name(self):
        spec = build_pyramid_spec(32, 32, 2)
        gt = GroundTruth(labels=[0], boxes=[[4.0, 4.0, 28.0, 28.0]], image_h=32, image_w=32, num_classes=3)
        head = HeadSpec('retinanet')
        priors = build_head_priors(head, spec, gt)
        assert priors.anchors_per_cell == 9
        assert build_head_targets(head, priors, gt).head == 'retinanet'

    def test_faster_rcnn_head_with_sampler(self):
        spec = build_pyramid_spec(64, 64, 2)
        gt = GroundTruth(labels=[1], boxes=[[8.0, 8.0, 40.0, 40.0]], image_h=64, image_w=64, num_classes=3)
        head = HeadSpec('faster_rcnn', {'sample': True, 'num': 8})
        priors = build_head_priors(head, spec, gt, rng=np.random.default_rng(1))
        result = build_head_targets(head, priors, gt, rng=np.random.default_rng(2))
        assert result.head == 'faster_rcnn'
        assert result.num_pos >= 1
        assert len(result.neg) <= 8

    def test_heads_are_independent(self, atss_scene):
        _, _, gt = atss_scene
        spec = build_pyramid_spec(16, 16, 1)
        config = HeadConfig.from_kinds(['atss', 'fcos'], num_levels=1, params=[{'topk': 2}, {}])
        results = [build_head_targets(h, build_head_priors(h, spec, gt), gt) for h in config.heads]
        assert set(results[0].pos_keys()) & set(results[1].pos_keys())


class TestPositionalEncoding:
    def test_length(self):
        assert sinusoidal_pe(CenterBox(0.5, 0.5, 0.2, 0.2)).shape == (256,)
        assert sinusoidal_pe(CenterBox(0.5, 0.5, 0.2, 0.2), C=64).shape == (64,)

    def test_zero_coordinate(self):
        pe = sinusoidal_pe(CenterBox(0.0, 0.3, 0.2, 0.2))
        assert pe[0] == 0.0
        assert pe[1] == 1.0

    def test_recomputed_by_hand(self):
        C, cx = 256, 0.5
        pe = sinusoidal_pe(CenterBox(cx, 0.25, 0.1, 0.3), C=C)
        per_coord = C // 4
        for t in range(per_coord // 2):
            freq = 10000.0 ** (-2 * t / per_coord)
            assert pe[2 * t] == pytest.approx(math.sin(cx * 2 * math.pi * freq), abs=1e-12)
            assert pe[2 * t + 1] == pytest.approx(math.cos(cx * 2 * math.pi * freq), abs=1e-12)
        # cy block follows cx
        assert pe[per_coord] == pytest.approx(math.sin(0.25 * 2 * math.pi), abs=1e-12)

    @pytest.mark.parametrize('C', [0, 12, 100])
    def test_width_must_be_multiple_of_eight(self, C):
        with pytest.raises(ConfigError):
            sinusoidal_pe(CenterBox(0.5, 0.5, 0.1, 0.1), C=C)


class TestQuerySeeds:
    def test_worked_scene_seeds(self, atss_scene):
        anchors, _, gt = atss_scene
        seeds = extract_query_seeds(assign_atss(anchors, gt, k=2), head_index=1, image_h=16, image_w=16)
        assert len(seeds) == 2
        # the 64x64 anchors overhang the image, so their normalized boxes clip to the unit square
        assert seeds[0].box == normalize_box(anchors.boxes[0], 16, 16)
        assert seeds[0].box == CenterBox(0.5, 0.5, 1.0, 1.0)
        assert [s.gt_index for s in seeds] == [0, 0]
        assert seeds[1].location == 1

    def test_normalization(self):
        box = normalize_box(np.array([16.0, 8.0, 48.0, 24.0]), image_h=32, image_w=64)
        assert box == CenterBox(0.5, 0.5, 0.5, 0.5)

    def test_seeds_lie_in_unit_square(self):
        rng = np.random.default_rng(3)
        spec = build_pyramid_spec(64, 64, 2)
        for _ in range(10):
            x1, y1 = rng.uniform(0, 40, size=2)
            gt = GroundTruth(labels=[0], boxes=[[x1, y1, x1 + 20, y1 + 20]], image_h=64, image_w=64, num_classes=3)
            for seed in extract_query_seeds(assign_atss(generate_anchors(spec), gt), 1, 64, 64):
                values = seed.box.as_array()
                assert np.all((values >= 0) & (values <= 1))
                assert seed.pe.shape == (256,)

    def test_no_positives(self):
        assert extract_query_seeds(_assignment_with(0), 1, 64, 64) == []

    def test_to_dict(self):
        seed = extract_query_seeds(_assignment_with(1), 2, 64, 64, C=8)[0]
        out = seed.to_dict()
        assert set(out) == {'gt', 'box', 'level', 'location', 'pe'}
        assert len(out['pe']) == 8


class TestGroupLayout:
    def test_no_heads(self):
        layout = layout_query_groups(300)
        assert layout.K == 0
        assert layout.sizes() == (300,)
        assert layout.groups[0].role == ROLE_SET_MATCHING

    def test_two_heads(self):
        layout = layout_query_groups(300, [_assignment_with(12), _assignment_with(31, head='faster_rcnn')])
        assert layout.sizes() == (300, 12, 31)
        assert layout.K == 2
        assert layout.total_queries == 343
        assert [(g.start, g.stop) for g in layout.groups] == [(0, 300), (300, 312), (312, 343)]
        assert layout.groups[2].role == ROLE_AUXILIARY
        assert layout.groups[2].gt_binding == (0,) * 31

    def test_empty_head_keeps_its_group(self):
        layout = layout_query_groups(10, [_assignment_with(0)])
        assert layout.sizes() == (10, 0)

    def test_needs_learnable_queries(self):
        with pytest.raises(ConfigError):
            layout_query_groups(0)

    def test_to_dict(self):
        out = layout_query_groups(5, [_assignment_with(2)]).to_dict()
        assert out['K'] == 1
        assert out['groups'][1]['gt_binding'] == [0, 0]
        assert 'gt_binding' not in out['groups'][0]


def test_positive_ratio():
    ratio = positive_ratio([_assignment_with(4), _assignment_with(6, head='faster_rcnn')], num_gts=2)
    assert ratio == {'1:atss': 2.0, '2:faster_rcnn': 3.0}
    assert positive_ratio([_assignment_with(0)], num_gts=0) == {'1:atss': 0.0}
