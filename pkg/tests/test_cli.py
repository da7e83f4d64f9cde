import csv
import json
import logging

import pytest

from coassign.cli.config import RunConfig, load_run_config, load_scene, parse_scene
from coassign.cli.main import EXIT_INVALID, EXIT_IO, EXIT_OK, configure_logging, run
from coassign.errors import ConfigError, SceneFileError
from tests.conftest import scene_image, synthetic_corpus

SMALL_PYRAMID = {'num_levels': 2}


@pytest.fixture
def small_config(tmp_path):
    def _write(**extra):
        path = tmp_path / 'run.json'
        path.write_text(json.dumps({**SMALL_PYRAMID, **extra}), encoding='utf-8')
        return str(path)
    return _write


def _read_csv(path):
    with open(path, encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


class TestSceneLoading:
    def test_valid_scene(self, write_scene):
        scene = load_scene(write_scene(synthetic_corpus(3)))
        assert len(scene) == 3
        assert scene.num_classes == 3

    def test_image_order_kept(self, write_scene):
        corpus = synthetic_corpus(100, seed=8)
        for k, image in enumerate(corpus['images']):
            image['id'] = f'img-{(37 * k) % 100}'
        scene = load_scene(write_scene(corpus))
        assert [image.id for image in scene.images] == [f'img-{(37 * k) % 100}' for k in range(100)]

    def test_default_num_classes(self):
        assert parse_scene({'images': [scene_image(0)]}).num_classes == 80

    def test_inverted_box_names_image(self):
        data = {'num_classes': 3, 'images': [scene_image('a'), scene_image(7, objects=[(0, (10, 10, 5, 20))])]}
        with pytest.raises(SceneFileError) as info:
            parse_scene(data)
        assert 'image 7' in str(info.value)
        assert info.value.image_id == 7

    def test_zero_area_box(self):
        data = {'num_classes': 3, 'images': [scene_image(2, objects=[(0, (10, 10, 10, 20))])]}
        with pytest.raises(SceneFileError) as info:
            parse_scene(data)
        assert info.value.field == 'objects'

    def test_label_out_of_range(self):
        with pytest.raises(SceneFileError):
            parse_scene({'num_classes': 2, 'images': [scene_image(0, objects=[(5, (0, 0, 8, 8))])]})

    def test_duplicate_ids(self):
        with pytest.raises(SceneFileError) as info:
            parse_scene({'images': [scene_image(1), scene_image(1)]})
        assert 'duplicate' in str(info.value)

    def test_prediction_score_count(self):
        pred = {'scores': [0.5, 0.5], 'bbox': [0.5, 0.5, 0.1, 0.1]}
        with pytest.raises(SceneFileError) as info:
            parse_scene({'num_classes': 3, 'images': [scene_image(4, predictions=[pred])]})
        assert info.value.field == 'predictions.0.scores'

    def test_grid_size_checked(self):
        grid = {'level': 1, 'height': 2, 'width': 2, 'values': [0.0, 1.0, 2.0]}
        with pytest.raises(SceneFileError):
            parse_scene({'images': [scene_image(0, feature_norms=[grid])]})


class TestRunConfig:
    def test_defaults(self):
        config = load_run_config()
        assert config.num_levels == 5
        assert [h.kind for h in config.heads] == ['atss', 'faster_rcnn']
        assert config.match_weights().l1 == 5.0

    def test_overrides_win_over_file(self, small_config):
        config = load_run_config(small_config(seed=3), {'seed': 9, 'threads': None})
        assert config.seed == 9
        assert config.threads == 1
        assert config.num_levels == 2

    def test_unknown_head(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={'heads': [{'kind': 'yolo'}]})

    def test_negative_lambda(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={'lambda1': -1.0})

    def test_bad_threads(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={'threads': 0})

    def test_non_object_file(self, tmp_path):
        path = tmp_path / 'run.json'
        path.write_text('[1, 2]', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_head_config(self):
        config = RunConfig(num_levels=3, heads=[{'kind': 'fcos', 'params': {'center_radius': 2.0}}])
        heads = config.head_config()
        assert heads.num_levels == 3
        assert heads.heads[0].params['center_radius'] == 2.0


class TestAssignCommand:
    def test_writes_report(self, tmp_path, write_scene, small_config):
        out = tmp_path / 'out'
        code = run(['assign', '--config', small_config(), '--input', str(write_scene(synthetic_corpus(4))),
                    '--output', str(out)])
        assert code == EXIT_OK
        report = json.loads((out / 'assignments.json').read_text(encoding='utf-8'))
        assert report['num_levels'] == 2
        assert report['heads'] == ['atss', 'faster_rcnn']
        assert [img['id'] for img in report['images']] == [0, 1, 2, 3]
        for img in report['images']:
            for head in img['heads']:
                assert head['counts']['pos'] == len(head['pos']) == len(head['pos_boxes'])

    def test_counts_partition_priors(self, tmp_path, write_scene, small_config):
        scene = {'num_classes': 3, 'images': [scene_image(0, objects=[(1, (16, 16, 48, 48))])]}
        out = tmp_path / 'out'
        run(['assign', '--config', small_config(heads=[{'kind': 'atss'}]),
             '--input', str(write_scene(scene)), '--output', str(out)])
        head = json.loads((out / 'assignments.json').read_text(encoding='utf-8'))['images'][0]['heads'][0]
        # one anchor per cell on 8x8 and 4x4 grids
        assert sum(head['counts'].values()) == 80
        assert all(p['label'] == 1 and p['gt'] == 0 for p in head['pos'])

    def test_reruns_are_byte_identical(self, tmp_path, write_scene, small_config):
        scene = str(write_scene(synthetic_corpus(100, seed=5)))
        config = small_config(heads=[{'kind': k} for k in ('atss', 'fcos', 'retinanet', 'faster_rcnn')])
        first, second = tmp_path / 'a', tmp_path / 'b'
        assert run(['targets', '--config', config, '--input', scene, '--output', str(first),
                    '--threads', '1']) == EXIT_OK
        assert run(['targets', '--config', config, '--input', scene, '--output', str(second),
                    '--threads', '4']) == EXIT_OK
        assert (first / 'targets.json').read_bytes() == (second / 'targets.json').read_bytes()

    def test_seed_changes_synthetic_proposals(self, tmp_path, write_scene, small_config):
        scene = {'num_classes': 3, 'images': [scene_image(0, objects=[(0, (8, 8, 40, 40))])]}
        path = str(write_scene(scene))
        config = small_config(heads=[{'kind': 'faster_rcnn'}])
        outputs = []
        for seed in ('1', '2'):
            out = tmp_path / seed
            run(['assign', '--config', config, '--input', path, '--output', str(out), '--seed', seed])
            outputs.append((out / 'assignments.json').read_text(encoding='utf-8'))
        assert outputs[0] != outputs[1]


class TestExitCodes:
    def test_missing_input_flag(self, tmp_path):
        assert run(['assign', '--output', str(tmp_path)]) == EXIT_INVALID

    def test_missing_file(self, tmp_path):
        assert run(['assign', '--input', str(tmp_path / 'nope.json'), '--output', str(tmp_path)]) == EXIT_IO

    def test_not_json(self, tmp_path):
        path = tmp_path / 'scenes.json'
        path.write_text('{not json', encoding='utf-8')
        assert run(['assign', '--input', str(path), '--output', str(tmp_path)]) == EXIT_IO

    def test_invalid_scene(self, tmp_path, write_scene):
        scene = {'images': [scene_image(0, objects=[(0, (30, 30, 10, 10))])]}
        assert run(['assign', '--input', str(write_scene(scene)), '--output', str(tmp_path)]) == EXIT_INVALID

    def test_pyramid_too_deep_for_image(self, tmp_path, write_scene):
        assert run(['assign', '--input', str(write_scene(synthetic_corpus(1))),
                    '--output', str(tmp_path / 'out')]) == EXIT_INVALID

    def test_invalid_config(self, tmp_path, write_scene, small_config):
        assert run(['assign', '--config', small_config(heads=[{'kind': 'yolo'}]),
                    '--input', str(write_scene(synthetic_corpus(1))), '--output', str(tmp_path)]) == EXIT_INVALID

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            run(['--version'])
        assert info.value.code == 0
        assert 'coassign' in capsys.readouterr().out


def _pred(scores, box):
    return {'scores': scores, 'bbox': box}


class TestMatchCommand:
    def test_pairs_and_cost(self, tmp_path, write_scene):
        image = scene_image('img', objects=[(0, (0, 0, 32, 32)), (2, (32, 32, 64, 64))], predictions=[
            _pred([0.1, 0.1, 0.1], [0.9, 0.1, 0.1, 0.1]),
            _pred([0.1, 0.1, 0.9], [0.75, 0.75, 0.5, 0.5]),
            _pred([0.9, 0.1, 0.1], [0.25, 0.25, 0.5, 0.5]),
        ])
        out = tmp_path / 'out'
        code = run(['match', '--input', str(write_scene({'num_classes': 3, 'images': [image]})),
                    '--output', str(out)])
        assert code == EXIT_OK
        record = json.loads((out / 'matches.json').read_text(encoding='utf-8'))['images'][0]
        assert record['id'] == 'img'
        assert record['num_queries'] == 3
        assert sorted(record['pairs'], key=lambda p: p[1]) == [[2, 0], [1, 1]]

    def test_no_gts(self, tmp_path, write_scene):
        image = scene_image(0, predictions=[_pred([0.5, 0.5, 0.5], [0.5, 0.5, 0.2, 0.2])])
        out = tmp_path / 'out'
        run(['match', '--input', str(write_scene({'num_classes': 3, 'images': [image]})), '--output', str(out)])
        record = json.loads((out / 'matches.json').read_text(encoding='utf-8'))['images'][0]
        assert record['pairs'] == []
        assert record['total_cost'] == 0.0

    def test_empty_predictions_give_no_pairs(self, tmp_path, write_scene):
        image = scene_image(0, objects=[(1, (8, 8, 40, 40))], predictions=[])
        out = tmp_path / 'out'
        code = run(['match', '--input', str(write_scene({'num_classes': 3, 'images': [image]})),
                    '--output', str(out)])
        assert code == EXIT_OK
        record = json.loads((out / 'matches.json').read_text(encoding='utf-8'))['images'][0]
        assert record['num_queries'] == 0
        assert record['num_gts'] == 1
        assert record['pairs'] == []
        assert record['total_cost'] == 0.0

    def test_predictions_required(self, tmp_path, write_scene):
        code = run(['match', '--input', str(write_scene(synthetic_corpus(2))), '--output', str(tmp_path)])
        assert code == EXIT_INVALID


class TestTargetsCommand:
    def test_layout_and_seeds(self, tmp_path, write_scene, small_config):
        scene = {'num_classes': 3, 'images': [
            scene_image(0, objects=[(1, (16, 16, 48, 48))]),
            scene_image(1),
        ]}
        out = tmp_path / 'out'
        code = run(['targets', '--config', small_config(n_learnable=30, pe_dim=16),
                    '--input', str(write_scene(scene)), '--output', str(out)])
        assert code == EXIT_OK
        report = json.loads((out / 'targets.json').read_text(encoding='utf-8'))
        assert report['loss_weights'] == {'lambda1': 1.0, 'lambda2': 2.0, 'encoder_inside_layer_sum': True}
        first = report['images'][0]
        layout = first['layout']
        assert layout['K'] == 2
        assert layout['groups'][0]['count'] == 30
        for head in first['heads']:
            group = layout['groups'][head['index']]
            assert group['count'] == head['counts']['pos'] == len(head['seeds'])
            assert all(len(seed['pe']) == 16 for seed in head['seeds'])
            assert all(0.0 <= v <= 1.0 for seed in head['seeds'] for v in seed['box'])
            assert head['targets']['background'] == 3
            assert len(head['targets']['pos_index']) == head['counts']['pos']
        assert set(first['positive_ratio']) == {'1:atss', '2:faster_rcnn'}
        # images without gts do not enter the mean
        assert report['positive_ratio_mean'] == first['positive_ratio']
        assert report['images'][1]['layout']['total_queries'] == 30

    def test_dense_targets(self, tmp_path, write_scene, small_config):
        scene = {'num_classes': 3, 'images': [scene_image(0, objects=[(1, (16, 16, 48, 48))])]}
        out = tmp_path / 'out'
        run(['targets', '--config', small_config(dense_targets=True, heads=[{'kind': 'fcos'}]),
             '--input', str(write_scene(scene)), '--output', str(out)])
        head = json.loads((out / 'targets.json').read_text(encoding='utf-8'))['images'][0]['heads'][0]
        # 8x8 + 4x4 points
        assert len(head['targets']['labels']) == 80
        assert sum(1 for v in head['targets']['labels'] if v != 3) == head['counts']['pos']


def _grid(level, size, value_fn):
    return {'level': level, 'height': size, 'width': size,
            'values': [float(value_fn(r, c)) for r in range(size) for c in range(size)]}


class TestDiagnoseCommand:
    def test_curves(self, tmp_path, write_scene, small_config):
        # strong response over the left half, where the gt lies
        norms = [_grid(1, 8, lambda r, c: 5.0 if c < 4 else 1.0), _grid(2, 4, lambda r, c: 1.0)]
        image = scene_image(0, objects=[(0, (0, 0, 32, 64))], feature_norms=norms)
        out = tmp_path / 'out'
        code = run(['diagnose', '--config', small_config(num_thresholds=16),
                    '--input', str(write_scene({'num_classes': 3, 'images': [image]})), '--output', str(out)])
        assert code == EXIT_OK
        assert (out / 'curves.csv').read_text(encoding='utf-8').splitlines()[0] == 'S,iof,iob'
        rows = _read_csv(out / 'curves.csv')
        assert len(rows) == 16
        iof = [float(r['iof']) for r in rows]
        iob = [float(r['iob']) for r in rows]
        assert iof == sorted(iof, reverse=True)
        assert iob == sorted(iob, reverse=True)
        assert any(a > b for a, b in zip(iof, iob))
        maps = json.loads((out / 'score_maps.json').read_text(encoding='utf-8'))['images']
        assert (maps[0]['height'], maps[0]['width']) == (64, 64)
        assert not (out / 'instability.csv').exists()

    def test_grid_must_match_pyramid(self, tmp_path, write_scene, small_config):
        image = scene_image(0, objects=[(0, (0, 0, 32, 32))], feature_norms=[_grid(1, 4, lambda r, c: 1.0)])
        code = run(['diagnose', '--config', small_config(), '--input',
                    str(write_scene({'num_classes': 3, 'images': [image]})), '--output', str(tmp_path)])
        assert code == EXIT_INVALID

    def test_curves_need_feature_norms(self, tmp_path, write_scene, small_config):
        code = run(['diagnose', '--config', small_config(), '--input', str(write_scene(synthetic_corpus(1))),
                    '--output', str(tmp_path)])
        assert code == EXIT_INVALID

    def test_instability_from_matchings(self, tmp_path, write_scene, small_config):
        image = scene_image(0, objects=[(0, (0, 0, 16, 16)), (1, (32, 32, 48, 48))],
                            epoch_matchings=[[[3, 0], [7, 1]], [[3, 0], [5, 1]], [[4, 0], [5, 1]]])
        out = tmp_path / 'out'
        code = run(['diagnose', '--config', small_config(curves=False),
                    '--input', str(write_scene({'num_classes': 3, 'images': [image]})), '--output', str(out)])
        assert code == EXIT_OK
        assert (out / 'instability.csv').read_text(encoding='utf-8').splitlines()[0] == 'epoch_pair,IS'
        rows = {r['epoch_pair']: float(r['IS']) for r in _read_csv(out / 'instability.csv')}
        assert rows == {'1-2': 0.5, '2-3': 0.5, 'mean': 0.5}
        assert not (out / 'curves.csv').exists()

    def test_instability_from_predictions(self, tmp_path, write_scene, small_config):
        near = _pred([0.9, 0.1, 0.1], [0.125, 0.125, 0.25, 0.25])
        far = _pred([0.1, 0.1, 0.1], [0.9, 0.9, 0.1, 0.1])
        image = scene_image(0, objects=[(0, (0, 0, 16, 16))], epoch_predictions=[[near, far], [far, near]])
        out = tmp_path / 'out'
        run(['diagnose', '--config', small_config(curves=False),
             '--input', str(write_scene({'num_classes': 3, 'images': [image]})), '--output', str(out)])
        rows = _read_csv(out / 'instability.csv')
        assert rows[0] == {'epoch_pair': '1-2', 'IS': '1.0'}

    def test_epoch_data_on_some_images_only(self, tmp_path, write_scene, small_config):
        images = [scene_image(0, objects=[(0, (0, 0, 16, 16))], epoch_matchings=[[[0, 0]], [[1, 0]]]),
                  scene_image(1, objects=[(0, (0, 0, 16, 16))])]
        code = run(['diagnose', '--config', small_config(curves=False),
                    '--input', str(write_scene({'num_classes': 3, 'images': images})), '--output', str(tmp_path)])
        assert code == EXIT_INVALID

    def test_nothing_to_do(self, tmp_path, write_scene, small_config):
        code = run(['diagnose', '--config', small_config(curves=False),
                    '--input', str(write_scene(synthetic_corpus(1))), '--output', str(tmp_path)])
        assert code == EXIT_INVALID


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv('CODETR_LOG', 'debug')
    configure_logging()
    assert logging.getLogger().level == logging.DEBUG
    monkeypatch.setenv('CODETR_LOG', 'loud')
    configure_logging()
    assert logging.getLogger().level == logging.INFO
