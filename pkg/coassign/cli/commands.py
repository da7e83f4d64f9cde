"""Batch commands: assign, match, targets and diagnose over a scene file.

Each command processes images independently on a bounded thread pool and
writes its report in input order, so reruns on the same input and config
produce byte-identical files.
"""
import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from coassign.assigners import Assignment, GroundTruth, dense_targets
from coassign.cli.config import LevelGrid, RunConfig, SceneFile, SceneImage, load_scene
from coassign.collab import (HeadSpec, build_head_priors, build_head_targets,
                             extract_query_seeds, layout_query_groups,
                             positive_ratio)
from coassign.diagnostics import (CurvePoint, ForegroundMask, ScoreMap,
                                  binding_from_match, default_thresholds,
                                  discriminability_map, iof_iob_curve,
                                  matching_instability, mean_curve)
from coassign.errors import CoAssignError, ConfigError, InvalidInputError
from coassign.matcher import MatchResult, QueryPrediction, match_one_to_one
from coassign.priors import PriorSet, PyramidSpec, ScalarMap, build_pyramid_spec

logger = logging.getLogger(__name__)

OUTPUT_FILES = {
    'assign': 'assignments.json',
    'match': 'matches.json',
    'targets': 'targets.json',
    'curves': 'curves.csv',
    'attention_curves': 'attention_curves.csv',
    'instability': 'instability.csv',
    'score_maps': 'score_maps.json',
}


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _in_image_context(image_id, fn: Callable, *args):
    try:
        return fn(*args)
    except CoAssignError as exc:
        raise type(exc)(f'image {image_id}: {exc}') from exc


def _map_images(config: RunConfig, scene: SceneFile, fn: Callable[[int, SceneImage], Any]) -> List[Any]:
    """Run ``fn(index, image)`` per image on ``config.threads`` workers; results in input order."""
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(_in_image_context, image.id, fn, k, image)
                   for k, image in enumerate(scene.images)]
        return [f.result() for f in futures]


def _image_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _require_paths(config: RunConfig) -> Tuple[Path, Path]:
    if not config.input:
        raise ConfigError('no input scene file given (--input or "input" in the config)')
    if not config.output:
        raise ConfigError('no output directory given (--output or "output" in the config)')
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    return Path(config.input), out_dir


def _write_json(path: Path, payload: Any) -> Path:
    text = json.dumps(payload, indent=1, ensure_ascii=False, allow_nan=False)
    path.write_text(text + '\n', encoding='utf-8')
    logger.info('Wrote %s', path)
    return path


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    logger.info('Wrote %s (%d rows)', path, len(rows))
    return path


def _run_heads(config: RunConfig, index: int, image: SceneImage,
               num_classes: int) -> Tuple[GroundTruth, List[Tuple[HeadSpec, PriorSet, Assignment]]]:
    head_config = config.head_config()
    gt = image.ground_truth(num_classes)
    spec = build_pyramid_spec(image.height, image.width, head_config.num_levels)
    rng = _image_rng(config.seed, index)
    proposals = np.asarray(image.proposals, dtype=np.float64).reshape(-1, 4) \
        if image.proposals is not None else None
    results = []
    for head in head_config.heads:
        priors = build_head_priors(head, spec, gt, proposals=proposals, rng=rng)
        results.append((head, priors, build_head_targets(head, priors, gt, rng=rng)))
    return gt, results


# ---------------------------------------------------------------------------
# assign
# ---------------------------------------------------------------------------

def cmd_assign(config: RunConfig) -> Dict[str, Path]:
    """Per image and head: counts, positives with targets and positive boxes."""
    input_path, out_dir = _require_paths(config)
    scene = load_scene(input_path)

    def work(index: int, image: SceneImage) -> dict:
        gt, heads = _run_heads(config, index, image, scene.num_classes)
        return {
            'id': image.id,
            'num_gts': len(gt),
            'heads': [assignment.to_dict() for _, _, assignment in heads],
        }

    images = _map_images(config, scene, work)
    report = {'num_levels': config.num_levels, 'heads': [h.kind for h in config.heads], 'images': images}
    return {'assign': _write_json(out_dir / OUTPUT_FILES['assign'], report)}


# ---------------------------------------------------------------------------
# match
# ---------------------------------------------------------------------------

def _normalized_gts(gt: GroundTruth) -> List[Tuple[int, np.ndarray]]:
    scale = np.array([gt.image_w, gt.image_h, gt.image_w, gt.image_h], dtype=np.float64)
    return [(int(label), box / scale) for label, box in zip(gt.labels, gt.boxes)]


def _match_predictions(predictions, gt: GroundTruth, config: RunConfig) -> MatchResult:
    preds = [QueryPrediction(class_scores=p.scores, box=p.bbox) for p in predictions]
    return match_one_to_one(preds, _normalized_gts(gt), config.match_weights())


def cmd_match(config: RunConfig) -> Dict[str, Path]:
    """Hungarian pairs and total cost per image; predictions are required."""
    input_path, out_dir = _require_paths(config)
    scene = load_scene(input_path)

    def work(index: int, image: SceneImage) -> dict:
        if image.predictions is None:
            raise InvalidInputError('no predictions to match')
        gt = image.ground_truth(scene.num_classes)
        match = _match_predictions(image.predictions, gt, config)
        return {'id': image.id, 'num_queries': len(image.predictions), 'num_gts': len(gt), **match.to_dict()}

    images = _map_images(config, scene, work)
    return {'match': _write_json(out_dir / OUTPUT_FILES['match'], {'images': images})}


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

def _target_bundle(head: HeadSpec, assignment: Assignment, priors: PriorSet, gt: GroundTruth,
                   dense: bool) -> dict:
    arrays = dense_targets(assignment, priors, gt)
    if dense:
        return {k: v.tolist() for k, v in arrays.items()}
    pos = np.flatnonzero(arrays['reg_weights'] > 0)
    return {
        'num_priors': len(priors),
        'background': gt.num_classes,
        'regression': 'ltrb' if head.kind == 'fcos' else 'deltas',
        'pos_index': pos.tolist(),
        'labels': arrays['labels'][pos].tolist(),
        'reg_targets': arrays['reg_targets'][pos].tolist(),
        'centerness': arrays['centerness'][pos].tolist(),
        'gt_boxes': arrays['gt_boxes'][pos].tolist(),
        'ignored_index': np.flatnonzero(arrays['label_weights'] == 0).tolist(),
    }


def cmd_targets(config: RunConfig) -> Dict[str, Path]:
    """Query-group layout, positive-query seeds and target bundles per head."""
    input_path, out_dir = _require_paths(config)
    scene = load_scene(input_path)

    def work(index: int, image: SceneImage) -> dict:
        gt, heads = _run_heads(config, index, image, scene.num_classes)
        assignments = [a for _, _, a in heads]
        layout = layout_query_groups(config.n_learnable, assignments)
        head_records = []
        for i, (head, priors, assignment) in enumerate(heads, start=1):
            seeds = extract_query_seeds(assignment, i, image.height, image.width,
                                        C=config.pe_dim, temperature=config.temperature)
            head_records.append({
                'index': i,
                'kind': head.kind,
                'counts': assignment.counts(),
                'seeds': [s.to_dict() for s in seeds],
                'targets': _target_bundle(head, assignment, priors, gt, config.dense_targets),
            })
        return {
            'id': image.id,
            'num_gts': len(gt),
            'layout': layout.to_dict(),
            'heads': head_records,
            'positive_ratio': positive_ratio(assignments, len(gt)),
        }

    images = _map_images(config, scene, work)
    report = {
        'loss_weights': {'lambda1': config.lambda1, 'lambda2': config.lambda2,
                         'encoder_inside_layer_sum': config.encoder_inside_layer_sum},
        'positive_ratio_mean': _mean_ratios(images),
        'images': images,
    }
    return {'targets': _write_json(out_dir / OUTPUT_FILES['targets'], report)}


def _mean_ratios(images: Sequence[dict]) -> Dict[str, float]:
    """Per-head mean of |pos| / |gt| over images with at least one gt."""
    with_gts = [img['positive_ratio'] for img in images if img['num_gts'] > 0]
    if not with_gts:
        return {}
    return {key: math.fsum(r[key] for r in with_gts) / len(with_gts) for key in with_gts[0]}


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def _level_maps(grids: Sequence[LevelGrid], spec: PyramidSpec, what: str) -> List[ScalarMap]:
    maps = []
    for grid in grids:
        if grid.level > spec.num_levels:
            raise InvalidInputError(f'{what} level {grid.level} exceeds the {spec.num_levels}-level pyramid')
        level = spec.level(grid.level)
        if (grid.height, grid.width) != (level.height, level.width):
            raise InvalidInputError(f'{what} level {grid.level} grid is {grid.height}x{grid.width}, '
                                    f'pyramid expects {level.height}x{level.width}')
        maps.append(ScalarMap(level=grid.level, values=np.asarray(grid.values).reshape(grid.height, grid.width)))
    return maps


def _epoch_bindings(image: SceneImage, gt: GroundTruth, config: RunConfig) -> Optional[list]:
    if image.epoch_matchings is not None:
        bindings = []
        for pairs in image.epoch_matchings:
            if any(len(p) != 2 for p in pairs):
                raise InvalidInputError('epoch matchings must be [query, gt] pairs')
            match = MatchResult(pairs=tuple((int(q), int(g)) for q, g in pairs), total_cost=0.0)
            bindings.append(binding_from_match(match, len(gt)))
        return bindings
    if image.epoch_predictions is not None:
        return [binding_from_match(_match_predictions(preds, gt, config), len(gt))
                for preds in image.epoch_predictions]
    return None


def _curve_rows(curve: Sequence[CurvePoint]) -> List[Dict[str, float]]:
    return [{'S': p.S, 'iof': p.iof, 'iob': p.iob} for p in curve]


def cmd_diagnose(config: RunConfig) -> Dict[str, Path]:
    """IoF/IoB curves of feature-norm (and attention) maps plus matching instability."""
    input_path, out_dir = _require_paths(config)
    scene = load_scene(input_path)
    thresholds = default_thresholds(config.num_thresholds)

    def work(index: int, image: SceneImage) -> dict:
        gt = image.ground_truth(scene.num_classes)
        spec = build_pyramid_spec(image.height, image.width, config.num_levels)
        fg = ForegroundMask.from_boxes(gt.boxes, image.height, image.width)
        out = {'id': image.id, 'score_map': None, 'curve': None, 'attention_curve': None,
               'bindings': _epoch_bindings(image, gt, config)}
        if config.curves:
            if not image.feature_norms:
                raise InvalidInputError('no feature_norms for the IoF-IoB curve')
            D = discriminability_map(_level_maps(image.feature_norms, spec, 'feature_norms'),
                                     image.height, image.width)
            out['score_map'] = D
            out['curve'] = iof_iob_curve(D, fg, thresholds)
            if image.attention_maps:
                A = discriminability_map(_level_maps(image.attention_maps, spec, 'attention_maps'),
                                         image.height, image.width)
                out['attention_curve'] = iof_iob_curve(A, fg, thresholds)
        return out

    results = _map_images(config, scene, work)
    written: Dict[str, Path] = {}
    if config.curves:
        curve = mean_curve([r['curve'] for r in results])
        written['curves'] = _write_csv(out_dir / OUTPUT_FILES['curves'], ('S', 'iof', 'iob'), _curve_rows(curve))
        attention = [r['attention_curve'] for r in results if r['attention_curve'] is not None]
        if attention:
            written['attention_curves'] = _write_csv(out_dir / OUTPUT_FILES['attention_curves'],
                                                     ('S', 'iof', 'iob'), _curve_rows(mean_curve(attention)))
        if config.write_score_maps:
            written['score_maps'] = _write_json(out_dir / OUTPUT_FILES['score_maps'], {'images': [
                _score_map_record(r['id'], r['score_map']) for r in results]})

    with_epochs = [r for r in results if r['bindings'] is not None]
    if with_epochs:
        if len(with_epochs) != len(results):
            missing = next(r['id'] for r in results if r['bindings'] is None)
            raise InvalidInputError(f'image {missing}: no per-epoch matchings while other images have them')
        num_epochs = len(results[0]['bindings'])
        for r in results:
            if len(r['bindings']) != num_epochs:
                raise InvalidInputError(f'image {r["id"]}: {len(r["bindings"])} epochs, expected {num_epochs}')
        per_epoch = [[r['bindings'][e] for r in results] for e in range(num_epochs)]
        report = matching_instability(per_epoch)
        rows = [{'epoch_pair': pair, 'IS': value} for pair, value in report.rows()]
        rows.append({'epoch_pair': 'mean', 'IS': report.mean})
        written['instability'] = _write_csv(out_dir / OUTPUT_FILES['instability'], ('epoch_pair', 'IS'), rows)

    if not written:
        raise ConfigError('nothing to diagnose: curves are disabled and no image has per-epoch matchings')
    return written


def _score_map_record(image_id, D: ScoreMap) -> dict:
    h, w = D.shape
    return {'id': image_id, 'height': h, 'width': w, 'values': D.values.ravel().tolist()}


COMMANDS = {
    'assign': cmd_assign,
    'match': cmd_match,
    'targets': cmd_targets,
    'diagnose': cmd_diagnose,
}
