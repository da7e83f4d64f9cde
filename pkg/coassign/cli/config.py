"""Scene-file schema, run configuration and their loaders."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from coassign.assigners import GroundTruth
from coassign.collab import DEFAULT_HEADS, DEFAULT_NUM_LEVELS, DEFAULT_QUERY_CONFIG, HeadConfig
from coassign.diagnostics import DEFAULT_CURVE_CONFIG
from coassign.errors import ConfigError, InvalidInputError, SceneFileError
from coassign.losses import DEFAULT_LOSS_CONFIG, LossWeights
from coassign.matcher import DEFAULT_MATCH_CONFIG, MatchWeights

logger = logging.getLogger(__name__)

DEFAULT_NUM_CLASSES = 80


# ---------------------------------------------------------------------------
# scene file
# ---------------------------------------------------------------------------

def _check_corner_box(v: List[float]) -> List[float]:
    if len(v) != 4:
        raise ValueError(f'bbox needs 4 coordinates, got {len(v)}')
    x1, y1, x2, y2 = v
    if x2 < x1 or y2 < y1:
        raise ValueError(f'bbox {v} has x2 < x1 or y2 < y1')
    return v


class SceneObject(BaseModel):
    label: int = Field(ge=0)
    bbox: List[float]

    @field_validator('bbox')
    @classmethod
    def _corner_box(cls, v):
        return _check_corner_box(v)


class ScenePrediction(BaseModel):
    scores: List[float]
    # normalized (cx, cy, w, h)
    bbox: List[float]

    @field_validator('bbox')
    @classmethod
    def _four_values(cls, v):
        if len(v) != 4:
            raise ValueError(f'bbox needs 4 values, got {len(v)}')
        return v


class LevelGrid(BaseModel):
    """One pyramid level's scalar map, flattened row-major."""
    level: int = Field(ge=1)
    height: int = Field(ge=1)
    width: int = Field(ge=1)
    values: List[float]

    @model_validator(mode='after')
    def _size_matches(self):
        if len(self.values) != self.height * self.width:
            raise ValueError(f'level {self.level} grid declares {self.height}x{self.width} '
                             f'but holds {len(self.values)} values')
        return self


class SceneImage(BaseModel):
    id: Union[int, str]
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    objects: List[SceneObject] = []
    proposals: Optional[List[List[float]]] = None
    predictions: Optional[List[ScenePrediction]] = None
    feature_norms: Optional[List[LevelGrid]] = None
    attention_maps: Optional[List[LevelGrid]] = None
    # per epoch, the query predictions of the learnable group
    epoch_predictions: Optional[List[List[ScenePrediction]]] = None
    # per epoch, (query, gt) pairs of an externally computed matching
    epoch_matchings: Optional[List[List[List[int]]]] = None

    @field_validator('proposals')
    @classmethod
    def _proposal_boxes(cls, v):
        if v is not None:
            for box in v:
                _check_corner_box(box)
        return v

    def ground_truth(self, num_classes: int) -> GroundTruth:
        return GroundTruth.from_objects([(o.label, o.bbox) for o in self.objects],
                                        image_h=self.height, image_w=self.width, num_classes=num_classes)


class SceneFile(BaseModel):
    num_classes: int = Field(default=DEFAULT_NUM_CLASSES, ge=1)
    images: List[SceneImage]

    def __len__(self) -> int:
        return len(self.images)


def _scene_error(exc: ValidationError, data: Any) -> SceneFileError:
    err = exc.errors()[0]
    loc = list(err['loc'])
    image_id = None
    if len(loc) >= 2 and loc[0] == 'images' and isinstance(loc[1], int):
        try:
            image_id = data['images'][loc[1]].get('id', f'#{loc[1]}')
        except (KeyError, IndexError, TypeError, AttributeError):
            image_id = f'#{loc[1]}'
        loc = loc[2:]
    field = '.'.join(str(part) for part in loc) or None
    return SceneFileError(err['msg'], image_id=image_id, field=field)


def parse_scene(data: Any) -> SceneFile:
    """Validate already-decoded scene JSON, including ground-truth geometry."""
    try:
        scene = SceneFile.model_validate(data)
    except ValidationError as exc:
        raise _scene_error(exc, data) from exc
    seen = set()
    for image in scene.images:
        if image.id in seen:
            raise SceneFileError('duplicate image id', image_id=image.id, field='id')
        seen.add(image.id)
        try:
            image.ground_truth(scene.num_classes)
        except InvalidInputError as exc:
            raise SceneFileError(str(exc), image_id=image.id, field='objects') from exc
        for k, pred in enumerate(image.predictions or []):
            if len(pred.scores) != scene.num_classes:
                raise SceneFileError(f'{len(pred.scores)} scores for {scene.num_classes} classes',
                                     image_id=image.id, field=f'predictions.{k}.scores')
    return scene


def load_scene(path: Union[str, Path]) -> SceneFile:
    """Read and validate a scene file.

    Raises:
        OSError: The file cannot be read.
        json.JSONDecodeError: The file is not JSON.
        SceneFileError: Schema or geometry violation, naming image and field.
    """
    with open(path, encoding='utf-8') as f:
        data = json.load(f)
    scene = parse_scene(data)
    logger.info('Loaded %d images from %s', len(scene.images), path)
    return scene


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

class HeadEntry(BaseModel):
    kind: str
    params: Dict[str, Any] = {}


class MatcherSettings(BaseModel):
    cls: float = DEFAULT_MATCH_CONFIG['cls_weight']
    l1: float = DEFAULT_MATCH_CONFIG['l1_weight']
    giou: float = DEFAULT_MATCH_CONFIG['giou_weight']
    alpha: float = DEFAULT_MATCH_CONFIG['focal_alpha']
    gamma: float = DEFAULT_MATCH_CONFIG['focal_gamma']


class RunConfig(BaseModel):
    """Everything a CLI run needs; every field has a default."""
    num_levels: int = DEFAULT_NUM_LEVELS
    heads: List[HeadEntry] = [HeadEntry(kind=k) for k in DEFAULT_HEADS]
    matcher: MatcherSettings = MatcherSettings()
    lambda1: float = DEFAULT_LOSS_CONFIG['lambda1']
    lambda2: float = DEFAULT_LOSS_CONFIG['lambda2']
    encoder_inside_layer_sum: bool = True
    n_learnable: int = DEFAULT_QUERY_CONFIG['n_learnable']
    pe_dim: int = DEFAULT_QUERY_CONFIG['pe_dim']
    temperature: float = DEFAULT_QUERY_CONFIG['temperature']
    num_thresholds: int = Field(default=DEFAULT_CURVE_CONFIG['num_thresholds'], ge=2)
    curves: bool = True
    dense_targets: bool = False
    write_score_maps: bool = True
    input: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0
    threads: int = Field(default=1, ge=1)

    def head_config(self) -> HeadConfig:
        return HeadConfig.from_kinds([h.kind for h in self.heads], num_levels=self.num_levels,
                                     params=[h.params for h in self.heads])

    def match_weights(self) -> MatchWeights:
        m = self.matcher
        return MatchWeights(cls=m.cls, l1=m.l1, giou=m.giou, alpha=m.alpha, gamma=m.gamma)

    def loss_weights(self) -> LossWeights:
        return LossWeights(lambda1=self.lambda1, lambda2=self.lambda2)


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Config-file values, then non-None ``overrides`` (CLI flags) on top.

    Raises:
        ConfigError: The merged values do not form a valid configuration.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ConfigError(f'config file {path} must hold a JSON object')
    data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    try:
        config = RunConfig.model_validate(data)
        config.head_config()
        config.loss_weights()
    except ValidationError as exc:
        err = exc.errors()[0]
        where = '.'.join(str(p) for p in err['loc'])
        raise ConfigError(f'config field {where}: {err["msg"]}') from exc
    return config
