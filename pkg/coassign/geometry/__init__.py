from coassign.geometry.boxes import (Box, CenterBox, as_boxes, box_area,
                                    convert_box, cxcywh_to_xyxy,
                                    pairwise_giou, pairwise_iou,
                                    validate_boxes, xyxy_to_cxcywh)
from coassign.geometry.coder import (DeltaTarget, LtrbTarget,
                                     boxes_from_deltas, centerness_from_ltrb,
                                     decode_deltas, deltas_from_boxes,
                                     encode_deltas, encode_ltrb,
                                     ltrb_distances)

__all__ = [
    'Box',
    'CenterBox',
    'DeltaTarget',
    'LtrbTarget',
    'as_boxes',
    'box_area',
    'boxes_from_deltas',
    'centerness_from_ltrb',
    'convert_box',
    'cxcywh_to_xyxy',
    'decode_deltas',
    'deltas_from_boxes',
    'encode_deltas',
    'encode_ltrb',
    'ltrb_distances',
    'pairwise_giou',
    'pairwise_iou',
    'validate_boxes',
    'xyxy_to_cxcywh',
]
