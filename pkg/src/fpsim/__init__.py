"""Structural similarity for floor plans: mIoU, normalized GED and their fusion."""

from .core import AccessGraph, CategoryMap, Edge, FloorPlan, Node, PairScore, SemanticImage, validate_floor_plan
from .extract import ExtractionParams, extract_access_graph, label_components
from .ged import canonical_key, ged_beam, ged_exact, is_isomorphic, nged
from .iou import iou_binary, miou
from .ssig import SsigParams, calibrate_gamma, ssig

__version__ = "0.1.0"

__all__ = [
    "AccessGraph", "CategoryMap", "Edge", "FloorPlan", "Node", "PairScore", "SemanticImage",
    "validate_floor_plan", "ExtractionParams", "extract_access_graph", "label_components",
    "canonical_key", "ged_beam", "ged_exact", "is_isomorphic", "nged", "iou_binary", "miou",
    "SsigParams", "calibrate_gamma", "ssig",
]
