"""Exact Shapley attribution for tree models and its aggregations."""

from .cube import AttributionCube, ModelIntegrityError, read_cube, shap_interactions, shap_matrix, tree_shap
from .loess import LoessFit, loess
from .summary import (DependenceCurve, ImportanceSummary, dependence_curve, dependence_surface,
                      interaction_heatmap, summarize_importance)

__all__ = [
    "AttributionCube", "ModelIntegrityError", "read_cube", "shap_interactions", "shap_matrix", "tree_shap",
    "LoessFit", "loess", "DependenceCurve", "ImportanceSummary", "dependence_curve", "dependence_surface",
    "interaction_heatmap", "summarize_importance",
]
