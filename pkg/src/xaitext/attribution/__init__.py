from .base import AttributionVector, align_to_sequence, masked_variants
from .ig import IntegratedGradients, integrated_gradients
from .lime import DegenerateDesignError, Lime, lime_explain, weighted_ridge
from .shapley import (
    ExactShapley,
    KernelShap,
    TooManyTokensError,
    exact_shapley,
    sampled_shap,
)

EXPLAINERS = {"ig": IntegratedGradients, "shap": KernelShap, "lime": Lime}


def make_explainer(name: str, **params):
    try:
        return EXPLAINERS[name](**params)
    except KeyError:
        raise ValueError(f"unknown explainer {name!r}; expected one of {sorted(EXPLAINERS)}") from None


__all__ = [
    "AttributionVector", "DegenerateDesignError", "EXPLAINERS", "ExactShapley",
    "IntegratedGradients", "KernelShap", "Lime", "TooManyTokensError",
    "align_to_sequence", "exact_shapley", "integrated_gradients", "lime_explain",
    "make_explainer", "masked_variants", "sampled_shap", "weighted_ridge",
]
