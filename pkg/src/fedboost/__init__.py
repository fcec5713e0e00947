"""Histogram-based gradient boosted trees with a simulated horizontal-
federated trainer and minimal-variance sampling."""

from fedboost.binning import BinnedDataset, FeatureSketch, GlobalBins, bin_dataset, build_sketch, merge_sketches
from fedboost.gbdt import Ensemble, HyperParams, Tree, best_split, leaf_weight, predict_output, predict_raw
from fedboost.kernels import BACKEND as KERNEL_BACKEND
from fedboost.losses import compute_grad_hess
from fedboost.sampling import SamplingConfig, mvs_select, regularized_gradient, uniform_select

__version__ = "0.1.0"

__all__ = [
    "BinnedDataset",
    "Ensemble",
    "FeatureSketch",
    "GlobalBins",
    "HyperParams",
    "KERNEL_BACKEND",
    "SamplingConfig",
    "Tree",
    "best_split",
    "bin_dataset",
    "build_sketch",
    "compute_grad_hess",
    "leaf_weight",
    "merge_sketches",
    "mvs_select",
    "predict_output",
    "predict_raw",
    "regularized_gradient",
    "uniform_select",
    "__version__",
]
