"""wbstudio: learned white-balance editing for sRGB images.

A shared-encoder multi-decoder network re-renders an sRGB image under
auto, tungsten and shade white-balance settings; a closed-form polynomial
color mapping carries the edit back to the original resolution; blending
in inverse-temperature space covers everything in between.
"""

from .colormap import apply_mapping, fit_mapping, poly_kernel
from .metrics import MetricReport, aggregate, delta_e_2000, mae, mse
from .model import NetConfig, WbNet, build_network, load_weights, param_count, save_weights
from .pipeline import EditRequest, EditResult, blend_temperature, edit_wb, evaluate, resize_for_net
from .synthdata import TrainExample, make_dataset, render_with_wb, sample_patches
from .tensor import Parameter, Tensor4, adam_step, grad_check
from .training import TrainConfig, desk_profile, fit, full_profile, lr_schedule

__version__ = "0.1.0"

__all__ = [
    "EditRequest", "EditResult", "MetricReport", "NetConfig", "Parameter",
    "Tensor4", "TrainConfig", "TrainExample", "WbNet", "adam_step",
    "aggregate", "apply_mapping", "blend_temperature", "build_network",
    "delta_e_2000", "desk_profile", "edit_wb", "evaluate", "fit",
    "fit_mapping", "grad_check", "load_weights", "lr_schedule", "mae",
    "full_profile", "make_dataset", "mse", "param_count", "poly_kernel",
    "render_with_wb", "resize_for_net", "sample_patches", "save_weights",
]
