"""Desk-scale Progressive U-Net: graph, forward pass, losses."""

from .forward import ForwardResult, forward, forward_plain, shape_audit
from .graph import LayerSpec, NetSpec, TensorShape, build_spec, closed_form_parameter_count
from .losses import dice_gradient, dice_loss, loss_gradient, xe_gradient, xe_loss
from .ops import conv2d, instance_norm
from .weights import WeightSet, dump_weights, init_weights, load_weights

__all__ = [
    "ForwardResult", "LayerSpec", "NetSpec", "TensorShape", "WeightSet",
    "build_spec", "closed_form_parameter_count", "conv2d", "dice_gradient", "dice_loss",
    "dump_weights", "forward", "forward_plain", "init_weights", "instance_norm",
    "load_weights", "loss_gradient", "shape_audit", "xe_gradient", "xe_loss",
]
