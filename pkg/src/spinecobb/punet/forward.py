"""Inference-mode forward pass and whole-graph shape audit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import ops
from .graph import NetSpec
from .weights import WeightSet


@dataclass(frozen=True)
class ForwardResult:
    output: np.ndarray              # (1, H, W) probabilities
    side_outputs: tuple[np.ndarray, ...]  # progressive side maps after sigmoid, coarse first
    shapes: dict                    # layer name -> computed (C, H, W)


def forward(spec: NetSpec, weights: WeightSet, image) -> ForwardResult:
    """Evaluate the graph on one image; dropout is the identity here."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    weights.check(spec)

    values: dict[str, np.ndarray] = {}
    for index, layer in enumerate(spec.layers):
        args = [values[name] for name in layer.inputs]
        kind = layer.kind
        if kind == "input":
            out = x
        elif kind == "conv":
            w = weights[f"{layer.name}.weight"].astype(np.float64)
            b = weights[f"{layer.name}.bias"].astype(np.float64)
            if args[0].shape[0] != w.shape[1]:
                raise ShapeError(f"layer {index} ({layer.name}): {args[0].shape[0]} input channels, weight expects {w.shape[1]}")
            out = ops.conv2d(args[0], w, b)
        elif kind == "instance_norm":
            out = ops.instance_norm(
                args[0],
                weights[f"{layer.name}.gamma"].astype(np.float64),
                weights[f"{layer.name}.beta"].astype(np.float64),
            )
        elif kind == "relu":
            out = ops.relu(args[0])
        elif kind == "dropout":
            out = args[0]
        elif kind == "maxpool":
            out = ops.max_pool2(args[0])
        elif kind == "upsample":
            out = ops.upsample_nearest(args[0], int(layer.attr("factor")))
        elif kind == "concat":
            out = np.concatenate(args, axis=0)
        elif kind == "add":
            if args[0].shape != args[1].shape:
                raise ShapeError(f"layer {index} ({layer.name}): cannot add {args[0].shape} and {args[1].shape}")
            out = args[0] + args[1]
        elif kind == "sigmoid":
            out = ops.sigmoid(args[0])
        else:
            raise ShapeError(f"layer {index} ({layer.name}): unknown kind {kind!r}")
        if out.shape != layer.output.as_tuple():
            raise ShapeError(
                f"layer {index} ({layer.name}): computed shape {out.shape}, declared {layer.output.as_tuple()}"
            )
        values[layer.name] = out

    return ForwardResult(
        output=values[spec.output_name],
        side_outputs=tuple(values[n] for n in spec.side_names),
        shapes={name: v.shape for name, v in values.items()},
    )


def forward_plain(spec: NetSpec, weights: WeightSet, image) -> ForwardResult:
    """The plain U-Net: same weights, side branches removed from the graph."""
    plain = spec.plain()
    return forward(plain, weights.subset(plain), image)


def shape_audit(spec: NetSpec) -> list[dict]:
    """Per-layer table of declared shapes and parameter counts."""
    return [
        {
            "index": i,
            "name": layer.name,
            "kind": layer.kind,
            "output": list(layer.output.as_tuple()),
            "parameters": layer.parameter_count,
        }
        for i, layer in enumerate(spec.layers)
    ]
